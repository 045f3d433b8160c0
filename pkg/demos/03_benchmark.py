# Small Monte-Carlo benchmark; the full one is `vbmhe bench --config configs/tracking.toml`.
import sys

from vbmhe.experiment import run_trials, tracking_filters
from vbmhe.model import Scenario

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 4

# Each trial draws a fresh trajectory; every filter sees the same data.
report = run_trials(Scenario.tracking(seed=0), tracking_filters(windows=(4, 20)), trials, master_seed=1)
print(report.table())

# RMSE against time, first rows of the CSV the CLI writes.
print("\n".join(report.rmse_csv().splitlines()[:5]))
