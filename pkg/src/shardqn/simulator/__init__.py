from .engine import drift_statistic, is_saturated, run
from .saturation import (Probe, SaturationResult, auto_horizon, find_saturation_lambda, max_shards_by_simulation,
                         max_shards_search, probe_config, saturating_rate, saturation_search)
