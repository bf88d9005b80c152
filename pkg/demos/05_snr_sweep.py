"""A small Monte-Carlo sweep over SNR, written as CSV.

Uses the desk profile with fewer trials so it finishes in about a minute.
The same run is available as ``xlmimo sweep --trials 20``.
"""

import sys

from xlmimo.harness import ExperimentConfig, read_csv, run_sweep

cfg = ExperimentConfig.profile("desk").replace(trials=20, sweep_points=(-10.0, 0.0, 10.0, 20.0))
text = run_sweep(cfg)
sys.stdout.write(text)

print()
for row in read_csv(text):
    print(f"{row['sweep_value']:6.1f} dB  {row['estimator']:10s} {row['nmse_db']:7.2f} dB")
