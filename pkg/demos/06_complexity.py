"""Operation counts and how they grow when the dictionaries double."""

from xlmimo.harness import ExperimentConfig, complexity_formulas, complexity_report

cfg = ExperimentConfig.profile("desk")
for name, ops in complexity_formulas(cfg).items():
    print(f"{name:18s} {ops:>18,d}")
print()
print(complexity_report(cfg))
