"""netrca: root-cause localization for network KPI telemetry.

Pipeline stages: synthetic data generation, feature derivation, label
augmentation, per-cause boosted-tree classification, rule mining,
attribution scoring, causal-graph ranking, ensemble decision, scoring.
"""

__version__ = "0.1.0"
