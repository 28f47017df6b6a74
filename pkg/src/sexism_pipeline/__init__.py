"""Bilingual sexism identification and classification pipeline.

Per-language classifier training with optional translation augmentation,
cross-validated hyperparameter grid search, seven routed model
configurations (M1-M7), six ensemble fusion rules (E1-E6), and a full
evaluation/report suite behind a config-driven CLI.
"""

__version__ = "0.1.0"
