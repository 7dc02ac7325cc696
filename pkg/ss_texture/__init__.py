"""
Scale-space texture classification with combined base classifiers.

This package provides:
- Gaussian derivative (N-jet) features of small texture patches at several scales
- per-subset PCA and one base classifier (QDC, k-NN or Parzen) per subset
- one- and two-stage decision-profile combiners and decision templates
- learning-curve experiments against the CFS and MH baselines
"""

__all__ = [
    "baselines",
    "cli",
    "classifiers",
    "combiners",
    "config",
    "datasets",
    "errors",
    "export",
    "features",
    "imaging",
    "log",
    "models",
    "patching",
    "pipeline",
    "scale_space",
]
