"""
tsd-lab: temporal saliency distillation for time-series classification.

Trains teacher and student classifiers on a built-in reverse-mode
differentiation core and transfers perturbation-based temporal saliency
from teacher to student.
"""

__version__ = "0.1.0"
