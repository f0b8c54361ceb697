"""
Machine learning core of tsd-lab.

- autograd/       : Tape-based reverse-mode differentiation over numpy
- models/         : FCN, LSTM and linear classifiers, checkpoints and registry
- data/           : Labelled series collections, splits and the CBF generator
- preprocessing/  : Resampling and z-normalization
- saliency/       : Temporal saliency, attribution baselines and FGSM
- training/       : Trainer, losses and the distillation protocol
- evaluation/     : Metrics, score tables and rank/win statistics
- serving/        : Batched inference
"""

from tsd_lab.ml.models.registry import ModelRegistry
from tsd_lab.ml.serving.inference_service import predict

__all__ = ["ModelRegistry", "predict"]
