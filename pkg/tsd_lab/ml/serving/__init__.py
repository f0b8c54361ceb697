"""Model serving: batched no-tape inference."""

from tsd_lab.ml.serving.inference_service import PredictionResult, predict

__all__ = ["PredictionResult", "predict"]
