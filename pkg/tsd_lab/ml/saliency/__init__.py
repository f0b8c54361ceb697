"""Temporal saliency, perturbation, attribution maps and FGSM."""

from tsd_lab.ml.saliency.adversarial import fgsm_batch, fgsm_perturb
from tsd_lab.ml.saliency.attribution import (
    gradient_saliency,
    gradient_saliency_maps,
    integrated_gradients,
    integrated_gradients_maps,
    maps_frame,
    normalize_max_abs,
    occlusion_map,
    occlusion_maps,
    predict_classes,
)
from tsd_lab.ml.saliency.grid import SubsequenceGrid, make_grid
from tsd_lab.ml.saliency.perturbation import OPPOSING_CLASS_RANDOM, BackgroundSelector, perturb, perturb_grid
from tsd_lab.ml.saliency.temporal import SaliencyProfile, batch_temporal_saliency, temporal_saliency

__all__ = [
    "OPPOSING_CLASS_RANDOM",
    "BackgroundSelector",
    "SaliencyProfile",
    "SubsequenceGrid",
    "batch_temporal_saliency",
    "fgsm_batch",
    "fgsm_perturb",
    "gradient_saliency",
    "gradient_saliency_maps",
    "integrated_gradients",
    "integrated_gradients_maps",
    "make_grid",
    "maps_frame",
    "normalize_max_abs",
    "occlusion_map",
    "occlusion_maps",
    "perturb",
    "perturb_grid",
    "predict_classes",
    "temporal_saliency",
]
