"""
Distillation losses.

    total = alpha * CE + beta * KD

where KD is either the vanilla temperature-softened logit matching or the
temporal saliency matching loss.
"""

from typing import Any

import numpy as np

from tsd_lab.ml.autograd import Tensor, as_tensor, log_softmax_temperature, smooth_l1, softmax_temperature
from tsd_lab.ml.saliency.temporal import SaliencyProfile

MU_FLOOR = 1e-8


def tsd_loss(teacher_profile: SaliencyProfile, student_profile: SaliencyProfile) -> Tensor:
    """
    Smooth-L1 between mean-normalized student and teacher saliency.

    Each profile row is divided by its own per-instance mean (floored at
    1e-8). Teacher scores are constants.

    Raises:
        ValueError: Profiles built on different grids or variants
    """
    if teacher_profile.grid != student_profile.grid:
        raise ValueError("teacher and student saliency use different grids")
    if teacher_profile.variant != student_profile.variant:
        raise ValueError(
            f"saliency variants differ: {teacher_profile.variant.value} vs {student_profile.variant.value}"
        )
    teacher = teacher_profile.values
    if teacher.shape != student_profile.scores.shape:
        raise ValueError(f"profile shapes differ: {teacher.shape} vs {student_profile.scores.shape}")
    teacher_mu = np.maximum(teacher.mean(axis=-1, keepdims=True), MU_FLOOR)
    student = student_profile.scores
    student_mu = student.mean(axis=-1, keepdims=True).clamp_min(MU_FLOOR)
    return smooth_l1(student / student_mu, teacher / teacher_mu)


def base_kd_loss(teacher_logits: Any, student_logits: Any, tau: float) -> Tensor:
    """
    tau^2 * mean over the batch of KL(P_tau(teacher) || P_tau(student)).

    Raises:
        ValueError: tau <= 0 or shape mismatch
    """
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    student = as_tensor(student_logits)
    teacher = np.asarray(teacher_logits.data if isinstance(teacher_logits, Tensor) else teacher_logits, dtype=np.float64)
    if teacher.shape != student.shape:
        raise ValueError(f"teacher logits {teacher.shape} and student logits {student.shape} differ")
    p_teacher = softmax_temperature(teacher, tau).data
    log_p_teacher = log_softmax_temperature(teacher, tau).data
    # 0 * log 0 = 0
    entropy_term = np.where(p_teacher > 0, p_teacher * log_p_teacher, 0.0).sum(axis=-1)
    cross_term = (log_softmax_temperature(student, tau) * p_teacher).sum(axis=-1)
    return (entropy_term - cross_term).mean() * (tau * tau)


def total_loss(ce: Any, kd: Any, alpha: float, beta: float) -> Any:
    """alpha * ce + beta * kd (Tensors or floats)."""
    return ce * alpha + kd * beta
