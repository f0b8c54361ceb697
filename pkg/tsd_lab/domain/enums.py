"""Enumerations shared by schemas and the ML layer."""

from enum import Enum


class ModelFamily(str, Enum):
    """Classifier architecture families."""

    FCN = "FCN"
    LSTM = "LSTM"
    LINEAR = "LINEAR"


class Objective(str, Enum):
    """Student training objectives."""

    BASE = "BASE"
    BASE_KD = "BASE_KD"
    TSD = "TSD"


class SaliencyVariant(str, Enum):
    """How the output shift under perturbation is measured."""

    WHOLE = "WHOLE"
    BINARY = "BINARY"
    TARGET_SCALAR = "TARGET_SCALAR"


class Split(str, Enum):
    """Dataset split names."""

    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class ModelRole(str, Enum):
    """Role of a checkpoint within a run."""

    TEACHER_CANDIDATE = "teacher_candidate"
    TEACHER = "teacher"
    STUDENT = "student"


class AblationAxis(str, Enum):
    """Factors a sweep can vary."""

    TAU = "tau"
    WIDTH = "width"
    NUM_SUBSEQUENCES = "num_subsequences"
    VARIANT = "variant"
    TRAIN_FRACTION = "train_fraction"
    FGSM_EPSILON = "fgsm_epsilon"


class AttackTarget(str, Enum):
    """Which model FGSM examples are crafted against."""

    TEACHER = "teacher"
    STUDENT = "student"
