"""Wavelet face morphs, a differentiable morph detector and a TV-regularized iterative attack."""
from .detector import DetectorModel, load_model, save_model, train
from .geometry import LandmarkSet, load_landmarks, save_landmarks
from .image import load_image, save_image
from .metrics import ScoreSet, auc, roc, ssim
from .morph import MorphConfig, MorphResult, generate_morph
from .perturb import PerturbConfig, PerturbTrace

__version__ = "0.1.0"

__all__ = [
    "DetectorModel", "LandmarkSet", "MorphConfig", "MorphResult", "PerturbConfig", "PerturbTrace", "ScoreSet",
    "auc", "generate_morph", "load_image", "load_landmarks", "load_model", "roc", "save_image",
    "save_landmarks", "save_model", "ssim", "train",
]
