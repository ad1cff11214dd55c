"""Guideline-conditioned layout generation with a two-stage latent diffusion model."""

from .config import DenoiserArch, TrainConfig, VaeArch
from .guidelines import (
    WeightedGuideline,
    extract_guidelines,
    g_usage,
    sample_guidelines,
    weigh_guidelines,
)
from .layout import (
    GRID_HEIGHT,
    GRID_WIDTH,
    MAX_ELEMENTS,
    MAX_GUIDELINES,
    ClassVocabulary,
    Element,
    Guideline,
    GuidelineSet,
    Layout,
    TokenizedLayout,
    ValidationError,
    element_count_distribution,
    load_vocabulary,
    normalize_ingest,
    tokenize,
    untokenize,
)
from .synthetic import generate_synthetic_dataset

__version__ = "0.1.0"

__all__ = [
    "ClassVocabulary",
    "DenoiserArch",
    "Element",
    "GRID_HEIGHT",
    "GRID_WIDTH",
    "Guideline",
    "GuidelineSet",
    "Layout",
    "MAX_ELEMENTS",
    "MAX_GUIDELINES",
    "TokenizedLayout",
    "TrainConfig",
    "VaeArch",
    "ValidationError",
    "WeightedGuideline",
    "element_count_distribution",
    "extract_guidelines",
    "g_usage",
    "generate_synthetic_dataset",
    "load_vocabulary",
    "normalize_ingest",
    "sample_guidelines",
    "tokenize",
    "untokenize",
    "weigh_guidelines",
]
