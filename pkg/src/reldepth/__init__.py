"""Relative depth of object pairs in a single image from bounding-box, label,
perceptual and scene features."""

__version__ = "0.1.0"

from .dataset import (  # noqa: E402
    BEHIND,
    CLASSES,
    EQUAL,
    IN_FRONT,
    AnnotationError,
    ImageRecord,
    ObjectAnnotation,
    PairInstance,
    build_pairs,
    class_distribution,
    derive_class,
    parse_annotations,
)
from .encoding import FeatureGroup, FeatureMatrix, PairFeatureExtractor, Standardizer  # noqa: E402
from .evaluation import ExperimentSpec, run_experiment, run_grid, stratified_kfold  # noqa: E402
from .geometry import BoundingBox, ImageDims, extract_geometric_features  # noqa: E402
from .models import (  # noqa: E402
    ClassifierKind,
    DecisionTree,
    LogisticRegression,
    NeuralNetwork,
    RandomForest,
    load_model,
    make_classifier,
    save_model,
)

__all__ = [
    "AnnotationError",
    "BEHIND",
    "BoundingBox",
    "CLASSES",
    "ClassifierKind",
    "DecisionTree",
    "EQUAL",
    "ExperimentSpec",
    "FeatureGroup",
    "FeatureMatrix",
    "IN_FRONT",
    "ImageDims",
    "ImageRecord",
    "LogisticRegression",
    "NeuralNetwork",
    "ObjectAnnotation",
    "PairFeatureExtractor",
    "PairInstance",
    "RandomForest",
    "Standardizer",
    "build_pairs",
    "class_distribution",
    "derive_class",
    "extract_geometric_features",
    "load_model",
    "make_classifier",
    "parse_annotations",
    "run_experiment",
    "run_grid",
    "save_model",
    "stratified_kfold",
]
