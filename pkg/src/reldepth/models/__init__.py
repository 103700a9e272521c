"""The four classifiers behind one fit/predict/persist contract."""
import enum

from ._base import SchemaMismatchError
from .linear import LogisticRegression, softmax_loss_and_grad
from .neural import NeuralNetwork, mlp_loss_and_grad
from .persistence import ModelFormatError, load_model, save_model
from .tree import DecisionTree, RandomForest


class ClassifierKind(str, enum.Enum):
    DECISION_TREE = "dt"
    RANDOM_FOREST = "rf"
    LOGISTIC_REGRESSION = "lr"
    NEURAL_NETWORK = "nn"

    @classmethod
    def parse(cls, value) -> "ClassifierKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for kind in cls:
            if key in (kind.value, kind.name.lower(), kind.estimator_class.__name__.lower()):
                return kind
        raise ValueError(f"unknown classifier {value!r}; expected one of dt, rf, lr, nn")

    @property
    def estimator_class(self):
        return _CLASSES[self]

    @property
    def abbreviation(self) -> str:
        return self.value.upper()


_CLASSES = {
    ClassifierKind.DECISION_TREE: DecisionTree,
    ClassifierKind.RANDOM_FOREST: RandomForest,
    ClassifierKind.LOGISTIC_REGRESSION: LogisticRegression,
    ClassifierKind.NEURAL_NETWORK: NeuralNetwork,
}


def make_classifier(kind, **params):
    """Instantiate the classifier for ``kind`` with hyperparameter overrides."""
    return ClassifierKind.parse(kind).estimator_class(**params)


__all__ = [
    "ClassifierKind",
    "DecisionTree",
    "LogisticRegression",
    "ModelFormatError",
    "NeuralNetwork",
    "RandomForest",
    "SchemaMismatchError",
    "load_model",
    "make_classifier",
    "mlp_loss_and_grad",
    "save_model",
    "softmax_loss_and_grad",
]
