"""Multinomial (softmax) logistic regression trained by full-batch gradient descent."""
import numpy as np

from ._base import BaseRelativeDepthClassifier


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_loss_and_grad(W, b, X, Y, l2=0.0, sample_weight=None):
    """Weighted mean cross-entropy plus ``l2 / 2 * ||W||^2`` and its gradient.

    Parameters
    ----------
    W : ndarray of shape (n_features, n_classes)
    b : ndarray of shape (n_classes,)
    X : ndarray of shape (n_samples, n_features)
    Y : ndarray of shape (n_samples, n_classes)
        One-hot targets.
    l2 : float
        Ridge strength on ``W`` (the bias is not penalised).
    sample_weight : ndarray of shape (n_samples,), optional

    Returns
    -------
    loss : float
    grad_W : ndarray like ``W``
    grad_b : ndarray like ``b``
    """
    s = np.ones(len(X)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    s = s / s.sum()
    P = softmax(X @ W + b)
    logp = np.log(np.clip(P, 1e-300, None))
    loss = -np.sum(s * np.sum(Y * logp, axis=1)) + 0.5 * l2 * np.sum(W * W)
    delta = (P - Y) * s[:, None]
    return loss, X.T @ delta + l2 * W, delta.sum(axis=0)


class LogisticRegression(BaseRelativeDepthClassifier):
    """Softmax regression with L2 penalty.

    Weights start at zero, so training is deterministic; ``random_state``
    is kept only for a uniform hyperparameter interface.
    """

    def __init__(self, learning_rate=0.1, epochs=500, l2=1e-4, class_weight=None, random_state=0):
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.l2 = l2
        self.class_weight = class_weight
        self.random_state = random_state

    def _fit(self, X, y, weights):
        if self.learning_rate <= 0 or self.epochs < 1 or self.l2 < 0:
            raise ValueError("learning_rate and epochs must be positive and l2 non-negative")
        n_classes = len(self.classes_)
        Y = np.eye(n_classes)[y]
        W = np.zeros((X.shape[1], n_classes))
        b = np.zeros(n_classes)
        self.loss_curve_ = []
        for _ in range(self.epochs):
            loss, gW, gb = softmax_loss_and_grad(W, b, X, Y, self.l2, weights)
            W -= self.learning_rate * gW
            b -= self.learning_rate * gb
            self.loss_curve_.append(loss)
        self.coef_ = W
        self.intercept_ = b

    def decision_function(self, X):
        X = self._validate_predict(X)
        return X @ self.coef_ + self.intercept_

    def _predict_proba(self, X):
        return softmax(X @ self.coef_ + self.intercept_)
