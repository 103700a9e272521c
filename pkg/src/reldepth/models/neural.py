"""Feed-forward network with a softmax output, trained by mini-batch backprop."""
import numpy as np

from ._base import BaseRelativeDepthClassifier
from .linear import softmax

_ACTIVATIONS = {
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0).astype(float)),
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
    "logistic": (lambda z: 1.0 / (1.0 + np.exp(-z)), lambda z, a: a * (1.0 - a)),
    "identity": (lambda z: z, lambda z, a: np.ones_like(z)),
}


def init_params(layer_sizes, rng):
    """Glorot-uniform weights and zero biases, as a list of ``(W, b)``."""
    params = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        params.append((rng.uniform(-bound, bound, size=(fan_in, fan_out)), np.zeros(fan_out)))
    return params


def mlp_forward(params, X, activation="relu"):
    act, _ = _ACTIVATIONS[activation]
    a = X
    for W, b in params[:-1]:
        a = act(a @ W + b)
    W, b = params[-1]
    return softmax(a @ W + b)


def mlp_loss_and_grad(params, X, Y, activation="relu", l2=0.0, sample_weight=None):
    """Cross-entropy loss of the network and its gradient by backpropagation.

    The loss is the weighted mean cross-entropy plus ``l2 / 2`` times the
    squared norm of all weight matrices. Returns ``(loss, grads)`` with
    ``grads`` shaped like ``params``.
    """
    act, dact = _ACTIVATIONS[activation]
    s = np.ones(len(X)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    s = s / s.sum()

    zs, acts = [], [X]
    a = X
    for W, b in params[:-1]:
        z = a @ W + b
        a = act(z)
        zs.append(z)
        acts.append(a)
    W_out, b_out = params[-1]
    P = softmax(a @ W_out + b_out)

    loss = -np.sum(s * np.sum(Y * np.log(np.clip(P, 1e-300, None)), axis=1))
    loss += 0.5 * l2 * sum(np.sum(W * W) for W, _ in params)

    grads = [None] * len(params)
    delta = (P - Y) * s[:, None]
    for layer in range(len(params) - 1, -1, -1):
        W, _ = params[layer]
        grads[layer] = (acts[layer].T @ delta + l2 * W, delta.sum(axis=0))
        if layer > 0:
            delta = (delta @ W.T) * dact(zs[layer - 1], acts[layer])
    return loss, grads


class NeuralNetwork(BaseRelativeDepthClassifier):
    """Multi-layer perceptron classifier.

    Parameters
    ----------
    hidden_layer_sizes : tuple of int, default=(64,)
    activation : {"relu", "tanh", "logistic", "identity"}, default="relu"
    learning_rate : float, default=0.01
    epochs : int, default=200
    batch_size : int, default=32
    l2 : float, default=1e-4
    solver : {"adam", "sgd"}, default="adam"
        Update rule for the mini-batch steps.
    class_weight : None, "balanced" or dict
    random_state : int, default=0
        Seeds the weight initialisation and the per-epoch shuffling.
    """

    def __init__(
        self,
        hidden_layer_sizes=(64,),
        activation="relu",
        learning_rate=0.01,
        epochs=200,
        batch_size=32,
        l2=1e-4,
        solver="adam",
        class_weight=None,
        random_state=0,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.activation = activation
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.l2 = l2
        self.solver = solver
        self.class_weight = class_weight
        self.random_state = random_state

    def _check_params(self):
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of {sorted(_ACTIVATIONS)}, got {self.activation!r}")
        if self.solver not in ("adam", "sgd"):
            raise ValueError(f"solver must be 'adam' or 'sgd', got {self.solver!r}")
        if any(int(h) < 1 for h in self.hidden_layer_sizes):
            raise ValueError("hidden layer widths must be positive")
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1 or self.l2 < 0:
            raise ValueError("learning_rate, epochs and batch_size must be positive and l2 non-negative")

    def _fit(self, X, y, weights):
        self._check_params()
        rng = np.random.default_rng(self.random_state)
        n, n_classes = len(X), len(self.classes_)
        sizes = [X.shape[1], *(int(h) for h in self.hidden_layer_sizes), n_classes]
        params = [list(p) for p in init_params(sizes, rng)]
        Y = np.eye(n_classes)[y]

        beta1, beta2, eps = 0.9, 0.999, 1e-8
        m = [[np.zeros_like(W), np.zeros_like(b)] for W, b in params]
        v = [[np.zeros_like(W), np.zeros_like(b)] for W, b in params]
        step = 0
        self.loss_curve_ = []
        for _ in range(self.epochs):
            order = rng.permutation(n)
            epoch_loss = 0.0
            for start in range(0, n, self.batch_size):
                batch = order[start:start + self.batch_size]
                loss, grads = mlp_loss_and_grad(params, X[batch], Y[batch], self.activation, self.l2, weights[batch])
                epoch_loss += loss * len(batch)
                step += 1
                for layer, (gW, gb) in enumerate(grads):
                    for j, g in enumerate((gW, gb)):
                        if self.solver == "sgd":
                            params[layer][j] = params[layer][j] - self.learning_rate * g
                            continue
                        m[layer][j] = beta1 * m[layer][j] + (1 - beta1) * g
                        v[layer][j] = beta2 * v[layer][j] + (1 - beta2) * g * g
                        m_hat = m[layer][j] / (1 - beta1**step)
                        v_hat = v[layer][j] / (1 - beta2**step)
                        params[layer][j] = params[layer][j] - self.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
            self.loss_curve_.append(epoch_loss / n)
        self.coefs_ = [W for W, _ in params]
        self.intercepts_ = [b for _, b in params]

    def _predict_proba(self, X):
        return mlp_forward(list(zip(self.coefs_, self.intercepts_)), X, self.activation)
