"""Feedforward baselines: rectifier MLP and multilabel logistic regression.

Both map a fixed-width feature vector to independent per-label logistic
outputs and are trained with the same momentum SGD loop as the recurrent
model.  MLP dropout applies to hidden activations during training only.
"""

import numpy as np
from scipy.special import expit

from misseq.nn.losses import log_loss


class MlpModel:
    """Fully connected rectifier network with logistic outputs."""

    kind = "mlp"

    def __init__(self, input_size, hidden_sizes=(500, 500, 500), num_labels=1,
                 seed=0):
        self.input_size = int(input_size)
        self.hidden_sizes = tuple(int(h) for h in hidden_sizes)
        self.num_labels = int(num_labels)
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        fan_in = self.input_size
        for h in list(self.hidden_sizes) + [self.num_labels]:
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(h, fan_in)))
            self.biases.append(np.zeros(h))
            fan_in = h

    def params(self):
        out = {}
        for idx, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"layer{idx}.W"] = w
            out[f"layer{idx}.b"] = b
        return out

    def config(self):
        return {
            "input_size": self.input_size,
            "hidden_sizes": list(self.hidden_sizes),
            "num_labels": self.num_labels,
        }

    def forward(self, features, dropout_masks=None):
        """Predictions in (0, 1)^K for a (F,) vector or (B, F) matrix."""
        single = features.ndim == 1
        a = features[None] if single else features
        for idx in range(len(self.hidden_sizes)):
            a = np.maximum(0.0, a @ self.weights[idx].T + self.biases[idx])
            if dropout_masks is not None:
                a = a * dropout_masks[idx]
        preds = expit(a @ self.weights[-1].T + self.biases[-1])
        return preds[0] if single else preds

    # -- trainer protocol -------------------------------------------------

    def minibatches(self, data, batch_size, rng):
        return _matrix_minibatches(data, batch_size, rng)

    def loss_and_grads(self, batch, dropout, rng, weight_decay):
        features, labels = batch
        batch_size = features.shape[0]
        masks = None
        if dropout > 0.0:
            keep = 1.0 - dropout
            masks = [
                (rng.random((batch_size, h)) < keep) / keep
                for h in self.hidden_sizes
            ]
        activations = [features]
        a = features
        for idx in range(len(self.hidden_sizes)):
            a = np.maximum(0.0, a @ self.weights[idx].T + self.biases[idx])
            if masks is not None:
                a = a * masks[idx]
            activations.append(a)
        preds = expit(a @ self.weights[-1].T + self.biases[-1])

        objective = log_loss(preds, labels)
        grads = {}
        delta = (preds - labels) / (self.num_labels * batch_size)
        for idx in range(len(self.weights) - 1, -1, -1):
            grads[f"layer{idx}.W"] = delta.T @ activations[idx]
            grads[f"layer{idx}.b"] = delta.sum(axis=0)
            if idx > 0:
                delta = delta @ self.weights[idx]
                if masks is not None:
                    delta = delta * masks[idx - 1]
                delta = delta * (activations[idx] > 0)
        if weight_decay > 0.0:
            for idx, w in enumerate(self.weights):
                objective += 0.5 * weight_decay * float(np.sum(w * w))
                grads[f"layer{idx}.W"] += weight_decay * w
        return objective, grads

    def mean_loss(self, data):
        features, labels = data
        return log_loss(self.forward(features), labels)

    def predict(self, data):
        features = data[0] if isinstance(data, tuple) else data
        return self.forward(features)


class LinearModel:
    """Multilabel logistic regression with an optional squared-norm penalty."""

    kind = "logreg"

    def __init__(self, input_size, num_labels=1, l2_penalty=0.0, seed=0):
        self.input_size = int(input_size)
        self.num_labels = int(num_labels)
        self.l2_penalty = float(l2_penalty)
        rng = np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(self.input_size)
        self.W = rng.uniform(-bound, bound, size=(self.num_labels, self.input_size))
        self.b = np.zeros(self.num_labels)

    def params(self):
        return {"W": self.W, "b": self.b}

    def config(self):
        return {
            "input_size": self.input_size,
            "num_labels": self.num_labels,
            "l2_penalty": self.l2_penalty,
        }

    def forward(self, features):
        single = features.ndim == 1
        x = features[None] if single else features
        preds = expit(x @ self.W.T + self.b)
        return preds[0] if single else preds

    # -- trainer protocol -------------------------------------------------

    def minibatches(self, data, batch_size, rng):
        return _matrix_minibatches(data, batch_size, rng)

    def loss_and_grads(self, batch, dropout, rng, weight_decay):
        features, labels = batch
        batch_size = features.shape[0]
        preds = expit(features @ self.W.T + self.b)
        objective = log_loss(preds, labels)
        delta = (preds - labels) / (self.num_labels * batch_size)
        grads = {"W": delta.T @ features, "b": delta.sum(axis=0)}
        decay = weight_decay + self.l2_penalty
        if decay > 0.0:
            objective += 0.5 * decay * float(np.sum(self.W * self.W))
            grads["W"] += decay * self.W
        return objective, grads

    def mean_loss(self, data):
        features, labels = data
        return log_loss(self.forward(features), labels)

    def predict(self, data):
        features = data[0] if isinstance(data, tuple) else data
        return self.forward(features)


def _matrix_minibatches(data, batch_size, rng):
    features, labels = data
    order = rng.permutation(features.shape[0])
    return [
        (features[order[start:start + batch_size]],
         labels[order[start:start + batch_size]])
        for start in range(0, features.shape[0], batch_size)
    ]
