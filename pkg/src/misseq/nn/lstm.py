"""Stacked LSTM classifier with replicated per-step targets.

Memory cells use input, forget, and output gates without peephole
connections.  One layer's update, with x_t the layer input and h, s the
hidden and cell states:

    g = tanh(W_gx x_t + W_gh h_prev + b_g)      candidate
    i = sigmoid(W_ix x_t + W_ih h_prev + b_i)   input gate
    f = sigmoid(W_fx x_t + W_fh h_prev + b_f)   forget gate
    o = sigmoid(W_ox x_t + W_oh h_prev + b_o)   output gate
    s = g * i + s_prev * f
    h = tanh(s) * o

The top layer feeds a dense layer with element-wise logistic outputs, one
prediction per step.  Gradients are computed by exact reverse-mode
differentiation unrolled over the sequence.  Dropout is non-recurrent: it
applies only to layer outputs feeding upward, never to the h -> h
recurrence, and is disabled at inference.
"""

import numpy as np
from scipy.special import expit

from misseq.nn.losses import sequence_loss

GATES = ("g", "i", "f", "o")


class LstmModel:
    """Parameter container plus forward/backward for the stacked LSTM."""

    kind = "lstm"

    def __init__(self, input_size, hidden_sizes=(128, 128), num_labels=1,
                 alpha=0.5, seed=0):
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        self.input_size = int(input_size)
        self.hidden_sizes = tuple(int(h) for h in hidden_sizes)
        self.num_labels = int(num_labels)
        self.alpha = float(alpha)
        rng = np.random.default_rng(seed)
        self.layers = []
        fan_in = self.input_size
        for h in self.hidden_sizes:
            layer = {}
            for gate in GATES:
                layer[f"W_{gate}x"] = _uniform_init(rng, (h, fan_in))
                layer[f"W_{gate}h"] = _uniform_init(rng, (h, h))
                layer[f"b_{gate}"] = np.zeros(h)
            layer["b_f"][:] = 1.0  # open forget gates at the start of training
            self.layers.append(layer)
            fan_in = h
        self.W_out = _uniform_init(rng, (self.num_labels, fan_in))
        self.b_out = np.zeros(self.num_labels)

    def params(self):
        """Named views of every parameter array (updated in place)."""
        out = {}
        for idx, layer in enumerate(self.layers):
            for name, array in layer.items():
                out[f"layer{idx}.{name}"] = array
        out["out.W"] = self.W_out
        out["out.b"] = self.b_out
        return out

    def config(self):
        return {
            "input_size": self.input_size,
            "hidden_sizes": list(self.hidden_sizes),
            "num_labels": self.num_labels,
            "alpha": self.alpha,
        }

    # -- trainer protocol -------------------------------------------------

    def minibatches(self, sequences, batch_size, rng):
        """Bucket sequences by length so each batch shares one T."""
        by_length = {}
        for seq in sequences:
            by_length.setdefault(seq.num_steps, []).append(seq)
        batches = []
        for length in sorted(by_length):
            group = by_length[length]
            order = rng.permutation(len(group))
            for start in range(0, len(group), batch_size):
                chunk = [group[i] for i in order[start:start + batch_size]]
                batches.append(_stack_batch(chunk))
        order = rng.permutation(len(batches))
        return [batches[i] for i in order]

    def loss_and_grads(self, batch, dropout, rng, weight_decay):
        inputs, labels = batch
        masks = None
        if dropout > 0.0:
            masks = make_dropout_masks(
                self.hidden_sizes, inputs.shape[1], inputs.shape[0], dropout, rng
            )
        return lstm_backward(self, inputs, labels, dropout_masks=masks,
                             weight_decay=weight_decay)

    def mean_loss(self, sequences):
        """Dropout-free mean sequence loss over a dataset."""
        total = 0.0
        for inputs, labels in _bucket_all(sequences):
            preds = lstm_forward(self, inputs)
            total += sequence_loss(preds, labels, self.alpha) * inputs.shape[0]
        return total / len(sequences)

    def predict(self, sequences):
        """Final-step predictions, one row per sequence, dropout off."""
        out = np.empty((len(sequences), self.num_labels))
        for batch_idx, (inputs, _) in _bucket_all_indexed(sequences):
            preds = lstm_forward(self, inputs)
            out[batch_idx] = preds[:, -1, :]
        return out


def lstm_cell_step(x_t, h_prev, s_prev, layer):
    """Advance one layer by one step; returns the new (h, s).

    Accepts single vectors or batched (B, .) arrays.
    """
    g = np.tanh(x_t @ layer["W_gx"].T + h_prev @ layer["W_gh"].T + layer["b_g"])
    i = expit(x_t @ layer["W_ix"].T + h_prev @ layer["W_ih"].T + layer["b_i"])
    f = expit(x_t @ layer["W_fx"].T + h_prev @ layer["W_fh"].T + layer["b_f"])
    o = expit(x_t @ layer["W_ox"].T + h_prev @ layer["W_oh"].T + layer["b_o"])
    s = g * i + s_prev * f
    h = np.tanh(s) * o
    return h, s


def lstm_forward(model, inputs, dropout_masks=None):
    """Per-step predictions in (0, 1)^K for every step of the sequence.

    ``inputs`` is (T, D) for one sequence or (B, T, D) for a batch of
    equal-length sequences; the result matches ((T, K) or (B, T, K)).
    ``dropout_masks`` holds pre-scaled masks per layer, shape (B, T, H),
    applied to that layer's output feeding upward; omit them at inference.
    """
    single = inputs.ndim == 2
    preds, _ = _forward_cached(model, inputs[None] if single else inputs,
                               dropout_masks)
    return preds[0] if single else preds


def make_dropout_masks(hidden_sizes, num_steps, batch_size, rate, rng):
    """Inverted-dropout masks (entries 0 or 1/(1-rate)) per layer output."""
    keep = 1.0 - rate
    return [
        (rng.random((batch_size, num_steps, h)) < keep) / keep
        for h in hidden_sizes
    ]


def lstm_backward(model, inputs, labels, dropout_masks=None, weight_decay=0.0):
    """Objective value and exact gradients for every parameter.

    The objective is the batch-mean replicated-target sequence loss plus
    0.5 * weight_decay * sum of squared weight-matrix entries (biases are
    not decayed).  ``inputs`` is (B, T, D); ``labels`` is (B, K).
    """
    single = inputs.ndim == 2
    if single:
        inputs = inputs[None]
        labels = np.asarray(labels)[None]
    preds, cache = _forward_cached(model, inputs, dropout_masks)
    batch, num_steps, k = preds.shape
    alpha = model.alpha

    objective = sequence_loss(preds, labels, alpha)

    grads = {name: np.zeros_like(p) for name, p in model.params().items()}

    # d objective / d output logits, folding in the per-step loss weights
    step_weight = np.full(num_steps, alpha / num_steps)
    step_weight[-1] += 1.0 - alpha
    dlogits = (preds - labels[:, None, :]) * step_weight[None, :, None]
    dlogits /= k * batch

    top = cache["dropped"][-1]  # (B, T, H_top), already through dropout
    grads["out.W"] += np.einsum("btk,bth->kh", dlogits, top)
    grads["out.b"] += dlogits.sum(axis=(0, 1))
    dh_up = np.einsum("btk,kh->bth", dlogits, model.W_out)
    if dropout_masks is not None:
        dh_up = dh_up * dropout_masks[-1]

    for layer_idx in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[layer_idx]
        layer_cache = cache["layers"][layer_idx]
        layer_inputs = cache["inputs"][layer_idx]  # (B, T, fan_in)
        g, i, f, o, s, h, tanh_s = (
            layer_cache[key] for key in ("g", "i", "f", "o", "s", "h", "tanh_s")
        )
        hidden = h.shape[-1]
        dx = np.empty_like(layer_inputs)
        dh_next = np.zeros((batch, hidden))
        ds_next = np.zeros((batch, hidden))
        prefix = f"layer{layer_idx}."
        for t in range(num_steps - 1, -1, -1):
            dh = dh_up[:, t] + dh_next
            do = dh * tanh_s[:, t]
            ds = dh * o[:, t] * (1.0 - tanh_s[:, t] ** 2) + ds_next
            s_prev = s[:, t - 1] if t > 0 else np.zeros((batch, hidden))
            h_prev = h[:, t - 1] if t > 0 else np.zeros((batch, hidden))
            dg = ds * i[:, t]
            di = ds * g[:, t]
            df = ds * s_prev
            ds_next = ds * f[:, t]

            dz = {
                "g": dg * (1.0 - g[:, t] ** 2),
                "i": di * i[:, t] * (1.0 - i[:, t]),
                "f": df * f[:, t] * (1.0 - f[:, t]),
                "o": do * o[:, t] * (1.0 - o[:, t]),
            }
            x_t = layer_inputs[:, t]
            dx_t = np.zeros_like(x_t)
            dh_next = np.zeros((batch, hidden))
            for gate in GATES:
                dzg = dz[gate]
                grads[prefix + f"W_{gate}x"] += dzg.T @ x_t
                grads[prefix + f"W_{gate}h"] += dzg.T @ h_prev
                grads[prefix + f"b_{gate}"] += dzg.sum(axis=0)
                dx_t += dzg @ layer[f"W_{gate}x"]
                dh_next += dzg @ layer[f"W_{gate}h"]
            dx[:, t] = dx_t
        if layer_idx > 0:
            dh_up = dx
            if dropout_masks is not None:
                dh_up = dh_up * dropout_masks[layer_idx - 1]

    if weight_decay > 0.0:
        for name, p in model.params().items():
            if p.ndim >= 2:
                objective += 0.5 * weight_decay * float(np.sum(p * p))
                grads[name] += weight_decay * p
    return objective, grads


def lstm_objective(model, inputs, labels, dropout_masks=None, weight_decay=0.0):
    """Forward-only evaluation of the training objective (for gradient checks)."""
    single = inputs.ndim == 2
    preds, _ = _forward_cached(model, inputs[None] if single else inputs,
                               dropout_masks)
    labels_b = np.asarray(labels)[None] if single else labels
    objective = sequence_loss(preds, labels_b, model.alpha)
    if weight_decay > 0.0:
        for p in model.params().values():
            if p.ndim >= 2:
                objective += 0.5 * weight_decay * float(np.sum(p * p))
    return objective


def _forward_cached(model, inputs, dropout_masks):
    batch, num_steps, _ = inputs.shape
    layer_inputs = []
    layer_caches = []
    dropped = []
    current = inputs
    for layer_idx, layer in enumerate(model.layers):
        hidden = model.hidden_sizes[layer_idx]
        g = np.empty((batch, num_steps, hidden))
        i = np.empty_like(g)
        f = np.empty_like(g)
        o = np.empty_like(g)
        s = np.empty_like(g)
        h = np.empty_like(g)
        h_prev = np.zeros((batch, hidden))
        s_prev = np.zeros((batch, hidden))
        for t in range(num_steps):
            x_t = current[:, t]
            g[:, t] = np.tanh(x_t @ layer["W_gx"].T + h_prev @ layer["W_gh"].T
                              + layer["b_g"])
            i[:, t] = expit(x_t @ layer["W_ix"].T + h_prev @ layer["W_ih"].T
                            + layer["b_i"])
            f[:, t] = expit(x_t @ layer["W_fx"].T + h_prev @ layer["W_fh"].T
                            + layer["b_f"])
            o[:, t] = expit(x_t @ layer["W_ox"].T + h_prev @ layer["W_oh"].T
                            + layer["b_o"])
            s[:, t] = g[:, t] * i[:, t] + s_prev * f[:, t]
            tanh_st = np.tanh(s[:, t])
            h[:, t] = tanh_st * o[:, t]
            h_prev = h[:, t]
            s_prev = s[:, t]
        tanh_s = np.tanh(s)
        layer_inputs.append(current)
        layer_caches.append(
            {"g": g, "i": i, "f": f, "o": o, "s": s, "h": h, "tanh_s": tanh_s}
        )
        out = h
        if dropout_masks is not None:
            out = out * dropout_masks[layer_idx]
        dropped.append(out)
        current = out
    logits = current @ model.W_out.T + model.b_out
    preds = expit(logits)
    cache = {"inputs": layer_inputs, "layers": layer_caches, "dropped": dropped}
    return preds, cache


def _uniform_init(rng, shape):
    bound = 1.0 / np.sqrt(shape[-1])
    return rng.uniform(-bound, bound, size=shape)


def _stack_batch(sequences):
    inputs = np.stack([seq.inputs for seq in sequences])
    labels = np.stack([seq.labels for seq in sequences])
    return inputs, labels


def _bucket_all(sequences):
    for _, batch in _bucket_all_indexed(sequences):
        yield batch


def _bucket_all_indexed(sequences):
    by_length = {}
    for idx, seq in enumerate(sequences):
        by_length.setdefault(seq.num_steps, []).append(idx)
    for length in sorted(by_length):
        idx = by_length[length]
        yield idx, _stack_batch([sequences[i] for i in idx])
