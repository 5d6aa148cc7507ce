"""Self-describing JSON checkpoints for the three model families.

Each checkpoint records the model kind, its constructor configuration, and
every parameter array (shape plus base64-encoded little-endian float64
bytes), so a file can be reloaded without any other context.  Keys are
sorted, which makes checkpoints byte-identical across runs with the same
seed.
"""

import base64
import json

import numpy as np

from misseq.errors import ConfigError
from misseq.nn.feedforward import LinearModel, MlpModel
from misseq.nn.lstm import LstmModel

_MODEL_CLASSES = {"lstm": LstmModel, "mlp": MlpModel, "logreg": LinearModel}


def checkpoint_payload(model, extra=None):
    arrays = {}
    for name, p in model.params().items():
        arrays[name] = {
            "shape": list(p.shape),
            "dtype": "float64",
            "data": base64.b64encode(
                np.ascontiguousarray(p, dtype="<f8").tobytes()
            ).decode("ascii"),
        }
    payload = {"kind": model.kind, "config": model.config(), "params": arrays}
    if extra:
        payload["extra"] = extra
    return payload


def save_checkpoint(path, model, extra=None):
    """Write a model (plus optional metadata) to ``path`` as JSON."""
    with open(path, "w") as fh:
        json.dump(checkpoint_payload(model, extra), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path):
    """Rebuild a model from a checkpoint file; returns (model, extra)."""
    with open(path) as fh:
        payload = json.load(fh)
    kind = payload.get("kind")
    cls = _MODEL_CLASSES.get(kind)
    if cls is None:
        raise ConfigError(f"unknown checkpoint model kind {kind!r}")
    model = cls(**payload["config"])
    params = model.params()
    for name, entry in payload["params"].items():
        if name not in params:
            raise ConfigError(f"checkpoint parameter {name!r} not in model")
        raw = base64.b64decode(entry["data"])
        array = np.frombuffer(raw, dtype="<f8").reshape(entry["shape"])
        if params[name].shape != array.shape:
            raise ConfigError(
                f"checkpoint parameter {name!r} has shape {array.shape}, "
                f"model expects {params[name].shape}"
            )
        params[name][...] = array
    return model, payload.get("extra")
