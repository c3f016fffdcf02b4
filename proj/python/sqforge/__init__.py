"""Python bindings for the sqforge core.

Occupancy arrays are boolean, shape (R, R, R), indexed [z, y, x].
Scenes and requests may be given as dicts or JSON text.
"""

import csv
import io
import json

from . import _core
from ._core import (
    SqforgeError,
    build_corpus,
    chamfer,
    decode,
    encode,
    frechet_distance,
    roundtrip,
    voxel_iou,
)

__all__ = [
    "SqforgeError",
    "build_corpus",
    "chamfer",
    "decode",
    "encode",
    "frechet_distance",
    "generate",
    "roundtrip",
    "sample_shape",
    "sweep",
    "train_structure",
    "voxel_iou",
    "voxelize",
]


def _text(obj):
    return obj if isinstance(obj, str) else json.dumps(obj)


def sample_shape(category, seed, resolution=32):
    scene, grid = _core.sample_shape(category, seed, resolution)
    return json.loads(scene), grid


def voxelize(scene, resolution=32, normalize=True):
    return _core.voxelize(_text(scene), resolution, normalize)


def generate(checkpoint, scene, tau0, label, seed=0, appearance="", **extra):
    """Returns (structure array, result dict)."""
    request = {"scene": scene if isinstance(scene, dict) else json.loads(scene),
               "tau0": tau0, "label": label, "seed": seed, **extra}
    if appearance:
        request.setdefault("want_appearance", True)
    grid, result = _core.generate(str(checkpoint), json.dumps(request), str(appearance))
    return grid, json.loads(result)


def sweep(checkpoint, dataset, tau0s=(0, 5, 10, 15, 20, 25), seed=0, limit=0):
    """Tradeoff rows as a list of dicts with float values."""
    text = _core.sweep(str(checkpoint), str(dataset), list(tau0s), seed, limit)
    return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(io.StringIO(text))]


def train_structure(dataset, out, iterations, hidden=256, depth=4, seed=0):
    return _core.train_structure(str(dataset), str(out), iterations, hidden, depth, seed)
