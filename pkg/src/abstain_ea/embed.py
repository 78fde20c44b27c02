"""Numerical substrate: embedding tables, Xavier init, sparse Adam,
finite-difference gradient checks and the checkpoint container."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .forge import make_rng


class NonFiniteError(FloatingPointError):
    """A loss or gradient became NaN/Inf."""


def xavier_init(rows: int, cols: int, seed: int | np.random.Generator) -> np.ndarray:
    """Uniform Xavier/Glorot init in ``[-b, b]`` with ``b = sqrt(6 / (rows + cols))``."""
    if rows < 1 or cols < 1:
        raise ValueError(f"xavier_init needs positive dims, got ({rows}, {cols})")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


def l2_normalize_rows(table: np.ndarray, rows=None) -> None:
    """In-place L2 normalization of ``table[rows]`` (all rows by default)."""
    idx = slice(None) if rows is None else rows
    block = table[idx]
    norms = np.linalg.norm(block, axis=1, keepdims=True)
    table[idx] = block / np.maximum(norms, 1e-12)


@dataclass
class EmbeddingSpace:
    """Per-KG entity/relation tables plus the cross-KG transform."""

    ent1: np.ndarray
    ent2: np.ndarray
    rel1: np.ndarray
    rel2: np.ndarray
    transform: np.ndarray

    @classmethod
    def initialize(cls, n_ent1, n_rel1, n_ent2, n_rel2, dim, seed) -> "EmbeddingSpace":
        rng = make_rng(seed)
        space = cls(
            ent1=xavier_init(n_ent1, dim, rng),
            ent2=xavier_init(n_ent2, dim, rng),
            rel1=xavier_init(max(n_rel1, 1), dim, rng),
            rel2=xavier_init(max(n_rel2, 1), dim, rng),
            transform=xavier_init(dim, dim, rng),
        )
        l2_normalize_rows(space.ent1)
        l2_normalize_rows(space.ent2)
        return space

    @property
    def dim(self) -> int:
        return self.ent1.shape[1]

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "ent1": self.ent1,
            "ent2": self.ent2,
            "rel1": self.rel1,
            "rel2": self.rel2,
            "transform": self.transform,
        }

    def check_finite(self) -> None:
        for name, arr in self.arrays().items():
            if not np.all(np.isfinite(arr)):
                raise NonFiniteError(f"non-finite values in {name}")


@dataclass
class AdamState:
    """Adam moments for one parameter array.

    Moments and step counts are kept per row: a sparse update touches only
    the given rows and bias-corrects each with its own step count.
    """

    m: np.ndarray
    v: np.ndarray
    row_steps: np.ndarray
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0

    @classmethod
    def like(cls, param: np.ndarray, lr: float = 0.001) -> "AdamState":
        rows = param.shape[0] if param.ndim else 1
        return cls(
            m=np.zeros_like(param, dtype=np.float64),
            v=np.zeros_like(param, dtype=np.float64),
            row_steps=np.zeros(rows, dtype=np.int64),
            lr=lr,
        )


def adam_step(
    param: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    rows: np.ndarray | None = None,
) -> None:
    """Bias-corrected Adam update applied in place.

    With ``rows`` given, ``grad`` holds gradients for ``param[rows]`` only
    (``rows`` must be unique) and only those rows move.
    """
    if not np.all(np.isfinite(grad)):
        bad = np.argwhere(~np.isfinite(grad))[:5].tolist()
        raise NonFiniteError(f"non-finite gradient at {bad}")
    state.step += 1
    if param.ndim == 0:
        raise ValueError("scalar parameters must be wrapped in a 1-element array")
    if rows is None:
        if grad.shape != param.shape:
            raise ValueError(f"grad shape {grad.shape} != param shape {param.shape}")
        idx = slice(None)
        state.row_steps += 1
        t = state.row_steps.reshape((-1,) + (1,) * (param.ndim - 1))
    else:
        rows = np.asarray(rows, dtype=np.int64)
        if grad.shape != (len(rows),) + param.shape[1:]:
            raise ValueError(f"grad shape {grad.shape} does not match rows {len(rows)}")
        idx = rows
        state.row_steps[rows] += 1
        t = state.row_steps[rows].reshape((-1,) + (1,) * (param.ndim - 1))
    b1, b2 = state.beta1, state.beta2
    m = b1 * state.m[idx] + (1 - b1) * grad
    v = b2 * state.v[idx] + (1 - b2) * grad * grad
    state.m[idx] = m
    state.v[idx] = v
    m_hat = m / (1 - b1**t)
    v_hat = v / (1 - b2**t)
    param[idx] -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def accumulate_rows(ids: np.ndarray, grads: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum gradient rows sharing an index; returns ``(unique_ids, summed)``.

    Summation order is fixed (sorted by id, then input order) so repeated
    runs reduce identically.
    """
    ids = np.asarray(ids, dtype=np.int64).ravel()
    uniq, inv = np.unique(ids, return_inverse=True)
    out = np.zeros((len(uniq),) + grads.shape[1:])
    np.add.at(out, inv, grads)
    return uniq, out


def finite_diff_check(
    loss: Callable[[Mapping[str, np.ndarray]], float],
    params: Mapping[str, np.ndarray],
    analytic: Mapping[str, np.ndarray],
    h: float = 1e-5,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between central differences and analytic gradients.

    ``loss`` takes a mapping of named arrays.  Relative error per coordinate
    is ``|fd - an| / max(1e-12, |fd| + |an|)``.  With ``max_coords`` only a
    random subset of coordinates of each array is probed.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    work = {k: np.array(v, dtype=np.float64, copy=True) for k, v in params.items()}
    base = loss(work)
    if not np.isfinite(base):
        raise NonFiniteError("loss is not finite at the base point")
    worst = 0.0
    for name, arr in work.items():
        if name not in analytic:
            continue
        grad = np.asarray(analytic[name], dtype=np.float64)
        flat = arr.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = (rng or np.random.default_rng(0)).choice(
                flat.size, max_coords, replace=False
            )
        for i in coords:
            old = flat[i]
            flat[i] = old + h
            up = loss(work)
            flat[i] = old - h
            down = loss(work)
            flat[i] = old
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NonFiniteError(f"loss not finite near {name}[{i}]")
            fd = (up - down) / (2 * h)
            an = grad.reshape(-1)[i]
            err = abs(fd - an) / max(1e-12, abs(fd) + abs(an))
            worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# checkpoint container
#
# layout:  b"ABSTAINEA-CKPT\n" | u64 little-endian header length |
#          UTF-8 JSON header (sorted keys) | raw little-endian array bytes
# header:  {"format_version": 1, "meta": {...},
#           "arrays": [{"name", "dtype", "shape", "offset", "nbytes"}, ...]}
# Arrays are stored C-contiguous in the order listed; offsets are relative to
# the start of the data section.

CKPT_MAGIC = b"ABSTAINEA-CKPT\n"
CKPT_VERSION = 1


def save_checkpoint(path: str | Path, arrays: Mapping[str, np.ndarray], meta: dict) -> None:
    entries = []
    blobs = []
    offset = 0
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        dt = arr.dtype.newbyteorder("<")
        data = arr.astype(dt, copy=False).tobytes(order="C")
        entries.append(
            {
                "name": name,
                "dtype": dt.str,
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(data),
            }
        )
        blobs.append(data)
        offset += len(data)
    header = json.dumps(
        {"format_version": CKPT_VERSION, "meta": meta, "arrays": entries},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for b in blobs:
            fh.write(b)


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if not raw.startswith(CKPT_MAGIC):
        raise ValueError(f"{path}: not a checkpoint file")
    pos = len(CKPT_MAGIC)
    (hlen,) = struct.unpack_from("<Q", raw, pos)
    pos += 8
    header = json.loads(raw[pos : pos + hlen].decode("utf-8"))
    pos += hlen
    if header.get("format_version") != CKPT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {header.get('format_version')}")
    arrays = {}
    for e in header["arrays"]:
        start = pos + e["offset"]
        buf = raw[start : start + e["nbytes"]]
        arrays[e["name"]] = np.frombuffer(buf, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
    return arrays, header["meta"]
