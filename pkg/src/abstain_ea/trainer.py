"""Multi-task training: alignment and dangling-detection batches alternate.

One training step runs one alignment batch and then one dangling batch.
The transformed-NN cache and the truncated negative pools are refreshed
every ``cache_period`` epochs.  Validation runs every ``eval_every`` epochs
(consolidated F1 with a detector, Hits@1 without) and the best parameters
are retained; training stops after ``patience`` evaluations without
improvement.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .aligners import (
    AggAlignConfig,
    MTransEConfig,
    agg_align_loss,
    aggregation_matrix,
    corrupt_triples,
    encode,
    encode_backward,
    mtranse_align_loss,
    mtranse_triple_loss,
    sample_from_pools,
    truncated_pools,
)
from .detect import (
    BrConfig,
    MrConfig,
    NncParams,
    br_loss,
    detect,
    label_weights,
    mr_loss,
    nnc_loss,
)
from .embed import (
    AdamState,
    EmbeddingSpace,
    NonFiniteError,
    accumulate_rows,
    adam_step,
    l2_normalize_rows,
    load_checkpoint,
    save_checkpoint,
    xavier_init,
)
from .evaluate import consolidated_eval, relaxed_eval
from .forge import make_rng
from .kg import AlignmentStore, KnowledgeGraph
from .nnindex import NnCache, refresh_cache

logger = logging.getLogger(__name__)

ALIGNERS = ("mtranse", "aggalign")
DETECTORS = ("none", "nnc", "mr", "br")


class ConfigError(ValueError):
    pass


class ConfigRangeWarning(UserWarning):
    """A hyper-parameter lies outside the ranges explored in the reference setup."""


class TrainingDiverged(RuntimeError):
    def __init__(self, message, checkpoint):
        super().__init__(message)
        self.checkpoint = checkpoint


@dataclass
class TrainConfig:
    aligner: str = "mtranse"
    detector: str = "none"
    dim: int = 128
    lr: float = 0.0  # 0 selects the aligner default
    batch_size: int = 1024
    dangling_batch_size: int = 1024
    max_epochs: int = 200
    eval_every: int = 5
    patience: int = 3
    cache_period: int = 10
    seed: int = 0
    workers: int = 1
    # MTransE
    triple_margin: float = 1.0
    norm: str = "L2"
    align_weight: float = 1.0
    neg_count: int = 10
    neg_epsilon: float = 0.9
    # AggAlign
    agg_margin: float = 1.4
    # detectors
    mr_margin: float = 0.0  # 0 selects the aligner default
    br_samples: int = 20
    br_alpha: float = 0.01
    br_threshold: str = "eval"  # "eval" (evaluated set mean) or "train"
    nnc_hidden: int = 0  # 0 means hidden width = dim
    nnc_train_embeddings: bool = False
    normalize: bool = True
    k_csls: int = 10

    def resolved(self) -> "TrainConfig":
        cfg = dataclasses.replace(self)
        if cfg.lr == 0.0:
            cfg.lr = 0.001 if cfg.aligner == "mtranse" else 0.0005
        if cfg.mr_margin == 0.0:
            cfg.mr_margin = 0.9 if cfg.aligner == "mtranse" else 0.2
        if cfg.nnc_hidden == 0:
            cfg.nnc_hidden = cfg.dim
        return cfg

    def validate(self) -> list[str]:
        """Raise on invalid values; return (and warn about) out-of-range ones."""
        if self.aligner not in ALIGNERS:
            raise ConfigError(f"aligner must be one of {ALIGNERS}, got {self.aligner!r}")
        if self.detector not in DETECTORS:
            raise ConfigError(f"detector must be one of {DETECTORS}, got {self.detector!r}")
        if self.norm not in ("L1", "L2"):
            raise ConfigError(f"norm must be L1 or L2, got {self.norm!r}")
        if self.br_threshold not in ("eval", "train"):
            raise ConfigError("br_threshold must be 'eval' or 'train'")
        for name in (
            "dim", "batch_size", "dangling_batch_size", "max_epochs", "eval_every",
            "patience", "cache_period", "workers", "neg_count", "br_samples", "k_csls",
        ):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("lr", "triple_margin", "align_weight", "agg_margin", "mr_margin"):
            if getattr(self, name) < 0 or not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be a non-negative finite number")
        if not 0.0 < self.neg_epsilon <= 1.0:
            raise ConfigError("neg_epsilon must be in (0, 1]")
        if self.br_alpha < 0:
            raise ConfigError("br_alpha must be >= 0")
        cfg = self.resolved()
        notes = []
        for name, lo, hi in APPENDIX_RANGES:
            val = getattr(cfg, name)
            if name == "mr_margin" and cfg.detector != "mr":
                continue
            if name == "br_samples" and cfg.detector != "br":
                continue
            if not lo <= val <= hi:
                notes.append(f"{name}={val} outside explored range [{lo}, {hi}]")
        for note in notes:
            warnings.warn(note, ConfigRangeWarning, stacklevel=2)
        return notes

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# (key, low, high) from the hyper-parameter grid of the reference experiments
APPENDIX_RANGES = (
    ("lr", 0.0001, 0.001),
    ("dim", 64, 512),
    ("batch_size", 4096, 102400),
    ("br_samples", 1, 50),
    ("mr_margin", 0.1, 1.0),
)


def paper_scale(aligner: str = "mtranse") -> dict:
    """Overrides reproducing the reference full-scale hyper-parameters."""
    if aligner == "mtranse":
        return dict(dim=128, lr=0.001, mr_margin=0.9, br_samples=20, br_alpha=0.01,
                    batch_size=20480, cache_period=10)
    return dict(dim=256, lr=0.0005, mr_margin=0.2, br_samples=20, br_alpha=0.01,
                agg_margin=1.4, batch_size=8192, cache_period=10)


def _coerce(value: str, typ):
    typ = typ if isinstance(typ, type) else {"int": int, "float": float, "bool": bool, "str": str}[typ]
    if typ is bool:
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {value!r}")
    try:
        return typ(value.strip())
    except ValueError:
        raise ConfigError(f"cannot parse {value!r} as {typ.__name__}") from None


def config_types() -> dict:
    return {f.name: f.type for f in fields(TrainConfig)}


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    types = config_types()
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _coerce(value, types[key])
    return out


def load_config(path: str | Path | None = None, **overrides) -> TrainConfig:
    values = parse_config_text(Path(path).read_text(encoding="utf-8")) if path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig(**values)


def dump_config(cfg: TrainConfig) -> str:
    lines = [f"{k} = {v}" for k, v in cfg.to_dict().items()]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# model state


@dataclass
class Model:
    """Trainable state plus the graphs it was built for."""

    kg1: KnowledgeGraph
    kg2: KnowledgeGraph
    cfg: TrainConfig
    params: dict[str, np.ndarray]
    extra: dict = field(default_factory=dict)  # scalars, e.g. BR training threshold
    _agg: tuple | None = field(default=None, repr=False)

    @classmethod
    def initialize(cls, kg1, kg2, cfg: TrainConfig) -> "Model":
        cfg = cfg.resolved()
        rng = make_rng(cfg.seed)
        space = EmbeddingSpace.initialize(
            kg1.num_entities, kg1.num_relations, kg2.num_entities, kg2.num_relations,
            cfg.dim, rng,
        )
        params = space.arrays()
        if cfg.aligner == "aggalign":
            params["transform"] = np.eye(cfg.dim)
            params["w_self"] = xavier_init(cfg.dim, cfg.dim, rng)
            params["w_nbr"] = xavier_init(cfg.dim, cfg.dim, rng)
        if cfg.detector == "nnc":
            nnc = NncParams.initialize(cfg.dim, cfg.nnc_hidden, rng)
            params.update({f"nnc_{k}": v for k, v in nnc.arrays().items()})
        return cls(kg1, kg2, cfg, params)

    @property
    def agg(self):
        if self._agg is None:
            self._agg = (aggregation_matrix(self.kg1), aggregation_matrix(self.kg2))
        return self._agg

    @property
    def space(self) -> EmbeddingSpace:
        p = self.params
        return EmbeddingSpace(p["ent1"], p["ent2"], p["rel1"], p["rel2"], p["transform"])

    def nnc(self) -> NncParams | None:
        if "nnc_w1" not in self.params:
            return None
        p = self.params
        return NncParams(p["nnc_w1"], p["nnc_b1"], p["nnc_w2"], p["nnc_b2"],
                         self.extra.get("nnc_w0", 1.0), self.extra.get("nnc_w1", 1.0))

    def source_vectors(self, ids=None) -> np.ndarray:
        """Source entities mapped into the target space."""
        p = self.params
        if self.cfg.aligner == "aggalign":
            ids = np.arange(self.kg1.num_entities) if ids is None else ids
            out, _ = encode(p["ent1"], self.agg[0], ids, p["w_self"], p["w_nbr"])
            return out
        x = p["ent1"] if ids is None else p["ent1"][ids]
        return x @ p["transform"].T

    def target_vectors(self, ids=None) -> np.ndarray:
        p = self.params
        if self.cfg.aligner == "aggalign":
            ids = np.arange(self.kg2.num_entities) if ids is None else ids
            out, _ = encode(p["ent2"], self.agg[1], ids, p["w_self"], p["w_nbr"])
            return out
        return p["ent2"] if ids is None else p["ent2"][ids]

    def snapshot(self) -> "Model":
        return Model(self.kg1, self.kg2, self.cfg,
                     {k: v.copy() for k, v in self.params.items()},
                     dict(self.extra), self._agg)

    def detect(self, entities, workers: int = 1):
        cfg = self.cfg
        if cfg.detector == "none":
            raise ValueError("model has no dangling detector")
        thr = None
        if cfg.detector == "br" and cfg.br_threshold == "train":
            thr = self.extra.get("br_train_threshold")
        return detect(
            entities, cfg.detector, self.source_vectors(), self.target_vectors(),
            nnc=self.nnc(), mr=MrConfig(cfg.mr_margin), br_threshold=thr, workers=workers,
        )


def save_model(path: str | Path, model: Model, meta: dict | None = None) -> None:
    info = {
        "tool_version": __version__,
        "config": model.cfg.to_dict(),
        "extra": model.extra,
        "kg1": {"entities": model.kg1.num_entities, "relations": model.kg1.num_relations},
        "kg2": {"entities": model.kg2.num_entities, "relations": model.kg2.num_relations},
    }
    info.update(meta or {})
    save_checkpoint(path, model.params, info)


def load_model(path: str | Path, kg1: KnowledgeGraph, kg2: KnowledgeGraph) -> Model:
    arrays, meta = load_checkpoint(path)
    cfg = TrainConfig(**meta["config"])
    if arrays["ent1"].shape[0] != kg1.num_entities or arrays["ent2"].shape[0] != kg2.num_entities:
        raise ValueError("checkpoint does not match the dataset's entity counts")
    return Model(kg1, kg2, cfg, arrays, dict(meta.get("extra", {})))


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainResult:
    model: Model  # best-validation parameters
    log: list[dict]
    best_epoch: int
    best_val: float
    val_metric: str


class _Stream:
    """Endless shuffled stream over a fixed item set (reshuffles on wrap)."""

    def __init__(self, items: np.ndarray, rng):
        self.items = items
        self.rng = rng
        self.order = rng.permutation(len(items))
        self.pos = 0

    def take(self, n: int) -> np.ndarray:
        out = []
        while n > 0:
            if self.pos >= len(self.order):
                self.order = self.rng.permutation(len(self.items))
                self.pos = 0
            chunk = self.order[self.pos : self.pos + n]
            self.pos += len(chunk)
            n -= len(chunk)
            out.append(chunk)
        return self.items[np.concatenate(out)]


class Trainer:
    def __init__(self, kg1, kg2, store: AlignmentStore, cfg: TrainConfig):
        cfg.validate()
        self.cfg = cfg.resolved()
        self.kg1, self.kg2, self.store = kg1, kg2, store
        self.model = Model.initialize(kg1, kg2, self.cfg)
        self.rng = make_rng(self.cfg.seed + 7919)
        self.states = {k: AdamState.like(v, self.cfg.lr) for k, v in self.model.params.items()}
        self.train_pairs = store.pairs_in("train")
        self.train_dangling = store.dangling_source_in("train")
        if len(self.train_pairs) == 0:
            raise ConfigError("dataset has no training alignment pairs")
        if self.cfg.detector != "none" and len(self.train_dangling) == 0:
            raise ConfigError("detector training needs labeled dangling training entities")
        self.cache: NnCache | None = None
        self.pools1 = self.pools2 = None
        if self.cfg.detector == "nnc":
            labels = np.r_[np.ones(len(self.train_dangling)), np.zeros(len(self.train_pairs))]
            w0, w1 = label_weights(labels)
            self.model.extra.update(nnc_w0=w0, nnc_w1=w1)
            items = np.stack([np.r_[self.train_dangling, self.train_pairs[:, 0]], labels.astype(np.int64)], axis=1)
            self.dangling_stream = _Stream(items, self.rng)
        elif self.cfg.detector != "none":
            self.dangling_stream = _Stream(self.train_dangling, self.rng)

    # -- helpers -----------------------------------------------------------

    def _update(self, name, grad, rows=None):
        adam_step(self.model.params[name], grad, self.states[name], rows)

    def _update_rows(self, name, ids, grads):
        uniq, summed = accumulate_rows(ids, grads)
        self._update(name, summed, uniq)
        return uniq

    def _refresh(self, epoch: int) -> tuple[float, float]:
        """Refresh negative pools and the NN cache; returns (align_s, dangling_s)."""
        cfg = self.cfg
        if self.pools1 is not None and epoch % cfg.cache_period != 0:
            return 0.0, 0.0
        t0 = time.perf_counter()
        m = self.model
        if cfg.aligner == "mtranse":
            self.pools1 = truncated_pools(m.params["ent1"], cfg.neg_epsilon, cfg.workers)
            self.pools2 = truncated_pools(m.params["ent2"], cfg.neg_epsilon, cfg.workers)
        else:
            self.pools2 = truncated_pools(m.target_vectors(), cfg.neg_epsilon, cfg.workers)
        t1 = time.perf_counter()
        if cfg.detector in ("nnc", "mr"):
            sources = np.r_[self.train_dangling, self.train_pairs[:, 0]]
            self.cache = refresh_cache(
                m.source_vectors(), m.target_vectors(), sources, epoch,
                None, cfg.cache_period, cfg.workers,
            )
        t2 = time.perf_counter()
        return t1 - t0, t2 - t1

    # -- alignment batches -------------------------------------------------

    def _mtranse_batch(self, trip1, trip2, pairs) -> float:
        cfg, p = self.cfg, self.model.params
        mcfg = MTransEConfig(cfg.triple_margin, cfg.norm, cfg.align_weight)
        total = 0.0
        ent_ids = {"ent1": [], "ent2": []}
        ent_grads = {"ent1": [], "ent2": []}
        for side, trip, pools in (("1", trip1, self.pools1), ("2", trip2, self.pools2)):
            if len(trip) == 0:
                continue
            E, R = p["ent" + side], p["rel" + side]
            neg = corrupt_triples(trip, pools, cfg.neg_count, self.rng)
            pos = np.repeat(trip, cfg.neg_count, axis=0)
            loss, g = mtranse_triple_loss(
                E[pos[:, 0]], R[pos[:, 1]], E[pos[:, 2]],
                E[neg[:, 0]], R[neg[:, 1]], E[neg[:, 2]], mcfg,
            )
            total += loss
            ent_ids["ent" + side] += [pos[:, 0], pos[:, 2], neg[:, 0], neg[:, 2]]
            ent_grads["ent" + side] += [g["pos_h"], g["pos_t"], g["neg_h"], g["neg_t"]]
            self._update_rows("rel" + side, np.r_[pos[:, 1], neg[:, 1]], np.r_[g["pos_r"], g["neg_r"]])
        g_m = None
        if len(pairs):
            loss, g = mtranse_align_loss(p["ent1"][pairs[:, 0]], p["ent2"][pairs[:, 1]], p["transform"], mcfg)
            total += loss
            ent_ids["ent1"].append(pairs[:, 0])
            ent_grads["ent1"].append(g["x1"])
            ent_ids["ent2"].append(pairs[:, 1])
            ent_grads["ent2"].append(g["x2"])
            g_m = g["transform"]
        if not math.isfinite(total):
            raise NonFiniteError("alignment loss is not finite")
        for name in ("ent1", "ent2"):
            if ent_ids[name]:
                touched = self._update_rows(name, np.concatenate(ent_ids[name]), np.concatenate(ent_grads[name]))
                if cfg.normalize:
                    l2_normalize_rows(p[name], touched)
        if g_m is not None:
            self._update("transform", g_m)
        return total

    def _agg_batch(self, pairs) -> float:
        cfg, p = self.cfg, self.model.params
        agg1, agg2 = self.model.agg
        negs = sample_from_pools(pairs[:, 1], self.pools2, cfg.neg_count, self.rng)
        loss, g = agg_align_loss(
            p["ent1"], p["ent2"], p["w_self"], p["w_nbr"], agg1, agg2, pairs, negs,
            AggAlignConfig(cfg.agg_margin, cfg.dim),
        )
        if not math.isfinite(loss):
            raise NonFiniteError("alignment loss is not finite")
        for name in ("ent1", "ent2"):
            ids, rows = g[name]
            self._update(name, rows, ids)
            if cfg.normalize:
                l2_normalize_rows(p[name], ids)
        self._update("w_self", g["w_self"])
        self._update("w_nbr", g["w_nbr"])
        return loss

    # -- dangling batches --------------------------------------------------

    def _dangling_batch(self, size: int) -> float:
        cfg, m = self.cfg, self.model
        p = m.params
        batch = self.dangling_stream.take(size)
        if cfg.detector == "nnc":
            ids, labels = batch[:, 0], batch[:, 1]
        else:
            ids = batch
        agg_mode = cfg.aligner == "aggalign"
        if agg_mode:
            x, enc_cache = encode(p["ent1"], m.agg[0], ids, p["w_self"], p["w_nbr"])
            transform = np.eye(cfg.dim)
        else:
            x = p["ent1"][ids]
            transform = p["transform"]

        if cfg.detector == "br":
            tgt = self.rng.integers(0, self.kg2.num_entities, size=(len(ids), cfg.br_samples))
            t_vecs = m.target_vectors(tgt.ravel()).reshape(len(ids), cfg.br_samples, -1)
            loss, g, _ = br_loss(x, t_vecs, transform, BrConfig(cfg.br_samples, cfg.br_alpha))
        else:
            nn_ids, _ = self.cache.lookup(ids)
            x_nn = m.target_vectors(nn_ids)
            if cfg.detector == "mr":
                loss, g = mr_loss(x, x_nn, transform, MrConfig(cfg.mr_margin))
            else:
                feats = x @ transform.T - x_nn
                loss, gn = nnc_loss(feats, labels, m.nnc())
                for k in ("w1", "b1", "w2", "b2"):
                    self._update(f"nnc_{k}", gn[k])
                if not cfg.nnc_train_embeddings:
                    if not math.isfinite(loss):
                        raise NonFiniteError("dangling loss is not finite")
                    return loss
                g = {"x": gn["features"] @ transform, "transform": gn["features"].T @ x}
        if not math.isfinite(loss):
            raise NonFiniteError("dangling loss is not finite")
        if agg_mode:
            gs, gnb, rows_ids, rows = encode_backward(enc_cache, g["x"], m.agg[0], p["w_self"], p["w_nbr"])
            self._update("ent1", rows, rows_ids)
            self._update("w_self", gs)
            self._update("w_nbr", gnb)
        else:
            self._update_rows("ent1", ids, g["x"])
            self._update("transform", g["transform"])
        return loss

    # -- validation ----------------------------------------------------------

    def validate(self) -> float:
        m, cfg = self.model, self.cfg
        pairs = self.store.pairs_in("valid")
        if len(pairs) == 0:
            pairs = self.train_pairs
        src, tgt = m.source_vectors(), m.target_vectors()
        if cfg.detector == "none":
            return relaxed_eval(src, tgt, pairs, cfg.k_csls).hits1
        dangling = self.store.dangling_source_in("valid")
        ids = np.r_[pairs[:, 0], dangling].astype(np.int64)
        if cfg.detector == "br" and cfg.br_threshold == "train":
            self._set_br_train_threshold()
        verdicts = m.detect(ids, cfg.workers)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return consolidated_eval(src, tgt, pairs, dangling, verdicts, 10, cfg.k_csls).f1

    def _set_br_train_threshold(self):
        from .nnindex import nearest

        ids = np.r_[self.train_dangling, self.train_pairs[:, 0]].astype(np.int64)
        _, dist = nearest(self.model.source_vectors(ids), self.model.target_vectors(), self.cfg.workers)
        self.model.extra["br_train_threshold"] = float(dist.mean())

    # -- loop ----------------------------------------------------------------

    def run(self) -> TrainResult:
        cfg, rng, m = self.cfg, self.rng, self.model
        val_name = "hits1" if cfg.detector == "none" else "consolidated_f1"
        log: list[dict] = []
        best_val, best_epoch, best = -math.inf, -1, m.snapshot()
        stale = 0
        trip1, trip2 = self.kg1.triples, self.kg2.triples
        for epoch in range(cfg.max_epochs):
            t_align, t_dangling = self._refresh(epoch)
            if cfg.aligner == "mtranse":
                n_batches = max(1, math.ceil((len(trip1) + len(trip2)) / cfg.batch_size))
                chunks1 = np.array_split(trip1[rng.permutation(len(trip1))], n_batches)
                chunks2 = np.array_split(trip2[rng.permutation(len(trip2))], n_batches)
            else:
                n_batches = max(1, math.ceil(len(self.train_pairs) / cfg.batch_size))
            pair_chunks = np.array_split(self.train_pairs[rng.permutation(len(self.train_pairs))], n_batches)
            d_size = 0
            if cfg.detector != "none":
                d_size = min(cfg.dangling_batch_size, len(self.dangling_stream.items))
            loss_a = loss_d = 0.0
            try:
                for b in range(n_batches):
                    t0 = time.perf_counter()
                    if cfg.aligner == "mtranse":
                        loss_a += self._mtranse_batch(chunks1[b], chunks2[b], pair_chunks[b])
                    elif len(pair_chunks[b]):
                        loss_a += self._agg_batch(pair_chunks[b])
                    t1 = time.perf_counter()
                    t_align += t1 - t0
                    if d_size:
                        loss_d += self._dangling_batch(d_size)
                        t_dangling += time.perf_counter() - t1
            except NonFiniteError as exc:
                raise TrainingDiverged(f"epoch {epoch}: {exc}", best) from exc

            record = {
                "epoch": epoch,
                "loss_align": loss_a,
                "loss_dangling": loss_d if d_size else None,
                "epoch_seconds_align": t_align,
                "epoch_seconds_dangling": t_dangling if d_size else None,
                "val_metric": None,
                "best_val_metric": None if best_epoch < 0 else best_val,
            }
            if (epoch + 1) % cfg.eval_every == 0 or epoch + 1 == cfg.max_epochs:
                val = self.validate()
                record["val_metric"] = val
                if val > best_val:
                    best_val, best_epoch, stale = val, epoch, 0
                    if cfg.detector == "br":
                        self._set_br_train_threshold()
                    best = m.snapshot()
                else:
                    stale += 1
                record["best_val_metric"] = best_val
                logger.info("epoch %d: align %.4f dangling %.4f val %s %.4f",
                            epoch, loss_a, loss_d, val_name, val)
            log.append(record)
            if stale >= cfg.patience:
                break
        return TrainResult(best, log, best_epoch, best_val, val_name)


def train(kg1, kg2, store: AlignmentStore, cfg: TrainConfig) -> TrainResult:
    """Train an aligner (and optional detector) and return the best state."""
    return Trainer(kg1, kg2, store, cfg).run()
