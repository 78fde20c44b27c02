"""Relaxed and consolidated evaluation protocols.

Relaxed: every test source is matchable; report Hits@k and MRR of the gold
target in the CSLS ranking over all target entities.

Consolidated: the detector first abstains on sources it flags as dangling.
A dangling source that is attempted and a matchable source that is
abstained on both count as wrong; an attempted matchable source is right
when its gold target ranks first.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .nnindex import cosine_similarity, csls_matrix, gold_ranks

logger = logging.getLogger(__name__)


def _ratio(num: int, den: int, what: str) -> float:
    if den == 0:
        warnings.warn(f"{what}: zero denominator, defined as 0", stacklevel=3)
        return 0.0
    return num / den


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


@dataclass
class RelaxedMetrics:
    hits1: float
    hits10: float
    mrr: float
    n: int


@dataclass
class DetectionMetrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass
class ConsolidatedMetrics:
    precision: float
    recall: float
    f1: float
    recall_at_k: float
    k: int
    correct: int
    correct_at_k: int
    attempted: int
    matchable: int


@dataclass
class EvalReport:
    relaxed: RelaxedMetrics | None = None
    detection: DetectionMetrics | None = None
    consolidated: ConsolidatedMetrics | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {}
        for key in ("relaxed", "detection", "consolidated"):
            val = getattr(self, key)
            out[key] = None if val is None else asdict(val)
        out.update(self.extra)
        return out


def _scores(src_vecs, tgt_vecs, queries, k_csls):
    return csls_matrix(src_vecs[queries], tgt_vecs, k_csls)


def alignment_ranks(
    src_vecs: np.ndarray,
    tgt_vecs: np.ndarray,
    pairs: np.ndarray,
    k_csls: int = 10,
    candidates: np.ndarray | None = None,
) -> np.ndarray:
    """1-based CSLS rank of each pair's gold target among all targets."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    scores = _scores(src_vecs, tgt_vecs, pairs[:, 0], k_csls)
    return gold_ranks(scores, pairs[:, 1], candidates)


def relaxed_from_ranks(ranks) -> RelaxedMetrics:
    ranks = np.asarray(ranks)
    if len(ranks) == 0:
        raise ValueError("no test pairs")
    return RelaxedMetrics(
        hits1=float(np.mean(ranks <= 1)),
        hits10=float(np.mean(ranks <= 10)),
        mrr=float(np.mean(1.0 / ranks)),
        n=int(len(ranks)),
    )


def relaxed_eval(src_vecs, tgt_vecs, pairs, k_csls: int = 10) -> RelaxedMetrics:
    """Hits@1, Hits@10 and MRR of gold targets under CSLS ranking.

    ``src_vecs`` must already be in the target space.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) and pairs[:, 1].max() >= tgt_vecs.shape[0]:
        raise ValueError("gold target missing from target table")
    return relaxed_from_ranks(alignment_ranks(src_vecs, tgt_vecs, pairs, k_csls))


def detection_eval(verdicts, gold_dangling) -> DetectionMetrics:
    """Confusion-matrix metrics with dangling as the positive class.

    ``verdicts`` maps entity -> predicted dangling flag (a dict, or a list of
    :class:`~abstain_ea.detect.DanglingVerdict`); ``gold_dangling`` maps
    entity -> true flag over the same entity set.
    """
    pred = _as_flags(verdicts)
    gold = dict(gold_dangling)
    if set(pred) != set(gold):
        raise ValueError("verdict and gold entity sets differ")
    tp = sum(1 for e in gold if pred[e] and gold[e])
    fp = sum(1 for e in gold if pred[e] and not gold[e])
    fn = sum(1 for e in gold if not pred[e] and gold[e])
    tn = len(gold) - tp - fp - fn
    p = _ratio(tp, tp + fp, "detection precision")
    r = _ratio(tp, tp + fn, "detection recall")
    return DetectionMetrics(
        precision=p,
        recall=r,
        f1=_f1(p, r),
        accuracy=(tp + tn) / len(gold) if gold else 0.0,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
    )


def _as_flags(verdicts) -> dict[int, bool]:
    if isinstance(verdicts, dict):
        return {int(k): bool(v) for k, v in verdicts.items()}
    return {int(v.entity): bool(v.is_dangling) for v in verdicts}


def consolidated_ranks(src_vecs, tgt_vecs, pairs, dangling, flags, k_csls=10, candidate_targets=None):
    """Gold rank per matchable pair, 0 where the detector abstained.

    The CSLS source population is every attempted source, dangling ones
    included, since the aligner cannot tell them apart.
    """
    attempted_pairs = np.array([not flags[int(s)] for s in pairs[:, 0]], dtype=bool)
    ranks = np.zeros(len(pairs), dtype=np.int64)
    if not attempted_pairs.any():
        return ranks
    queries = np.concatenate(
        [pairs[attempted_pairs, 0], [d for d in dangling if not flags[int(d)]]]
    ).astype(np.int64)
    scores = csls_matrix(src_vecs[queries], tgt_vecs, k_csls)
    n_att = int(attempted_pairs.sum())
    ranks[attempted_pairs] = gold_ranks(
        scores[:n_att], pairs[attempted_pairs, 1], candidate_targets
    )
    return ranks


def consolidated_eval(
    src_vecs,
    tgt_vecs,
    matchable_pairs,
    dangling_sources,
    verdicts,
    k: int = 10,
    k_csls: int = 10,
    candidate_targets: np.ndarray | None = None,
) -> ConsolidatedMetrics:
    """Precision/recall/F1 of end-to-end alignment with abstention.

    ``candidate_targets`` is an optional boolean mask over targets; by
    default all target entities are candidates.
    """
    pairs = np.asarray(matchable_pairs, dtype=np.int64).reshape(-1, 2)
    dangling = np.asarray(dangling_sources, dtype=np.int64)
    if len(pairs) + len(dangling) == 0:
        raise ValueError("empty test set")
    flags = _as_flags(verdicts)
    missing = set(pairs[:, 0].tolist()) | set(dangling.tolist())
    missing -= set(flags)
    if missing:
        raise ValueError(f"no verdict for {len(missing)} test sources")
    ranks = consolidated_ranks(src_vecs, tgt_vecs, pairs, dangling, flags, k_csls, candidate_targets)
    attempted_pairs = ranks > 0
    attempted = int(attempted_pairs.sum()) + sum(1 for d in dangling if not flags[int(d)])
    correct = int((ranks[attempted_pairs] <= 1).sum())
    correct_k = int((ranks[attempted_pairs] <= k).sum())
    p = _ratio(correct, attempted, "consolidated precision")
    r = _ratio(correct, len(pairs), "consolidated recall")
    return ConsolidatedMetrics(
        precision=p,
        recall=r,
        f1=_f1(p, r),
        recall_at_k=_ratio(correct_k, len(pairs), "consolidated recall@k"),
        k=k,
        correct=correct,
        correct_at_k=correct_k,
        attempted=attempted,
        matchable=int(len(pairs)),
    )


@dataclass(frozen=True)
class SimilarityRecord:
    entity: int
    label: str  # "matchable" or "dangling"
    nn_cosine: float


def similarity_distribution(src_vecs, tgt_vecs, matchable_sources, dangling_sources):
    """Nearest-target cosine similarity of every test source, with its label.

    Returns ``(records, summary)``; the summary holds per-label means and
    their difference (matchable minus dangling).
    """
    records = []
    for label, ids in (("matchable", matchable_sources), ("dangling", dangling_sources)):
        ids = np.asarray(ids, dtype=np.int64)
        if len(ids) == 0:
            continue
        sims = cosine_similarity(src_vecs[ids], tgt_vecs).max(axis=1)
        records += [SimilarityRecord(int(e), label, float(s)) for e, s in zip(ids, sims)]
    summary = {}
    for label in ("matchable", "dangling"):
        vals = [r.nn_cosine for r in records if r.label == label]
        summary[f"mean_{label}"] = float(np.mean(vals)) if vals else None
        summary[f"n_{label}"] = len(vals)
    if summary["mean_matchable"] is not None and summary["mean_dangling"] is not None:
        summary["mean_difference"] = summary["mean_matchable"] - summary["mean_dangling"]
    else:
        summary["mean_difference"] = None
    return records, summary


def write_similarity_csv(path: str | Path, records, entity_names) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["entity", "label", "nn_cosine"])
        for r in records:
            w.writerow([entity_names[r.entity], r.label, repr(r.nn_cosine)])
