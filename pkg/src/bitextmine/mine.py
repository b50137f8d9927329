"""KNN search over unit vectors, margin scoring, and candidate-pair mining."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .providers import EmbeddingMatrix

__all__ = [
    "MiningParams",
    "NeighborList",
    "CandidatePair",
    "IvfIndex",
    "MiningResult",
    "knn_exact",
    "ivf_build",
    "knn_approx",
    "margin_score",
    "mine",
    "write_pairs",
    "read_pairs",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MiningParams:
    k: int = 4
    threshold: float = 1.04
    batch_size: int = 100
    mode: str = "exact"           # exact | approximate
    nprobe: int = 8
    nlist: int | None = None      # approximate only; default ceil(sqrt(n))
    best_of_k: bool = False       # pick best-margin neighbor instead of nearest
    unique_pairs: bool = False    # keep only each sentence's best pair

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.mode not in ("exact", "approximate"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.nprobe < 1:
            raise ValueError("nprobe must be >= 1")


@dataclass(frozen=True)
class NeighborList:
    query_id: int
    ids: tuple[int, ...]          # sorted by descending cosine, ties by id
    cosines: tuple[float, ...]


@dataclass(frozen=True)
class CandidatePair:
    src_id: int
    tgt_id: int
    margin: float
    direction: str                # forward | backward | both


@dataclass
class MiningResult:
    pairs: list[CandidatePair]
    summary: dict = field(default_factory=dict)


def _check_dims(queries: EmbeddingMatrix, db: EmbeddingMatrix):
    if queries.dim != db.dim:
        raise ValueError(f"dimension mismatch: queries {queries.dim} vs db {db.dim}")


def _clip_k(k: int, n_db: int) -> int:
    if k > n_db:
        log.warning("k=%d clipped to database size %d", k, n_db)
        return n_db
    return k


def _pair_cosines(qvec: np.ndarray, db: EmbeddingMatrix, ids) -> tuple[float, ...]:
    # winners get their cosine recomputed with one fixed kernel so exact and
    # approximate search report bit-identical values for the same neighbor
    return tuple(float(np.dot(qvec, db.data[j])) for j in ids)


def _topk_rows(
    sims: np.ndarray, k: int, queries: EmbeddingMatrix, db: EmbeddingMatrix,
    id_offset: int = 0,
) -> list[NeighborList]:
    """Top-k per row of a similarity matrix; ties break by ascending column id."""
    n_db = sims.shape[1]
    ids = np.arange(n_db)
    out = []
    for row_i in range(sims.shape[0]):
        row = sims[row_i]
        if k < n_db:
            # argpartition prunes; keeping everything >= the k-th value makes
            # the ascending-id tie-break exact even across the partition cut
            top = np.argpartition(-row, k - 1)[:k]
            thresh = row[top].min()
            cand = np.flatnonzero(row >= thresh)
            cand = cand[np.lexsort((cand, -row[cand]))][:k]
        else:
            cand = ids[np.lexsort((ids, -row))][:k]
        out.append(
            NeighborList(
                query_id=id_offset + row_i,
                ids=tuple(int(j) for j in cand),
                cosines=_pair_cosines(queries.data[id_offset + row_i], db, cand),
            )
        )
    return out


def knn_exact(
    queries: EmbeddingMatrix, db: EmbeddingMatrix, k: int, batch_size: int = 100
) -> list[NeighborList]:
    """Exact k-nearest neighbors by dot product on unit vectors.

    Deterministic: equal cosines break by ascending database id.
    """
    _check_dims(queries, db)
    k = _clip_k(k, db.n)
    results: list[NeighborList] = []
    for start in range(0, queries.n, batch_size):
        block = queries.data[start : start + batch_size]
        sims = block @ db.data.T
        results.extend(_topk_rows(sims, k, queries, db, id_offset=start))
    return results


@dataclass
class IvfIndex:
    centroids: np.ndarray                 # nlist x dim, unit-normalized
    lists: list[np.ndarray]               # per-centroid database ids
    db: EmbeddingMatrix

    @property
    def nlist(self) -> int:
        return self.centroids.shape[0]


def ivf_build(
    db: EmbeddingMatrix, nlist: int | None = None, seed: int = 13, iters: int = 25
) -> IvfIndex:
    """Partition the database with k-means; empty clusters re-seed from the
    point farthest from its assigned centroid."""
    n = db.n
    if nlist is None:
        nlist = math.ceil(math.sqrt(n))
    if nlist > n:
        raise ValueError(f"nlist {nlist} exceeds database size {n}")
    rng = np.random.default_rng(seed)
    X = db.data
    centroids = X[rng.choice(n, size=nlist, replace=False)].copy()
    assign = np.zeros(n, dtype=np.int64)
    for _ in range(iters):
        # squared Euclidean; ||x||=1 so only the centroid norm term varies
        d2 = (centroids * centroids).sum(axis=1)[None, :] - 2.0 * (X @ centroids.T)
        assign = np.argmin(d2, axis=1)
        dist_to_own = d2[np.arange(n), assign]
        for c in range(nlist):
            members = np.flatnonzero(assign == c)
            if members.size:
                centroids[c] = X[members].mean(axis=0)
            else:
                far = int(np.argmax(dist_to_own))
                centroids[c] = X[far]
                assign[far] = c
                dist_to_own[far] = -np.inf
    norms = np.linalg.norm(centroids, axis=1)
    norms[norms == 0.0] = 1.0
    centroids = centroids / norms[:, None]
    # final assignment against the normalized centroids
    sims = X @ centroids.T
    assign = np.argmax(sims, axis=1)
    lists = [np.flatnonzero(assign == c) for c in range(nlist)]
    return IvfIndex(centroids=centroids, lists=lists, db=db)


def knn_approx(
    index: IvfIndex, queries: EmbeddingMatrix, k: int, nprobe: int
) -> list[NeighborList]:
    """Scan only the nprobe closest inverted lists per query."""
    if queries.dim != index.db.dim:
        raise ValueError("dimension mismatch between queries and index")
    if nprobe > index.nlist:
        raise ValueError(f"nprobe {nprobe} exceeds nlist {index.nlist}")
    k = _clip_k(k, index.db.n)
    cent_ids = np.arange(index.nlist)
    results = []
    for qi in range(queries.n):
        q = queries.data[qi]
        cscores = index.centroids @ q
        probes = cent_ids[np.lexsort((cent_ids, -cscores))][:nprobe]
        cand = np.concatenate([index.lists[c] for c in probes])
        if cand.size == 0:
            results.append(NeighborList(query_id=qi, ids=(), cosines=()))
            continue
        cand.sort()  # ascending ids make the lexsort tie-break global
        sims = index.db.data[cand] @ q
        order = np.lexsort((cand, -sims))[: min(k, cand.size)]
        chosen = [int(cand[j]) for j in order]
        results.append(
            NeighborList(
                query_id=qi,
                ids=tuple(chosen),
                cosines=_pair_cosines(q, index.db, chosen),
            )
        )
    return results


def margin_score(cos_xy: float, sum_nn_x: float, sum_nn_y: float, k: int) -> float:
    """Ratio of the pair cosine to the mean cosine of both sides' k neighbors.

    A non-positive denominator marks a degenerate pair; the caller discards
    it (score 0).
    """
    denom = sum_nn_x + sum_nn_y
    if denom <= 0.0:
        return 0.0
    return 2.0 * k * cos_xy / denom


def _candidates_one_direction(
    nn_lists: list[NeighborList],
    own_sums: np.ndarray,
    other_sums: np.ndarray,
    k: int,
    best_of_k: bool,
    forward: bool,
    degenerate: list[int],
):
    for nl in nn_lists:
        if not nl.ids:
            continue
        if best_of_k:
            best = None
            for j, cos in zip(nl.ids, nl.cosines):
                m = margin_score(cos, own_sums[nl.query_id], other_sums[j], k)
                if best is None or m > best[0]:
                    best = (m, j, cos)
            m, j, cos = best
        else:
            j, cos = nl.ids[0], nl.cosines[0]
            m = margin_score(cos, own_sums[nl.query_id], other_sums[j], k)
        denom = own_sums[nl.query_id] + other_sums[j]
        if denom <= 0.0:
            degenerate[0] += 1
            continue
        if forward:
            yield nl.query_id, j, m
        else:
            yield j, nl.query_id, m


def mine(
    src: EmbeddingMatrix, tgt: EmbeddingMatrix, params: MiningParams
) -> MiningResult:
    """Bidirectional nearest-neighbor mining with margin filtering.

    Forward and backward searches each nominate (query, best neighbor)
    pairs; the union is deduplicated, margin-filtered at the threshold, and
    sorted by descending margin with (src_id, tgt_id) tie-break.
    """
    _check_dims(src, tgt)
    k = _clip_k(params.k, min(src.n, tgt.n))

    if params.mode == "approximate":
        tgt_index = ivf_build(tgt, params.nlist)
        src_index = ivf_build(src, params.nlist)
        nprobe = min(params.nprobe, tgt_index.nlist, src_index.nlist)
        fwd = knn_approx(tgt_index, src, k, min(nprobe, tgt_index.nlist))
        bwd = knn_approx(src_index, tgt, k, min(nprobe, src_index.nlist))
    else:
        fwd = knn_exact(src, tgt, k, params.batch_size)
        bwd = knn_exact(tgt, src, k, params.batch_size)

    fwd_sums = np.array([sum(nl.cosines) for nl in fwd])
    bwd_sums = np.array([sum(nl.cosines) for nl in bwd])

    degenerate = [0]
    found: dict[tuple[int, int], tuple[float, str]] = {}
    n_forward = n_backward = 0
    for s, t, m in _candidates_one_direction(
        fwd, fwd_sums, bwd_sums, k, params.best_of_k, True, degenerate
    ):
        found[(s, t)] = (m, "forward")
        n_forward += 1
    for s, t, m in _candidates_one_direction(
        bwd, bwd_sums, fwd_sums, k, params.best_of_k, False, degenerate
    ):
        if (s, t) in found:
            found[(s, t)] = (found[(s, t)][0], "both")
        else:
            found[(s, t)] = (m, "backward")
        n_backward += 1

    pairs = [
        CandidatePair(src_id=s, tgt_id=t, margin=m, direction=d)
        for (s, t), (m, d) in found.items()
        if m >= params.threshold
    ]
    pairs.sort(key=lambda p: (-p.margin, p.src_id, p.tgt_id))

    if params.unique_pairs:
        pairs = _keep_best_pairs(pairs)

    summary = {
        "k": k,
        "threshold": params.threshold,
        "mode": params.mode,
        "candidates_forward": n_forward,
        "candidates_backward": n_backward,
        "degenerate_discarded": degenerate[0],
        "pairs_retained": len(pairs),
        "direction_counts": {
            d: sum(p.direction == d for p in pairs)
            for d in ("forward", "backward", "both")
        },
    }
    return MiningResult(pairs=pairs, summary=summary)


def _keep_best_pairs(pairs: list[CandidatePair]) -> list[CandidatePair]:
    # pairs arrive sorted by descending margin; greedy keep enforces
    # one-pair-per-sentence on both sides
    used_src: set[int] = set()
    used_tgt: set[int] = set()
    kept = []
    for p in pairs:
        if p.src_id in used_src or p.tgt_id in used_tgt:
            continue
        used_src.add(p.src_id)
        used_tgt.add(p.tgt_id)
        kept.append(p)
    return kept


def write_pairs(
    result: MiningResult,
    path,
    src_texts: list[str] | None = None,
    tgt_texts: list[str] | None = None,
    summary_path=None,
) -> None:
    """Write the mined-pairs TSV (margins at 6 decimal places) and summary JSON."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("src_id\ttgt_id\tmargin\tdirection\tsrc_text\ttgt_text\n")
        for p in result.pairs:
            s_text = src_texts[p.src_id] if src_texts else ""
            t_text = tgt_texts[p.tgt_id] if tgt_texts else ""
            fh.write(
                f"{p.src_id}\t{p.tgt_id}\t{p.margin:.6f}\t{p.direction}\t{s_text}\t{t_text}\n"
            )
    if summary_path is not None:
        with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(result.summary, fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_pairs(path) -> list[CandidatePair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("src_id\t"):
            raise ValueError(f"{path}: missing pairs header")
        for line in fh:
            s, t, m, d = line.rstrip("\n").split("\t")[:4]
            pairs.append(CandidatePair(int(s), int(t), float(m), d))
    return pairs
