"""Signed-random-projection (cosine) LSH over the embedded training matrix.

Hash tables live in the same latent space the exhaustive search uses, making
metric-level comparisons fair. Each table hashes a vector to H sign bits
against seeded hyperplanes; a query's candidates are the union of its buckets
across tables, rescored exactly by dot product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import EmbeddedMatrix, gaussian_row
from .predictor import Neighbor, exact_top_k

# keeps hyperplane streams disjoint from projection-row streams for any seed
LSH_SEED_NAMESPACE = 0x4C53485F68617368  # ascii "LSH_hash"

DEFAULT_TABLES = 10
DEFAULT_BITS = 16


@dataclass
class LshIndex:
    tables: int
    bits: int
    seed: int
    r: int
    hyperplanes: np.ndarray  # (tables * bits, r)
    buckets: list[dict[int, np.ndarray]]  # per table: code -> training indices
    train: EmbeddedMatrix


def hyperplanes_for(seed: int, tables: int, bits: int, r: int) -> np.ndarray:
    planes = np.empty((tables * bits, r))
    for i in range(tables * bits):
        planes[i] = gaussian_row(seed ^ LSH_SEED_NAMESPACE, i, r)
    return planes


def _codes(planes_t: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """H-bit codes for columns of `vectors` against one table's planes."""
    signs = planes_t @ np.asarray(vectors, dtype=np.float64) >= 0.0
    weights = (1 << np.arange(signs.shape[0], dtype=np.uint64))[:, None]
    return (signs.astype(np.uint64) * weights).sum(axis=0, dtype=np.uint64)


def build_index(
    train: EmbeddedMatrix,
    T: int = DEFAULT_TABLES,
    H: int = DEFAULT_BITS,
    seed: int = 0,
) -> LshIndex:
    """Hash every training column into one bucket per table."""
    if T < 1 or H < 1:
        raise ValueError("T and H must be positive")
    if H > 64:
        raise ValueError("H must be at most 64 (codes are packed into uint64)")
    planes = hyperplanes_for(seed, T, H, train.r)
    buckets: list[dict[int, np.ndarray]] = []
    for t in range(T):
        codes = _codes(planes[t * H : (t + 1) * H], train.data)
        order = np.argsort(codes, kind="stable")
        uniq, starts = np.unique(codes[order], return_index=True)
        table: dict[int, np.ndarray] = {}
        for u, lo, hi in zip(uniq, starts, list(starts[1:]) + [len(order)]):
            table[int(u)] = np.sort(order[lo:hi])
        buckets.append(table)
    return LshIndex(
        tables=T, bits=H, seed=seed, r=train.r,
        hyperplanes=planes, buckets=buckets, train=train,
    )


def candidates(index: LshIndex, query: np.ndarray) -> np.ndarray:
    """Union of the query's buckets across all tables (sorted indices)."""
    hits = []
    for t in range(index.tables):
        code = int(
            _codes(
                index.hyperplanes[t * index.bits : (t + 1) * index.bits],
                np.asarray(query, dtype=np.float64).reshape(-1, 1),
            )[0]
        )
        found = index.buckets[t].get(code)
        if found is not None:
            hits.append(found)
    if not hits:
        return np.empty(0, dtype=np.int64)
    return np.unique(np.concatenate(hits))


def query_lsh(index: LshIndex, query: np.ndarray, k: int) -> list[Neighbor]:
    """Exact top-k by dot product within the candidate set.

    May return fewer than k entries; an empty candidate set yields an empty
    list (callers count these).
    """
    if k < 1:
        raise ValueError("k must be positive")
    query = np.asarray(query)
    if query.shape != (index.r,):
        raise ValueError(f"query length {query.shape} != index dimensionality {index.r}")
    cand = candidates(index, query)
    if cand.size == 0:
        return []
    sims = query.astype(np.float64) @ index.train.data[:, cand].astype(np.float64)
    return [(int(cand[i]), s) for i, s in exact_top_k(sims, k)]
