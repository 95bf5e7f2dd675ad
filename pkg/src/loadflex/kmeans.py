"""Lloyd's k-means with k-means++ seeding, plus a brute-force optimum.

Restart ``r`` draws from ``SeedSequence([seed, r])`` so the chosen result
does not depend on the order (or thread) in which restarts run.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from .errors import InstanceTooLarge, TooManyClusters
from .features import FeatureMatrix

ORACLE_CAP = 100_000  # max number of partitions the oracle will enumerate

Matrix = Union[FeatureMatrix, np.ndarray]


@dataclass(frozen=True)
class KMeansConfig:
    restarts: int = 25
    max_iterations: int = 100
    tolerance: float = 1e-9
    seed: int = 0
    min_cluster_size: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.tolerance < 0:
            raise ValueError("tolerance must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit value")
        if self.min_cluster_size < 0:
            raise ValueError("min_cluster_size must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Clustering:
    k: int
    assignments: np.ndarray
    centres: np.ndarray
    sizes: np.ndarray
    wcss: float
    flags: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        for name in ("assignments", "centres", "sizes"):
            arr = np.array(getattr(self, name), copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == k)

    def same_as(self, other: "Clustering", atol: float = 0.0) -> bool:
        return (
            self.k == other.k
            and np.array_equal(self.assignments, other.assignments)
            and np.array_equal(self.sizes, other.sizes)
            and np.allclose(self.centres, other.centres, rtol=0, atol=atol)
            and abs(self.wcss - other.wcss) <= atol
        )

    def metadata(self, config: Optional[KMeansConfig] = None) -> dict:
        meta = {
            "k": int(self.k),
            "centres": self.centres.tolist(),
            "sizes": self.sizes.tolist(),
            "wcss": float(self.wcss),
            "flags": sorted(self.flags),
        }
        if config is not None:
            meta["seed"] = config.seed
            meta["restarts"] = config.restarts
            meta["config"] = config.to_dict()
        return meta


def _rows(matrix: Matrix) -> np.ndarray:
    x = matrix.rows if isinstance(matrix, FeatureMatrix) else np.asarray(matrix, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    return x


def _sqdist(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - c[None, :, :]
    return np.einsum("mkh,mkh->mk", diff, diff)


def _means(x: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((k, x.shape[1]))
    for j in range(k):
        out[j] = x[labels == j].mean(axis=0)
    return out


def _wcss(x: np.ndarray, labels: np.ndarray, centres: np.ndarray) -> float:
    diff = x - centres[labels]
    return float(np.einsum("mh,mh->", diff, diff))


def from_assignments(matrix: Matrix, labels, k: Optional[int] = None) -> Clustering:
    """Build a Clustering whose centres are the member means of ``labels``."""
    x = _rows(matrix)
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (x.shape[0],):
        raise ValueError("one label per row required")
    k = int(labels.max()) + 1 if k is None else k
    sizes = np.bincount(labels, minlength=k)
    if np.any(sizes == 0):
        raise ValueError(f"clusters {np.flatnonzero(sizes == 0).tolist()} have no members")
    centres = _means(x, labels, k)
    return Clustering(k, labels, centres, sizes, _wcss(x, labels, centres))


def kmeans_plusplus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    m = x.shape[0]
    chosen = [int(rng.integers(m))]
    d2 = _sqdist(x, x[chosen])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(m, p=d2 / total))
        else:
            rest = np.setdiff1d(np.arange(m), chosen)
            nxt = int(rng.choice(rest))
        chosen.append(nxt)
        d2 = np.minimum(d2, _sqdist(x, x[[nxt]])[:, 0])
    return x[chosen].copy()


def _repair_empty(x: np.ndarray, labels: np.ndarray, centres: np.ndarray, k: int) -> np.ndarray:
    # Move the point farthest from its centre (from a cluster that can spare it)
    # into each empty cluster.
    labels = labels.copy()
    sizes = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(sizes == 0):
        d2 = np.einsum("mh,mh->m", x - centres[labels], x - centres[labels])
        d2[sizes[labels] < 2] = -1.0
        i = int(np.argmax(d2))
        sizes[labels[i]] -= 1
        labels[i] = j
        sizes[j] = 1
        centres = centres.copy()
        centres[j] = x[i]
    return labels


def lloyd(x: np.ndarray, centres: np.ndarray, max_iterations: int = 100, tolerance: float = 1e-9):
    """Run Lloyd iterations from ``centres``.

    Returns ``(labels, centres, wcss, history)`` where ``history`` holds the
    wcss after each iteration and the final centres are the member means.
    """
    k = centres.shape[0]
    labels = None
    history = []
    for _ in range(max_iterations):
        new_labels = np.argmin(_sqdist(x, centres), axis=1)
        new_labels = _repair_empty(x, new_labels, centres, k)
        stable = labels is not None and np.array_equal(new_labels, labels)
        labels = new_labels
        new_centres = _means(x, labels, k)
        shift = float(np.max(np.einsum("kh,kh->k", new_centres - centres, new_centres - centres)))
        centres = new_centres
        history.append(_wcss(x, labels, centres))
        if stable or shift < tolerance:
            break
    return labels, centres, history[-1], history


def _one_restart(x: np.ndarray, k: int, config: KMeansConfig, r: int):
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, r]))
    init = kmeans_plusplus(x, k, rng)
    labels, _, wcss, _ = lloyd(x, init, config.max_iterations, config.tolerance)
    return wcss, labels


def relabel_canonical(c: Clustering) -> Clustering:
    """Renumber clusters in order of their first member's row index."""
    order = []
    for label in c.assignments:
        if label not in order:
            order.append(int(label))
    order += [j for j in range(c.k) if j not in order]
    mapping = np.empty(c.k, dtype=int)
    mapping[order] = np.arange(c.k)
    return Clustering(
        c.k,
        mapping[c.assignments],
        c.centres[order],
        c.sizes[order],
        c.wcss,
        c.flags,
    )


def _enforce_min_size(x: np.ndarray, labels: np.ndarray, k: int, min_size: int):
    # Dissolve undersized clusters into the nearest surviving centre.
    sizes = np.bincount(labels, minlength=k)
    small = np.flatnonzero(sizes < min_size)
    if len(small) == 0 or len(small) == k:
        return labels, k, False
    keep = np.flatnonzero(sizes >= min_size)
    centres = _means(x, labels, k)[keep]
    remap = -np.ones(k, dtype=int)
    remap[keep] = np.arange(len(keep))
    new = remap[labels]
    stray = new < 0
    new[stray] = np.argmin(_sqdist(x[stray], centres), axis=1)
    return new, len(keep), True


def kmeans(matrix: Matrix, k: int, config: KMeansConfig = KMeansConfig(), workers: int = 1) -> Clustering:
    """Best-of-``config.restarts`` Lloyd clustering, canonically labelled.

    With ``config.min_cluster_size`` above 1, clusters smaller than that are
    merged into their nearest neighbour after the search; the result then has
    fewer than ``k`` clusters and carries the ``SmallClustersMerged`` flag.
    """
    x = _rows(matrix)
    m = x.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > m:
        raise TooManyClusters(f"k={k} exceeds the {m} rows")
    if not np.all(np.isfinite(x)):
        raise ValueError("matrix contains non-finite values")
    runs = range(config.restarts)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda r: _one_restart(x, k, config, r), runs))
    else:
        results = [_one_restart(x, k, config, r) for r in runs]
    best = min(range(len(results)), key=lambda r: (results[r][0], r))
    labels = results[best][1]
    flags = frozenset()
    if config.min_cluster_size > 1:
        labels, k, merged = _enforce_min_size(x, labels, k, config.min_cluster_size)
        if merged:
            flags = frozenset({"SmallClustersMerged"})
    c = from_assignments(x, labels, k)
    return relabel_canonical(
        Clustering(c.k, c.assignments, c.centres, c.sizes, c.wcss, flags)
    )


def stirling2(n: int, k: int) -> int:
    """Number of ways to split n items into k non-empty unlabelled groups."""
    if k == 0:
        return 1 if n == 0 else 0
    if k > n:
        return 0
    row = [1] + [0] * k
    for i in range(1, n + 1):
        for j in range(min(i, k), 0, -1):
            row[j] = j * row[j] + row[j - 1]
        row[0] = 0
    return row[k]


@lru_cache(maxsize=64)
def _partitions(m: int, k: int) -> np.ndarray:
    # Restricted-growth strings: label[0] == 0, label[i] <= max(label[:i]) + 1,
    # all k labels used. Each is one unlabelled partition.
    if k == 1:
        return np.zeros((1, m), dtype=np.int8)
    if k == m:
        return np.arange(m, dtype=np.int32)[None, :]
    grid = np.indices((k,) * (m - 1), dtype=np.int8).reshape(m - 1, -1).T
    labels = np.hstack([np.zeros((grid.shape[0], 1), dtype=np.int8), grid])
    prev_max = np.maximum.accumulate(labels, axis=1)
    ok = np.all(labels[:, 1:] <= prev_max[:, :-1] + 1, axis=1) & (prev_max[:, -1] == k - 1)
    out = labels[ok]
    out.setflags(write=False)
    return out


def exhaustive_oracle(matrix: Matrix, k: int, cap: int = ORACLE_CAP) -> Clustering:
    """Globally wcss-optimal partition by enumerating every partition into k groups."""
    x = _rows(matrix)
    m = x.shape[0]
    if not 1 <= k <= m:
        raise TooManyClusters(f"k={k} invalid for {m} rows")
    count = stirling2(m, k)
    if count > cap or (1 < k < m and k ** (m - 1) > 50 * cap):
        raise InstanceTooLarge(f"{count} partitions of {m} rows into {k} groups exceeds cap {cap}")
    parts = _partitions(m, k)
    sq = np.einsum("mh,mh->m", x, x)
    total = np.zeros(parts.shape[0])
    for j in range(k):
        mask = (parts == j).astype(float)
        n = mask.sum(axis=1)
        s = mask @ x
        total += mask @ sq - np.einsum("ph,ph->p", s, s) / n
    # The expansion above loses precision; rescore near-ties exactly.
    lo = total.min()
    cand = np.flatnonzero(total <= lo + 1e-9 * max(1.0, abs(lo)) + 1e-12)
    best = None
    for p in cand:
        c = from_assignments(x, parts[p], k)
        if best is None or c.wcss < best.wcss:
            best = c
    return relabel_canonical(best)


def write_assignments(c: Clustering, ids, fh) -> None:
    fh.write("household_id,cluster\n")
    for hid, label in zip(ids, c.assignments):
        fh.write(f"{hid},{int(label)}\n")


def read_assignments(fh) -> tuple[list[str], np.ndarray]:
    lines = [ln.strip() for ln in fh if ln.strip()]
    if lines and lines[0].replace(" ", "") == "household_id,cluster":
        lines = lines[1:]
    ids, labels = [], []
    for ln in lines:
        hid, label = ln.rsplit(",", 1)
        ids.append(hid)
        labels.append(int(label))
    return ids, np.array(labels, dtype=int)


def write_metadata(c: Clustering, config: KMeansConfig, fh, **extra) -> None:
    meta = c.metadata(config)
    meta.update(extra)
    json.dump(meta, fh, indent=2, sort_keys=True)
    fh.write("\n")
