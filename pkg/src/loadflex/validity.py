"""Cluster validity indexes: MIA, CDI, SMI, DBI and Ball-Hall.

All distances between profiles use the attribute-averaged Euclidean distance

    d(a, b) = sqrt(mean_h (a_h - b_h)^2)

while the DBI scatter term sums squared differences over attributes without
that 1/H factor. Both are kept exactly as defined, so DBI is not invariant
to the attribute count.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .errors import (
    CoincidentCentres,
    EmptyCluster,
    EmptySet,
    FewerThanTwoEligibleClusters,
    LengthMismatch,
    LoadFlexError,
    SingleCluster,
)
from .features import FeatureMatrix
from .kmeans import Clustering

Matrix = Union[FeatureMatrix, np.ndarray]

EXCLUDE = "exclude"
SUPPRESS = "suppress"
POLICIES = (EXCLUDE, SUPPRESS)

# diagnostic flags
SINGLETON_PRESENT = "SingletonClusterPresent"
COINCIDENT_CENTRES = "CoincidentCentres"
DBI_SUPPRESSED = "DbiSuppressed"
OUT_OF_RANGE = "OutOfRangeDistance"
SINGLE_CLUSTER = "SingleCluster"
FEW_ELIGIBLE = "FewerThanTwoEligibleClusters"

INDEX_NAMES = ("mia", "cdi", "smi", "dbi", "ball")


def _rows(matrix: Matrix) -> np.ndarray:
    x = matrix.rows if isinstance(matrix, FeatureMatrix) else np.asarray(matrix, dtype=float)
    return x.reshape(-1, 1) if x.ndim == 1 else x


def profile_distance(a, b) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise LengthMismatch(f"vectors of length {a.size} and {b.size}")
    if a.size == 0:
        raise LengthMismatch("vectors must have at least one attribute")
    diff = a - b
    return math.sqrt(float(diff @ diff) / a.size)


def _sq_profile_distances(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - y[None, :, :]
    return np.einsum("nph,nph->np", diff, diff) / x.shape[1]


def infra_set_distance(members) -> float:
    """Root of half the mean squared distance over all ordered pairs (self-pairs included)."""
    s = np.asarray(members, dtype=float)
    if s.ndim == 1:
        s = s.reshape(-1, 1)
    n = s.shape[0]
    if n == 0:
        raise EmptySet("infra-set distance of an empty set")
    return math.sqrt(float(_sq_profile_distances(s, s).sum()) / (2 * n))


def scatter(members, centre) -> float:
    """Root mean (over members) of the summed squared attribute deviations from ``centre``."""
    r = np.asarray(members, dtype=float)
    if r.ndim == 1:
        r = r.reshape(-1, 1)
    if r.shape[0] == 0:
        raise EmptyCluster("scatter of an empty cluster")
    c = np.asarray(centre, dtype=float).ravel()
    if c.size != r.shape[1]:
        raise LengthMismatch(f"centre has {c.size} attributes, members have {r.shape[1]}")
    diff = r - c
    return math.sqrt(float(np.einsum("rh,rh->", diff, diff)) / r.shape[0])


def _member_sq_sum(c: Clustering, x: np.ndarray) -> float:
    # sum over clusters and members of d^2(member, centre)
    diff = x - c.centres[c.assignments]
    return float(np.einsum("mh,mh->", diff, diff)) / x.shape[1]


def ball(c: Clustering, matrix: Matrix) -> float:
    return _member_sq_sum(c, _rows(matrix)) / c.k


def mia(c: Clustering, matrix: Matrix) -> float:
    x = _rows(matrix)
    per_cluster = [
        _sq_profile_distances(x[c.assignments == j], c.centres[j : j + 1]).sum() for j in range(c.k)
    ]
    return math.sqrt(math.fsum(per_cluster) / c.k)


def cdi(c: Clustering, matrix: Matrix) -> float:
    if c.k < 2:
        raise SingleCluster("CDI needs at least two clusters")
    x = _rows(matrix)
    between = infra_set_distance(c.centres)
    if between == 0.0:
        raise CoincidentCentres("all cluster centres coincide")
    within = [infra_set_distance(x[c.assignments == j]) ** 2 for j in range(c.k)]
    return math.sqrt(math.fsum(within) / c.k) / between


def similarity(d: float) -> float:
    """Centre similarity 1 / (1 - 1/ln d), with limits 1 at d = 0 and 0 at d = 1."""
    if d == 0.0:
        return 1.0
    if d == 1.0:
        return 0.0
    denom = 1.0 - 1.0 / math.log(d)
    if denom == 0.0:  # d == e
        return math.inf
    return 1.0 / denom


def smi_with_flags(c: Clustering) -> tuple[float, frozenset[str]]:
    if c.k < 2:
        raise SingleCluster("SMI needs at least two clusters")
    d = np.sqrt(_sq_profile_distances(c.centres, c.centres))
    flags = set()
    best = -math.inf
    for i in range(1, c.k):
        for j in range(i):
            dij = float(d[i, j])
            if dij > 1.0:
                flags.add(OUT_OF_RANGE)
            best = max(best, similarity(dij))
    return best, frozenset(flags)


def smi(c: Clustering) -> float:
    return smi_with_flags(c)[0]


def _dbi_over(x: np.ndarray, c: Clustering, clusters: list[int]) -> float:
    centres = c.centres[clusters]
    d = np.sqrt(_sq_profile_distances(centres, centres))
    n = len(clusters)
    if np.any(d[~np.eye(n, dtype=bool)] == 0.0):
        raise CoincidentCentres("two cluster centres coincide")
    scat = [scatter(x[c.assignments == j], c.centres[j]) for j in clusters]
    total = 0.0
    for j in range(n):
        total += max((scat[i] + scat[j]) / d[i, j] for i in range(n) if i != j)
    return float(total) / n


def dbi(c: Clustering, matrix: Matrix, policy: str = EXCLUDE) -> Optional[float]:
    return dbi_with_flags(c, matrix, policy)[0]


def dbi_with_flags(
    c: Clustering, matrix: Matrix, policy: str = EXCLUDE
) -> tuple[Optional[float], frozenset[str]]:
    """Davies-Bouldin index and diagnostic flags.

    Clusters with a single member make the index misleading. Under
    ``"exclude"`` they are treated as outliers and left out; under
    ``"suppress"`` the index is withheld (returned as ``None``).
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown singleton policy {policy!r}")
    if c.k < 2:
        raise SingleCluster("DBI needs at least two clusters")
    x = _rows(matrix)
    sizes = np.bincount(c.assignments, minlength=c.k)
    eligible = [j for j in range(c.k) if sizes[j] >= 2]
    if len(eligible) == c.k:
        return _dbi_over(x, c, eligible), frozenset()
    flags = {SINGLETON_PRESENT}
    if policy == SUPPRESS:
        flags.add(DBI_SUPPRESSED)
        return None, frozenset(flags)
    if len(eligible) < 2:
        raise FewerThanTwoEligibleClusters(f"only {len(eligible)} cluster(s) with 2+ members")
    return _dbi_over(x, c, eligible), frozenset(flags)


@dataclass(frozen=True)
class IndexReport:
    mia: float
    cdi: Optional[float]
    smi: Optional[float]
    dbi: Optional[float]
    ball: float
    k: int
    h: int
    flags: frozenset[str] = field(default_factory=frozenset)

    def values(self) -> dict[str, Optional[float]]:
        return {name: getattr(self, name) for name in INDEX_NAMES}

    def to_dict(self) -> dict:
        out = dict(self.values())
        out.update(k=self.k, h=self.h, flags=sorted(self.flags))
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "IndexReport":
        return cls(
            mia=d["mia"],
            cdi=d["cdi"],
            smi=d["smi"],
            dbi=d["dbi"],
            ball=d["ball"],
            k=int(d["k"]),
            h=int(d["h"]),
            flags=frozenset(d.get("flags", ())),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def adjust_for_attribute_count(report: IndexReport) -> IndexReport:
    """Every index divided by the attribute count ``h``."""
    if report.h < 1:
        raise ValueError("attribute count must be >= 1")
    scaled = {k: (None if v is None else v / report.h) for k, v in report.values().items()}
    return replace(report, **scaled)


def index_report(c: Clustering, matrix: Matrix, policy: str = SUPPRESS) -> IndexReport:
    """All five indexes; undefined ones are ``None`` with the reason in ``flags``."""
    x = _rows(matrix)
    if c.assignments.shape[0] != x.shape[0] or c.centres.shape[1] != x.shape[1]:
        raise LengthMismatch("clustering does not match the matrix")
    flags: set[str] = set()

    def guarded(fn):
        try:
            return fn()
        except LoadFlexError as exc:
            flags.add(type(exc).__name__)
            return None

    b = ball(c, x)
    m = mia(c, x)
    cdi_v = guarded(lambda: cdi(c, x))
    smi_pair = guarded(lambda: smi_with_flags(c))
    smi_v = None
    if smi_pair is not None:
        smi_v, smi_flags = smi_pair
        flags |= smi_flags
    dbi_pair = guarded(lambda: dbi_with_flags(c, x, policy))
    dbi_v = None
    if dbi_pair is not None:
        dbi_v, dbi_flags = dbi_pair
        flags |= dbi_flags
    elif np.any(np.bincount(c.assignments, minlength=c.k) == 1):
        flags.add(SINGLETON_PRESENT)
    return IndexReport(
        mia=m, cdi=cdi_v, smi=smi_v, dbi=dbi_v, ball=b, k=c.k, h=x.shape[1], flags=frozenset(flags)
    )
