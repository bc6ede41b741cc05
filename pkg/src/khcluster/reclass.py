"""Closed-form changes of the total squared error under subset reclassification.

Moving k points with mean I out of a donor cluster (n1 points, centroid I1)
into an acceptor cluster (n2 points, centroid I2) changes the total squared
error by an amount that depends only on (k, I, n1, I1, n2, I2). These
functions evaluate that change exactly from cluster statistics, without
touching the points. The move improves the partition precisely when
|I - I1| > alpha * |I - I2| for the scale factor alpha below, which is the
strict sharpening of the nearest-centroid rule that plain K-means uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (ClusterStats, InternalConsistencyError, PreconditionError,
                   squared_distances)

# Moves whose predicted |delta| falls below move_tolerance() are treated as
# non-improving; engines and predicates share this scale.
TOLERANCE_SCALE = 1e-12


def move_tolerance(energy_scale: float) -> float:
    """Acceptance threshold for a move, relative to a squared-error magnitude."""
    return TOLERANCE_SCALE * (1.0 + energy_scale)


@dataclass(frozen=True)
class DeltaE:
    """A predicted change of the total squared error."""

    value: float
    kind: str  # "merge" or "correct"

    def __post_init__(self):
        if self.kind not in ("merge", "correct"):
            raise PreconditionError(f"unknown delta kind {self.kind!r}")
        if self.kind == "merge" and self.value < 0.0:
            raise InternalConsistencyError("a merge can never lower the total error")


def _require_cluster(stats: ClusterStats, name: str) -> None:
    if stats.n < 1:
        raise PreconditionError(f"{name} cluster must be nonempty")


def delta_e_merge(a: ClusterStats, b: ClusterStats) -> float:
    """Error increase from replacing clusters a and b by their union.

    Equals |Ia - Ib|^2 * (na*nb / (na+nb)), always nonnegative and zero
    exactly when the centroids coincide.
    """
    _require_cluster(a, "first")
    _require_cluster(b, "second")
    diff = a.centroid - b.centroid
    return float((diff @ diff) * (a.n * b.n / (a.n + b.n)))


def delta_e_correct(sub: ClusterStats, donor: ClusterStats, acceptor: ClusterStats) -> float:
    """Error change from moving a proper subset out of donor into acceptor.

    Negative values mean the move improves the partition. The subset
    statistics must be a true sub-statistic of the donor; only the size
    relation is checked here.
    """
    k, n1, n2 = sub.n, donor.n, acceptor.n
    if k < 1:
        raise PreconditionError("subset must be nonempty")
    _require_cluster(donor, "donor")
    _require_cluster(acceptor, "acceptor")
    if k > n1:
        raise PreconditionError("subset is larger than its donor cluster")
    if k == n1:
        raise PreconditionError("subset equals the donor cluster; use delta_e_merge")
    i = sub.centroid
    da = i - acceptor.centroid
    dd = i - donor.centroid
    return float((da @ da) * (k * n2 / (k + n2)) - (dd @ dd) * (k * n1 / (n1 - k)))


def reclass_delta(sub: ClusterStats, donor: ClusterStats, acceptor: ClusterStats) -> DeltaE:
    """Dispatch on the subset size: a full-cluster transfer is a merge."""
    if sub.n == donor.n:
        return DeltaE(delta_e_merge(donor, acceptor), "merge")
    return DeltaE(delta_e_correct(sub, donor, acceptor), "correct")


def _alpha_squared(k: int, n1: int, n2: int) -> float:
    return n2 * (n1 - k) / (n1 * (n2 + k))


def alpha(k: int, n1: int, n2: int) -> float:
    """Scale factor on the acceptor distance in the improvement test.

    Lies in [0, 1), decreases strictly in the subset size k, and vanishes
    at k = n1, where the move degenerates into a merge.
    """
    if not 1 <= k <= n1:
        raise PreconditionError("subset size must satisfy 1 <= k <= n1")
    if n2 < 1:
        raise PreconditionError("acceptor cluster must be nonempty")
    return math.sqrt(_alpha_squared(k, n1, n2))


def correction_improves(sub: ClusterStats, donor: ClusterStats, acceptor: ClusterStats) -> bool:
    """True iff moving the subset strictly lowers the total error.

    Evaluated through squared norms, no square roots: the move improves
    iff |I - I1|^2 > alpha^2 * |I - I2|^2 beyond the shared move tolerance.
    Agrees with the sign of delta_e_correct outside that tolerance band.
    """
    k, n1, n2 = sub.n, donor.n, acceptor.n
    if k < 1 or n1 < 1 or n2 < 1:
        raise PreconditionError("empty cluster in improvement test")
    if k >= n1:
        raise PreconditionError("improvement test needs a proper subset of the donor")
    i = sub.centroid
    dd = i - donor.centroid
    da = i - acceptor.centroid
    home_sq = float(dd @ dd)
    away_sq = float(da @ da)
    tau = move_tolerance(donor.energy + acceptor.energy)
    # delta_e_correct < -tau, rearranged to avoid the difference of fractions
    return home_sq - _alpha_squared(k, n1, n2) * away_sq > tau * (n1 - k) / (k * n1)


def is_stable_move(sub: ClusterStats, donor: ClusterStats, acceptor: ClusterStats) -> bool:
    """True iff the move does not improve the partition."""
    return not correction_improves(sub, donor, acceptor)


def merge_many(clusters: list[ClusterStats]) -> float:
    """Error increase from replacing several clusters by their union.

    Equals sum over pairs of ni*nj*|Ii - Ij|^2, divided by the total count.
    """
    if len(clusters) < 2:
        raise PreconditionError("merging needs at least two clusters")
    for c in clusters:
        _require_cluster(c, "every")
    ns = np.array([c.n for c in clusters], dtype=np.float64)
    cents = np.stack([c.centroid for c in clusters])
    d2 = squared_distances(cents, cents)
    iu, ju = np.triu_indices(len(clusters), k=1)
    num = float((ns[iu] * ns[ju] * d2[iu, ju]).sum())
    return num / float(ns.sum())


def gap_identity(sub: ClusterStats, donor: ClusterStats, acceptor: ClusterStats) -> float:
    """The exact gap delta_merge(donor, acceptor) - delta_correct(sub, ...).

    Computed as the perfect square
    |alpha*(I - I2) - (I - I1)/alpha|^2 * (n1*n2 / (n1+n2)),
    hence nonnegative: correcting a proper subset never costs more than
    merging the whole donor into the acceptor.
    """
    k, n1, n2 = sub.n, donor.n, acceptor.n
    if not 1 <= k < n1:
        raise PreconditionError("gap is defined for proper subsets of the donor")
    _require_cluster(acceptor, "acceptor")
    a = alpha(k, n1, n2)
    i = sub.centroid
    v = a * (i - acceptor.centroid) - (i - donor.centroid) / a
    return float((v @ v) * (n1 * n2 / (n1 + n2)))
