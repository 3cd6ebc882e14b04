"""Directions, k-planes and finite nets of the Grassmannian G(d, k).

Planes are stored as orthonormal frames of shape ``(k, d)``.  The distance
between planes is the operator norm of the difference of their orthogonal
projections; for planes of equal dimension this is the sine of the largest
principal angle, which is how the batched routines evaluate it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

__all__ = [
    "BoundNotApplicable",
    "MeshError",
    "NetAuditError",
    "ProjectivePoint",
    "KPlane",
    "GrassmannNet",
    "canonical",
    "direction_of_pair",
    "grassmann_metric",
    "line_plane_angle",
    "pair_angle_bound",
    "random_planes",
    "plane_distances",
    "build_net",
    "angle_neighborhood",
    "angle_mask",
    "content_estimate",
    "ANGLE_CONSTANT",
]

ANGLE_CONSTANT = 4.0
_ZERO = 1e-12


class BoundNotApplicable(ValueError):
    """The pair separation is too small for the explicit angle bound."""


class MeshError(ValueError):
    """A grid or net is too coarse for the radius it is asked to resolve."""


class NetAuditError(RuntimeError):
    pass


def canonical(v) -> np.ndarray:
    """Unit vector with first (numerically) nonzero coordinate positive."""
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("zero vector has no direction")
    v = v / norm
    nz = np.flatnonzero(np.abs(v) > _ZERO)
    if v[nz[0]] < 0:
        v = -v
    return v


@dataclass(frozen=True, eq=False)
class ProjectivePoint:
    """A line through the origin, i.e. a point of G(d, 1)."""

    vector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vector", canonical(self.vector))

    @property
    def dim(self) -> int:
        return self.vector.shape[0]

    def as_plane(self) -> "KPlane":
        return KPlane(self.vector[None, :])

    def __eq__(self, other):
        return isinstance(other, ProjectivePoint) and np.allclose(self.vector, other.vector, atol=1e-12)

    def __repr__(self):
        return f"ProjectivePoint({np.array2string(self.vector, precision=6)})"


@dataclass(frozen=True, eq=False)
class KPlane:
    """A k-dimensional subspace given by an orthonormal frame (rows)."""

    frame: np.ndarray

    def __post_init__(self):
        f = np.atleast_2d(np.asarray(self.frame, dtype=float))
        gram = f @ f.T
        if not np.allclose(gram, np.eye(f.shape[0]), atol=1e-10):
            raise ValueError("frame rows are not orthonormal; use KPlane.span")
        object.__setattr__(self, "frame", f)

    @classmethod
    def span(cls, *vectors) -> "KPlane":
        a = np.atleast_2d(np.asarray(vectors, dtype=float))
        if a.ndim == 3:
            a = a[0]
        q, r = np.linalg.qr(a.T)
        if np.min(np.abs(np.diag(r))) < 1e-12:
            raise ValueError("vectors are linearly dependent")
        return cls(q.T)

    @property
    def k(self) -> int:
        return self.frame.shape[0]

    @property
    def d(self) -> int:
        return self.frame.shape[1]

    @property
    def projector(self) -> np.ndarray:
        return self.frame.T @ self.frame

    def complement_frame(self) -> np.ndarray:
        """Orthonormal basis of the orthogonal complement.

        Gram-Schmidt over the projected standard basis vectors, in order, so the
        basis is deterministic (for V = span{e2} in R^2 it is e1).
        """
        proj = np.eye(self.d) - self.projector
        basis: list[np.ndarray] = []
        for col in proj.T:
            v = col - sum((b @ col) * b for b in basis)
            n = np.linalg.norm(v)
            if n > 1e-8:
                basis.append(v / n)
            if len(basis) == self.d - self.k:
                break
        return np.array([canonical(b) for b in basis]).reshape(self.d - self.k, self.d)

    def __repr__(self):
        return f"KPlane(k={self.k}, d={self.d})"


def direction_of_pair(x, y) -> ProjectivePoint:
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if not np.any(diff):
        raise ValueError("x and y coincide; no direction is determined")
    return ProjectivePoint(diff)


def _check_same(V: KPlane, W: KPlane) -> None:
    if V.d != W.d or V.k != W.k:
        raise ValueError(f"planes differ in shape: G({V.d},{V.k}) vs G({W.d},{W.k})")


def grassmann_metric(V: KPlane, W: KPlane) -> float:
    """Operator norm of P_V - P_W."""
    _check_same(V, W)
    return float(np.linalg.norm(V.projector - W.projector, ord=2))


def line_plane_angle(ell: ProjectivePoint, V: KPlane) -> float:
    """Smallest angle between the line ``ell`` and vectors of ``V``, in [0, pi/2]."""
    if ell.dim != V.d:
        raise ValueError("dimension mismatch between line and plane")
    along = V.frame @ ell.vector
    perp = ell.vector - V.frame.T @ along
    return float(math.atan2(np.linalg.norm(perp), np.linalg.norm(along)))


def pair_angle_bound(r: float, R: float) -> float:
    """Explicit angle bound 4 r / R for directions joining two balls of radius r.

    R is the distance between the centres (any smaller value is also valid).
    Requires R >= 4 r.
    """
    if r < 0 or R <= 0:
        raise ValueError("need r >= 0 and R > 0")
    if R < ANGLE_CONSTANT * r:
        raise BoundNotApplicable(f"separation R={R:g} is below {ANGLE_CONSTANT:g} r = {ANGLE_CONSTANT * r:g}")
    return ANGLE_CONSTANT * r / R


def random_planes(d: int, k: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` Haar-random frames of shape (n, k, d)."""
    g = rng.standard_normal((n, d, k))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diagonal(r, axis1=1, axis2=2))[:, None, :]
    return np.transpose(q, (0, 2, 1))


def plane_distances(frame: np.ndarray, frames: np.ndarray) -> np.ndarray:
    """Distances from one frame (k, d) to a stack of frames (n, k, d)."""
    if frame.shape[0] == 1:
        c = np.abs(frames[:, 0, :] @ frame[0])
        return np.sqrt(np.clip(1.0 - c * c, 0.0, None))
    m = frames @ frame.T
    smin = np.linalg.svd(m, compute_uv=False)[:, -1]
    return np.sqrt(np.clip(1.0 - smin * smin, 0.0, None))


@dataclass
class GrassmannNet:
    """Finite cover of G(d, k) by rho-balls of radius ``epsilon`` around ``centers``."""

    d: int
    k: int
    epsilon: float
    centers: np.ndarray
    seed: int
    audit: dict = field(default_factory=dict)
    hits: np.ndarray = None
    _clusters: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.hits is None:
            self.hits = np.zeros(len(self), dtype=bool)

    def __len__(self) -> int:
        return self.centers.shape[0]

    @property
    def manifold_dim(self) -> int:
        return self.k * (self.d - self.k)

    @property
    def c_net(self) -> float:
        """Cell count normalized by epsilon^-k(d-k)."""
        return len(self) * self.epsilon**self.manifold_dim

    def plane(self, i: int) -> KPlane:
        return KPlane(self.centers[i])

    def mark(self, cells: Iterable[int]) -> None:
        """Set hit flags; idempotent."""
        self.hits[np.fromiter(cells, dtype=np.int64)] = True

    def nearest(self, V: KPlane) -> tuple[int, float]:
        dist = plane_distances(V.frame, self.centers)
        i = int(np.argmin(dist))
        return i, float(dist[i])

    def clusters(self, radius: float) -> np.ndarray:
        """Fixed partition of the cells into groups lying in one ball of ``radius``.

        Greedy in cell order: a cell joins the first earlier group centre within
        ``radius - epsilon``, so its whole cell lies in that centre's ball.
        """
        key = round(radius, 12)
        if key not in self._clusters:
            label = np.full(len(self), -1, dtype=np.int64)
            reach = radius - self.epsilon
            ngroups = 0
            for i in range(len(self)):
                if label[i] >= 0:
                    continue
                todo = np.flatnonzero(label < 0)
                dist = plane_distances(self.centers[i], self.centers[todo])
                label[todo[dist <= reach]] = ngroups
                label[i] = ngroups
                ngroups += 1
            self._clusters[key] = label
        return self._clusters[key]

    def to_json(self) -> str:
        payload = {
            "d": self.d,
            "k": self.k,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "cells": len(self),
            "c_net": self.c_net,
            "audit": self.audit,
            "frames": self.centers.tolist(),
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GrassmannNet":
        p = json.loads(text)
        return cls(p["d"], p["k"], p["epsilon"], np.asarray(p["frames"], dtype=float), p["seed"], p["audit"])


def _greedy_net(pool: np.ndarray, target: float) -> np.ndarray:
    chosen = [0]
    mind = plane_distances(pool[0], pool)
    while True:
        i = int(np.argmax(mind))
        if mind[i] <= target:
            break
        chosen.append(i)
        np.minimum(mind, plane_distances(pool[i], pool), out=mind)
    return pool[chosen]


def _covering_radius(centers: np.ndarray, samples: np.ndarray) -> float:
    best = np.full(samples.shape[0], np.inf)
    for c in centers:
        np.minimum(best, plane_distances(c, samples), out=best)
    return float(best.max())


def build_net(d: int, k: int, epsilon: float, seed: int = 0, pool_size: int | None = None,
              audit_size: int = 10_000, max_attempts: int = 3) -> GrassmannNet:
    """Greedy farthest-point net of G(d, k) with an audited covering radius.

    The greedy pass stops once the pool is covered at 0.85 epsilon; a fresh
    Haar sample then checks the covering radius against epsilon.  A failed
    audit retries with a four times larger pool.
    """
    if not 0 < epsilon:
        raise ValueError("epsilon must be positive")
    if not 0 < k < d:
        raise ValueError("need 0 < k < d")
    rng = np.random.default_rng(seed)
    dim = k * (d - k)
    if pool_size is None:
        pool_size = int(min(2_000_000, max(20_000, 200 * (1.0 / epsilon) ** dim)))
    if epsilon >= 1.0:
        # rho never exceeds 1, so one cell covers everything
        centers = random_planes(d, k, 1, rng)
        audit = {"samples": 0, "covering_radius": 1.0, "passed": True, "attempts": 1, "pool": 1}
        return GrassmannNet(d, k, float(epsilon), centers, seed, audit)
    for attempt in range(1, max_attempts + 1):
        pool = random_planes(d, k, pool_size, rng)
        centers = _greedy_net(pool, 0.85 * epsilon)
        samples = random_planes(d, k, audit_size, rng)
        radius = _covering_radius(centers, samples)
        if radius <= epsilon:
            audit = {"samples": audit_size, "covering_radius": radius, "passed": True,
                     "attempts": attempt, "pool": pool_size}
            return GrassmannNet(d, k, float(epsilon), centers, seed, audit)
        pool_size *= 4
    raise NetAuditError(f"covering audit failed {max_attempts} times (radius {radius:.4g} > {epsilon})")


def angle_mask(net: GrassmannNet, directions: np.ndarray, delta) -> np.ndarray:
    """Boolean (n_directions, n_cells) mask of cells within the inflated angle.

    ``directions`` are unit vectors (n, d); ``delta`` is a scalar or per-direction
    array.  A cell is kept when the angle to its centre is at most
    ``delta + arcsin(epsilon)``, which contains every plane of the true
    neighbourhood whose nearest centre lies within epsilon.
    """
    directions = np.atleast_2d(directions)
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (directions.shape[0],))
    reach = np.minimum(delta + math.asin(min(1.0, net.epsilon)), math.pi / 2)
    cos_reach = np.cos(reach)[:, None]
    proj = np.einsum("nkd,pd->pnk", net.centers, directions)
    c = np.sqrt(np.sum(proj * proj, axis=2))
    return c >= cos_reach - 1e-15


def angle_neighborhood(net: GrassmannNet, ell: ProjectivePoint, delta: float) -> set[int]:
    """Cells of the net that may hold a plane at angle <= delta from ``ell``."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    return set(np.flatnonzero(angle_mask(net, ell.vector[None, :], delta)[0]).tolist())


def _radii(epsilon: float) -> list[float]:
    out, r = [], epsilon
    while True:
        out.append(r)
        if r >= 1.0 + epsilon:
            return out
        r *= 2


def content_estimate(net: GrassmannNet, cells, w: float) -> float:
    """Upper estimate of the w-dimensional Hausdorff content of a union of cells.

    For each dyadic radius r >= epsilon the cells are grouped by the net's fixed
    greedy partition at r; every group lies in one ball of diameter min(2r, 1).
    The estimate is the smallest count * diameter^w over the radii.  Because
    the partition does not depend on ``cells`` the estimate is monotone in the
    cell set.
    """
    if not 0 < w <= net.manifold_dim:
        raise ValueError(f"w must lie in (0, {net.manifold_dim}]")
    ids = np.fromiter(cells, dtype=np.int64) if not isinstance(cells, np.ndarray) else cells
    if ids.dtype == bool:
        ids = np.flatnonzero(ids)
    if ids.size == 0:
        return 0.0
    best = math.inf
    for r in _radii(net.epsilon):
        groups = np.unique(net.clusters(r)[ids]).size
        best = min(best, groups * min(2.0 * r, 1.0) ** w)
    return best
