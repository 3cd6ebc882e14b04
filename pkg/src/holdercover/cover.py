"""Hölder graph covers of sets of small box dimension.

The pipeline, for a finite sample A and a plane V:

* pair up the level-n cubes of a dyadic cover that are far apart
  (``build_pair_families``),
* mark every net cell that may contain a direction joining two such cubes
  (``accumulate_exceptional``) and estimate the content of the marked set,
* for an unmarked V, certify that projection to V^perp separates far pairs and
  that the inverse is Hölder at small scales (``injectivity_certificate``),
* read off the graph map, measure its Hölder constant and extend it to all of
  V^perp by infimal convolution.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from .directions import (
    GrassmannNet,
    KPlane,
    MeshError,
    angle_mask,
    content_estimate,
    pair_angle_bound,
)
from .lattice import PointSample, ScaleCover, fit_log_slope

__all__ = [
    "CoverParams",
    "PairFamily",
    "ExceptionalReport",
    "HolderCertificate",
    "GraphFunction",
    "NonInjectiveError",
    "ConeResult",
    "build_pair_families",
    "accumulate_exceptional",
    "injectivity_certificate",
    "build_graph_function",
    "holder_constant",
    "holder_extend",
    "lipschitz_from_cone",
    "en_witness",
    "pair_index",
]

log = logging.getLogger(__name__)

CERT_CONSTANT = 3.0


@dataclass(frozen=True)
class CoverParams:
    """Exponents for the cover: target dimension t, content exponent w, levels n0..nmax."""

    d: int
    k: int
    t: float
    w: float
    n0: int
    nmax: int

    def __post_init__(self):
        d, k, t, w = self.d, self.k, self.t, self.w
        if not 0 < k < d:
            raise ValueError("need 0 < k < d")
        if not 0 < t < (d - k) / 2:
            raise ValueError(f"t={t} must lie in (0, {(d - k) / 2})")
        if not self.g + 2 * t < w < k * (d - k):
            raise ValueError(f"w={w} must lie in ({self.g + 2 * t}, {k * (d - k)})")
        if not 0 <= self.n0 <= self.nmax:
            raise ValueError("need 0 <= n0 <= nmax")

    @property
    def g(self) -> int:
        return (self.k - 1) * (self.d - self.k)

    @property
    def alpha(self) -> float:
        return 1.0 - 2.0 * self.t / (self.w - self.g)

    @property
    def levels(self) -> range:
        return range(self.n0, self.nmax + 1)

    def separation(self, n: int) -> float:
        """Minimum distance between paired cubes at level n."""
        return 2.0 * 2.0 ** (-self.alpha * n)

    def as_dict(self) -> dict:
        return {"d": self.d, "k": self.k, "t": self.t, "w": self.w, "n0": self.n0,
                "nmax": self.nmax, "g": self.g, "alpha": self.alpha}


def pair_index(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays (i, j), i < j, in the order used by ``scipy.spatial.distance.pdist``."""
    return np.triu_indices(m, k=1)


@dataclass
class PairFamily:
    level: int
    centers: np.ndarray
    pairs: np.ndarray
    distances: np.ndarray
    radius: float

    def __len__(self) -> int:
        return self.pairs.shape[0]

    def directions(self) -> np.ndarray:
        diff = self.centers[self.pairs[:, 1]] - self.centers[self.pairs[:, 0]]
        return diff / np.linalg.norm(diff, axis=1, keepdims=True)


def build_pair_families(cover: ScaleCover, params: CoverParams) -> list[PairFamily]:
    """Pairs of level-n cubes whose set distance is at least ``params.separation(n)``.

    The set distance is bounded below by the centre distance minus both
    circumradii; each unordered pair is stored once.
    """
    if cover.base != 2:
        raise ValueError("pair families use dyadic covers")
    out = []
    for n in params.levels:
        if n not in cover.families:
            raise ValueError(f"cover has no level {n}")
        centers = cover.centers(n)
        cr = cover.circumradius(n)
        if centers.shape[0] == 0:
            log.warning("empty cover at level %d", n)
        if centers.shape[0] < 2:
            out.append(PairFamily(n, centers, np.empty((0, 2), dtype=np.int64), np.empty(0), cr))
            continue
        dist = pdist(centers) - 2.0 * cr
        i, j = pair_index(centers.shape[0])
        keep = dist >= params.separation(n)
        out.append(PairFamily(n, centers, np.stack([i[keep], j[keep]], axis=1), dist[keep], cr))
    return out


@dataclass
class ExceptionalReport:
    params: CoverParams
    levels: list[int]
    cells: dict[int, np.ndarray]
    content: dict[int, float]
    tail_content: dict[int, float]
    pair_counts: dict[int, int]
    min_delta: float = math.inf

    def flagged(self, levels=None) -> np.ndarray:
        levels = self.levels if levels is None else levels
        ids = [self.cells[n] for n in levels]
        return np.unique(np.concatenate(ids)) if ids else np.empty(0, dtype=np.int64)

    def decay_exponent(self) -> float:
        """Slope of log2(content) against n over the levels with positive content.

        Returns -inf when every level has zero content (nothing to decay from)
        and nan when fewer than two levels are positive.
        """
        pos = [n for n in self.levels if self.content[n] > 0]
        if not pos:
            return -math.inf
        if len(pos) < 2:
            return math.nan
        slope, _, _ = fit_log_slope(np.asarray(pos) * math.log(2), [self.content[n] for n in pos])
        return slope

    def as_dict(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "levels": self.levels,
            "pair_counts": {str(n): self.pair_counts[n] for n in self.levels},
            "flagged_cells": {str(n): int(self.cells[n].size) for n in self.levels},
            "content": {str(n): self.content[n] for n in self.levels},
            "tail_content": {str(n): self.tail_content[n] for n in self.levels},
            "decay_exponent": _json_float(self.decay_exponent()),
        }


def _json_float(x: float):
    if math.isfinite(x):
        return x
    return str(x)


def accumulate_exceptional(families: list[PairFamily], net: GrassmannNet, params: CoverParams,
                           chunk: int = 4096) -> ExceptionalReport:
    """Net cells that may contain a direction joining the doubled cubes of a pair.

    For a pair at level n the doubled cubes are treated as balls of radius
    r = 2 * 2^-n and the set distance R as the separation, so every joining
    direction is within 4 r / R of the centre line.
    """
    if net.d != params.d or net.k != params.k:
        raise ValueError("net and params disagree on (d, k)")
    cells, content, counts = {}, {}, {}
    min_delta = math.inf
    for fam in families:
        n = fam.level
        counts[n] = len(fam)
        mask = np.zeros(len(net), dtype=bool)
        if len(fam):
            r = 2.0 * 2.0 ** (-n)
            deltas = np.array([pair_angle_bound(r, R) for R in fam.distances])
            min_delta = min(min_delta, float(deltas.min()))
            if net.epsilon > deltas.min():
                raise MeshError(f"net mesh {net.epsilon} exceeds the smallest angle {deltas.min():.4g} at level {n}")
            dirs = fam.directions()
            for s in range(0, len(fam), chunk):
                mask |= angle_mask(net, dirs[s:s + chunk], deltas[s:s + chunk]).any(axis=0)
        cells[n] = np.flatnonzero(mask)
        content[n] = content_estimate(net, cells[n], params.w)
        net.mark(cells[n].tolist())
    levels = [f.level for f in families]
    tail = {}
    acc = np.empty(0, dtype=np.int64)
    for n in reversed(levels):
        acc = np.union1d(acc, cells[n])
        tail[n] = content_estimate(net, acc, params.w)
    return ExceptionalReport(params, levels, cells, content, tail, counts, min_delta)


# ---------------------------------------------------------------------------
# graph maps


class NonInjectiveError(ValueError):
    def __init__(self, pair, message="projection is not injective on the sample"):
        super().__init__(f"{message}: points {pair[0]} and {pair[1]}")
        self.pair = pair


@dataclass
class GraphFunction:
    """Partial map from P(A) (coordinates in V^perp) to V-coordinates."""

    keys: np.ndarray
    values: np.ndarray
    plane: KPlane | None = None

    def __post_init__(self):
        self.keys = np.asarray(self.keys, dtype=float).reshape(len(self.keys), -1)
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.values), -1)
        if self.keys.shape[0] != self.values.shape[0] or self.keys.shape[0] == 0:
            raise ValueError("need matching, nonempty keys and values")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "GraphFunction":
        keys = [np.atleast_1d(np.asarray(k, dtype=float)) for k in mapping]
        return cls(np.array(keys), np.array([np.atleast_1d(v) for v in mapping.values()], dtype=float))

    def __len__(self) -> int:
        return self.keys.shape[0]

    def check_keys(self, tol: float = 0.0) -> None:
        if len(self) > 1:
            dist = pdist(self.keys)
            bad = np.flatnonzero(dist <= tol)
            if bad.size:
                i, j = pair_index(len(self))
                raise NonInjectiveError((int(i[bad[0]]), int(j[bad[0]])), "duplicate keys")


def _as_graph(fmap) -> GraphFunction:
    return fmap if isinstance(fmap, GraphFunction) else GraphFunction.from_mapping(fmap)


def build_graph_function(sample: PointSample | np.ndarray, V: KPlane, tol: float = 1e-12) -> GraphFunction:
    """Write the sample as a graph over V^perp: key P(x), value x - P(x) in V's frame."""
    x = sample.as_float() if isinstance(sample, PointSample) else np.asarray(sample, dtype=float)
    keys = x @ V.complement_frame().T
    g = GraphFunction(keys, x @ V.frame.T, V)
    try:
        g.check_keys(tol)
    except NonInjectiveError as exc:
        raise NonInjectiveError(exc.pair) from None
    return g


def _holder_ratios(g: GraphFunction, alpha: float) -> np.ndarray:
    du = pdist(g.keys)
    if np.any(du == 0):
        g.check_keys()
    dv = np.stack([pdist(g.values[:, [c]], "chebyshev") for c in range(g.values.shape[1])], axis=1)
    return dv / (du**alpha)[:, None]


def holder_constant(fmap, alpha: float, componentwise: bool = False):
    """Smallest C with |f(u) - f(u')| <= C |u - u'|^alpha over the stored keys.

    Values are compared in the max norm; with ``componentwise`` one constant
    per coordinate of V is returned.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    g = _as_graph(fmap)
    kdim = g.values.shape[1]
    if len(g) == 1:
        return np.zeros(kdim) if componentwise else 0.0
    ratios = _holder_ratios(g, alpha)
    per = ratios.max(axis=0)
    return per if componentwise else float(per.max())


def holder_extend(fmap, alpha: float, C, y) -> np.ndarray:
    """Infimal convolution f~_i(y) = min_z f_i(z) + C_i |y - z|^alpha.

    ``y`` is one query point or an (m, d - k) stack; the result has one row per
    query.  At a stored key the stored value is returned: the infimum is
    attained there.
    """
    g = _as_graph(fmap)
    kdim = g.values.shape[1]
    C = np.broadcast_to(np.asarray(C, dtype=float), (kdim,))
    need = holder_constant(g, alpha, componentwise=True)
    if np.any(C < need * (1 - 1e-12)):
        raise ValueError(f"constant {C} is below the Hölder constant {need} of the data")
    y = np.asarray(y, dtype=float)
    single = y.ndim == 0 or (y.ndim == 1 and y.size == g.keys.shape[1])
    q = y.reshape(-1, g.keys.shape[1])
    dist = np.linalg.norm(q[:, None, :] - g.keys[None, :, :], axis=2)
    terms = g.values[None, :, :] + C[None, None, :] * (dist**alpha)[:, :, None]
    out = terms.min(axis=1)
    hit = dist == 0
    rows = np.flatnonzero(hit.any(axis=1))
    out[rows] = g.values[hit[rows].argmax(axis=1)]
    return out[0] if single else out


# ---------------------------------------------------------------------------
# certificates


@dataclass
class HolderCertificate:
    plane: KPlane
    alpha: float
    constant: float
    n0: int
    nmax: int
    pairs_checked: int
    passed: bool
    scales: dict[int, dict] = field(default_factory=dict)
    witness: tuple[int, int] | None = None
    reason: str | None = None

    def as_dict(self) -> dict:
        return {
            "plane": self.plane.frame.tolist(),
            "alpha": self.alpha,
            "constant": self.constant,
            "n0": self.n0,
            "nmax": self.nmax,
            "pairs_checked": self.pairs_checked,
            "passed": self.passed,
            "scales": {str(n): v for n, v in self.scales.items()},
            "witness": list(self.witness) if self.witness else None,
            "reason": self.reason,
        }


def injectivity_certificate(sample: PointSample | np.ndarray, V: KPlane, params: CoverParams,
                            exceptional: ExceptionalReport | None = None,
                            net: GrassmannNet | None = None, tol: float = 1e-12) -> HolderCertificate:
    """Check the separation and small-scale Hölder bounds for projection to V^perp.

    For every pair and every level n in [n0, nmax]:

    * if |x - x'| >= 3 * 2^(-alpha n) then |P x - P x'| >= 2 * 2^-n;
    * if 2^-n <= |P x - P x'| < 2 * 2^-n then |x - x'| <= 3 |P x - P x'|^alpha;

    and P must be injective on the sample.  The first violating pair, in
    lexicographic order, is the witness.
    """
    if exceptional is not None:
        if net is None:
            raise ValueError("pass the net used for the exceptional report")
        cell, _ = net.nearest(V)
        if cell in set(exceptional.flagged().tolist()):
            raise ValueError(f"plane lies in flagged cell {cell}; the certificate does not apply")
    x = sample.as_float() if isinstance(sample, PointSample) else np.asarray(sample, dtype=float)
    m = x.shape[0]
    alpha = params.alpha
    cert = HolderCertificate(V, alpha, CERT_CONSTANT, params.n0, params.nmax, m * (m - 1) // 2, True)
    if m < 2:
        return cert
    full = pdist(x)
    proj = pdist(x @ V.complement_frame().T)
    i, j = pair_index(m)
    bad = np.zeros(full.shape, dtype=bool)
    reasons = np.full(full.shape, "", dtype=object)

    collide = proj <= tol * max(1.0, float(full.max()))
    bad |= collide
    reasons[collide] = "projection not injective"
    for n in params.levels:
        far = full >= CERT_CONSTANT * 2.0 ** (-alpha * n)
        sep_fail = far & (proj < 2.0 * 2.0**-n)
        regime = (proj >= 2.0**-n) & (proj < 2.0 * 2.0**-n)
        hol_fail = regime & (full > CERT_CONSTANT * proj**alpha)
        cert.scales[n] = {
            "separation_pairs": int(far.sum()),
            "separation_failures": int(sep_fail.sum()),
            "holder_pairs": int(regime.sum()),
            "holder_failures": int(hol_fail.sum()),
        }
        reasons[sep_fail & ~bad] = f"separation fails at level {n}"
        bad |= sep_fail
        reasons[hol_fail & ~bad] = f"Hölder bound fails at level {n}"
        bad |= hol_fail
    if bad.any():
        first = int(np.flatnonzero(bad)[0])
        cert.passed = False
        cert.witness = (int(i[first]), int(j[first]))
        cert.reason = str(reasons[first])
    return cert


@dataclass
class ConeResult:
    lipschitz: float | None
    witness: tuple[int, int] | None = None
    angle: float | None = None

    @property
    def ok(self) -> bool:
        return self.witness is None


def lipschitz_from_cone(sample: PointSample | np.ndarray, V: KPlane, eps: float,
                        tol: float = 1e-12) -> ConeResult:
    """Lipschitz graph over V^perp when no pair direction is within angle ``eps`` of V.

    Otherwise the first pair (lexicographic) whose direction makes an angle
    below ``eps`` with V is returned as the witness.
    """
    if not 0 < eps < math.pi / 2:
        raise ValueError("eps must lie in (0, pi/2)")
    x = sample.as_float() if isinstance(sample, PointSample) else np.asarray(sample, dtype=float)
    m = x.shape[0]
    if m < 2:
        return ConeResult(0.0)
    i, j = pair_index(m)
    diff = x[j] - x[i]
    length = np.linalg.norm(diff, axis=1)
    along = np.linalg.norm(diff @ V.frame.T, axis=1)
    angle = np.arccos(np.clip(along / length, 0.0, 1.0))
    bad = np.flatnonzero(angle < eps - tol)
    if bad.size:
        b = int(bad[0])
        return ConeResult(None, (int(i[b]), int(j[b])), float(angle[b]))
    across = np.sqrt(np.clip(length**2 - along**2, 0.0, None))
    return ConeResult(float(np.max(along / across)))


def en_witness(sample: PointSample | np.ndarray, V: KPlane, N: int) -> tuple[int, int] | None:
    """First pair with |x - y| > N |P(x - y)|^(1/N) and |P(x - y)| < 1.

    P projects to V^perp, so a pair whose direction lies in V is a witness
    for every N.  Pairs are scanned in lexicographic order.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    x = sample.as_float() if isinstance(sample, PointSample) else np.asarray(sample, dtype=float)
    m = x.shape[0]
    if m < 2:
        return None
    full = pdist(x)
    proj = pdist(x @ V.complement_frame().T)
    hit = np.flatnonzero((full > N * proj ** (1.0 / N)) & (proj < 1.0))
    if hit.size == 0:
        return None
    i, j = pair_index(m)
    return int(i[hit[0]]), int(j[hit[0]])


def report_json(exceptional: ExceptionalReport, certificates: list[HolderCertificate]) -> str:
    payload = exceptional.as_dict()
    payload["certificates"] = [c.as_dict() for c in certificates]
    payload["passed"] = all(c.passed for c in certificates)
    payload["witnesses"] = [list(c.witness) for c in certificates if c.witness]
    return json.dumps(payload, sort_keys=True)
