"""Base-b cube grids, exact point samples, multi-scale covers and box counting.

Points are stored as integer numerators over one common denominator, so the
level-n cube holding a point is an exact integer division.  Cubes are
half-open, ``[k b^-n, (k+1) b^-n)``, except that the right edge of ``[0, 1]``
belongs to the last cube.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "PrecisionError",
    "LatticeCube",
    "PointSample",
    "ScaleCover",
    "BoxDimensionFit",
    "cover_at_scale",
    "build_scale_cover",
    "box_dimension_estimate",
    "fit_log_slope",
    "generate_standard_set",
    "cantor1d",
    "corner_dust",
    "dense_direction_countable",
    "grid",
]

# cube indices are kept in int64
_INDEX_BITS = 62


class PrecisionError(ValueError):
    """Requested level cannot be indexed exactly."""


def _check_level(base: int, level: int) -> None:
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    if base not in (2, 3):
        raise ValueError(f"base must be 2 or 3, got {base}")
    if level * math.log2(base) >= _INDEX_BITS:
        raise PrecisionError(
            f"level {level} in base {base} exceeds the {_INDEX_BITS}-bit index budget"
        )


@dataclass(frozen=True, order=True)
class LatticeCube:
    base: int
    level: int
    coords: tuple[int, ...]

    def __post_init__(self):
        _check_level(self.base, self.level)
        n = self.base**self.level
        if any(c < 0 or c >= n for c in self.coords):
            raise ValueError(f"coords {self.coords} out of range for level {self.level}")

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def side(self) -> float:
        return float(self.base) ** -self.level

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.coords, dtype=float) + 0.5) * self.side

    @property
    def circumradius(self) -> float:
        """Half the diagonal: radius of the circumscribed ball."""
        return 0.5 * math.sqrt(self.dim) * self.side

    def parent(self) -> "LatticeCube":
        if self.level == 0:
            raise ValueError("level-0 cube has no parent")
        return LatticeCube(self.base, self.level - 1, tuple(c // self.base for c in self.coords))

    def ancestor(self, level: int) -> "LatticeCube":
        if not 0 <= level <= self.level:
            raise ValueError(f"no ancestor at level {level}")
        q = self.base ** (self.level - level)
        return LatticeCube(self.base, level, tuple(c // q for c in self.coords))

    def contains(self, other: "LatticeCube") -> bool:
        if other.base != self.base or other.level < self.level:
            return False
        return other.ancestor(self.level) == self


def _lcm(values: Iterable[int]) -> int:
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


@dataclass(frozen=True)
class PointSample:
    """Finite point set with exact rational coordinates.

    ``numerators[i, j] / denominator`` is coordinate j of point i.  The array
    is int64 when every intermediate product fits, object (Python int)
    otherwise.
    """

    numerators: np.ndarray
    denominator: int

    def __post_init__(self):
        num = self.numerators
        if num.ndim != 2 or num.shape[0] == 0 or num.shape[1] == 0:
            raise ValueError("a point sample needs a nonempty (m, d) array")
        if self.denominator <= 0:
            raise ValueError("denominator must be positive")

    @classmethod
    def from_points(cls, points: Sequence[Sequence]) -> "PointSample":
        rows = [[Fraction(c) for c in p] for p in points]
        if not rows:
            raise ValueError("a point sample needs at least one point")
        d = len(rows[0])
        if any(len(r) != d for r in rows):
            raise ValueError("points have inconsistent dimensions")
        den = _lcm(c.denominator for r in rows for c in r)
        ints = [[c.numerator * (den // c.denominator) for c in r] for r in rows]
        big = max(abs(v) for r in ints for v in r)
        dtype = np.int64 if max(big, den) < 2**62 else object
        return cls(np.array(ints, dtype=dtype), den)

    def __len__(self) -> int:
        return self.numerators.shape[0]

    @property
    def dim(self) -> int:
        return self.numerators.shape[1]

    def as_float(self) -> np.ndarray:
        if self.numerators.dtype == object:
            return np.array(
                [[float(Fraction(int(v), self.denominator)) for v in row] for row in self.numerators]
            )
        return self.numerators.astype(float) / self.denominator

    def as_fractions(self) -> list[tuple[Fraction, ...]]:
        return [tuple(Fraction(int(v), self.denominator) for v in row) for row in self.numerators]

    def in_unit_cube(self) -> bool:
        num = self.numerators
        return bool(np.all(num >= 0) and np.all(num <= self.denominator))


def _cube_indices(sample: PointSample, base: int, level: int) -> np.ndarray:
    _check_level(base, level)
    if not sample.in_unit_cube():
        raise ValueError("cube covers need a sample inside [0, 1]^d")
    scale = base**level
    num = sample.numerators
    if num.dtype != object and sample.denominator * scale >= 2**62:
        num = num.astype(object)
    idx = (num * scale) // sample.denominator
    idx = np.minimum(idx, scale - 1)  # right edge of [0,1] goes to the last cube
    return np.asarray(idx, dtype=np.int64)


def cover_at_scale(sample: PointSample, base: int, n: int) -> set[LatticeCube]:
    """Level-n cubes that contain at least one point of ``sample``."""
    idx = np.unique(_cube_indices(sample, base, n), axis=0)
    return {LatticeCube(base, n, tuple(int(c) for c in row)) for row in idx}


@dataclass
class ScaleCover:
    """Per-level families of occupied cubes, stored as sorted coordinate arrays."""

    base: int
    dim: int
    families: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def levels(self) -> list[int]:
        return sorted(self.families)

    @property
    def counts(self) -> dict[int, int]:
        return {n: int(self.families[n].shape[0]) for n in self.levels}

    def cubes(self, n: int) -> list[LatticeCube]:
        return [LatticeCube(self.base, n, tuple(int(c) for c in row)) for row in self.families[n]]

    def centers(self, n: int) -> np.ndarray:
        return (self.families[n].astype(float) + 0.5) * float(self.base) ** -n

    def circumradius(self, n: int) -> float:
        return 0.5 * math.sqrt(self.dim) * float(self.base) ** -n

    def is_nested(self) -> bool:
        """Every cube at level n+1 lies in a cube of the cover at level n."""
        levels = self.levels
        for lo, hi in zip(levels, levels[1:]):
            if hi != lo + 1:
                continue
            parents = np.unique(self.families[hi] // self.base, axis=0)
            have = {tuple(r) for r in self.families[lo].tolist()}
            if any(tuple(r) not in have for r in parents.tolist()):
                return False
        return True

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["level", "count"])
        for n, c in self.counts.items():
            writer.writerow([n, c])
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {
            "base": self.base,
            "dim": self.dim,
            "levels": [
                {"level": n, "count": int(self.families[n].shape[0]),
                 "cubes": self.families[n].tolist()}
                for n in self.levels
            ],
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ScaleCover":
        payload = json.loads(text)
        fams = {
            int(e["level"]): np.asarray(e["cubes"], dtype=np.int64).reshape(-1, payload["dim"])
            for e in payload["levels"]
        }
        return cls(payload["base"], payload["dim"], fams)


def build_scale_cover(sample: PointSample, base: int, levels: Iterable[int]) -> ScaleCover:
    cover = ScaleCover(base, sample.dim)
    for n in levels:
        cover.families[n] = np.unique(_cube_indices(sample, base, n), axis=0)
    return cover


@dataclass(frozen=True)
class BoxDimensionFit:
    slope: float
    intercept: float
    residual: float
    levels: tuple[int, ...]
    counts: tuple[int, ...]
    degenerate: bool = False

    @property
    def constant(self) -> float:
        """Fitted C in N_n ~ C b^(slope n)."""
        return math.exp(self.intercept)


def fit_log_slope(x: Sequence[float], values: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares fit of log(values) against x; returns (slope, intercept, rms residual)."""
    x = np.asarray(x, dtype=float)
    y = np.log(np.asarray(values, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid**2)))


def box_dimension_estimate(cover: ScaleCover, window: tuple[int, int]) -> BoxDimensionFit:
    """Least-squares slope of log N_n against n log b over ``window`` (inclusive)."""
    lo, hi = window
    levels = [n for n in cover.levels if lo <= n <= hi and cover.families[n].shape[0] > 0]
    if len(levels) < 3:
        raise ValueError(f"window {window} holds {len(levels)} nonempty levels; need at least 3")
    counts = [int(cover.families[n].shape[0]) for n in levels]
    if len(set(counts)) == 1:
        return BoxDimensionFit(0.0, math.log(counts[0]), 0.0, tuple(levels), tuple(counts), True)
    x = np.asarray(levels, dtype=float) * math.log(cover.base)
    slope, intercept, resid = fit_log_slope(x, counts)
    return BoxDimensionFit(slope, intercept, resid, tuple(levels), tuple(counts))


# ---------------------------------------------------------------------------
# standard test sets


def _check_ratio(ratio) -> Fraction:
    r = Fraction(ratio)
    if not 0 < r <= Fraction(1, 2):
        raise ValueError(f"ratio must lie in (0, 1/2], got {r}")
    return r


def _ifs_orbit(d: int, ratio: Fraction, depth: int, offsets: np.ndarray) -> PointSample:
    # points sum_i r^(i-1) (1 - r) c_i over words of length depth, with
    # integer coordinates over the common denominator q^depth
    p, q = ratio.numerator, ratio.denominator
    den = q**depth
    pts = np.zeros((1, d), dtype=object)
    for i in range(depth):
        # digit i contributes c (1 - r) r^i = c (q - p) p^i q^(depth-1-i) / q^depth
        w = (q - p) * p**i * q ** (depth - 1 - i)
        pts = (pts[:, None, :] + offsets[None, :, :] * w).reshape(-1, d)
    big = max(den, int(np.max(np.abs(pts))) if pts.size else 0)
    dtype = np.int64 if big < 2**62 else object
    return PointSample(np.asarray(pts, dtype=dtype), den)


def cantor1d(ratio=Fraction(1, 3), depth: int = 8) -> PointSample:
    """Left endpoints of the depth-level intervals of the central Cantor set."""
    r = _check_ratio(ratio)
    return _ifs_orbit(1, r, depth, np.array([[0], [1]], dtype=object))


def corner_dust(d: int = 2, ratio=Fraction(1, 4), depth: int = 4) -> PointSample:
    """Orbit of the origin under the 2^d corner similarities x -> r x + (1 - r) c."""
    r = _check_ratio(ratio)
    offsets = np.array(np.meshgrid(*[[0, 1]] * d, indexing="ij"), dtype=object).reshape(d, -1).T
    return _ifs_orbit(d, r, depth, offsets)


def _radical_inverse(j: int, b: int) -> Fraction:
    out, f = Fraction(0), Fraction(1, b)
    while j:
        j, digit = divmod(j, b)
        out += digit * f
        f /= b
    return out


_HALTON_BASES = (2, 3, 5, 7, 11)


def _rational_unit_vector(j: int, d: int) -> list[Fraction]:
    # inverse stereographic image of a Halton point u in [-1, 1]^(d-1);
    # these have e_1 >= 0 and are dense in projective space
    u = [2 * _radical_inverse(j, _HALTON_BASES[i]) - 1 for i in range(d - 1)]
    s = sum(c * c for c in u)
    return [(1 - s) / (1 + s)] + [2 * c / (1 + s) for c in u]


def dense_direction_countable(d: int = 2, J: int = 8) -> PointSample:
    """The set {0} U {2^-j e_j : j = 1..J} with rational unit vectors e_j.

    As J grows the e_j become dense in projective space, so the direction set
    of the limit set is dense.  Coordinates may be negative.
    """
    if d < 2 or d > len(_HALTON_BASES) + 1:
        raise ValueError(f"d must lie in [2, {len(_HALTON_BASES) + 1}]")
    pts = [[Fraction(0)] * d]
    for j in range(1, J + 1):
        pts.append([c / 2**j for c in _rational_unit_vector(j, d)])
    return PointSample.from_points(pts)


def grid(d: int = 2, n: int = 4) -> PointSample:
    """Lower-left corners of all 2^(dn) dyadic cubes of level n."""
    axes = np.meshgrid(*[np.arange(2**n, dtype=np.int64)] * d, indexing="ij")
    return PointSample(np.stack([a.ravel() for a in axes], axis=1), 2**n)


def generate_standard_set(kind: str, depth: int = 0, **params) -> PointSample:
    """Factory over the named test sets.

    ``cantor1d(ratio)``, ``corner_dust(d, ratio)``, ``dense_direction_countable(d, J)``
    and ``grid(d)`` (depth is the grid level n).
    """
    if kind == "cantor1d":
        return cantor1d(params.get("ratio", Fraction(1, 3)), depth)
    if kind == "corner_dust":
        return corner_dust(params.get("d", 2), params.get("ratio", Fraction(1, 4)), depth)
    if kind == "dense_direction_countable":
        return dense_direction_countable(params.get("d", 2), params.get("J", 8))
    if kind == "grid":
        return grid(params.get("d", 2), depth)
    raise ValueError(f"unknown set kind {kind!r}")
