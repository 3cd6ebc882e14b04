"""Dyadic fractal percolation with path-splittable randomness.

The retention coin of a cube is a hash of ``(seed, level, linear index)``,
and the level and index encode the path of subdivisions that leads to the
cube.  Any subtree can therefore be regenerated on its own, and the result
does not depend on the order in which cubes are visited.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .lattice import LatticeCube, fit_log_slope

__all__ = [
    "PercolationTree",
    "NaturalMeasureWeights",
    "ExtinctError",
    "p_from_t",
    "coins",
    "simulate",
    "natural_measure",
    "difference_vectors",
    "sphere_cells",
    "total_sphere_cells",
    "direction_slope",
    "sphere_coverage",
    "default_transversal_pair",
    "surviving_seeds",
]

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


class ExtinctError(RuntimeError):
    """A required subtree died out; retry with another seed."""


def p_from_t(d: int, t: float) -> float:
    if not 0 < t <= d:
        raise ValueError(f"t must lie in (0, {d}]")
    return 2.0 ** (t - d)


def _splitmix(x: np.ndarray) -> np.ndarray:
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & _MASK
    x = ((x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK
    x = ((x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK
    return x ^ (x >> np.uint64(31))


def coins(seed: int, level: int, coords: np.ndarray) -> np.ndarray:
    """Uniform [0, 1) variates for the cubes ``coords`` (m, d) at ``level``."""
    coords = np.atleast_2d(np.asarray(coords, dtype=np.uint64))
    d = coords.shape[1]
    index = np.zeros(coords.shape[0], dtype=np.uint64)
    for j in range(d):
        index = (index << np.uint64(level)) | coords[:, j]
    with np.errstate(over="ignore"):
        h = _splitmix(np.full(coords.shape[0], seed & 0xFFFFFFFFFFFFFFFF, dtype=np.uint64))
        h = _splitmix(h ^ np.uint64(level))
        h = _splitmix(h ^ index)
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass
class PercolationTree:
    d: int
    p: float
    depth: int
    seed: int
    levels: list[np.ndarray] = field(default_factory=list)

    @property
    def counts(self) -> list[int]:
        return [int(a.shape[0]) for a in self.levels]

    @property
    def extinct(self) -> bool:
        return self.levels[-1].shape[0] == 0

    def cubes(self, n: int) -> list[LatticeCube]:
        return [LatticeCube(2, n, tuple(int(c) for c in row)) for row in self.levels[n]]

    def subtree(self, root: LatticeCube, n: int | None = None) -> np.ndarray:
        """Retained level-n coordinates inside ``root`` (default n = depth)."""
        n = self.depth if n is None else n
        q = 2 ** (n - root.level)
        coords = self.levels[n]
        inside = np.all(coords // q == np.asarray(root.coords), axis=1)
        return coords[inside]

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["seed", "level", "count"])
        for n, c in enumerate(self.counts):
            w.writerow([self.seed, n, c])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"d": self.d, "p": self.p, "depth": self.depth, "seed": self.seed,
                "counts": self.counts, "extinct": self.extinct}


def _children(coords: np.ndarray, d: int) -> np.ndarray:
    offsets = np.array(np.meshgrid(*[[0, 1]] * d, indexing="ij")).reshape(d, -1).T
    return (2 * coords[:, None, :] + offsets[None, :, :]).reshape(-1, d)


def simulate(d: int, depth: int, seed: int, p: float | None = None, t: float | None = None) -> PercolationTree:
    """Fractal percolation in [0, 1]^d down to ``depth``, with p or p = 2^(t-d)."""
    if (p is None) == (t is None):
        raise ValueError("give exactly one of p and t")
    if p is None:
        p = p_from_t(d, t)
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    if depth * d > 30:
        raise ValueError("depth * d must not exceed 30 index bits")
    tree = PercolationTree(d, p, depth, seed, [np.zeros((1, d), dtype=np.int64)])
    cur = tree.levels[0]
    for n in range(1, depth + 1):
        kids = _children(cur, d)
        if kids.shape[0]:
            kids = kids[coins(seed, n, kids) < p]
        tree.levels.append(kids)
        cur = kids
    return tree


def retained_path(seed: int, p: float, cube: LatticeCube) -> bool:
    """Whether ``cube`` and all of its ancestors survive, without building the tree."""
    for n in range(1, cube.level + 1):
        a = cube.ancestor(n)
        if coins(seed, n, np.asarray([a.coords]))[0] >= p:
            return False
    return True


@dataclass(frozen=True)
class NaturalMeasureWeights:
    level: int
    weight: float
    count: int

    @property
    def total_mass(self) -> float:
        return self.weight * self.count


def natural_measure(tree: PercolationTree, n: int) -> NaturalMeasureWeights:
    """Density p^-n on A_n: every retained level-n cube carries p^-n 2^(-dn)."""
    if not 0 <= n <= tree.depth:
        raise ValueError("level outside the tree")
    return NaturalMeasureWeights(n, tree.p**-n * 2.0 ** (-tree.d * n), int(tree.levels[n].shape[0]))


# ---------------------------------------------------------------------------
# direction sets


def difference_vectors(a: np.ndarray, b: np.ndarray, size: int, dense_limit: int = 4_000_000) -> np.ndarray:
    """Distinct nonzero integer vectors y - x, x in ``a``, y in ``b`` (coords in [0, size)).

    Small inputs are differenced pairwise; large ones through an FFT
    cross-correlation of the occupancy grids.
    """
    d = a.shape[1]
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.empty((0, d), dtype=np.int64)
    if a.shape[0] * b.shape[0] <= dense_limit:
        diff = (b[None, :, :] - a[:, None, :]).reshape(-1, d)
        diff = np.unique(diff, axis=0)
    else:
        ga = np.zeros((size,) * d)
        gb = np.zeros((size,) * d)
        ga[tuple(a.T)] = 1.0
        gb[tuple(b.T)] = 1.0
        corr = fftconvolve(gb, ga[(slice(None, None, -1),) * d], mode="full")
        idx = np.argwhere(corr > 0.5)
        diff = idx - (size - 1)
    return diff[np.any(diff != 0, axis=1)]


def sphere_cells(vectors: np.ndarray, m: int) -> np.ndarray:
    """Cube-map cell ids of the directions of ``vectors`` at resolution 2^-m.

    S^(d-1) is split into the 2d faces of [-1, 1]^d and each face into a grid
    of side 2^-m in face coordinates, giving 2d * 2^((m+1)(d-1)) cells.
    """
    v = np.asarray(vectors, dtype=float)
    n, d = v.shape
    axis = np.argmax(np.abs(v), axis=1)
    rows = np.arange(n)
    major = v[rows, axis]
    side = 2 ** (m + 1)
    cell = (2 * axis + (major < 0)).astype(np.int64)
    others = np.array([[j for j in range(d) if j != a] for a in range(d)]).reshape(d, d - 1)[axis]
    for j in range(d - 1):
        u = v[rows, others[:, j]] / np.abs(major)
        g = np.clip(np.floor((u + 1.0) * 0.5 * side), 0, side - 1).astype(np.int64)
        cell = cell * side + g
    return cell


def total_sphere_cells(d: int, m: int) -> int:
    return 2 * d * 2 ** ((m + 1) * (d - 1))


def default_transversal_pair(d: int) -> tuple[LatticeCube, LatticeCube]:
    """Level-2 cubes at the origin corner and the opposite corner.

    Every joining direction has all coordinates in [1/2, 1] relative to its
    length scale, so it makes an angle of at least pi/8 with each coordinate
    hyperplane.
    """
    return LatticeCube(2, 2, (0,) * d), LatticeCube(2, 2, (3,) * d)


def direction_slope(tree: PercolationTree, Q1: LatticeCube | None = None, Q2: LatticeCube | None = None,
                    resolutions=None) -> dict:
    """Box-count slope of the directions from the Q1-subtree to the Q2-subtree.

    Directions join centres of retained cubes at the deepest level.  Returns the
    per-resolution counts of hit direction cells and the least-squares slope of
    log count against m log 2.  The default resolutions run from 3 (where the
    directions from Q1 to Q2 span several cells) to depth - 1 (where the
    error from using centres stays below one cell).
    """
    if Q1 is None or Q2 is None:
        Q1, Q2 = default_transversal_pair(tree.d)
    if Q1.level != Q2.level or Q1 == Q2:
        raise ValueError("Q1 and Q2 must be distinct cubes of the same level")
    if resolutions is None:
        resolutions = range(3, tree.depth)
    a, b = tree.subtree(Q1), tree.subtree(Q2)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ExtinctError(f"subtree under {'Q1' if a.shape[0] == 0 else 'Q2'} is extinct (seed {tree.seed})")
    diffs = difference_vectors(a, b, 2**tree.depth)
    res = list(resolutions)
    counts = [int(np.unique(sphere_cells(diffs, m)).size) for m in res]
    if len(set(counts)) == 1:
        slope = 0.0
    else:
        slope, _, _ = fit_log_slope(np.asarray(res) * math.log(2), counts)
    return {"seed": tree.seed, "resolutions": res, "counts": counts, "slope": slope,
            "points": (int(a.shape[0]), int(b.shape[0]))}


def sphere_coverage(tree: PercolationTree, m: int) -> float:
    """Fraction of cube-map cells at resolution 2^-m hit by directions of retained centres."""
    if tree.d not in (2, 3):
        raise ValueError("sphere coverage supports d = 2 or 3")
    pts = tree.levels[-1]
    if pts.shape[0] < 2:
        return 0.0
    diffs = difference_vectors(pts, pts, 2**tree.depth)
    return np.unique(sphere_cells(diffs, m)).size / total_sphere_cells(tree.d, m)


def surviving_seeds(d: int, depth: int, count: int, p: float, start: int = 0,
                    require: tuple[LatticeCube, ...] = (), max_tries: int = 10**6):
    """First ``count`` seeds from ``start`` whose trees survive to ``depth``.

    With ``require`` the listed cubes must also have nonextinct subtrees.
    Returns (trees, rejected).
    """
    trees, rejected, seed = [], 0, start
    while len(trees) < count:
        if seed - start >= max_tries:
            raise ExtinctError(f"fewer than {count} survivors in {max_tries} seeds")
        if all(retained_path(seed, p, q) for q in require):
            tree = simulate(d, depth, seed, p=p)
            if not tree.extinct and all(tree.subtree(q).shape[0] for q in require):
                trees.append(tree)
                seed += 1
                continue
        rejected += 1
        seed += 1
    return trees, rejected


def trees_json(trees: list[PercolationTree], extra: dict | None = None) -> str:
    payload = {"trees": [t.summary() for t in trees]}
    if extra:
        payload.update(extra)
    return json.dumps(payload, sort_keys=True)
