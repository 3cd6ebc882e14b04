"""Spherical projections, viewpoint tubes and polar graph covers.

A viewpoint h sees the sample as the graph of a radius function over the
unit sphere when the spherical projection x -> (h - x) / |h - x| is
injective.  Viewpoints that may fail lie near lines joining separated pairs,
so they are flagged by tubes around those lines.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .cover import CoverParams, build_pair_families, pair_index
from .directions import MeshError, ProjectivePoint
from .lattice import PointSample, ScaleCover, fit_log_slope

__all__ = [
    "TubeSet",
    "TubeReport",
    "PolarGraph",
    "BlockingPair",
    "spherical_project",
    "tube_constant",
    "tube_content",
    "tube_exceptional_points",
    "polar_graph_cover",
]

PIECE_DIAMETER = math.sqrt(5.0)


def spherical_project(h, x, sign: str = "h-x") -> np.ndarray:
    """Unit vector (h - x) / |h - x|; ``sign="x-h"`` flips the orientation.

    ``x`` may be a single point or an (m, d) array.
    """
    if sign not in ("h-x", "x-h"):
        raise ValueError("sign must be 'h-x' or 'x-h'")
    h = np.asarray(h, dtype=float)
    x = np.asarray(x, dtype=float)
    v = h - x if sign == "h-x" else x - h
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("the viewpoint coincides with a sample point")
    return v / norm


@dataclass(frozen=True)
class TubeSet:
    """Points within ``delta`` of the line through ``point`` along ``direction``, inside B(0, S)."""

    point: np.ndarray
    direction: ProjectivePoint
    delta: float
    S: float = 2.0

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.S <= 0:
            raise ValueError("S must be positive")
        if not isinstance(self.direction, ProjectivePoint):
            object.__setattr__(self, "direction", ProjectivePoint(self.direction))
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))

    def line_distance(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float)) - self.point
        v = self.direction.vector
        perp = x - np.outer(x @ v, v)
        return np.linalg.norm(perp, axis=1)

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return (self.line_distance(x) <= self.delta) & (np.linalg.norm(x, axis=1) <= self.S)

    def chord(self) -> float:
        """Length of the line inside B(0, S)."""
        off = float(self.line_distance(np.zeros(self.point.size))[0])
        return 2.0 * math.sqrt(max(self.S**2 - off**2, 0.0))

    def content(self, w: float) -> float:
        return tube_content(self.chord(), self.delta, w)


def tube_content(length: float, delta: float, w: float) -> float:
    """(w+1)-content bound from cutting the tube into pieces of length delta.

    Each piece is a cylinder of length delta and radius delta, of diameter
    sqrt(5) delta.
    """
    if delta <= 0 or length <= 0:
        return 0.0
    return math.ceil(length / delta) * (PIECE_DIAMETER * delta) ** (w + 1)


def tube_constant(S: float, d: int, r: float = 0.0) -> float:
    """Inflation C_S with viewpoints on lines through two r-balls inside T(C_S r / R).

    For balls centred in [0, 1]^d and h in B(0, S), writing h = p + s (p' - p)
    gives |s| <= (S + sqrt(d) + r) / R, so h lies within
    r (1 + 2 |s|) <= (r / R)(2 (S + sqrt(d) + r) + sqrt(d)) of the centre line,
    using R <= sqrt(d).  The default 4 (1 + S) is kept when it is larger.
    """
    return max(4.0 * (1.0 + S), 2.0 * (S + math.sqrt(d) + r) + math.sqrt(d))


@dataclass
class TubeReport:
    params: CoverParams
    S: float
    mesh: float
    levels: list[int]
    tubes: dict[int, list[TubeSet]]
    flags: dict[int, np.ndarray]
    content: dict[int, float]
    min_radius: float = math.inf

    @property
    def side(self) -> int:
        return int(round(2 * self.S / self.mesh))

    def cell_centers(self) -> np.ndarray:
        g = -self.S + self.mesh * (np.arange(self.side) + 0.5)
        mesh = np.meshgrid(*[g] * self.params.d, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def flagged(self, levels=None) -> np.ndarray:
        levels = self.levels if levels is None else levels
        out = np.zeros(self.side**self.params.d, dtype=bool)
        for n in levels:
            out |= self.flags[n]
        return out

    def cell_of(self, h) -> int:
        idx = np.floor((np.asarray(h, dtype=float) + self.S) / self.mesh).astype(int)
        if np.any(idx < 0) or np.any(idx >= self.side):
            raise ValueError("point outside the grid")
        return int(np.ravel_multi_index(tuple(idx), (self.side,) * self.params.d))

    def is_flagged(self, h) -> bool:
        return bool(self.flagged()[self.cell_of(h)])

    def decay_exponent(self) -> float:
        pos = [n for n in self.levels if self.content[n] > 0]
        if not pos:
            return -math.inf
        if len(pos) < 2:
            return math.nan
        slope, _, _ = fit_log_slope(np.asarray(pos) * math.log(2), [self.content[n] for n in pos])
        return slope

    def flag_csv(self, levels=None) -> str:
        """Grid of 0/1 flags, one row per first-coordinate index (d = 2)."""
        if self.params.d != 2:
            raise ValueError("CSV grids are two-dimensional")
        grid = self.flagged(levels).reshape(self.side, self.side).astype(int)
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(grid.tolist())
        return buf.getvalue()

    def as_dict(self) -> dict:
        dec = self.decay_exponent()
        return {
            "params": self.params.as_dict(),
            "S": self.S,
            "mesh": self.mesh,
            "levels": self.levels,
            "tubes": {str(n): len(self.tubes[n]) for n in self.levels},
            "flagged_cells": {str(n): int(self.flags[n].sum()) for n in self.levels},
            "content": {str(n): self.content[n] for n in self.levels},
            "decay_exponent": dec if math.isfinite(dec) else str(dec),
        }


def tube_exceptional_points(cover: ScaleCover, params: CoverParams, S: float = 2.0,
                            mesh: float | None = None) -> TubeReport:
    """Flag grid cells of [-S, S]^d meeting a tube around a separated pair.

    Pairs come from ``build_pair_families``; at level n the cubes are treated
    as balls of radius r = 2 * 2^-n and the tube radius is C_S r / R with R
    the set distance.  A cell is flagged when its centre is within the tube
    radius plus half the cell diagonal of the line and within S plus half
    the diagonal of the origin.  ``mesh`` defaults to the smallest tube
    radius and may not exceed it.
    """
    if params.g != 0:
        raise ValueError("visibility uses k = 1 (g = 0)")
    d = params.d
    families = build_pair_families(cover, params)
    tubes, content = {}, {}
    min_radius = math.inf
    for fam in families:
        n = fam.level
        r = 2.0 * 2.0 ** (-n)
        C = tube_constant(S, d, r)
        tubes[n] = []
        for (a, b), R in zip(fam.pairs, fam.distances):
            if R < r:
                raise ValueError(f"pair separation {R} below the ball radius {r}")
            c, c2 = fam.centers[a], fam.centers[b]
            tubes[n].append(TubeSet(c, ProjectivePoint(c2 - c), C * r / R, S))
            min_radius = min(min_radius, C * r / R)
        content[n] = float(sum(t.content(params.w) for t in tubes[n]))
    if mesh is None:
        mesh = min(min_radius, S / 8)
    elif mesh > min_radius:
        raise MeshError(f"grid mesh {mesh} exceeds the smallest tube radius {min_radius:.4g}")
    side = max(1, math.ceil(2 * S / mesh))
    mesh = 2 * S / side
    report = TubeReport(params, S, mesh, [f.level for f in families], tubes, {}, content, min_radius)
    centers = report.cell_centers()
    half = 0.5 * mesh * math.sqrt(d)
    in_ball = np.linalg.norm(centers, axis=1) <= S + half
    for n in report.levels:
        flag = np.zeros(centers.shape[0], dtype=bool)
        for tube in tubes[n]:
            flag |= tube.line_distance(centers) <= tube.delta + half
        report.flags[n] = flag & in_ball
    return report


@dataclass
class PolarGraph:
    """Radius function over the directions seen from ``h``."""

    h: np.ndarray
    directions: np.ndarray
    radii: np.ndarray
    alpha: float
    constant: float

    ok = True

    def __post_init__(self):
        if np.any(self.radii <= 0):
            raise ValueError("radii must be positive")

    def to_json(self) -> str:
        return json.dumps({"h": self.h.tolist(), "alpha": self.alpha, "constant": self.constant,
                           "directions": self.directions.tolist(), "radii": self.radii.tolist()},
                          sort_keys=True)


@dataclass(frozen=True)
class BlockingPair:
    """Two sample points on one ray from the viewpoint."""

    pair: tuple[int, int]
    direction: tuple[float, ...]

    ok = False


def polar_graph_cover(sample: PointSample | np.ndarray, h, t: float, w: float, sign: str = "h-x",
                      tol: float = 1e-13, exceptional: TubeReport | None = None) -> PolarGraph | BlockingPair:
    """Read the sample as a graph over the sphere of directions at ``h``.

    When the spherical projection is injective the radius function
    f(u) = |h - x| is returned with its Hölder constant at exponent
    1 - 2t/w, measured in geodesic distance over all sample pairs.
    Otherwise the first pair (lexicographic) sharing a direction is returned.
    """
    if not 0 < 2 * t < w:
        raise ValueError("need 0 < 2t < w")
    x = sample.as_float() if isinstance(sample, PointSample) else np.asarray(sample, dtype=float)
    h = np.asarray(h, dtype=float)
    if np.any(np.all(x == h, axis=1)):
        raise ValueError("viewpoint lies in the sample")
    if exceptional is not None and exceptional.is_flagged(h):
        raise ValueError("viewpoint lies in a flagged cell")
    alpha = 1.0 - 2.0 * t / w
    u = spherical_project(h, x, sign)
    radii = np.linalg.norm(h - x, axis=1)
    m = x.shape[0]
    if m < 2:
        return PolarGraph(h, u, radii, alpha, 0.0)
    chord = pdist(u)
    hit = np.flatnonzero(chord <= tol)
    if hit.size:
        i, j = pair_index(m)
        k = int(hit[0])
        return BlockingPair((int(i[k]), int(j[k])), tuple(u[i[k]].tolist()))
    geo = 2.0 * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0))
    const = float(np.max(pdist(radii[:, None]) / geo**alpha))
    return PolarGraph(h, u, radii, alpha, const)
