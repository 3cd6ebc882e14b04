"""Exceptional viewpoints for a two-point set and polar graphs of a dust.

    python demos/visibility.py
"""
from fractions import Fraction

from holdercover.cover import CoverParams
from holdercover.lattice import PointSample, build_scale_cover, corner_dust
from holdercover.visibility import polar_graph_cover, tube_exceptional_points

two = PointSample.from_points([[Fraction(1, 10), Fraction(1, 10)], [Fraction(9, 10), Fraction(4, 5)]])
params = CoverParams(2, 1, 0.1, 0.9, 4, 8)
rep = tube_exceptional_points(build_scale_cover(two, 2, params.levels), params)
print(f"grid {rep.side}x{rep.side}, {rep.flagged().mean():.0%} of cells flagged (coarse levels give wide tubes)")
for h in ([0.5, 0.45], [-0.7, -0.6], [0.0, 1.0]):
    print(f"viewpoint {h}: flagged={rep.is_flagged(h)}, ok={polar_graph_cover(two, h, 0.1, 0.9).ok}")

dust = corner_dust(2, Fraction(1, 32), 3)
res = polar_graph_cover(dust, [1.5, -0.25], 0.45, 0.95)
print(f"dust from (1.5, -0.25): ok={res.ok}, constant {getattr(res, 'constant', None)}")
