"""Walk through the projection pipeline on a small planar dust.

Builds the scale cover, flags the exceptional directions, certifies a few
unflagged lines and extends the resulting graph map to a Hölder function.

    python demos/projection_cover.py
"""
from fractions import Fraction

import numpy as np

from holdercover.cover import (CoverParams, accumulate_exceptional, build_graph_function,
                               build_pair_families, holder_constant, holder_extend,
                               injectivity_certificate)
from holdercover.directions import KPlane, build_net, random_planes
from holdercover.lattice import box_dimension_estimate, build_scale_cover, corner_dust

params = CoverParams(d=2, k=1, t=0.41, w=0.99, n0=4, nmax=9)
dust = corner_dust(2, Fraction(1, 32), 3)
cover = build_scale_cover(dust, 2, params.levels)
fit = box_dimension_estimate(cover, (params.n0, params.nmax))
print(f"{len(dust)} points, count slope {fit.slope:.3f}, alpha = {params.alpha:.4f}")

net = build_net(2, 1, 0.01, seed=0)
report = accumulate_exceptional(build_pair_families(cover, params), net, params)
flagged = set(report.flagged().tolist())
print(f"pairs per level {report.pair_counts}")
print(f"{len(flagged)} of {len(net)} net cells flagged, decay exponent {report.decay_exponent():.3f}")

rng = np.random.default_rng(1)
shown = 0
while shown < 3:
    V = KPlane(random_planes(2, 1, 1, rng)[0])
    if net.nearest(V)[0] in flagged:
        continue
    cert = injectivity_certificate(dust, V, params, report, net)
    g = build_graph_function(dust, V)
    C = max(3.0, holder_constant(g, params.alpha))
    y = np.linspace(g.keys.min(), g.keys.max(), 5)[:, None]
    ext = holder_extend(g, params.alpha, C, y)[:, 0]
    print(f"line {np.round(V.frame[0], 3)}: certificate {'passed' if cert.passed else cert.reason}, "
          f"extension samples {np.round(ext, 3)}")
    shown += 1
