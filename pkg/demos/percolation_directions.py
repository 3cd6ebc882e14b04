"""Direction sets of fractal percolation at two values of t.

    python demos/percolation_directions.py
"""
import numpy as np

from holdercover.percolation import (default_transversal_pair, direction_slope, p_from_t,
                                     sphere_coverage, surviving_seeds)

for t in (0.4, 0.8):
    p = p_from_t(2, t)
    trees, rejected = surviving_seeds(2, 10, 8, p, require=default_transversal_pair(2))
    slopes = [direction_slope(tr)["slope"] for tr in trees]
    cov = [sphere_coverage(tr, 7) for tr in trees]
    print(f"t={t}: p={p:.3f}, {rejected} seeds rejected, "
          f"mean slope {np.mean(slopes):.3f} (target {min(2 * t, 1.0):.1f}), "
          f"median coverage at 2^-7 {np.median(cov):.3f}")
