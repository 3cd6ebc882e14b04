"""Hölder graph covers of sets of small box dimension.

Modules
-------
lattice
    Exact point samples, dyadic covers and box-counting slopes.
directions
    Grassmannian geometry, audited nets and content estimates.
cover
    Exceptional planes, injectivity certificates and Hölder extension.
percolation
    Fractal percolation and its direction sets.
doubling
    Ternary Bernoulli measures and the digit-restricted set K.
visibility
    Spherical projections, viewpoint tubes and polar graph covers.
"""
from .lattice import (
    BoxDimensionFit,
    LatticeCube,
    PointSample,
    PrecisionError,
    ScaleCover,
    box_dimension_estimate,
    build_scale_cover,
    cover_at_scale,
    generate_standard_set,
)
from .directions import (
    GrassmannNet,
    KPlane,
    MeshError,
    NetAuditError,
    ProjectivePoint,
    build_net,
    grassmann_metric,
    pair_angle_bound,
)
from .cover import (
    CoverParams,
    accumulate_exceptional,
    build_graph_function,
    build_pair_families,
    holder_constant,
    holder_extend,
    injectivity_certificate,
)
from .percolation import direction_slope, simulate, sphere_coverage
from .doubling import DigitRule, TernaryBernoulli, doubling_constant_estimate, k_count
from .visibility import polar_graph_cover, spherical_project, tube_exceptional_points

__version__ = "0.1.0"
