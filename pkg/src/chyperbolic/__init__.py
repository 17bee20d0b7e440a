"""Complex hyperbolic space: geometry, isometries, discrete groups and limit sets."""

from .form import (
    BallPoint,
    BoundaryPoint,
    BudgetExhausted,
    FormSpace,
    GeometryError,
    PointClass,
    ProjectivePoint,
    classify_point,
    form_inner,
    project_to_chart,
    q,
)
from .geometry import busemann, distance, geodesic_point, slimness
from .isometry import Isometry, apply, classify, displacement_inf, zeta
from .groups import GeneratorSystem, dyck_rep, heisenberg_lattice, polygon_rep, relator_check
from .dynamics import enumerate_ball, limit_sample
from .dimension import box_dimension, critical_exponent

__version__ = "0.1.0"
