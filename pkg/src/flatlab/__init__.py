"""flatlab: computational experiments on translation surfaces."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .geom import (  # noqa: F401
    DEFAULT_POLICY,
    IDENTITY,
    Mat2,
    NumericPolicy,
    Vec2,
    diag,
    geodesic,
    horocycle,
    rescale,
    rotate,
    special_element,
)
from .surface import (  # noqa: F401
    PathSpec,
    PeriodVector,
    TranslationSurface,
    ValidationReport,
    apply_matrix,
    area,
    check_path,
    cone_points,
    load_surface,
    periods,
    save_surface,
    validate,
)
from .trace import (  # noqa: F401
    Cylinder,
    NotPeriodicWithinCap,
    Periodic,
    SaddleConnection,
    horizontal_cylinders,
    saddle_connections,
    shortest_horizontal_sc,
    shortest_saddle_connection,
    shortest_sc,
    sup_norm,
    trace_generic,
    trace_ray,
)
from .families import (  # noqa: F401
    H2Point,
    H11Point,
    Lattice,
    build_h2,
    build_h11,
    build_two_tori,
    regular_octagon,
    sample_h2,
    sample_h11,
    sample_torus_haar,
    square_torus,
    torus_surface,
)
from .deform import (  # noqa: F401
    SHEAR,
    STRETCH,
    SurgerySpec,
    cylinder_surgery,
    extend_horizontal_scs,
    find_cylinder_in_direction,
    flow,
    rel,
)
