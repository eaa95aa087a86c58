from .arrangements import bush, fibonacci_directions, line_directions, min_line_separation, random_family
from .coords import MotionCoords, PairLine, build_pair_tubes, coords_to_motion, motion_to_coords, pair_line
from .tech import haar_far_fraction, tech_ratio
from .tubes import (
    IncidenceError,
    RichnessProfile,
    TubeFamily,
    average_profiles,
    bush_radius_bound,
    bush_radius_check,
    cell_pair_mass,
    fit_richness_exponent,
    pairwise_intersection_sum,
    rich_profile,
    union_volume,
    verify_bound,
)
