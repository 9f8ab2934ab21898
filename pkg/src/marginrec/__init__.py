"""marginrec: exact cluster recovery with oracle queries under margin
assumptions, plus the geometric machinery behind it."""

from .geometry import (
    AffineMap,
    ConvergenceError,
    Ellipsoid,
    PointSet,
    Pseudometric,
    diameter,
    distance,
    hull_contains,
    hull_contains_many,
    hull_distance,
    hull_distances,
    isotropic_transform,
    mvee,
    ray_hull_exit,
    scaled_hull_contains,
    scaled_hull_contains_many,
    set_distance,
)
from .instances import Instance
from .margins import (
    center_proximity_alpha,
    convex_hull_margin,
    ova_margin,
    packing_estimate,
    proximity_margin_bound,
    verify_convex_hull_margin,
)
from .oracle import Clustering, LabelOracle, label_via_scq, scq_via_labels
from .recovery import (
    CheatrConfig,
    MrecurConfig,
    RecoveryReport,
    brute_force_smallest_consistent,
    cheatr,
    hull_trick,
    mrecur,
    smallest_consistent,
)
from .sampling import (
    RandomSource,
    WalkConfig,
    approx_centroid,
    hit_and_run_sample,
    hit_and_run_samples,
    sample_without_replacement,
)

__version__ = "0.1.0"
