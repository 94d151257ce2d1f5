"""Monte Carlo toolkit for dynamic Boolean models whose nodes move as
isotropic alpha-stable processes and carry i.i.d. detection radii."""

from .calibrate import calibrate, load_constants, save_constants
from .coverage import (CoverageResult, TargetSet, coverage_slope, epsilon_net,
                       minkowski_dimension_estimate, simulate_coverage)
from .detection import (RateFit, SurvivalCurve, decay_rate, simulate_detection,
                        supermultiplicativity_check, void_survival)
from .field import (MarkedCloud, RadiusLaw, WindowPlan, evolve,
                    parse_radius_law, plan_window, radius_moment, sample_cloud,
                    window_plan_from_halfwidth)
from .manifest import ExperimentManifest, write_csv
from .motion import TargetMotion
from .percolation import (ComponentLabeling, DiscretisationSpec, GoodBoxReport,
                          components, components_bruteforce, discretize_radii,
                          estimate_lambda_c, giant_fraction,
                          good_box_fraction, good_box_single_time_probability,
                          simulate_percolation_time)
from .rngtools import derive_stream
from .stable import (BoundConstants, MCEstimate, PathSkeleton, StableParams,
                     escape_probability, hitting_bound, radial_mass,
                     sample_increment, sample_increments, sample_skeleton,
                     sample_subordinator_increment, stable_density, tail_mass)
from .volume import (CompactSet, VolumeEstimate, ball_capacity,
                     ball_union_volume, ball_volume, capacity_constant,
                     cumulative_minkowski_volume, drift_shift,
                     expected_sausage_rate, minkowski_sum_volume,
                     sausage_volume)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
