from .ks import ks_distance_to_normal, dkw_radius
from .delta import DeltaEstimate, estimate_delta_n, replicated_sums, estimate_from_sums
from .rate import RateFit, fit_rate, bound_ratio, class_rate_term, bolthausen_term, geometric_grid
from .partition import variance_partition
