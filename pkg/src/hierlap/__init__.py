"""Normal approximation of averaged eigenvalues of random hierarchical Laplacians."""
from .distances import DensityGrid, invert_cf, kl_divergence, tv_distance
from .hierarchy import BallRef, build_coupling, build_lattice
from .moments import WeightProfile, exact_variances, weight_profile
from .noise import NoiseSpec

__all__ = [
    "BallRef", "DensityGrid", "NoiseSpec", "WeightProfile", "build_coupling",
    "build_lattice", "exact_variances", "invert_cf", "kl_divergence",
    "tv_distance", "weight_profile",
]
