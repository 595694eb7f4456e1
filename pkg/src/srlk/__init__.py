"""Learning linear representations for k-means from a clustered sample."""

from .core import (
    CenterSet,
    Clustering,
    Dataset,
    LinearMapping,
    TableMapping,
    ValidationError,
    apply_mapping,
    collapse_mapping,
    restrict,
    voronoi_partition,
)
from .kmeans import KMeansSolution, cost_centers, cost_partition, delta_mappings, solve, solve_exact
from .learner import LearnProblem, LearnResult, regret, representativeness, term_learn
from .mapping_class import MappingClass, build_cover, l1_distance, pdim_shatter_check, pdim_vector
from .partition import PermutationMatch, delta, delta_bruteforce, delta_sample, h_mean, h_value
from .uniqueness import UniquenessVerdict, check_uniqueness, verify_clustering_stability, verify_cost_stability

__version__ = "0.1.0"
