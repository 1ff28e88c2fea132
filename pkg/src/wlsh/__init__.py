"""Approximate k-NN search under many weighted l_p distances with shared LSH tables."""

from .bounds import BoundSpec, Relaxation, angular_bounds, bounds, hamming_bounds, lp_bounds, usable
from .errors import (
    ConfigError,
    DimensionMismatch,
    IndexFormatError,
    InfeasiblePlanError,
    UnassignableError,
    WlshError,
)
from .index import IoCounter, WlshIndex, build_index, load_index, read_bucket, fetch_point
from .lsh import (
    CollisionProbability,
    LpHashFunction,
    StableSampler,
    collision_probability,
    level_bucket,
    sample_hash_function,
)
from .metric import (
    Dataset,
    Metric,
    Point,
    WeightVector,
    brute_force_knn,
    load_dataset,
    load_weights,
    save_dataset,
    save_weights,
    weighted_distance,
)
from .params import GroupParams, RadiusProfile, SolverContext, VectorParams, beta_mu, radius_profile
from .partition import PartitionPlan, candidate_sets, greedy_weighted_set_cover, naive_plan, partition
from .query import QueryResult, search

__version__ = "0.1.0"
