"""Vector set search over per-set LSH collision-count sketches."""

from .index import (
    PROFILES,
    DessertIndex,
    FilterConfig,
    IndexConfig,
    RankedResults,
    apply_profile,
    build_index,
    query,
    score_candidate,
)
from .lsh import (
    SimLookup,
    SrpFamily,
    build_sim_lookup,
    hash_matrix,
    hash_vector,
    sample_srp_family,
    srp_collision_probability,
)
from .oracle import brute_force_search, exact_pairwise_sims, exact_relevance
from .prefilter import (
    CentroidIndex,
    Centroids,
    build_centroid_index,
    filter_candidates,
    train_centroids,
)
from .scoring import (
    InnerAggregation,
    Scorer,
    avg_phi_aggregation,
    default_scorer,
    max_aggregation,
    outer_aggregate,
    sigma_avg_phi,
    sigma_max,
)
from .sketch import (
    TinyTable,
    accumulate_collisions,
    accumulate_collisions_batch,
    bucket,
    build_tiny_table,
    tiny_table_bytes,
)
from .storage import (
    load_index,
    read_qrels,
    read_vector_sets,
    save_index,
    write_vector_sets,
)
from .theory import (
    gamma_upper,
    lower_tail_bound,
    max_gamma_over_similarity,
    query_cost_estimate,
    recommended_table_terms,
    recommended_tables,
)

__version__ = "0.1.0"
