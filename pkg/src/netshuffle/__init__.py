"""Random-walk network shuffling: simulation, privacy bounds and numeric checks."""

from netshuffle._accel import backend_name
from netshuffle.analysis import (
    EnumerationBudgetExceeded,
    OutcomeDistribution,
    empirical_dp_check,
    empirical_epsilon,
    event_ratio_check,
    exact_output_distribution,
    hockey_stick,
    ldp_check,
    lemma1_ratio_check,
    mixing_check,
    monte_carlo_distribution,
    sampling_concentration_check,
    tv_distance,
)
from netshuffle.bounds import (
    BoundInputs,
    PrivacyBound,
    bernstein_radius,
    delta_prime,
    fmt_shuffle_bound,
    lambda_p,
    liew_topology_metric,
    netshuffle_bound,
    partial_shuffle_bound,
    smpl_wlk_bound,
    subsample_wor,
)
from netshuffle.graph import (
    Graph,
    GraphError,
    GraphParseError,
    NonErgodicError,
    build_graph,
    generate_topology,
    mixing_bound,
    recommended_rounds,
    spectral_gap,
    stationary_distribution,
    transition_matrix,
    validate_ergodic,
    walk_distribution,
)
from netshuffle.protocol import (
    MultisetPartition,
    ProtocolConfig,
    SimulationBatch,
    run_infinite,
    run_restricted,
    run_rnd_wlk,
    run_smpl_wlk,
    simulate,
)
from netshuffle.randomizer import Randomizer, apply, binary_rr, identity, kary_rr, verify_ldp

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
