"""Byzantine-resilient gradient coding over prime fields.

Library plus simulation harness: exact finite-field linear algebra, regular
data assignments, encoding/decoding matrix construction, the interactive
identification protocol, pluggable adversaries, and verification checks.
"""

from .assignment import (
    AssignmentMatrix,
    assignment_from_text,
    assignment_to_text,
    make_cyclic,
    make_fractional,
    make_random_regular,
    validate_regular,
)
from .adversary import (
    AdversaryStrategy,
    honest,
    pick_attack_support,
    random_corruption,
    symmetrization,
    symmetrization_attack,
    tournament_liar,
)
from .coding import (
    CodeContext,
    DecodingMatrix,
    EncodingMatrix,
    ResponseMatrix,
    build_code_context,
    build_decoding_matrix,
    build_encoding_matrix,
    combining_vector,
    ecc_decode,
    response_matrix,
    restrict_encoding,
    worker_response,
)
from .field import DEFAULT_MODULUS, PrimeField, is_prime
from .harness import (
    METRICS_HEADER,
    RunMetrics,
    SimulationConfig,
    SweepReport,
    grid_configs,
    replay_transcript,
    run_simulation,
    run_sweep,
    write_transcript,
)
from .linalg import (
    LinearSolveOutcome,
    Matrix,
    cauchy_like_det,
    determinant,
    invert,
    row_span_contains,
    solve_linear,
    vandermonde,
    vandermonde_inverse_last_column,
)
from .protocol import (
    Agreement,
    Conflict,
    GradientOracle,
    GroupingPlan,
    MatchTree,
    ProtocolResult,
    ProtocolRun,
    Query,
    Transcript,
    detect_contradiction,
    form_groups,
    group_response,
    local_compute,
    run_protocol,
)

__version__ = "0.1.0"
