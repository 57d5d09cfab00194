"""Quantum Bayesian networks for mixed states."""
from .channels import (
    DilationUnitary,
    Ensemble,
    KrausSet,
    Rinno,
    builtin_measurement,
    canonical_ensemble,
    channel_apply,
    complementary_channel,
    extend_measurement_to_unitary,
    is_von_neumann,
    measurement_superop,
    outcome_probabilities,
    purify,
    rinno_from_kraus,
    rinno_probabilities,
    stinespring_apply,
    validate_kraus,
    validate_rinno,
)
from .metastate import (
    NodeOp,
    build_meta_ket,
    bra_node,
    classicize_node,
    evaluate,
    ketbra_node,
    meta_density,
    slash_node,
    total_amplitude,
    trace_node,
)
from .model import (
    Decoration,
    Node,
    QBNet,
    TransitionTable,
    check_grounded,
    check_marginalizer,
    embed_state_space,
    is_isometry_node,
    validate_net,
)
from .netlang import parse_matrix_file, parse_net, serialize_net
from .tensorcore import (
    DensityMatrix,
    IndexedKet,
    Register,
    StateSpace,
    dagger,
    gram_schmidt_extend,
    is_psd,
    partial_trace,
    tensor_product,
)

__version__ = "0.1.0"
