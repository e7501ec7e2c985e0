"""Polar-transform coding toolkit: two-layer concatenated codes over
Pauli/erasure/BSC/BEC channels, with construction, compression, channel
coding, shaping, simulation campaigns, and exact small-system entropy checks.
"""

from .channels import (
    BinarySymmetricView,
    ChannelModel,
    ConditionalPhaseView,
    ErasureParams,
    PauliParams,
    amplitude_view,
    binary_entropy,
    closed_form_metrics,
    entropy_bits,
    phase_view,
    sample_erasure,
    sample_pauli,
)
from .concat import (
    CompressedPayload,
    ShaperSpec,
    concat_channel_decode,
    concat_channel_encode,
    concat_compress,
    concat_decompress,
    conditional_entropies,
    decode_interleaved,
    exact_shaper_distance,
    extract,
    make_shaper_spec,
    shape,
    shaper_distance_bound,
)
from .construction import (
    ConcatCode,
    ReliabilityProfile,
    bec_profile,
    build_concat_code,
    mc_profile,
    multilevel_profile,
    select_frozen,
)
from .polar_core import (
    LLR_CLAMP,
    DecodeOutcome,
    FrozenSpec,
    SCEngine,
    bit_llr,
    check_llr,
    conditional_prior,
    decode_op_count,
    genie_index_stats,
    marginalized_llr,
    randomized_fill_decode,
    sc_decode,
    transform,
)
from .protocol import (
    CampaignConfig,
    TrialReport,
    channel_coding_trial,
    distill_trial,
    fidelity_bound,
    rate_report,
    run_campaign,
)
from .qprobe import (
    CqPair,
    StateBundle,
    build_states,
    cq_polarization_check,
    entropy_report,
    identity_checks,
)

__version__ = "0.1.0"

__all__ = [
    "BinarySymmetricView",
    "CampaignConfig",
    "ChannelModel",
    "CompressedPayload",
    "ConcatCode",
    "ConditionalPhaseView",
    "CqPair",
    "DecodeOutcome",
    "ErasureParams",
    "FrozenSpec",
    "LLR_CLAMP",
    "PauliParams",
    "ReliabilityProfile",
    "SCEngine",
    "ShaperSpec",
    "StateBundle",
    "TrialReport",
    "amplitude_view",
    "bec_profile",
    "binary_entropy",
    "bit_llr",
    "build_concat_code",
    "build_states",
    "channel_coding_trial",
    "check_llr",
    "closed_form_metrics",
    "concat_channel_decode",
    "concat_channel_encode",
    "concat_compress",
    "concat_decompress",
    "conditional_entropies",
    "conditional_prior",
    "cq_polarization_check",
    "decode_interleaved",
    "decode_op_count",
    "distill_trial",
    "entropy_bits",
    "entropy_report",
    "exact_shaper_distance",
    "extract",
    "fidelity_bound",
    "genie_index_stats",
    "identity_checks",
    "make_shaper_spec",
    "marginalized_llr",
    "mc_profile",
    "multilevel_profile",
    "phase_view",
    "randomized_fill_decode",
    "rate_report",
    "run_campaign",
    "sample_erasure",
    "sample_pauli",
    "sc_decode",
    "select_frozen",
    "shape",
    "shaper_distance_bound",
    "transform",
    "__version__",
]
