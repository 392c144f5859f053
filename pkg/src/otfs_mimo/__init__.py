"""Hybrid OTFS/OFDM massive-MIMO downlink: channels, FZF/PZF/MRT precoding and MMSE-SIC SE."""

from .channel import (
    AOA_PRIORS,
    ChannelMatrix,
    Domain,
    GridDims,
    PathParams,
    UserChannel,
    all_domain_channels,
    cross_dd_channel,
    cross_tf_channel,
    dd_channel,
    draw_user_channel,
    steering_vector,
    td_channel,
    tf_channel,
)
from .experiments import (
    SCHEMES,
    ConfigError,
    GroupAssignment,
    Scenario,
    ScenarioResult,
    group_hl,
    group_sw,
    run_scenario,
    sweep_kh,
)
from .linalg import InvalidDimensionError, SingularGramError, hermitian_solve, logdet_hermitian
from .precoding import PrecoderSet, estimate_zf_alpha, fzf_precoders, mrt_precoders, pzf_precoders
from .spectral import SEInputs, accumulate_psi, se_fzf_closed, se_mmse_sic

__version__ = "0.1.0"

__all__ = [
    "accumulate_psi",
    "all_domain_channels",
    "AOA_PRIORS",
    "ChannelMatrix",
    "ConfigError",
    "cross_dd_channel",
    "cross_tf_channel",
    "dd_channel",
    "Domain",
    "draw_user_channel",
    "estimate_zf_alpha",
    "fzf_precoders",
    "GridDims",
    "group_hl",
    "group_sw",
    "GroupAssignment",
    "hermitian_solve",
    "InvalidDimensionError",
    "logdet_hermitian",
    "mrt_precoders",
    "PathParams",
    "PrecoderSet",
    "pzf_precoders",
    "run_scenario",
    "Scenario",
    "ScenarioResult",
    "SCHEMES",
    "se_fzf_closed",
    "se_mmse_sic",
    "SEInputs",
    "SingularGramError",
    "steering_vector",
    "sweep_kh",
    "td_channel",
    "tf_channel",
    "UserChannel",
]
