"""Tight convex/concave envelopes of activation-after-affine compositions on
boxes, a separation oracle over them, and an LP cutting-plane tightener for
network activation bounds."""

from .activations import (
    ACTIVATION_TAGS,
    Activation,
    Concave,
    ConcaveEnvelope1D,
    Convex,
    ConvexEnvelope1D,
    EnvelopeError,
    Interval,
    ReflectedSShaped,
    SShaped,
    UnknownActivationError,
    conc_env_1d,
    conc_env_1d_supergrad,
    derivative,
    eval_activation,
    make_activation,
    range_on_interval,
    reflect,
    tie_point,
)
from .envelope import (
    Cut,
    NormalizedInstance,
    RawInstance,
    RegionLabel,
    ReindexMap,
    SeparationOracle,
    classify,
    conc_env,
    conc_env_supergrad,
    conv_env,
    conv_env_subgrad,
    h_overestimator,
    h_supergrad,
    h_under_subgrad,
    h_underestimator,
    normalize,
    separate,
)
from .gapstats import GapReport, gap_report
from .lp import LinearProgram, LpOutcome, MalformedLpError, solve, write_lp_text
from .network import (
    ActivationBounds,
    Layer,
    LayerState,
    MalformedNetworkError,
    NetworkDimensionError,
    NetworkModel,
    forward,
    interval_propagate,
    load_json,
    make_random_net,
    save_json,
)
from .tightener import (
    BoundsReport,
    InconsistentBoundsError,
    NeuronBound,
    build_base_relaxation,
    cut_round,
    tighten_all,
    tighten_neuron,
)

__version__ = "0.1.0"
