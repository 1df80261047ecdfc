"""Adaptive power allocation for two-hop cooperative MIMO links.

The package simulates an amplify-and-forward relay network with distributed
space-time coding, jointly adapts the receive filter and the per-antenna
power allocations under three criteria (minimum MSE, minimum BER, maximum
sum rate), models the quantized feedback of the optimized allocations, and
ships a Monte Carlo harness plus CLI that reproduces the reference curves
at desk scale.
"""

from .core import (
    ChannelSet,
    PowerAllocation,
    SystemConfig,
    awgn_vector,
    bpsk_symbols,
    draw_channel_set,
    epa_init,
    trial_rng,
)
from .dstc import (
    EquivalentChannel,
    alamouti_encode,
    apply_conjugation,
    build_equivalent_channel,
    equivalent_channels,
)
from .transceiver import (
    EffectiveModel,
    ReceivedBlock,
    effective_model,
    instantaneous_snr,
    instantaneous_snr_trace,
    linear_detect,
    ml_detect,
    mmse_receive_filter,
    simulate_block,
    sum_rate,
)
from .japa import (
    OptimizerState,
    TrainingBlock,
    init_state,
    kernel_density_ber,
    kernel_width,
    mmse_closed_form_iterate,
    normalize_power,
    q_function,
    sg_mber_step,
    sg_mmse_step,
    sg_msr_step,
    theoretical_ber,
)
from .feedback import (
    FeedbackDiagnostics,
    FeedbackErrorModel,
    QuantizerSpec,
    mse_exact,
    mse_excess,
    mse_with_errors,
    perturb_pa,
    quantize_pa,
)
from .complexity import ComplexityReport, complexity_counts
from .harness import CurvePoint, ExperimentSpec, run_experiment, write_results

__version__ = "0.1.0"
