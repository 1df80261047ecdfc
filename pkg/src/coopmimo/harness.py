"""Monte Carlo experiment runner producing the CSV curves for the figures.

Each experiment sweeps an x-axis (received SNR, feedback bits, or symbol
index), runs per-trial adaptation and measurement, and emits one CurvePoint
per (algorithm, x) with a binomial or sample standard error.  Trials draw
their random streams from (master seed, experiment, point, algorithm,
trial), so results are bit-reproducible and independent of execution order.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import (
    ChannelSet,
    PowerAllocation,
    SystemConfig,
    bpsk_symbols,
    complex_gaussian,
    draw_channel_set,
    epa_init,
    trial_rng,
)
from .dstc import equivalent_channels
from .errors import ConfigError
from .feedback import (
    FeedbackErrorModel,
    QuantizerSpec,
    default_clip_range,
    perturb_pa,
    quantize_pa,
)
from .japa import (
    OptimizerState,
    init_state,
    mmse_closed_form_iterate,
    sg_mber_step,
    sg_mmse_step,
    sg_msr_step,
    training_block_from,
)
from .transceiver import (
    bpsk_candidates,
    effective_model,
    mmse_receive_filter,
    simulate_block,
    snr_given_model,
    sum_rate,
)

EPA = "EPA"
JAPA_MMSE = "JAPA-MMSE-SG"
JAPA_MBER = "JAPA-MBER-SG"
JAPA_MSR = "JAPA-MSR-SG"
MMSE_CLOSED_FORM = "MMSE-closed-form"
KNOWN_ALGORITHMS = (EPA, JAPA_MMSE, JAPA_MBER, JAPA_MSR, MMSE_CLOSED_FORM)

# Tuned (filter, source, relay) step sizes per adaptive loop.  The MBER and
# MSR loops take fixed-length steps along normalized gradient directions, so
# their numbers are path lengths per iteration; the MMSE loop is plain LMS.
# The MSR source step is zero by default: ascending the relay-hop SNR in the
# source entries concentrates all source power on one antenna, which starves
# the other symbol stream in BER experiments (second-phase-only adaptation).
# The sum-rate experiment re-enables it, where that concentration is optimal.
DEFAULT_STEPS = {
    JAPA_MMSE: (0.02, 0.005, 0.005),
    JAPA_MBER: (0.08, 0.004, 0.004),
    JAPA_MSR: (0.02, 0.0, 0.02),
}
SUMRATE_MSR_STEPS = (0.02, 0.02, 0.02)

EXPERIMENTS = ("ber-vs-snr", "feedback-bits", "sum-rate", "convergence")
_EXP_STREAM = {name: i + 1 for i, name in enumerate(EXPERIMENTS)}
_CAL_STREAM = 999

CSV_HEADER = "experiment,algorithm,x,y,y_stderr,trials,seed"


@dataclass(frozen=True)
class CurvePoint:
    experiment: str
    algorithm: str
    x: float
    y: float
    y_stderr: float
    trials: int
    seed: int


@dataclass
class ExperimentSpec:
    """Everything one experiment run needs, including the system config."""

    experiment: str
    cfg: SystemConfig = field(default_factory=SystemConfig)
    algorithms: tuple[str, ...] = (EPA, JAPA_MMSE, JAPA_MBER, JAPA_MSR)
    snr_grid_db: tuple[float, ...] = (0.0, 3.0, 6.0, 9.0, 12.0, 15.0)
    trials: int = 50
    training_len: int = 200
    feedback_bits: tuple[int, ...] | None = None
    output_path: str | None = None
    # measurement controls
    payload_blocks: int = 100     # payload blocks per trial
    target_errors: int = 100      # extend past `trials` until this many errors
    max_extra_trials: int = 2000
    detector: str = "ml"
    # algorithm controls; step triples override DEFAULT_STEPS when given
    mber_window: int = 24
    closed_form_iters: int = 10
    steps_mmse: tuple[float, float, float] | None = None
    steps_mber: tuple[float, float, float] | None = None
    steps_msr: tuple[float, float, float] | None = None
    sigma_f: float = 0.0          # feedback channel error variance
    # convergence controls
    convergence_symbols: int = 200
    convergence_snr_db: float = 10.0
    calibration_channels: int = 192

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        self.algorithms = tuple(self.algorithms)
        for alg in self.algorithms:
            if alg not in KNOWN_ALGORITHMS:
                raise ConfigError(f"unknown algorithm {alg!r}; expected one of {KNOWN_ALGORITHMS}")
        self.snr_grid_db = tuple(float(x) for x in self.snr_grid_db)
        if any(b >= a for a, b in zip(self.snr_grid_db[1:], self.snr_grid_db)):
            raise ConfigError("snr_grid_db must be strictly increasing")
        if len(self.snr_grid_db) < 1:
            raise ConfigError("snr_grid_db must not be empty")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.training_len < 0:
            raise ConfigError("training_len must be >= 0")
        if self.payload_blocks < 1:
            raise ConfigError("payload_blocks must be >= 1")
        if self.detector not in ("ml", "linear"):
            raise ConfigError(f"detector must be 'ml' or 'linear', got {self.detector!r}")
        if self.mber_window < 1:
            raise ConfigError("mber_window must be >= 1")
        if self.experiment == "feedback-bits":
            if not self.feedback_bits:
                raise ConfigError("feedback-bits experiment needs a feedback_bits list")
            self.feedback_bits = tuple(int(b) for b in self.feedback_bits)
        if self.convergence_symbols < 1:
            raise ConfigError("convergence_symbols must be >= 1")


# ---------------------------------------------------------------------------
# SNR calibration
# ---------------------------------------------------------------------------

_calibration_cache: dict = {}


def calibrate_noise_power(
    cfg: SystemConfig,
    target_db: float,
    n_channels: int = 192,
    tol_db: float = 0.045,
) -> float:
    """Noise power at which the EPA average received SNR hits the target.

    The received SNR convention is the relay-hop post-MMSE-filter SNR,
    averaged (in linear scale) over a fixed set of channel draws; it is
    monotone decreasing in the noise power, so bisection applies.
    """
    key = (cfg.n_antennas, cfg.n_relays, cfg.source_power, cfg.relay_power,
           cfg.seed, round(float(target_db), 6), n_channels)
    if key in _calibration_cache:
        return _calibration_cache[key]

    draws = []
    for i in range(n_channels):
        rng = trial_rng(cfg.seed, _CAL_STREAM, i)
        channels = draw_channel_set(cfg, rng)
        draws.append((channels, equivalent_channels(channels)))
    pa = epa_init(cfg)

    def avg_snr_db(noise_power: float) -> float:
        cfg_pt = replace(cfg, noise_power=noise_power)
        snrs = []
        for channels, geq in draws:
            model = effective_model(channels, pa, cfg_pt, geq)
            filt = mmse_receive_filter(model, cfg_pt.symbol_power)
            snrs.append(snr_given_model(filt, model, cfg_pt))
        return 10.0 * math.log10(float(np.mean(snrs)))

    lo, hi = 1e-9, 1e6  # SNR(lo) far above any sensible target, SNR(hi) far below
    for _ in range(80):
        mid = math.sqrt(lo * hi)
        value = avg_snr_db(mid)
        if abs(value - target_db) <= tol_db:
            _calibration_cache[key] = mid
            return mid
        if value > target_db:
            lo = mid
        else:
            hi = mid
    raise ConfigError(f"SNR calibration did not converge for target {target_db} dB")


# ---------------------------------------------------------------------------
# Per-trial adaptation and measurement
# ---------------------------------------------------------------------------

def _steps_for(alg: str, spec: ExperimentSpec) -> tuple[float, float, float] | None:
    explicit = {JAPA_MMSE: spec.steps_mmse, JAPA_MBER: spec.steps_mber,
                JAPA_MSR: spec.steps_msr}.get(alg)
    if explicit is not None:
        return tuple(float(s) for s in explicit)
    if alg == JAPA_MSR and spec.experiment == "sum-rate":
        return SUMRATE_MSR_STEPS
    return DEFAULT_STEPS.get(alg)


def _train(alg: str, spec: ExperimentSpec, cfg: SystemConfig, channels: ChannelSet,
           geq, rng) -> tuple[PowerAllocation, np.ndarray]:
    """Run one trial's adaptation; returns the final allocation and filter."""
    if alg == EPA:
        pa = epa_init(cfg)
        model = effective_model(channels, pa, cfg, geq)
        return pa, mmse_receive_filter(model, cfg.symbol_power)
    if alg == MMSE_CLOSED_FORM:
        state = mmse_closed_form_iterate(cfg, channels, init_state(cfg),
                                         spec.closed_form_iters, geq)
        return state.pa, state.filt

    state = _init_for(alg, spec, cfg)
    if alg == JAPA_MSR:
        for _ in range(spec.training_len):
            state = sg_msr_step(state, channels, cfg, geq)
        return state.pa, state.filt

    buffer: deque = deque(maxlen=spec.mber_window)
    for _ in range(spec.training_len):
        symbols = bpsk_symbols(cfg.n_antennas, rng)
        block = simulate_block(cfg, channels, state.pa, symbols, rng,
                               model=effective_model(channels, state.pa, cfg, geq))
        if alg == JAPA_MMSE:
            state = sg_mmse_step(state, block, channels, cfg, geq)
        elif alg == JAPA_MBER:
            buffer.append(block)
            state = sg_mber_step(state, training_block_from(list(buffer)),
                                 channels, cfg, geq)
        else:  # pragma: no cover - guarded by spec validation
            raise ConfigError(f"unknown algorithm {alg!r}")
    return state.pa, state.filt


def _init_for(alg: str, spec: ExperimentSpec, cfg: SystemConfig) -> OptimizerState:
    state = init_state(cfg)
    steps = _steps_for(alg, spec)
    if steps is None:
        return state
    return replace(state, step_filter=steps[0], step_source=steps[1],
                   step_relay=steps[2])


def _payload_errors(detector: str, model_phys, model_det, filt: np.ndarray,
                    symbols: np.ndarray, noise_base: np.ndarray) -> int:
    """Count symbol errors over a batch of payload blocks.

    ``symbols`` is (N, P); ``noise_base`` is unit-variance complex (D, P),
    scaled by the physical model's noise level so paired comparisons can
    reuse one draw.
    """
    r = model_phys.h_eff @ symbols + np.sqrt(model_phys.noise_var) * noise_base
    if detector == "ml":
        cands = bpsk_candidates(symbols.shape[0])
        hc = model_det.h_eff @ cands.T  # (D, 2^N)
        scores = -2.0 * np.real(r.conj().T @ hc) + np.sum(np.abs(hc) ** 2, axis=0)[None, :]
        decided = cands[np.argmin(scores, axis=1)].T
    else:
        decided = np.where(np.real(filt.conj().T @ r) >= 0.0, 1.0, -1.0)
    return int(np.sum(decided != symbols))


def _ber_curve_point(spec: ExperimentSpec, cfg_pt: SystemConfig, point_idx: int,
                     alg_idx: int, alg: str, x_value: float) -> CurvePoint:
    """Accumulate payload errors over adaptively extended trials."""
    stream = _EXP_STREAM[spec.experiment]
    errors = 0
    bits = 0
    trial = 0
    while trial < spec.trials or (
        errors < spec.target_errors and trial < spec.trials + spec.max_extra_trials
    ):
        rng = trial_rng(spec.cfg.seed, stream, point_idx, alg_idx, trial)
        channels = draw_channel_set(cfg_pt, rng)
        geq = equivalent_channels(channels)
        pa, filt = _train(alg, spec, cfg_pt, channels, geq, rng)
        model = effective_model(channels, pa, cfg_pt, geq)
        symbols = bpsk_symbols(cfg_pt.n_antennas * spec.payload_blocks, rng).reshape(
            cfg_pt.n_antennas, spec.payload_blocks, order="F")
        noise = complex_gaussian((cfg_pt.rx_dim, spec.payload_blocks), 1.0, rng)
        errors += _payload_errors(spec.detector, model, model, filt, symbols, noise)
        bits += symbols.size
        trial += 1
    ber = errors / bits
    stderr = math.sqrt(max(ber * (1.0 - ber), 1.0 / bits) / bits)
    return CurvePoint(spec.experiment, alg, x_value, ber, stderr, bits, spec.cfg.seed)


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def run_ber_vs_snr(spec: ExperimentSpec) -> list[CurvePoint]:
    """BER versus received SNR for each algorithm (Monte Carlo)."""
    points = []
    for pi, target in enumerate(spec.snr_grid_db):
        noise = calibrate_noise_power(spec.cfg, target, spec.calibration_channels)
        cfg_pt = replace(spec.cfg, noise_power=noise)
        for ai, alg in enumerate(spec.algorithms):
            points.append(_ber_curve_point(spec, cfg_pt, pi, ai, alg, target))
    return points


def run_feedback_bits(spec: ExperimentSpec) -> list[CurvePoint]:
    """BER of the MBER loop under quantized (and optionally noisy) feedback.

    Adaptation runs once per trial; every feedback variant then reuses the
    same trained allocation, payload symbols and noise, so curves are paired
    across bit widths.  The destination replays the (deterministic)
    quantizer, so with a clean feedback channel detection stays matched.
    """
    clip = default_clip_range(spec.cfg.source_power, spec.cfg.relay_power)
    err_model = FeedbackErrorModel(spec.sigma_f)
    variants: list[tuple[str, QuantizerSpec | None]] = [
        (f"{JAPA_MBER}-{b}bit", QuantizerSpec(bits=b, clip_range=clip))
        for b in (spec.feedback_bits or ())
    ]
    variants.append((f"{JAPA_MBER}-perfect", None))
    stream = _EXP_STREAM[spec.experiment]

    points = []
    for pi, target in enumerate(spec.snr_grid_db):
        noise = calibrate_noise_power(spec.cfg, target, spec.calibration_channels)
        cfg_pt = replace(spec.cfg, noise_power=noise)
        errors = np.zeros(len(variants), dtype=np.int64)
        bits = 0
        trial = 0
        while trial < spec.trials or (
            int(errors.min()) < spec.target_errors
            and trial < spec.trials + spec.max_extra_trials
        ):
            rng = trial_rng(spec.cfg.seed, stream, pi, 0, trial)
            channels = draw_channel_set(cfg_pt, rng)
            geq = equivalent_channels(channels)
            pa_opt, filt = _train(JAPA_MBER, spec, cfg_pt, channels, geq, rng)
            symbols = bpsk_symbols(cfg_pt.n_antennas * spec.payload_blocks, rng).reshape(
                cfg_pt.n_antennas, spec.payload_blocks, order="F")
            noise_base = complex_gaussian((cfg_pt.rx_dim, spec.payload_blocks), 1.0, rng)
            for vi, (_, quantizer) in enumerate(variants):
                if quantizer is None:
                    pa_known = pa_phys = pa_opt
                else:
                    pa_known = quantize_pa(pa_opt, quantizer)
                    pa_phys = perturb_pa(pa_known, err_model, rng)
                model_phys = effective_model(channels, pa_phys, cfg_pt, geq)
                model_det = (model_phys if pa_known is pa_phys
                             else effective_model(channels, pa_known, cfg_pt, geq))
                errors[vi] += _payload_errors(spec.detector, model_phys, model_det,
                                              filt, symbols, noise_base)
            bits += symbols.size
            trial += 1
        for vi, (label, _) in enumerate(variants):
            ber = errors[vi] / bits
            stderr = math.sqrt(max(ber * (1.0 - ber), 1.0 / bits) / bits)
            points.append(CurvePoint(spec.experiment, label, target, float(ber),
                                     stderr, bits, spec.cfg.seed))
    return points


def run_sum_rate(spec: ExperimentSpec) -> list[CurvePoint]:
    """Average achievable rate after adaptation, one curve per algorithm."""
    stream = _EXP_STREAM[spec.experiment]
    points = []
    for pi, target in enumerate(spec.snr_grid_db):
        noise = calibrate_noise_power(spec.cfg, target, spec.calibration_channels)
        cfg_pt = replace(spec.cfg, noise_power=noise)
        for ai, alg in enumerate(spec.algorithms):
            rates = np.empty(spec.trials)
            for trial in range(spec.trials):
                rng = trial_rng(spec.cfg.seed, stream, pi, ai, trial)
                channels = draw_channel_set(cfg_pt, rng)
                geq = equivalent_channels(channels)
                pa, filt = _train(alg, spec, cfg_pt, channels, geq, rng)
                model = effective_model(channels, pa, cfg_pt, geq)
                rates[trial] = sum_rate(snr_given_model(filt, model, cfg_pt))
            stderr = float(np.std(rates, ddof=1) / math.sqrt(spec.trials)) if spec.trials > 1 else 0.0
            points.append(CurvePoint(spec.experiment, alg, target,
                                     float(np.mean(rates)), stderr,
                                     spec.trials, spec.cfg.seed))
    return points


def run_convergence(spec: ExperimentSpec) -> list[CurvePoint]:
    """Per-symbol BER of the adaptive linear receiver from a cold start."""
    stream = _EXP_STREAM[spec.experiment]
    noise = calibrate_noise_power(spec.cfg, spec.convergence_snr_db,
                                  spec.calibration_channels)
    cfg_pt = replace(spec.cfg, noise_power=noise)
    n = cfg_pt.n_antennas
    points = []
    for ai, alg in enumerate(spec.algorithms):
        errors = np.zeros(spec.convergence_symbols, dtype=np.int64)
        for trial in range(spec.trials):
            rng = trial_rng(spec.cfg.seed, stream, 0, ai, trial)
            channels = draw_channel_set(cfg_pt, rng)
            geq = equivalent_channels(channels)
            state = _init_for(alg, spec, cfg_pt)
            buffer: deque = deque(maxlen=spec.mber_window)
            for i in range(spec.convergence_symbols):
                symbols = bpsk_symbols(n, rng)
                model = effective_model(channels, state.pa, cfg_pt, geq)
                block = simulate_block(cfg_pt, channels, state.pa, symbols, rng,
                                       model=model)
                decided = np.where(
                    np.real(state.filt.conj().T @ block.received) >= 0.0, 1.0, -1.0)
                errors[i] += int(np.sum(decided != symbols))
                if alg == EPA:
                    continue
                if alg == JAPA_MMSE or alg == MMSE_CLOSED_FORM:
                    state = sg_mmse_step(state, block, channels, cfg_pt, geq)
                elif alg == JAPA_MBER:
                    buffer.append(block)
                    state = sg_mber_step(state, training_block_from(list(buffer)),
                                         channels, cfg_pt, geq)
                elif alg == JAPA_MSR:
                    state = sg_msr_step(state, channels, cfg_pt, geq)
        bits_per_index = spec.trials * n
        for i in range(spec.convergence_symbols):
            ber = errors[i] / bits_per_index
            stderr = math.sqrt(max(ber * (1.0 - ber), 1.0 / bits_per_index) / bits_per_index)
            points.append(CurvePoint(spec.experiment, alg, float(i + 1), float(ber),
                                     stderr, bits_per_index, spec.cfg.seed))
    return points


def run_experiment(spec: ExperimentSpec) -> list[CurvePoint]:
    runner = {
        "ber-vs-snr": run_ber_vs_snr,
        "feedback-bits": run_feedback_bits,
        "sum-rate": run_sum_rate,
        "convergence": run_convergence,
    }[spec.experiment]
    return runner(spec)


# ---------------------------------------------------------------------------
# Results I/O
# ---------------------------------------------------------------------------

def write_results(points: list[CurvePoint], path) -> None:
    """Write curve points as CSV, sorted by (algorithm, x), 12 significant digits."""
    ordered = sorted(points, key=lambda p: (p.algorithm, p.x))
    lines = [CSV_HEADER]
    for p in ordered:
        lines.append(
            f"{p.experiment},{p.algorithm},{p.x:.12g},{p.y:.12g},"
            f"{p.y_stderr:.12g},{p.trials},{p.seed}"
        )
    target = Path(path)
    try:
        target.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write results to {target}: {exc}") from exc


def read_results(path) -> list[CurvePoint]:
    """Read a CSV produced by write_results."""
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigError(f"{path}: missing or unexpected header")
    points = []
    for line in lines[1:]:
        exp, alg, x, y, se, trials, seed = line.split(",")
        points.append(CurvePoint(exp, alg, float(x), float(y), float(se),
                                 int(trials), int(seed)))
    return points
