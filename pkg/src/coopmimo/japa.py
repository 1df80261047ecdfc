"""Joint adaptive power allocation: closed-form MMSE and the three SG loops.

All three stochastic-gradient variants share the same skeleton: compute
per-symbol gradients of their criterion with respect to the receive filter
and both power allocations, take a fixed-step update, then project back onto
the power budgets by renormalizing (the Lagrange multipliers of the
constrained problems are never solved explicitly).

Gradient conventions
--------------------
For the complex filter W the returned gradients are conjugate (Wirtinger)
gradients, so the derivative of the real cost with respect to Re/Im of an
entry is twice the Re/Im part of the returned value.  For the real power
entries the returned gradients are plain real derivatives of the criterion,
with the power allocations parameterized as real vectors.  Both are checked
against central finite differences in the test suite; the published sign
conventions of these updates are not self-consistent, so descent (MMSE,
MBER) and ascent (MSR) orientation is what defines the signs here.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import erfc

from .core import ChannelSet, PowerAllocation, SystemConfig
from .dstc import EquivalentChannel, equivalent_channels
from .errors import (
    DegenerateAllocationError,
    DivergenceError,
    EnumerationCapError,
    SingularFilterError,
    UndefinedSnrError,
)
from .transceiver import (
    EffectiveModel,
    ReceivedBlock,
    bpsk_candidates,
    effective_model,
    mmse_receive_filter,
)

SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class OptimizerState:
    """Receive filter, power allocation and step sizes of one optimizer run."""

    filt: np.ndarray        # ((T+1)N, N) receive filter, one column per symbol
    pa: PowerAllocation
    step_filter: float
    step_source: float
    step_relay: float
    n_steps: int = 0


@dataclass(frozen=True)
class TrainingBlock:
    """A window of received vectors with their known BPSK symbols."""

    received: np.ndarray  # (M, (T+1)N)
    symbols: np.ndarray   # (M, N), entries in {-1, +1}

    def __post_init__(self):
        object.__setattr__(self, "received", np.asarray(self.received, dtype=complex))
        object.__setattr__(self, "symbols", np.asarray(self.symbols, dtype=float))
        if self.received.ndim != 2 or self.symbols.ndim != 2:
            raise ValueError("received and symbols must be 2-D sample stacks")
        if len(self.received) != len(self.symbols) or len(self.received) < 1:
            raise ValueError("received and symbols must hold M >= 1 matching rows")

    @property
    def size(self) -> int:
        return len(self.received)


def training_block_from(blocks: list[ReceivedBlock]) -> TrainingBlock:
    """Stack per-block samples into one training window."""
    return TrainingBlock(
        received=np.array([b.received for b in blocks]),
        symbols=np.array([b.symbols for b in blocks]),
    )


def normalize_power(pa: PowerAllocation, source_power: float, relay_power: float) -> PowerAllocation:
    """Rescale both allocations onto their budgets, preserving entry ratios.

    The source entries are scaled so the source matrix has squared Frobenius
    norm ``source_power``; all relay matrices share one factor so their
    squared norms sum to ``relay_power``.
    """
    s_norm = np.sqrt(pa.source_norm2())
    r_norm = np.sqrt(pa.relay_norm2())
    if s_norm == 0.0 or r_norm == 0.0:
        raise DegenerateAllocationError("cannot normalize an all-zero allocation block")
    return PowerAllocation(
        source=pa.source * (np.sqrt(source_power) / s_norm),
        relay=pa.relay * (np.sqrt(relay_power) / r_norm),
    )


def init_state(cfg: SystemConfig) -> OptimizerState:
    """Cold-start state: stacked-identity filter, equal power allocation.

    Column j of the initial filter selects antenna j of every time slot.
    (A filter supported on the direct-link rows only would zero out every
    relay-hop gradient of the sum-rate criterion, so all slots are tapped.)
    """
    n = cfg.n_antennas
    filt = np.tile(np.eye(n), (cfg.dstc_len + 1, 1)).astype(complex)
    ones = PowerAllocation(
        source=np.ones(n), relay=np.ones((cfg.n_relays, cfg.relay_antennas))
    )
    return OptimizerState(
        filt=filt,
        pa=normalize_power(ones, cfg.source_power, cfg.relay_power),
        step_filter=cfg.step_filter,
        step_source=cfg.step_source,
        step_relay=cfg.step_relay,
    )


def q_function(x):
    """Gaussian tail probability Q(x) = P(N(0,1) > x)."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def kernel_width(n_samples: int, noise_std: float) -> float:
    """Density-estimation kernel width (4 / (3 M))^(1/5) * noise_std."""
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    return (4.0 / (3.0 * n_samples)) ** 0.2 * noise_std


def _filter_norms(filt: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(filt, axis=0)
    if np.any(norms == 0.0):
        raise SingularFilterError("receive filter has an all-zero column")
    return norms


def theoretical_ber(filt: np.ndarray, model: EffectiveModel,
                    max_candidates: int = 4096) -> tuple[np.ndarray, float]:
    """Exact BER of the sign detector, averaged over all BPSK vectors.

    For symbol j the error probability is the Q function of the noise-free
    response Re[w_j^H H_D s_l], signed by s_l[j] and scaled by the standard
    deviation of Re[w_j^H n].  Returns (per-symbol BER, mean BER).
    """
    n = model.h_eff.shape[1]
    if 2 ** n > max_candidates:
        raise EnumerationCapError(
            f"2^{n} candidate vectors exceed the cap of {max_candidates}")
    norms = _filter_norms(filt)
    cands = bpsk_candidates(n)  # (2^n, n)
    resp = np.real(filt.conj().T @ (model.h_eff @ cands.T))  # (n, 2^n)
    scale = np.sqrt(model.noise_real_var) * norms  # (n,)
    args = cands.T * resp / scale[:, None]  # sign(s_l[j]) * resp / scale
    per_symbol = np.mean(q_function(args), axis=1)
    return per_symbol, float(np.mean(per_symbol))


def kernel_density_ber(filt: np.ndarray, block: TrainingBlock, rho: float) -> float:
    """Kernel-smoothed BER estimate over a training window.

    Averages Q(margin / (rho ||w_j||)) over samples and symbols, where the
    margin is the detector statistic signed by the known symbol.
    """
    norms = _filter_norms(filt)
    stats = np.real(block.received @ filt.conj())  # (M, N)
    c = block.symbols * stats / (rho * norms[None, :])
    return float(np.mean(q_function(c)))


# ---------------------------------------------------------------------------
# MMSE criterion
# ---------------------------------------------------------------------------

def mmse_gradients(
    filt: np.ndarray,
    pa: PowerAllocation,
    block: ReceivedBlock,
    channels: ChannelSet,
    cfg: SystemConfig,
    geq: tuple[EquivalentChannel, ...] | None = None,
):
    """Instantaneous gradients of |s_j - w_j^H r|^2 for one supervised block.

    Returns (grad_filt, grad_source, grad_relay) where grad_filt is the
    conjugate gradient -r e_j^* stacked by column, and the power gradients
    are the real derivatives through the signal path r(A) = H_D(A) s + n
    with the noise realization held fixed.
    """
    model = effective_model(channels, pa, cfg, geq)
    r, s = block.received, block.symbols
    err = s - filt.conj().T @ r  # e_j per column
    grad_filt = -r[:, None] * np.conj(err)[None, :]

    # d r / d a_{S_j} = h_sda_j s_j, so dJ_j/da = -2 Re(w_j^H h_sda_j s_j e_j^*)
    wh = np.einsum("ij,ij->j", filt.conj(), model.h_sda)  # w_j^H h_sda_j
    grad_source = -2.0 * np.real(wh * s * np.conj(err))

    # d r / d a_{k_j} places g_eq_{k,j} (f_{k,j} A_S s) in the relay rows.
    w_relay = filt[cfg.n_antennas:]
    if geq is None:
        geq = equivalent_channels(channels)
    scaled_s = pa.source * s
    grad_relay = np.empty_like(pa.relay)
    for k, eq in enumerate(geq):
        u = np.einsum("ij,ij->j", w_relay.conj(), eq.matrix)  # w_{R_j}^H g_eq_{k,j}
        v = channels.src_relay[k] @ scaled_s                  # f_{k,j} A_S s per row j
        grad_relay[k] = -2.0 * np.real(u * v * np.conj(err))
    return grad_filt, grad_source, grad_relay


def _finish_step(state: OptimizerState, new_filt, new_source, new_relay, cfg: SystemConfig):
    step = state.n_steps + 1
    if not np.all(np.isfinite(new_filt)):
        raise DivergenceError("step_filter", step)
    if not np.all(np.isfinite(new_source)):
        raise DivergenceError("step_source", step)
    if not np.all(np.isfinite(new_relay)):
        raise DivergenceError("step_relay", step)
    pa = normalize_power(
        PowerAllocation(source=new_source, relay=new_relay),
        cfg.source_power,
        cfg.relay_power,
    )
    return replace(state, filt=new_filt, pa=pa, n_steps=step)


def sg_mmse_step(
    state: OptimizerState,
    block: ReceivedBlock,
    channels: ChannelSet,
    cfg: SystemConfig,
    geq: tuple[EquivalentChannel, ...] | None = None,
) -> OptimizerState:
    """One supervised LMS-style descent step on all three parameter sets."""
    g_filt, g_src, g_rel = mmse_gradients(state.filt, state.pa, block, channels, cfg, geq)
    return _finish_step(
        state,
        state.filt - state.step_filter * g_filt,
        state.pa.source - state.step_source * g_src,
        state.pa.relay - state.step_relay * g_rel,
        cfg,
    )


# ---------------------------------------------------------------------------
# MBER criterion
# ---------------------------------------------------------------------------

def mber_gradients(
    filt: np.ndarray,
    pa: PowerAllocation,
    block: TrainingBlock,
    channels: ChannelSet,
    cfg: SystemConfig,
    geq: tuple[EquivalentChannel, ...] | None = None,
    rho: float | None = None,
):
    """Gradients of the kernel-smoothed BER over a training window.

    The smoothed estimate is (1/M) sum_m Q(c_m) per symbol with
    c_m = s_m Re[w^H r_m] / (rho ||w||).  The filter gradient differentiates
    through the received samples directly; the power gradients differentiate
    through the signal model with the noise realizations held fixed.
    Returns (grad_filt, grad_source, grad_relay, rho).
    """
    model = effective_model(channels, pa, cfg, geq)
    if rho is None:
        rho = kernel_width(block.size, np.sqrt(model.noise_real_var))
    norms = _filter_norms(filt)
    m = block.size
    r, s = block.received, block.symbols

    stats = r @ filt.conj()                  # (M, N) complex w_j^H r_m
    margins = np.real(stats)
    c = s * margins / (rho * norms[None, :])
    kern = np.exp(-0.5 * c ** 2)             # (M, N)
    coef = kern * s                          # kernel weight times sgn(s)
    scale = m * SQRT_2PI * rho * norms       # (N,)

    # filter gradient: -(1/(2 M sqrt(2pi) rho n_j)) sum_m coef (r_m - margin w_j / n_j^2)
    term1 = r.T @ coef                                      # ((T+1)N, N)
    term2 = filt * (np.sum(coef * margins, axis=0) / norms ** 2)[None, :]
    grad_filt = -(term1 - term2) / (2.0 * scale)[None, :]

    # source gradient: margin derivative Re[w_j^H h_sda_j s_mj]; s * sgn(s) = 1
    wh = np.einsum("ij,ij->j", filt.conj(), model.h_sda)
    grad_source = -np.real(wh) * np.sum(kern, axis=0) / scale

    # relay gradient: margin derivative Re[w_Rj^H g_eq_{k,j} (f_{k,j} A_S s_m)]
    w_relay = filt[cfg.n_antennas:]
    if geq is None:
        geq = equivalent_channels(channels)
    grad_relay = np.empty_like(pa.relay)
    for k, eq in enumerate(geq):
        u = np.einsum("ij,ij->j", w_relay.conj(), eq.matrix)
        v = (pa.source * s) @ channels.src_relay[k].T        # (M, B)
        grad_relay[k] = -np.sum(coef * np.real(u[None, :] * v), axis=0) / scale
    return grad_filt, grad_source, grad_relay, rho


def sg_mber_step(
    state: OptimizerState,
    block: TrainingBlock,
    channels: ChannelSet,
    cfg: SystemConfig,
    geq: tuple[EquivalentChannel, ...] | None = None,
) -> OptimizerState:
    """One descent step on the kernel-smoothed BER of a training window.

    The kernel weights scale the raw gradients by exp(-c^2/2) terms that
    vanish once the margins separate, so each update moves a fixed step
    length along the normalized gradient direction (the step fades out
    together with the gradient through the epsilon floor).  Descent for
    sufficiently small steps is preserved.
    """
    g_filt, g_src, g_rel, _ = mber_gradients(state.filt, state.pa, block, channels, cfg, geq)
    return _finish_step(
        state,
        state.filt - state.step_filter * _unit_direction(g_filt),
        state.pa.source - state.step_source * _unit_direction(g_src),
        state.pa.relay - state.step_relay * _unit_direction(g_rel),
        cfg,
    )


# ---------------------------------------------------------------------------
# MSR criterion
# ---------------------------------------------------------------------------

def msr_gradients(
    filt: np.ndarray,
    pa: PowerAllocation,
    channels: ChannelSet,
    cfg: SystemConfig,
    geq: tuple[EquivalentChannel, ...] | None = None,
):
    """Exact gradients of the instantaneous relay-hop SNR.

    SNR = sigma_s^2 ||W_R^H H_rel A_S||_F^2 /
          (sigma_n^2 (||W||_F^2 + ||W_R^H sum_k G_eq_k A_k||_F^2))

    Quotient-rule derivatives with respect to W (conjugate gradient), the
    source entries and the relay entries.  Returns
    (grad_filt, grad_source, grad_relay, snr).
    """
    if geq is None:
        geq = equivalent_channels(channels)
    model = effective_model(channels, pa, cfg, geq)
    n = cfg.n_antennas
    w_relay = filt[n:]

    h_rel = model.h_eff[n:]          # H_rel A_S, relay rows with both allocations
    h_rel_nopa = model.h_sda[n:]     # relay rows before A_S
    x = w_relay.conj().T @ h_rel     # (N, N)
    num_raw = float(np.sum(np.abs(x) ** 2))
    num = cfg.symbol_power * num_raw

    wg = w_relay.conj().T @ model.relay_gain  # (N, B)
    den_raw = float(np.sum(np.abs(filt) ** 2)) + float(np.sum(np.abs(wg) ** 2))
    n_eq = cfg.noise_power * den_raw
    if n_eq == 0.0:
        raise UndefinedSnrError("SNR gradients undefined for an all-zero filter")
    snr = num / n_eq

    # conjugate gradient of the ratio w.r.t. W: relay rows carry the signal
    # and relay-gain terms, every row carries the ||W||^2 penalty.
    grad_num = np.zeros_like(filt)
    grad_num[n:] = cfg.symbol_power * (h_rel @ x.conj().T)
    grad_den = cfg.noise_power * filt.copy()
    grad_den[n:] += cfg.noise_power * (model.relay_gain @ wg.conj().T)
    grad_filt = (grad_num * n_eq - num * grad_den) / n_eq ** 2

    # source entries only enter the numerator: d num / d a_Sj = 2 a_Sj sigma_s^2 ||W_R^H h_j||^2
    col_gain = np.sum(np.abs(w_relay.conj().T @ h_rel_nopa) ** 2, axis=0)
    grad_source = cfg.symbol_power * 2.0 * pa.source * col_gain / n_eq

    grad_relay = np.empty_like(pa.relay)
    for k, eq in enumerate(geq):
        u = w_relay.conj().T @ eq.matrix      # (N, B); column j is W_R^H g_eq_{k,j}
        rows = channels.src_relay[k] * pa.source[None, :]  # f_{k,j} A_S per row
        # d num_raw / d a_kj = 2 Re(u_j^H X conj(rows_j))
        dnum = 2.0 * np.real(np.einsum("ij,in,jn->j", u.conj(), x, rows.conj()))
        # d den_raw / d a_kj = 2 Re(u_j^H (W_R^H relay_gain)_col_j)
        dden = 2.0 * np.real(np.einsum("ij,ij->j", u.conj(), wg))
        grad_relay[k] = cfg.symbol_power * (dnum * den_raw - num_raw * dden) / (
            cfg.noise_power * den_raw ** 2
        )
    return grad_filt, grad_source, grad_relay, snr


def _unit_direction(grad: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Gradient direction with near-unit length, fading out as ||grad|| -> 0."""
    return grad / (np.linalg.norm(grad) + eps)


def sg_msr_step(
    state: OptimizerState,
    channels: ChannelSet,
    cfg: SystemConfig,
    geq: tuple[EquivalentChannel, ...] | None = None,
) -> OptimizerState:
    """One ascent step on the instantaneous SNR.

    The raw gradient magnitudes scale like the SNR itself, so each update
    moves a fixed step length along the normalized gradient direction; the
    objective is still non-decreasing for sufficiently small steps.
    """
    g_filt, g_src, g_rel, _ = msr_gradients(state.filt, state.pa, channels, cfg, geq)
    return _finish_step(
        state,
        state.filt + state.step_filter * _unit_direction(g_filt),
        state.pa.source + state.step_source * _unit_direction(g_src),
        state.pa.relay + state.step_relay * _unit_direction(g_rel),
        cfg,
    )


# ---------------------------------------------------------------------------
# Closed-form alternating MMSE
# ---------------------------------------------------------------------------

def _budget_solution(gains: np.ndarray, budget: float, symbol_power: float) -> np.ndarray:
    """Constrained per-entry stationary solution a_j = s2 g_j / (s2 g_j^2 + lam).

    ``gains`` are the nonnegative channel-filter couplings |g_j|; ``lam`` is
    the power-constraint multiplier, found by bisection on the monotone
    constraint equation sum_j a_j(lam)^2 = budget.  Zero-gain coordinates
    receive zero power (with a warning): the filter sees no usable path.
    """
    g = np.asarray(gains, dtype=float)
    if np.any(g == 0.0):
        warnings.warn("degenerate channel: zero-gain power coordinates get zero power")
    if not np.any(g > 0.0):
        raise DegenerateAllocationError("all power coordinates have zero gain")

    def allocation(lam: float) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(g > 0.0, symbol_power * g / (symbol_power * g ** 2 + lam), 0.0)
        return a

    unconstrained = allocation(0.0)
    total = float(np.sum(unconstrained ** 2))
    if total <= budget:
        # constraint inactive at lam = 0; spend the full budget anyway so the
        # allocation invariant holds (pure rescale, direction preserved)
        return unconstrained * np.sqrt(budget / total)
    lo, hi = 0.0, 1.0
    while float(np.sum(allocation(hi) ** 2)) > budget:
        hi *= 4.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(np.sum(allocation(mid) ** 2)) > budget:
            lo = mid
        else:
            hi = mid
    return allocation(0.5 * (lo + hi))


def mmse_closed_form_iterate(
    cfg: SystemConfig,
    channels: ChannelSet,
    state: OptimizerState,
    n_iters: int,
    geq: tuple[EquivalentChannel, ...] | None = None,
) -> OptimizerState:
    """Alternate the closed-form filter and per-entry power solutions.

    Each pass solves the MMSE filter at the current allocation, then the
    per-entry stationary conditions with symbol expectations replaced by
    sigma_s^2 and the constraint multipliers lambda determined numerically
    from the power-constraint equations (one bisection per budget).  The
    complex stationary solutions enter through their moduli since the
    allocation is nonnegative real; along the alternation path the inverted
    inner products have near-zero phase.  A final renormalization only
    cleans up bisection rounding.
    """
    if geq is None:
        geq = equivalent_channels(channels)
    pa = state.pa
    filt = state.filt
    for _ in range(n_iters):
        model = effective_model(channels, pa, cfg, geq)
        filt = mmse_receive_filter(model, cfg.symbol_power)

        # source entries: coupling |h_sda_j^H w_j|
        wh = np.abs(np.einsum("ij,ij->j", filt.conj(), model.h_sda))
        new_source = _budget_solution(wh, cfg.source_power, cfg.symbol_power)

        # relay entries: coupling |a_Sj F_k[j,j] w_{R_j}^H g_eq_{k,j}|
        w_relay = filt[cfg.n_antennas:]
        couplings = np.empty_like(pa.relay)
        for k, eq in enumerate(geq):
            u = np.abs(np.einsum("ij,ij->j", w_relay.conj(), eq.matrix))
            couplings[k] = new_source * np.abs(np.diagonal(channels.src_relay[k])) * u
        new_relay = _budget_solution(couplings.ravel(), cfg.relay_power,
                                     cfg.symbol_power).reshape(couplings.shape)

        pa = normalize_power(
            PowerAllocation(source=new_source, relay=new_relay),
            cfg.source_power,
            cfg.relay_power,
        )
    return replace(state, filt=filt, pa=pa, n_steps=state.n_steps + n_iters)
