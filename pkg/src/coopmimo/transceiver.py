"""End-to-end received signal model, linear MMSE and ML receivers, SNR.

One block spans T+1 slots: the source broadcasts during slot 0 (and is
silent afterwards), the relays amplify, re-encode and forward during the
remaining T slots.  After the receiver-side conjugation the whole block is
linear in the transmitted symbol vector,

    r = H_D s + n_D,      H_D = [H_sd A_S ; sum_k G_eq_k A_k F_k A_S]

with n_D modeled as white circular Gaussian of per-entry variance
sigma^2 (1 + ||sum_k G_eq_k A_k||_F^2); the second term is the relay-amplified
first-hop noise folded into the destination noise floor.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import ChannelSet, PowerAllocation, SystemConfig, complex_gaussian
from .dstc import EquivalentChannel, equivalent_channels
from .errors import (
    ConfigError,
    DimensionError,
    EnumerationCapError,
    NumericalError,
    UndefinedSnrError,
)

DEFAULT_CANDIDATE_CAP = 4096


@dataclass(frozen=True)
class ReceivedBlock:
    """One stacked received vector plus the symbols that produced it."""

    received: np.ndarray  # ((T+1)N,)
    symbols: np.ndarray   # (N,)


@dataclass(frozen=True)
class EffectiveModel:
    """Stacked channel, PA-free factor, relay gain and noise level.

    ``h_eff`` is H_D, ``h_sda`` the same channel with the source allocation
    factored out (column j of h_eff equals source[j] times column j of
    h_sda), ``geq_scaled`` holds G_eq_k A_k per relay and ``relay_gain``
    their sum.  ``noise_var`` is the common diagonal of the stacked noise
    covariance.
    """

    h_eff: np.ndarray                 # ((T+1)N, N)
    h_sda: np.ndarray                 # ((T+1)N, N)
    geq_scaled: tuple[np.ndarray, ...]  # each (T*N, B)
    relay_gain: np.ndarray            # (T*N, B)
    noise_var: float

    @property
    def noise_cov(self) -> np.ndarray:
        return self.noise_var * np.eye(self.h_eff.shape[0])

    @property
    def noise_real_var(self) -> float:
        """Variance per real dimension of the stacked noise."""
        return self.noise_var / 2.0


def effective_model(
    channels: ChannelSet,
    pa: PowerAllocation,
    cfg: SystemConfig,
    geq: tuple[EquivalentChannel, ...] | None = None,
) -> EffectiveModel:
    """Assemble the stacked-model quantities for one channel block."""
    if geq is None:
        geq = equivalent_channels(channels)
    n = cfg.n_antennas
    geq_scaled = tuple(
        eq.matrix * pa.relay[k][None, :] for k, eq in enumerate(geq)
    )
    relay_gain = np.sum(geq_scaled, axis=0)
    h_relay = np.zeros((cfg.relay_dim, n), dtype=complex)
    for k, gs in enumerate(geq_scaled):
        h_relay += gs @ channels.src_relay[k]
    h_sda = np.vstack([channels.src_dest, h_relay])
    h_eff = h_sda * pa.source[None, :]
    noise_var = cfg.noise_power * (1.0 + float(np.sum(np.abs(relay_gain) ** 2)))
    return EffectiveModel(
        h_eff=h_eff,
        h_sda=h_sda,
        geq_scaled=geq_scaled,
        relay_gain=relay_gain,
        noise_var=noise_var,
    )


def simulate_block(
    cfg: SystemConfig,
    channels: ChannelSet,
    pa: PowerAllocation,
    symbols: np.ndarray,
    rng: np.random.Generator,
    model: EffectiveModel | None = None,
) -> ReceivedBlock:
    """Simulate one block through both hops.

    The signal path is the exact first-hop / amplify / re-encode / second-hop
    chain collapsed to H_D s; the stacked noise is drawn from the model
    covariance above, which folds the relay-amplified first-hop noise into a
    white effective floor.  With zero noise power the output is exactly H_D s.
    """
    s = np.asarray(symbols)
    if s.shape != (cfg.n_antennas,):
        raise DimensionError(f"expected {cfg.n_antennas} symbols, got shape {s.shape}")
    if model is None:
        model = effective_model(channels, pa, cfg)
    noise = complex_gaussian(cfg.rx_dim, model.noise_var, rng)
    return ReceivedBlock(received=model.h_eff @ s + noise, symbols=s)


def mmse_receive_filter(model: EffectiveModel, symbol_power: float) -> np.ndarray:
    """Closed-form linear MMSE filter, one column per symbol.

    Column j solves min_w E|s_j - w^H r|^2 and equals
    (sigma_s^2 H_D H_D^H + C_n)^{-1} H_D e_j sigma_s^2.
    """
    h = model.h_eff
    second_moment = symbol_power * (h @ h.conj().T) + model.noise_var * np.eye(h.shape[0])
    try:
        return np.linalg.solve(second_moment, h) * symbol_power
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular received second-moment matrix") from exc


def linear_detect(filt: np.ndarray, received: np.ndarray) -> np.ndarray:
    """Per-symbol sign decision on the filter output; ties resolve to +1."""
    stat = np.real(filt.conj().T @ received)
    return np.where(stat >= 0.0, 1.0, -1.0)


@lru_cache(maxsize=None)
def bpsk_candidates(n: int) -> np.ndarray:
    """All 2^n BPSK vectors in lexicographic order (+1 sorts first)."""
    cands = np.array(list(itertools.product((1.0, -1.0), repeat=n)))
    cands.setflags(write=False)
    return cands


def ml_detect(
    model: EffectiveModel,
    received: np.ndarray,
    max_candidates: int = DEFAULT_CANDIDATE_CAP,
) -> np.ndarray:
    """Exhaustive ML detection over all BPSK vectors.

    Minimizes the noise-whitened residual (r - H_D c)^H C_n^{-1} (r - H_D c);
    ties break toward the earliest candidate in lexicographic order.
    """
    n = model.h_eff.shape[1]
    if 2 ** n > max_candidates:
        raise EnumerationCapError(
            f"2^{n} candidates exceed the cap of {max_candidates}; "
            "raise max_candidates explicitly to allow this"
        )
    cands = bpsk_candidates(n)
    resid = received[:, None] - model.h_eff @ cands.T
    metric = np.sum(np.abs(resid) ** 2, axis=0) / model.noise_var
    return cands[int(np.argmin(metric))].copy()


def _relay_rows(w: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Relay-hop partition of a stacked filter (rows N .. (T+1)N)."""
    return w[cfg.n_antennas:]


def _snr_parts(
    filt: np.ndarray,
    channels: ChannelSet,
    pa: PowerAllocation,
    cfg: SystemConfig,
    geq: tuple[EquivalentChannel, ...] | None,
):
    model = effective_model(channels, pa, cfg, geq)
    w = np.asarray(filt)
    if w.shape[0] != cfg.rx_dim:
        raise DimensionError(f"filter rows {w.shape[0]} != stacked dim {cfg.rx_dim}")
    w_relay = _relay_rows(w, cfg)
    return model, w, w_relay


def snr_given_model(filt: np.ndarray, model: EffectiveModel, cfg: SystemConfig) -> float:
    """SNR of the relay-hop signal path for a prebuilt effective model."""
    w = np.asarray(filt)
    if w.shape[0] != cfg.rx_dim:
        raise DimensionError(f"filter rows {w.shape[0]} != stacked dim {cfg.rx_dim}")
    w_relay = _relay_rows(w, cfg)
    h_rel = model.h_eff[cfg.n_antennas:]  # H_rel including the source allocation
    num = cfg.symbol_power * float(np.sum(np.abs(w_relay.conj().T @ h_rel) ** 2))
    den = cfg.noise_power * (
        float(np.sum(np.abs(w) ** 2))
        + float(np.sum(np.abs(w_relay.conj().T @ model.relay_gain) ** 2))
    )
    if den == 0.0:
        raise UndefinedSnrError("SNR undefined for an all-zero receive filter")
    return num / den


def instantaneous_snr(
    filt: np.ndarray,
    channels: ChannelSet,
    pa: PowerAllocation,
    cfg: SystemConfig,
    geq: tuple[EquivalentChannel, ...] | None = None,
) -> float:
    """Post-filter SNR of the relay-hop signal path.

    Numerator: sigma_s^2 Tr(W_R^H (H_rel)(H_rel)^H W_R) with
    H_rel = sum_k G_eq_k A_k F_k A_S; the direct link is deliberately not
    part of the numerator.  Denominator: sigma_n^2 (Tr(W^H W) +
    Tr(W_R^H (sum_k G_eq_k A_k)(...)^H W_R)).
    """
    return snr_given_model(filt, effective_model(channels, pa, cfg, geq), cfg)


def instantaneous_snr_trace(
    filt: np.ndarray,
    channels: ChannelSet,
    pa: PowerAllocation,
    cfg: SystemConfig,
    geq: tuple[EquivalentChannel, ...] | None = None,
) -> float:
    """Trace-cyclic form of the same SNR; must agree with instantaneous_snr."""
    model, w, w_relay = _snr_parts(filt, channels, pa, cfg, geq)
    h_rel_nopa = model.h_sda[cfg.n_antennas:]  # relay-hop channel before A_S
    ww_h = w_relay @ w_relay.conj().T
    r_sda = h_rel_nopa.conj().T @ ww_h @ h_rel_nopa @ np.diag(pa.source)
    num = cfg.symbol_power * float(np.real(np.trace(r_sda @ np.diag(pa.source))))
    n_eq = cfg.noise_power * float(
        np.real(np.trace(w.conj().T @ w))
        + np.real(np.trace(w_relay.conj().T @ model.relay_gain
                           @ model.relay_gain.conj().T @ w_relay))
    )
    if n_eq == 0.0:
        raise UndefinedSnrError("SNR undefined for an all-zero receive filter")
    return num / n_eq


def sum_rate(snr: float) -> float:
    """Achievable rate 0.5 log2(1 + snr) of the half-duplex two-hop link."""
    if snr < 0:
        raise ConfigError(f"snr must be >= 0, got {snr!r}")
    return 0.5 * float(np.log2(1.0 + snr))
