"""Destination-to-transmitter feedback path: quantization, errors, MSE.

The optimized power entries travel back to the source and relays over a
limited feedback channel.  Quantization is a uniform mid-tread grid (step
2*range / 2^bits, zero is always a level so real allocations stay real) and
channel corruption is additive Gaussian error on each entry.  The analytic
MSE expressions quantify the impact for the single-relay case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ChannelSet, PowerAllocation
from .dstc import build_equivalent_channel
from .errors import ConfigError, UnsupportedScenarioError


@dataclass(frozen=True)
class QuantizerSpec:
    """Uniform quantizer: ``bits`` per real component, symmetric clip bound."""

    bits: int
    clip_range: float

    def __post_init__(self):
        if not (1 <= int(self.bits) <= 16):
            raise ConfigError(f"bits must be in 1..16, got {self.bits}")
        if not (self.clip_range > 0):
            raise ConfigError(f"clip_range must be > 0, got {self.clip_range}")

    @property
    def step(self) -> float:
        return 2.0 * self.clip_range / (2 ** self.bits)


@dataclass(frozen=True)
class FeedbackErrorModel:
    """Additive zero-mean Gaussian error of variance ``sigma_f`` per entry."""

    sigma_f: float

    def __post_init__(self):
        if self.sigma_f < 0:
            raise ConfigError(f"sigma_f must be >= 0, got {self.sigma_f}")


@dataclass
class FeedbackDiagnostics:
    """Counters for range saturation and negative-power clipping."""

    saturated: int = 0
    clipped_negative: int = 0


def quantize_values(values: np.ndarray, spec: QuantizerSpec,
                    diag: FeedbackDiagnostics | None = None) -> np.ndarray:
    """Snap each real value to the nearest grid level within the clip range.

    The grid is k * step for integer k with |k * step| <= clip_range; the
    worst-case error inside the range is clip_range / 2^bits.  Values beyond
    the range saturate (counted in ``diag``, not an error).
    """
    x = np.asarray(values, dtype=float)
    if diag is not None:
        diag.saturated += int(np.sum(np.abs(x) > spec.clip_range))
    levels = np.floor(x / spec.step + 0.5)
    max_level = np.floor(spec.clip_range / spec.step + 1e-9)
    return np.clip(levels, -max_level, max_level) * spec.step


def quantize_complex(values: np.ndarray, spec: QuantizerSpec,
                     diag: FeedbackDiagnostics | None = None) -> np.ndarray:
    """Quantize real and imaginary parts independently.

    Power entries are real in v1, so the imaginary path sees zeros and
    returns zeros (zero is a grid level); the path exists for complex
    feedback payloads.
    """
    z = np.asarray(values, dtype=complex)
    return quantize_values(z.real, spec, diag) + 1j * quantize_values(z.imag, spec, diag)


def quantize_pa(pa: PowerAllocation, spec: QuantizerSpec,
                diag: FeedbackDiagnostics | None = None) -> PowerAllocation:
    """Quantize every power entry; idempotent."""
    return PowerAllocation(
        source=quantize_values(pa.source, spec, diag),
        relay=quantize_values(pa.relay, spec, diag),
    )


def perturb_pa(pa: PowerAllocation, model: FeedbackErrorModel, rng: np.random.Generator,
               diag: FeedbackDiagnostics | None = None) -> PowerAllocation:
    """Add i.i.d. Gaussian feedback error to every entry.

    Entries are transmit amplitudes, so negative results clip to zero
    (counted in ``diag``).
    """
    if model.sigma_f == 0.0:
        return pa
    std = np.sqrt(model.sigma_f)
    source = pa.source + std * rng.standard_normal(pa.source.shape)
    relay = pa.relay + std * rng.standard_normal(pa.relay.shape)
    if diag is not None:
        diag.clipped_negative += int(np.sum(source < 0) + np.sum(relay < 0))
    return PowerAllocation(source=np.maximum(source, 0.0), relay=np.maximum(relay, 0.0))


def default_clip_range(source_power: float, relay_power: float) -> float:
    """Normalized entries cannot exceed sqrt(max budget)."""
    return float(np.sqrt(max(source_power, relay_power)))


# ---------------------------------------------------------------------------
# Analytic MSE of the single-relay hop
# ---------------------------------------------------------------------------

def _single_relay_parts(channels: ChannelSet):
    if channels.src_relay.shape[0] != 1:
        raise UnsupportedScenarioError(
            "the analytic MSE expressions are derived for exactly one relay"
        )
    geq = build_equivalent_channel(channels.relay_dest[0]).matrix
    return geq, channels.src_relay[0]


def mse_formula(geq: np.ndarray, relay_diag: np.ndarray, f: np.ndarray,
                sigma_s2: float, sigma_v2: float) -> float:
    """Signal-capture MSE term Tr(p^H Rx^{-1} p) with the scalarized Rx.

    p = G_eq A F sigma_s2 and Rx = (||G_eq A F||_F^2 sigma_s2 +
    (1 + ||G_eq A||_F^2) sigma_v2) I, which collapses to a scalar ratio.
    """
    gaf = (geq * np.asarray(relay_diag)[None, :]) @ f
    ga = geq * np.asarray(relay_diag)[None, :]
    signal = float(np.sum(np.abs(gaf) ** 2))
    denom = signal * sigma_s2 + (1.0 + float(np.sum(np.abs(ga) ** 2))) * sigma_v2
    return sigma_s2 ** 2 * signal / denom


def mse_exact(channels: ChannelSet, pa: PowerAllocation,
              sigma_s2: float, sigma_n2: float) -> float:
    """MSE term with the power allocation applied exactly as optimized."""
    geq, f = _single_relay_parts(channels)
    return mse_formula(geq, pa.relay[0], f, sigma_s2, sigma_n2)


def mse_with_errors(channels: ChannelSet, pa: PowerAllocation, err_diag: np.ndarray,
                    sigma_s2: float, sigma_f: float) -> float:
    """MSE term when the relay applies the corrupted allocation A + E."""
    geq, f = _single_relay_parts(channels)
    return mse_formula(geq, pa.relay[0] + np.asarray(err_diag), f, sigma_s2, sigma_f)


def mse_excess(channels: ChannelSet, err_diag: np.ndarray,
               sigma_s2: float, sigma_n2: float) -> float:
    """Error-only quadratic term; nonnegative for every error matrix."""
    geq, f = _single_relay_parts(channels)
    return mse_formula(geq, np.asarray(err_diag), f, sigma_s2, sigma_n2)


def mse_decomposition_residual(channels: ChannelSet, pa: PowerAllocation,
                               err_diag: np.ndarray, sigma_s2: float,
                               sigma_n2: float, sigma_f: float) -> float:
    """Diagnostic |m_e - (m + m_eo)|.

    The additive decomposition drops cross terms, so this residual is
    reported rather than asserted to vanish.
    """
    m_e = mse_with_errors(channels, pa, err_diag, sigma_s2, sigma_f)
    m = mse_exact(channels, pa, sigma_s2, sigma_n2)
    m_eo = mse_excess(channels, err_diag, sigma_s2, sigma_n2)
    return abs(m_e - (m + m_eo))
