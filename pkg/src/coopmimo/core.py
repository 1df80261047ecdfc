"""Configuration, random channel generation, and power-allocation state.

Every random draw goes through an explicit ``numpy.random.Generator`` so a
trial is fully determined by its seed, independent of scheduling.  The three
value types defined here are immutable by convention and safe to share
across concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError

SUPPORTED_MODULATIONS = ("bpsk",)


@dataclass(frozen=True)
class SystemConfig:
    """Static parameters of a two-hop cooperative MIMO link.

    Powers and variances are linear scale.  ``noise_power`` is the variance
    per complex entry of every AWGN source in the network.  v1 supports BPSK
    with unit symbol power and relays with as many antennas as the source.
    """

    n_antennas: int = 2          # antennas at source and at destination
    relay_antennas: int = 2      # antennas per relay; v1 requires == n_antennas
    n_relays: int = 1
    dstc_len: int = 2            # time slots spanned by one space-time block
    source_power: float = 1.0    # budget for the source allocation
    relay_power: float = 1.0     # budget shared by all relay allocations
    symbol_power: float = 1.0
    noise_power: float = 1.0
    modulation: str = "bpsk"
    step_filter: float = 0.005   # SG step for the receive filter
    step_source: float = 0.005   # SG step for the source power entries
    step_relay: float = 0.005    # SG step for the relay power entries
    seed: int = 12345

    def __post_init__(self):
        for name in ("n_antennas", "relay_antennas", "n_relays", "dstc_len"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {value!r}")
        for name in ("source_power", "relay_power", "symbol_power", "noise_power"):
            value = getattr(self, name)
            if not (float(value) > 0.0):
                raise ConfigError(f"{name} must be > 0, got {value!r}")
        if self.symbol_power != 1.0:
            raise ConfigError("v1 fixes symbol_power = 1")
        if self.modulation not in SUPPORTED_MODULATIONS:
            raise ConfigError(f"unsupported modulation {self.modulation!r}")
        if self.relay_antennas != self.n_antennas:
            raise ConfigError("v1 requires relay_antennas == n_antennas")

    @property
    def rx_dim(self) -> int:
        """Length of one stacked received block: (T+1)N."""
        return (self.dstc_len + 1) * self.n_antennas

    @property
    def relay_dim(self) -> int:
        """Rows contributed by the relay hop: T*N."""
        return self.dstc_len * self.n_antennas


@dataclass(frozen=True)
class ChannelSet:
    """All per-link channel matrices for one quasi-static block.

    ``src_dest`` is relay_antennas x n_antennas (direct link), ``src_relay``
    stacks the n_relays first-hop matrices, ``relay_dest`` the second-hop
    ones.  Entries are i.i.d. unit-variance circular complex Gaussian.
    """

    src_dest: np.ndarray    # (B, N)
    src_relay: np.ndarray   # (n_r, B, N)
    relay_dest: np.ndarray  # (n_r, N, B)


@dataclass(frozen=True)
class PowerAllocation:
    """Diagonals of the source and per-relay power matrices.

    Entries are nonnegative reals; phases would be redundant under the
    independent channel phases assumed here.
    """

    source: np.ndarray  # (N,)
    relay: np.ndarray   # (n_r, B)

    def __post_init__(self):
        object.__setattr__(self, "source", np.asarray(self.source, dtype=float))
        object.__setattr__(self, "relay", np.asarray(self.relay, dtype=float))
        if self.source.ndim != 1 or self.relay.ndim != 2:
            raise DimensionError("source must be 1-D and relay 2-D (n_relays, B)")

    def source_norm2(self) -> float:
        """Frobenius norm squared of the source allocation matrix."""
        return float(np.sum(self.source ** 2))

    def relay_norm2(self) -> float:
        """Sum over relays of the squared Frobenius norms."""
        return float(np.sum(self.relay ** 2))


def complex_gaussian(shape, variance: float, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean circular complex Gaussian array, ``variance`` per entry."""
    if variance < 0:
        raise ConfigError(f"variance must be >= 0, got {variance!r}")
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_channel_set(cfg: SystemConfig, rng: np.random.Generator) -> ChannelSet:
    """Draw one quasi-static block of unit-variance Rayleigh flat channels."""
    n, b, k = cfg.n_antennas, cfg.relay_antennas, cfg.n_relays
    return ChannelSet(
        src_dest=complex_gaussian((b, n), 1.0, rng),
        src_relay=complex_gaussian((k, b, n), 1.0, rng),
        relay_dest=complex_gaussian((k, n, b), 1.0, rng),
    )


def awgn_vector(length: int, variance: float, rng: np.random.Generator) -> np.ndarray:
    """Circular complex AWGN with per-entry variance ``variance``."""
    if length < 1:
        raise DimensionError(f"length must be >= 1, got {length!r}")
    return complex_gaussian(length, variance, rng)


def epa_init(cfg: SystemConfig) -> PowerAllocation:
    """Equal power allocation: both budgets split uniformly across entries."""
    source = np.full(cfg.n_antennas, np.sqrt(cfg.source_power / cfg.n_antennas))
    per_entry = cfg.relay_power / (cfg.n_relays * cfg.relay_antennas)
    relay = np.full((cfg.n_relays, cfg.relay_antennas), np.sqrt(per_entry))
    return PowerAllocation(source=source, relay=relay)


def bpsk_symbols(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform BPSK symbol vector in {-1, +1}."""
    return 2.0 * rng.integers(0, 2, size=n) - 1.0


def trial_rng(seed: int, *path: int) -> np.random.Generator:
    """Independent per-trial stream derived from the master seed and indices."""
    return np.random.default_rng([int(seed), *[int(p) for p in path]])
