"""Per-symbol operation counts of the power-allocation algorithms.

These are closed-form accounting formulas evaluated literally, not
instrumented measurements of this implementation.  ``M`` is the training
window length and only enters the MBER row.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError

PA_MMSE = "PA-MMSE"
JAPA_MMSE_SG = "JAPA-MMSE-SG"
JAPA_MBER_SG = "JAPA-MBER-SG"
JAPA_MSR_SG = "JAPA-MSR-SG"
OPA = "OPA"
PO_PR_SIM = "PO-PR-SIM"

_FORMULAS = {
    PA_MMSE: (
        lambda n, t, m: (t + 1) ** 6 * n ** 6 + (t + 1) * n + 8 * (t + 1) * n,
        lambda n, t, m: 7 * (t + 1) * n + 2,
    ),
    JAPA_MMSE_SG: (
        lambda n, t, m: (7 * t + 5) * n,
        lambda n, t, m: 4 * (t + 1) * n,
    ),
    JAPA_MBER_SG: (
        lambda n, t, m: (m + 1) * (t + 1) * n + m,
        lambda n, t, m: (2 * m + 1) * (t + 1) * n,
    ),
    JAPA_MSR_SG: (
        lambda n, t, m: 7 * (t + 1) * n + n + 1,
        lambda n, t, m: 7 * (t + 1) * n + n + 2,
    ),
    OPA: (
        lambda n, t, m: n ** 4 + 2 * n ** 2 + n ** 2 * t ** 2,
        lambda n, t, m: 2 * n * t - 1,
    ),
    PO_PR_SIM: (
        lambda n, t, m: n ** 4 + 2 * n ** 2,
        lambda n, t, m: 2 * n * t,
    ),
}

ALGORITHMS = tuple(_FORMULAS)


@dataclass(frozen=True)
class ComplexityReport:
    algorithm: str
    multiplications: int
    additions: int
    n_antennas: int
    dstc_len: int
    window: int | None


def complexity_counts(algorithm: str, n_antennas: int, dstc_len: int,
                      window: int | None = None) -> ComplexityReport:
    """Evaluate the per-symbol operation counts for one algorithm."""
    key = algorithm.upper()
    if key not in _FORMULAS:
        raise ConfigError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    if n_antennas < 1 or dstc_len < 1:
        raise ConfigError("n_antennas and dstc_len must be >= 1")
    if key == JAPA_MBER_SG:
        if window is None or window < 1:
            raise ConfigError("the MBER row needs a training window length M >= 1")
    m = window if window is not None else 0
    f_mult, f_add = _FORMULAS[key]
    return ComplexityReport(
        algorithm=key,
        multiplications=int(f_mult(n_antennas, dstc_len, m)),
        additions=int(f_add(n_antennas, dstc_len, m)),
        n_antennas=n_antennas,
        dstc_len=dstc_len,
        window=window,
    )
