"""Alamouti distributed space-time coding and its equivalent linear channel.

A relay encodes its amplified symbol pair s = (s1, s2) into the 2x2 block

    M(s) = [[s1, -conj(s2)],
            [s2,  conj(s1)]]

whose columns are time slots.  Propagating through an N x 2 channel G and
conjugating the second received slot makes the relay hop linear in s:

    stack(G @ M(s), conj second slot) == G_eq @ s

with G_eq the 2N x 2 equivalent channel.  The conjugation pattern is kept
explicit (``conj_mask``) so receivers apply the identical transform to live
noise; conjugation leaves circular white noise statistics unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, UnsupportedSchemeError


@dataclass(frozen=True)
class EquivalentChannel:
    """Linear map from relay input symbols to the stacked received vector."""

    matrix: np.ndarray      # (N*T, B)
    conj_mask: np.ndarray   # (N*T,) bool; True where reception is conjugated


def alamouti_encode(symbols: np.ndarray) -> np.ndarray:
    """Encode two symbols into the 2x2 Alamouti block (antennas x slots).

    Satisfies M @ M^H = (|s1|^2 + |s2|^2) * I.
    """
    s = np.asarray(symbols, dtype=complex)
    if s.shape != (2,):
        raise DimensionError(f"Alamouti encoder takes exactly 2 symbols, got shape {s.shape}")
    return np.array(
        [[s[0], -np.conj(s[1])],
         [s[1], np.conj(s[0])]]
    )


def apply_conjugation(received: np.ndarray, conj_mask: np.ndarray) -> np.ndarray:
    """Column-stack a received N x T block and conjugate the masked entries.

    Accepts an already-stacked 1-D vector as well.  Conjugation is an
    involution on the masked positions.
    """
    r = np.asarray(received)
    mask = np.asarray(conj_mask, dtype=bool)
    if r.ndim == 2:
        r = r.ravel(order="F")  # slot-major stacking: column t follows column t-1
    elif r.ndim != 1:
        raise DimensionError(f"received must be 1-D or 2-D, got ndim {r.ndim}")
    if r.shape != mask.shape:
        raise DimensionError(f"mask shape {mask.shape} does not match stacked shape {r.shape}")
    out = r.astype(complex, copy=True)
    out[mask] = np.conj(out[mask])
    return out


def build_equivalent_channel(g: np.ndarray) -> EquivalentChannel:
    """Equivalent channel of the Alamouti hop for a physical N x 2 channel g.

    With g1, g2 the columns of g,

        G_eq = [[g1,        g2       ],
                [conj(g2), -conj(g1) ]]

    and the second slot (last N stacked entries) is conjugated at the
    receiver.  Columns of G_eq are orthogonal: G_eq^H G_eq = ||g||_F^2 * I.
    """
    gm = np.asarray(g, dtype=complex)
    if gm.ndim != 2:
        raise DimensionError(f"channel must be 2-D, got ndim {gm.ndim}")
    n, b = gm.shape
    if b != 2:
        raise UnsupportedSchemeError(f"only B = T = 2 (Alamouti) is supported, got B = {b}")
    geq = np.empty((2 * n, 2), dtype=complex)
    geq[:n, 0] = gm[:, 0]
    geq[:n, 1] = gm[:, 1]
    geq[n:, 0] = np.conj(gm[:, 1])
    geq[n:, 1] = -np.conj(gm[:, 0])
    mask = np.zeros(2 * n, dtype=bool)
    mask[n:] = True
    return EquivalentChannel(matrix=geq, conj_mask=mask)


def equivalent_channels(channels) -> tuple[EquivalentChannel, ...]:
    """Per-relay equivalent channels for a drawn ChannelSet."""
    return tuple(build_equivalent_channel(g) for g in channels.relay_dest)
