"""Dynamical-decoupling schemes: placement, ideal propagators, toggling check.

A scheme places one collective pulse in the middle of every block of
`spacing` segments, cycling phases from its pattern. Descriptor grammar:
``<phases>:<flip_deg>:<spacing>``, e.g. ``xy:90:1000`` or ``xx:180:2000``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ddgrape.core import ID4, collective_operator, global_phase_distance, unitary_exp
from ddgrape.nmr import PulseSequence


@dataclass(frozen=True)
class DDScheme:
    """Flip angle (deg), cyclic phase pattern over {x, y}, block spacing."""

    flip_deg: float
    phases: tuple[str, ...]
    spacing: int
    placement: str = "middle"

    def __post_init__(self):
        if not self.phases:
            raise ValueError("phase pattern must be non-empty")
        if any(p not in ("x", "y") for p in self.phases):
            raise ValueError(f"phases must be 'x' or 'y', got {self.phases}")
        if self.spacing < 1:
            raise ValueError("spacing must be >= 1")
        if self.placement != "middle":
            raise ValueError(f"unsupported placement {self.placement!r}")

    @staticmethod
    def parse(text: str) -> "DDScheme":
        parts = text.strip().split(":")
        if len(parts) != 3:
            raise ValueError(f"scheme descriptor must be <phases>:<flip_deg>:<spacing>, got {text!r}")
        phases, flip, spacing = parts
        return DDScheme(flip_deg=float(flip), phases=tuple(phases), spacing=int(spacing))

    def format(self) -> str:
        flip = int(self.flip_deg) if float(self.flip_deg).is_integer() else self.flip_deg
        return f"{''.join(self.phases)}:{flip}:{self.spacing}"


@dataclass(frozen=True)
class DDPlacement:
    """Resolved pulse positions: 0-based segment indices with per-index props."""

    indices: tuple[int, ...]
    flips_deg: tuple[float, ...]
    phases: tuple[str, ...]

    def __post_init__(self):
        if list(self.indices) != sorted(set(self.indices)):
            raise ValueError("placement indices must be strictly increasing")
        if not (len(self.indices) == len(self.flips_deg) == len(self.phases)):
            raise ValueError("placement property lists must align with indices")

    @property
    def n_pulses(self) -> int:
        return len(self.indices)


def place_dd(n_segments: int, scheme: DDScheme) -> DDPlacement:
    """One pulse per complete block, at index b*spacing + spacing//2.

    A trailing partial block receives no pulse; phases cycle through the
    scheme pattern.
    """
    if n_segments < scheme.spacing:
        raise ValueError(f"n_segments={n_segments} smaller than spacing={scheme.spacing}")
    n_blocks = n_segments // scheme.spacing
    indices = tuple(b * scheme.spacing + scheme.spacing // 2 for b in range(n_blocks))
    phases = tuple(scheme.phases[b % len(scheme.phases)] for b in range(n_blocks))
    flips = tuple(scheme.flip_deg for _ in range(n_blocks))
    return DDPlacement(indices, flips, phases)


def ideal_dd_propagator(flip_deg: float, phase: str) -> np.ndarray:
    """exp(-i beta (I1a + I2a)): collective rotation of both spins."""
    beta = math.radians(flip_deg)
    return unitary_exp(collective_operator(phase), beta)


def freeze_into(pulse: PulseSequence, placement: DDPlacement) -> PulseSequence:
    """Return a copy with the DD amplitudes frozen at the placement indices.

    The pulse at each index becomes a single full segment of amplitude
    beta/dt along its phase axis, exempt from optimization.
    """
    out = pulse.copy()
    for idx, flip, phase in zip(placement.indices, placement.flips_deg, placement.phases):
        if not 0 <= idx < out.n_segments:
            raise ValueError(f"placement index {idx} out of bounds")
        amp = math.radians(flip) / out.dt
        if amp > out.omega_max * (1 + 1e-12):
            raise ValueError(
                f"DD amplitude {amp:.4g} rad/s exceeds omega_max {out.omega_max:.4g}"
            )
        out.omega_x[idx] = amp if phase == "x" else 0.0
        out.omega_y[idx] = amp if phase == "y" else 0.0
        out.frozen[idx] = True
    return out


def net_rotation(placement: DDPlacement) -> np.ndarray:
    """T_{M+1} = P_M ... P_1, the accumulated ideal DD rotation."""
    t = ID4.copy()
    for flip, phase in zip(placement.flips_deg, placement.phases):
        t = ideal_dd_propagator(flip, phase) @ t
    return t


def is_cyclic(placement: DDPlacement, tol: float = 1e-10) -> bool:
    """True when the net rotation is the identity up to a global phase."""
    return global_phase_distance(net_rotation(placement), ID4) <= tol


def toggling_check(unitaries, placement: DDPlacement) -> float:
    """Max deviation between the interleaved and toggling-frame products.

    Computes U_{M+1} P_M U_M ... P_1 U_1 directly, and again as
    U_{M+1} T_{M+1} prod_j (T_j^dag U_j T_j) with T_j = P_{j-1}...P_1, and
    returns the max entrywise difference after fixing the global phase.
    For cyclic schemes (net rotation = identity up to phase) the prefix
    T_{M+1} drops out and this is the textbook toggling identity.
    """
    m = placement.n_pulses
    if len(unitaries) != m + 1:
        raise ValueError(f"expected {m + 1} unitaries for {m} DD pulses, got {len(unitaries)}")
    pulses = [ideal_dd_propagator(f, p) for f, p in zip(placement.flips_deg, placement.phases)]

    interleaved = np.array(unitaries[0], dtype=complex)
    for j in range(m):
        interleaved = unitaries[j + 1] @ (pulses[j] @ interleaved)

    t = ID4.copy()
    toggled = ID4.copy()
    for j in range(m):
        toggled = (t.conj().T @ unitaries[j] @ t) @ toggled
        t = pulses[j] @ t
    toggling_product = np.asarray(unitaries[m], dtype=complex) @ t @ toggled

    return global_phase_distance(interleaved, toggling_product)
