"""Two-qubit rotating-frame model: Hamiltonians, propagators, noise ensembles.

Conventions: offsets and the scalar coupling are stored in Hz and converted
to angular frequency (2*pi) inside the Hamiltonian builders; control
amplitudes are stored in rad/s. Noise is quasi-static: each realization
keeps its parameters fixed for an entire multi-pulse run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ddgrape.core import batched_unitary_exp, spin_operator

I1X = spin_operator(1, "x")
I1Y = spin_operator(1, "y")
I1Z = spin_operator(1, "z")
I2X = spin_operator(2, "x")
I2Y = spin_operator(2, "y")
I2Z = spin_operator(2, "z")
FX = I1X + I2X
FY = I1Y + I2Y
FZ = I1Z + I2Z
I1ZI2Z = I1Z @ I2Z

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SystemParams:
    """Resonance offsets (Hz) and scalar coupling J (Hz)."""

    offset1: float
    offset2: float
    coupling: float

    def __post_init__(self):
        for v in (self.offset1, self.offset2, self.coupling):
            if not math.isfinite(v):
                raise ValueError("system parameters must be finite")
        if self.coupling < 0:
            raise ValueError("coupling must be >= 0")


@dataclass(frozen=True)
class NoiseRealization:
    """One coherent-error realization, held fixed for a whole run.

    rf_scale and flip_scale multiply both control amplitudes, offset_shift
    (Hz) is added to both offsets, phase_offset (rad) rotates every
    segment's control phase.
    """

    rf_scale: float = 1.0
    offset_shift: float = 0.0
    flip_scale: float = 1.0
    phase_offset: float = 0.0
    weight: float = 1.0

    def __post_init__(self):
        if self.rf_scale <= 0:
            raise ValueError("rf_scale must be > 0")
        if self.weight < 0:
            raise ValueError("weight must be >= 0")


IDENTITY_NOISE = NoiseRealization()


@dataclass(frozen=True)
class NoiseEnsemble:
    """Weighted set of noise realizations; weights must sum to 1."""

    realizations: tuple[NoiseRealization, ...]

    def __post_init__(self):
        if not self.realizations:
            raise ValueError("ensemble must contain at least one realization")
        total = sum(r.weight for r in self.realizations)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"ensemble weights sum to {total}, expected 1")

    @staticmethod
    def identity() -> "NoiseEnsemble":
        return NoiseEnsemble((IDENTITY_NOISE,))

    @staticmethod
    def rf_inhomogeneity(scales=(0.90, 0.95, 1.00, 1.05, 1.10)) -> "NoiseEnsemble":
        """Equally weighted RF-amplitude miscalibration grid (default +/-10%)."""
        w = 1.0 / len(scales)
        return NoiseEnsemble(tuple(NoiseRealization(rf_scale=s, weight=w) for s in scales))

    @staticmethod
    def incoherence(low_hz: float = -10.0, high_hz: float = 10.0, points: int = 21) -> "NoiseEnsemble":
        """Uniform common-mode offset grid modeling static field inhomogeneity."""
        shifts = np.linspace(low_hz, high_hz, points)
        w = 1.0 / points
        return NoiseEnsemble(tuple(NoiseRealization(offset_shift=float(s), weight=w) for s in shifts))

    @staticmethod
    def flip_errors(scales) -> "NoiseEnsemble":
        w = 1.0 / len(scales)
        return NoiseEnsemble(tuple(NoiseRealization(flip_scale=float(s), weight=w) for s in scales))

    @staticmethod
    def phase_errors(offsets_rad) -> "NoiseEnsemble":
        w = 1.0 / len(offsets_rad)
        return NoiseEnsemble(tuple(NoiseRealization(phase_offset=float(p), weight=w) for p in offsets_rad))

    def combined_with(self, other: "NoiseEnsemble") -> "NoiseEnsemble":
        """Outer product of two ensembles (independent error sources)."""
        members = []
        for a in self.realizations:
            for b in other.realizations:
                members.append(
                    NoiseRealization(
                        rf_scale=a.rf_scale * b.rf_scale,
                        offset_shift=a.offset_shift + b.offset_shift,
                        flip_scale=a.flip_scale * b.flip_scale,
                        phase_offset=a.phase_offset + b.phase_offset,
                        weight=a.weight * b.weight,
                    )
                )
        return NoiseEnsemble(tuple(members))


class ControlSegment:
    """View of one piecewise-constant control segment."""

    __slots__ = ("omega_x", "omega_y", "frozen")

    def __init__(self, omega_x: float, omega_y: float, frozen: bool):
        self.omega_x = omega_x
        self.omega_y = omega_y
        self.frozen = frozen

    def __repr__(self):
        return f"ControlSegment({self.omega_x:.6g}, {self.omega_y:.6g}, frozen={self.frozen})"


@dataclass
class PulseSequence:
    """Piecewise-constant control amplitudes with a frozen-segment mask.

    Arrays are treated as immutable; operations that modify a pulse return
    a new instance.
    """

    omega_x: np.ndarray
    omega_y: np.ndarray
    frozen: np.ndarray
    dt: float
    omega_max: float

    def __post_init__(self):
        self.omega_x = np.asarray(self.omega_x, dtype=float)
        self.omega_y = np.asarray(self.omega_y, dtype=float)
        self.frozen = np.asarray(self.frozen, dtype=bool)
        if self.omega_x.size == 0:
            raise ValueError("pulse must have at least one segment")
        if not (self.omega_x.shape == self.omega_y.shape == self.frozen.shape):
            raise ValueError("amplitude and mask arrays must have equal length")
        if self.dt <= 0:
            raise ValueError("dt must be > 0")

    @property
    def n_segments(self) -> int:
        return int(self.omega_x.size)

    @property
    def duration(self) -> float:
        return self.n_segments * self.dt

    @property
    def segments(self) -> list[ControlSegment]:
        return [
            ControlSegment(float(x), float(y), bool(f))
            for x, y, f in zip(self.omega_x, self.omega_y, self.frozen)
        ]

    @staticmethod
    def zeros(n_segments: int, dt: float, omega_max: float) -> "PulseSequence":
        return PulseSequence(
            np.zeros(n_segments), np.zeros(n_segments), np.zeros(n_segments, dtype=bool), dt, omega_max
        )

    def with_amplitudes(self, omega_x: np.ndarray, omega_y: np.ndarray) -> "PulseSequence":
        return PulseSequence(np.array(omega_x), np.array(omega_y), self.frozen.copy(), self.dt, self.omega_max)

    def copy(self) -> "PulseSequence":
        return PulseSequence(self.omega_x.copy(), self.omega_y.copy(), self.frozen.copy(), self.dt, self.omega_max)


def system_hamiltonian(params: SystemParams) -> np.ndarray:
    """-2*pi*nu1*I1z - 2*pi*nu2*I2z + 2*pi*J*I1z*I2z, diagonal, in rad/s."""
    return (
        -TWO_PI * params.offset1 * I1Z
        - TWO_PI * params.offset2 * I2Z
        + TWO_PI * params.coupling * I1ZI2Z
    )


def control_hamiltonian(omega_x: float, omega_y: float) -> np.ndarray:
    """Omega_x*(I1x+I2x) + Omega_y*(I1y+I2y), amplitudes in rad/s."""
    return omega_x * FX + omega_y * FY


def apply_noise_to_amplitudes(omega_x, omega_y, noise: NoiseRealization):
    """Scaled and phase-rotated control amplitudes under a noise realization.

    Amplitude scaling is applied first, then the phase rotation (the
    miscalibration acts on the emitted field). Works elementwise on arrays.
    """
    scale = noise.rf_scale * noise.flip_scale
    c, s = math.cos(noise.phase_offset), math.sin(noise.phase_offset)
    ox = scale * (np.asarray(omega_x) * c - np.asarray(omega_y) * s)
    oy = scale * (np.asarray(omega_x) * s + np.asarray(omega_y) * c)
    return ox, oy


def shifted_params(params: SystemParams, noise: NoiseRealization) -> SystemParams:
    return SystemParams(params.offset1 + noise.offset_shift, params.offset2 + noise.offset_shift, params.coupling)


def segment_hamiltonians(
    pulse: PulseSequence, params: SystemParams, noise: NoiseRealization = IDENTITY_NOISE
) -> np.ndarray:
    """Stack (K, 4, 4) of total Hamiltonians H_S' + H_C,k' under the noise."""
    hs = system_hamiltonian(shifted_params(params, noise))
    ox, oy = apply_noise_to_amplitudes(pulse.omega_x, pulse.omega_y, noise)
    return hs[None, :, :] + ox[:, None, None] * FX[None, :, :] + oy[:, None, None] * FY[None, :, :]


def segment_propagator(
    params: SystemParams,
    seg: ControlSegment,
    dt: float,
    noise: NoiseRealization = IDENTITY_NOISE,
) -> np.ndarray:
    """exp(-i (H_S' + H_C') dt) for one segment under one noise realization."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    hs = system_hamiltonian(shifted_params(params, noise))
    ox, oy = apply_noise_to_amplitudes(seg.omega_x, seg.omega_y, noise)
    h = hs + control_hamiltonian(float(ox), float(oy))
    return batched_unitary_exp(h[None, :, :], dt)[0]


def sequence_propagator(
    pulse: PulseSequence, params: SystemParams, noise: NoiseRealization = IDENTITY_NOISE
) -> np.ndarray:
    """Ordered product u_K ... u_2 u_1 (segment 1 acts first)."""
    us = batched_unitary_exp(segment_hamiltonians(pulse, params, noise), pulse.dt)
    total = us[0]
    for k in range(1, us.shape[0]):
        total = us[k] @ total
    return total


def evolve_ensemble(
    rho0: np.ndarray,
    pulses,
    params: SystemParams,
    ensemble: NoiseEnsemble,
    record_after_each: bool = True,
):
    """Evolve rho0 through the pulse list under quasi-static ensemble noise.

    Each realization evolves coherently through ALL pulses with its fixed
    noise parameters; the recorded state after each pulse is the
    weight-averaged density matrix across realizations. The accumulation
    order over realizations is fixed so results are deterministic.
    """
    n_stages = len(pulses)
    averaged = [np.zeros((4, 4), dtype=complex) for _ in range(n_stages)]
    for real in ensemble.realizations:
        rho = np.array(rho0, dtype=complex)
        for i, pulse in enumerate(pulses):
            u = sequence_propagator(pulse, params, real)
            rho = u @ rho @ u.conj().T
            averaged[i] += real.weight * rho
    if record_after_each:
        return averaged
    return [averaged[-1]] if averaged else []


def pseudopure_state(epsilon: float) -> np.ndarray:
    """(1-eps) * Id/4 + eps * |00><00|."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    rho = np.eye(4, dtype=complex) * (1.0 - epsilon) / 4.0
    rho[0, 0] += epsilon
    return rho


def save_pulse(path, pulse: PulseSequence) -> None:
    """Write the text pulse format: header comments then one row per segment."""
    with open(path, "w") as fh:
        fh.write(f"# dt_seconds={float(pulse.dt)!r}\n")
        fh.write(f"# omega_max_rad_s={float(pulse.omega_max)!r}\n")
        for i in range(pulse.n_segments):
            fh.write(
                f"{i} {float(pulse.omega_x[i])!r} {float(pulse.omega_y[i])!r} "
                f"{1 if pulse.frozen[i] else 0}\n"
            )


def load_pulse(path) -> PulseSequence:
    dt = None
    omega_max = None
    ox, oy, fr = [], [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("dt_seconds="):
                    dt = float(body.split("=", 1)[1])
                elif body.startswith("omega_max_rad_s="):
                    omega_max = float(body.split("=", 1)[1])
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"bad pulse row: {line!r}")
            ox.append(float(parts[1]))
            oy.append(float(parts[2]))
            fr.append(parts[3] == "1")
    if dt is None or omega_max is None:
        raise ValueError("pulse file missing dt_seconds / omega_max_rad_s header")
    return PulseSequence(np.array(ox), np.array(oy), np.array(fr, dtype=bool), dt, omega_max)
