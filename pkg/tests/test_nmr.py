import math

import numpy as np
import pytest

from ddgrape.core import ID4, collective_operator, is_unitary, unitary_exp
from ddgrape.nmr import (
    ControlSegment,
    NoiseEnsemble,
    NoiseRealization,
    PulseSequence,
    SystemParams,
    control_hamiltonian,
    evolve_ensemble,
    load_pulse,
    pseudopure_state,
    save_pulse,
    segment_propagator,
    sequence_propagator,
    system_hamiltonian,
)

TWO_PI = 2 * math.pi


def test_system_hamiltonian_zero():
    assert np.allclose(system_hamiltonian(SystemParams(0, 0, 0)), np.zeros((4, 4)))


def test_system_hamiltonian_paper_offsets():
    h = system_hamiltonian(SystemParams(436.0, -436.0, 7.0))
    assert np.allclose(np.diag(h).real / TWO_PI, [1.75, -437.75, 434.25, 1.75], atol=1e-12)
    assert np.allclose(h, np.diag(np.diag(h)))


def test_system_hamiltonian_symmetric_offsets():
    h = system_hamiltonian(SystemParams(100.0, 100.0, 0.0))
    assert np.allclose(np.diag(h).real / TWO_PI, [-100, 0, 0, 100], atol=1e-12)


def test_segment_propagator_trivial_identity():
    seg = ControlSegment(0.0, 0.0, False)
    u = segment_propagator(SystemParams(0, 0, 0), seg, 1e-5)
    assert np.allclose(u, ID4, atol=1e-14)


def test_segment_propagator_collective_pi_pulse():
    dt = 5.1e-6
    seg = ControlSegment(math.pi / dt, 0.0, False)
    u = segment_propagator(SystemParams(0, 0, 0), seg, dt)
    expected = unitary_exp(collective_operator("x"), math.pi)
    assert np.max(np.abs(u - expected)) < 1e-12


def test_segment_propagator_phase_noise_matches_rotated_control():
    # oracle: rebuild the control Hamiltonian with explicitly rotated amplitudes
    dt = 5.1e-6
    params = SystemParams(436, -436, 7)
    phi = 0.37
    ox, oy = 2e4, -1.3e4
    noise = NoiseRealization(phase_offset=phi)
    u = segment_propagator(params, ControlSegment(ox, oy, False), dt, noise)
    rx = ox * math.cos(phi) - oy * math.sin(phi)
    ry = ox * math.sin(phi) + oy * math.cos(phi)
    h = system_hamiltonian(params) + control_hamiltonian(rx, ry)
    assert np.max(np.abs(u - unitary_exp(h, dt))) < 1e-12


def test_segment_propagator_unitary_under_noise():
    rng = np.random.default_rng(4)
    params = SystemParams(436, -436, 7)
    for _ in range(10):
        noise = NoiseRealization(
            rf_scale=rng.uniform(0.8, 1.2),
            offset_shift=rng.uniform(-20, 20),
            flip_scale=rng.uniform(0.9, 1.1),
            phase_offset=rng.uniform(-0.5, 0.5),
        )
        seg = ControlSegment(rng.uniform(-1e5, 1e5), rng.uniform(-1e5, 1e5), False)
        assert is_unitary(segment_propagator(params, seg, 5.1e-6, noise))


def test_sequence_propagator_identity_and_commuting():
    pulse = PulseSequence.zeros(5, 1e-5, 1e6)
    assert np.allclose(sequence_propagator(pulse, SystemParams(0, 0, 0)), ID4, atol=1e-14)

    # two segments with the same generator == one segment of doubled duration
    dt = 5.1e-6
    two = PulseSequence(np.array([3e4, 3e4]), np.array([1e4, 1e4]), np.zeros(2, bool), dt, 1e6)
    one = PulseSequence(np.array([3e4]), np.array([1e4]), np.zeros(1, bool), 2 * dt, 1e6)
    params = SystemParams(436, -436, 7)
    assert np.max(np.abs(sequence_propagator(two, params) - sequence_propagator(one, params))) < 1e-10


def test_sequence_propagator_against_bruteforce_product():
    rng = np.random.default_rng(17)
    params = SystemParams(436, -436, 7)
    pulse = PulseSequence(
        rng.uniform(-1e5, 1e5, 20), rng.uniform(-1e5, 1e5, 20), np.zeros(20, bool), 5.1e-6, 2e5
    )
    # independent left-multiplication loop over scalar segment propagators
    expected = ID4.copy()
    for seg in pulse.segments:
        expected = segment_propagator(params, seg, pulse.dt) @ expected
    assert np.max(np.abs(sequence_propagator(pulse, params) - expected)) < 1e-10


def test_evolve_ensemble_identity_reduces_to_conjugation():
    rng = np.random.default_rng(23)
    params = SystemParams(436, -436, 7)
    pulse = PulseSequence(
        rng.uniform(-5e4, 5e4, 10), rng.uniform(-5e4, 5e4, 10), np.zeros(10, bool), 5.1e-6, 2e5
    )
    rho0 = pseudopure_state(1.0)
    out = evolve_ensemble(rho0, [pulse], params, NoiseEnsemble.identity())
    u = sequence_propagator(pulse, params)
    assert np.max(np.abs(out[0] - u @ rho0 @ u.conj().T)) < 1e-10


def _plus_zero_state():
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    zero = np.array([1, 0], dtype=complex)
    psi = np.kron(plus, zero)
    return np.outer(psi, psi.conj())


def test_evolve_ensemble_symmetric_offsets_give_real_coherence():
    params = SystemParams(0, 0, 0)
    t = 3.4e-3
    pulse = PulseSequence.zeros(1, t, 1e6)
    delta = 7.0
    ens = NoiseEnsemble(
        (NoiseRealization(offset_shift=delta, weight=0.5), NoiseRealization(offset_shift=-delta, weight=0.5))
    )
    out = evolve_ensemble(_plus_zero_state(), [pulse], params, ens)[0]
    # oracle: average of conjugate phases e^{+-i 2 pi delta t} is cos(2 pi delta t)
    assert abs(out[0, 2].imag) < 1e-12
    assert out[0, 2].real == pytest.approx(0.5 * math.cos(TWO_PI * delta * t), abs=1e-12)


def test_evolve_ensemble_incoherence_grid_dephasing_envelope():
    params = SystemParams(0, 0, 0)
    t = 20e-3
    pulse = PulseSequence.zeros(1, t, 1e6)
    ens = NoiseEnsemble.incoherence(-10, 10, 21)
    out = evolve_ensemble(_plus_zero_state(), [pulse], params, ens)[0]
    # oracle: discrete average of the accumulated phases over the grid
    shifts = np.linspace(-10, 10, 21)
    envelope = np.mean(np.cos(TWO_PI * shifts * t))
    assert out[0, 2].real == pytest.approx(0.5 * envelope, abs=1e-12)
    # populations never move under free evolution
    assert np.allclose(np.diag(out).real, np.diag(_plus_zero_state()).real, atol=1e-12)


def test_evolve_ensemble_preserves_trace_each_stage():
    rng = np.random.default_rng(31)
    params = SystemParams(436, -436, 7)
    pulses = [
        PulseSequence(rng.uniform(-5e4, 5e4, 8), rng.uniform(-5e4, 5e4, 8), np.zeros(8, bool), 5.1e-6, 2e5)
        for _ in range(3)
    ]
    ens = NoiseEnsemble.rf_inhomogeneity()
    for rho in evolve_ensemble(pseudopure_state(0.5), pulses, params, ens):
        assert abs(np.trace(rho).real - 1) < 1e-10
        assert np.max(np.abs(rho - rho.conj().T)) < 1e-12


def test_pseudopure_state_examples():
    assert np.allclose(pseudopure_state(1.0), np.diag([1, 0, 0, 0]))
    assert np.allclose(pseudopure_state(0.0), np.eye(4) / 4)
    evals = sorted(np.linalg.eigvalsh(pseudopure_state(0.01)), reverse=True)
    assert np.allclose(evals, [0.2575, 0.2475, 0.2475, 0.2475], atol=1e-14)
    with pytest.raises(ValueError):
        pseudopure_state(1.5)


def test_ensemble_weights_must_normalize():
    with pytest.raises(ValueError):
        NoiseEnsemble((NoiseRealization(weight=0.6), NoiseRealization(weight=0.6)))


def test_pulse_file_roundtrip(tmp_path):
    rng = np.random.default_rng(41)
    pulse = PulseSequence(
        rng.uniform(-1e5, 1e5, 12), rng.uniform(-1e5, 1e5, 12),
        rng.random(12) < 0.3, 5.1e-6, 2 * math.pi * 1e5,
    )
    path = tmp_path / "pulse.txt"
    save_pulse(path, pulse)
    back = load_pulse(path)
    assert np.array_equal(back.omega_x, pulse.omega_x)
    assert np.array_equal(back.omega_y, pulse.omega_y)
    assert np.array_equal(back.frozen, pulse.frozen)
    assert back.dt == pulse.dt and back.omega_max == pulse.omega_max
