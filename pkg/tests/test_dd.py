import math

import numpy as np
import pytest

from conftest import random_unitary
from ddgrape.core import ID4, SIGMA_X, global_phase_distance
from ddgrape.dd import (
    DDPlacement,
    DDScheme,
    freeze_into,
    ideal_dd_propagator,
    is_cyclic,
    place_dd,
    toggling_check,
)
from ddgrape.nmr import PulseSequence


def test_place_dd_single_center_pulse():
    p = place_dd(2000, DDScheme(90, ("x",), 2000))
    assert p.indices == (1000,)
    assert p.phases == ("x",)


def test_place_dd_alternating_phases():
    p = place_dd(2000, DDScheme(90, ("x", "y"), 1000))
    assert p.indices == (500, 1500)
    assert p.phases == ("x", "y")

    p = place_dd(8, DDScheme(180, ("x", "y"), 4))
    assert p.indices == (2, 6)
    assert p.phases == ("x", "y")


def test_place_dd_partial_block_gets_no_pulse():
    p = place_dd(250, DDScheme(90, ("x", "y"), 100))
    assert p.indices == (50, 150)


def test_place_dd_rejects_short_sequences():
    with pytest.raises(ValueError):
        place_dd(3, DDScheme(90, ("x",), 4))


def test_ideal_dd_propagator_pi_x():
    u = ideal_dd_propagator(180, "x")
    assert np.max(np.abs(u + np.kron(SIGMA_X, SIGMA_X))) < 1e-12
    assert abs((u @ np.array([1, 0, 0, 0]))[3] + 1) < 1e-12


def test_ideal_dd_propagator_composition():
    half = ideal_dd_propagator(90, "x")
    assert np.max(np.abs(half @ half - ideal_dd_propagator(180, "x"))) < 1e-12
    quarter = ideal_dd_propagator(90, "y")
    full = quarter @ quarter @ quarter @ quarter
    assert global_phase_distance(full, ID4) < 1e-12


def test_freeze_into_amplitudes_and_idempotence():
    dt = 5.1e-6
    pulse = PulseSequence.zeros(8, dt, 2 * math.pi * 1e5)
    placement = place_dd(8, DDScheme(180, ("x", "y"), 4))
    frozen = freeze_into(pulse, placement)
    assert frozen.omega_x[2] == pytest.approx(math.pi / dt, rel=1e-12)
    assert frozen.omega_x[2] == pytest.approx(6.160e5, rel=1e-3)
    assert frozen.omega_y[6] == pytest.approx(math.pi / dt, rel=1e-12)
    assert frozen.omega_y[2] == 0.0 and frozen.omega_x[6] == 0.0
    assert np.count_nonzero(frozen.frozen) == placement.n_pulses
    again = freeze_into(frozen, placement)
    assert np.array_equal(again.omega_x, frozen.omega_x)
    assert np.array_equal(again.omega_y, frozen.omega_y)
    assert np.array_equal(again.frozen, frozen.frozen)


def test_freeze_into_empty_placement_is_noop():
    pulse = PulseSequence.zeros(8, 5.1e-6, 1e6)
    out = freeze_into(pulse, DDPlacement((), (), ()))
    assert np.array_equal(out.omega_x, pulse.omega_x)
    assert not out.frozen.any()


def test_freeze_into_rejects_amplitude_above_omega_max():
    pulse = PulseSequence.zeros(8, 5.1e-6, 1e5)  # pi/dt > omega_max
    with pytest.raises(ValueError):
        freeze_into(pulse, place_dd(8, DDScheme(180, ("x",), 4)))


def test_toggling_check_no_pulses():
    rng = np.random.default_rng(2)
    placement = DDPlacement((), (), ())
    assert toggling_check([random_unitary(rng)], placement) == pytest.approx(0.0, abs=1e-12)


def test_toggling_check_xy4():
    rng = np.random.default_rng(9)
    placement = DDPlacement((0, 1, 2, 3), (180,) * 4, ("x", "y", "x", "y"))
    us = [random_unitary(rng) for _ in range(5)]
    assert toggling_check(us, placement) < 1e-10
    assert is_cyclic(placement)


def test_toggling_check_single_pi_pulse_needs_net_rotation():
    # one pulse is not a cyclic scheme; agreement relies on the net-rotation prefix
    rng = np.random.default_rng(10)
    placement = DDPlacement((0,), (180,), ("x",))
    us = [random_unitary(rng) for _ in range(2)]
    assert toggling_check(us, placement) < 1e-10
    assert not is_cyclic(placement)


def test_toggling_identity_random_schemes():
    rng = np.random.default_rng(12)
    for m in range(1, 9):
        flips = tuple(rng.choice([90.0, 180.0]) for _ in range(m))
        phases = tuple(rng.choice(["x", "y"]) for _ in range(m))
        placement = DDPlacement(tuple(range(m)), flips, phases)
        us = [random_unitary(rng) for _ in range(m + 1)]
        assert toggling_check(us, placement) < 1e-10


def test_non_cyclic_scheme_flagged():
    placement = DDPlacement((0,), (90.0,), ("x",))
    assert not is_cyclic(placement)


def test_scheme_descriptor_roundtrip():
    for text in ("xy:90:1000", "xx:180:2000", "x:90:500", "yxy:180:10"):
        assert DDScheme.parse(text).format() == text
    with pytest.raises(ValueError):
        DDScheme.parse("xz:90:100")
    with pytest.raises(ValueError):
        DDScheme.parse("xy:90")
