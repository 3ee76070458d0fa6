from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pilotwave import scalar_field
from pilotwave.errors import ConfigurationError, InstabilityError, NodeError, RealityError
from pilotwave.guidance import FREEZE
from pilotwave.scalar_field import (ModeParticleState, ModeSet, coherent_state, evolve_coupled_modes,
                                    evolve_gaussian, mode_guidance_rhs, mode_momentum_rhs, reconstruct_field,
                                    riccati_alpha, single_mode_grid_oracle, squeezed_state, vacuum_energy,
                                    vacuum_phase, vacuum_state)


@pytest.fixture
def modes():
    return ModeSet()


def test_default_mode_set(modes):
    assert modes.numbers.tolist() == list(range(1, 9))
    assert_allclose(modes.omegas, np.sqrt(np.arange(1, 9) ** 2 + 1.0))
    assert modes.full_numbers.tolist() == list(range(-8, 0)) + list(range(1, 9))
    assert ModeSet(include_zero=True).numbers[0] == 0


@pytest.mark.parametrize("kwargs", [{"n_max": 0}, {"box_length": 0.0}, {"mass": 0.0, "include_zero": True}])
def test_invalid_mode_sets(kwargs):
    with pytest.raises(ConfigurationError):
        ModeSet(**kwargs)


def test_vacuum_is_normalized_with_zero_point_energy(modes):
    vacuum = vacuum_state(modes)
    assert_allclose(vacuum.norms(), 1.0, rtol=1e-12)
    assert vacuum.energy() == pytest.approx(vacuum_energy(modes), rel=1e-12)
    assert vacuum_energy(modes) == pytest.approx(np.sum(modes.omegas))


def test_vacuum_guidance_is_static(modes, rng):
    vacuum = vacuum_state(modes)
    q = rng.standard_normal(len(modes)) + 1j * rng.standard_normal(len(modes))
    assert not np.any(mode_guidance_rhs(vacuum, ModeParticleState(q)))
    trajectory = evolve_coupled_modes(vacuum, ModeParticleState(q), 1e-2, 100, record_every=50)
    assert np.array_equal(trajectory.coordinates[-1], q)
    assert trajectory.max_momentum == 0.0


def test_vacuum_phase_advances_with_zero_point_energy(modes):
    final = evolve_gaussian(vacuum_state(modes), 1e-3, 1000, record_every=1000)[-1]
    assert final.time == pytest.approx(1.0)
    assert np.sum(final.phase.real) == pytest.approx(vacuum_phase(modes, 1.0), abs=1e-10)
    assert_allclose(final.alpha, modes.omegas)


def test_coherent_center_rotates(modes):
    amplitudes = np.zeros(len(modes), dtype=complex)
    amplitudes[0] = 0.5 + 0.2j
    amplitudes[3] = -0.3j
    states = evolve_gaussian(coherent_state(modes, amplitudes), 1e-3, 1000, record_every=500)
    for state in states:
        assert_allclose(state.center, amplitudes * np.exp(-1j * modes.omegas * state.time), atol=1e-8)


def test_squeezed_width_follows_riccati():
    modes = ModeSet(n_max=2)
    state = squeezed_state(modes, 2.0)
    states = evolve_gaussian(state, 1e-3, 1000, record_every=250)
    for s in states:
        assert_allclose(s.alpha, riccati_alpha(2.0, modes.omegas, s.time), atol=1e-8)
        assert_allclose(s.norms(), 1.0, atol=1e-8)
        assert s.energy() == pytest.approx(state.energy(), rel=1e-8)


def test_guided_modes_keep_zero_momentum(modes, rng):
    state = squeezed_state(modes, 2.0 + 0.5j, center=0.1)
    q = 0.3 * (rng.standard_normal(len(modes)) + 1j * rng.standard_normal(len(modes)))
    trajectory = evolve_coupled_modes(state, ModeParticleState(q), 1e-3, 200, record_every=100)
    assert trajectory.max_momentum == 0.0
    assert not trajectory.constraint_violation
    assert_allclose(trajectory.times, [0.0, 0.1, 0.2])
    assert not np.allclose(trajectory.coordinates[-1], q)
    assert not np.any(mode_momentum_rhs(state, np.zeros(len(modes))))
    assert np.any(mode_momentum_rhs(state, np.full(len(modes), 0.1)))


def test_reconstructed_field_is_real(modes, rng):
    q = rng.standard_normal(len(modes)) + 1j * rng.standard_normal(len(modes))
    x = np.linspace(0.0, modes.box_length, 64, endpoint=False)
    phi = reconstruct_field(modes, q, x)
    assert phi.dtype == float
    single = reconstruct_field(ModeSet(n_max=1), {1: 0.5 + 0.25j, -1: 0.5 - 0.25j}, x)
    assert_allclose(single, 2.0 * np.real((0.5 + 0.25j) * np.exp(1j * x)) / np.sqrt(2 * np.pi), atol=1e-12)


def test_broken_reality_pairing_is_rejected():
    modes = ModeSet(n_max=1)
    with pytest.raises(RealityError):
        reconstruct_field(modes, {1: 1.0 + 1.0j, -1: 0.5}, np.zeros(3))
    with pytest.raises(RealityError):
        reconstruct_field(ModeSet(n_max=1, include_zero=True), [0.5j, 1.0], np.zeros(3))


def test_collapsed_width_is_an_instability(modes):
    with pytest.raises(InstabilityError):
        squeezed_state(modes, -1.0)


@pytest.mark.parametrize("kind", ["squeezed", "coherent"])
def test_gaussian_evolution_matches_grid_solver(kind):
    modes = ModeSet(n_max=1)
    state = squeezed_state(modes, 2.0) if kind == "squeezed" else coherent_state(modes, 0.5)
    result = single_mode_grid_oracle(state, 0, 0.5, at=0.3 + 0.2j)
    assert result.distance < 1e-6
    assert result.velocity_grid == pytest.approx(result.velocity_analytic, abs=1e-5)


def test_freeze_policy_accepted_for_modes(modes):
    vacuum = vacuum_state(modes)
    far = np.full(len(modes), 50.0 + 0j)
    assert not np.any(mode_guidance_rhs(vacuum, ModeParticleState(far), policy=FREEZE))


def test_wave_functional_is_gaussian_in_the_modes():
    modes = ModeSet(n_max=2)
    vacuum = vacuum_state(modes)
    q = np.array([0.3 + 0.1j, -0.2j])
    ratio = abs(vacuum.wave_functional(q)) / abs(vacuum.wave_functional(np.zeros(2)))
    assert ratio == pytest.approx(np.exp(-np.sum(modes.omegas * np.abs(q) ** 2)), rel=1e-12)


def test_mode_momentum_constraint():
    assert ModeParticleState([0.1, 0.2j]).satisfies_constraint()
    assert not ModeParticleState([0.1, 0.2j], [0.0, 1e-3]).satisfies_constraint()
    with pytest.raises(ConfigurationError):
        ModeParticleState([0.1, 0.2j], [0.0])


def test_guided_modes_halt_far_from_the_packet_by_default(modes):
    vacuum = replace(vacuum_state(modes), time=2.0)
    far = np.full(len(modes), 50.0 + 0j)
    with pytest.raises(NodeError) as excinfo:
        evolve_coupled_modes(vacuum, ModeParticleState(far), 1e-2, 5)
    assert excinfo.value.time == 2.0
    frozen = evolve_coupled_modes(vacuum, ModeParticleState(far), 1e-2, 5, policy=FREEZE)
    assert np.array_equal(frozen.coordinates[-1], far)
    with pytest.raises(ConfigurationError):
        evolve_coupled_modes(vacuum, ModeParticleState(far), 1e-2, 5, policy="ignore")


def test_node_error_carries_the_stage_time(modes, monkeypatch):
    guided_velocity = scalar_field._guided_velocity
    seen = []

    def leave_the_packet(alpha, center, momentum, q, policy, node_threshold, time):
        seen.append(time)
        if time > 1.175:
            q = np.full_like(q, 50.0)
        return guided_velocity(alpha, center, momentum, q, policy, node_threshold, time)

    monkeypatch.setattr(scalar_field, "_guided_velocity", leave_the_packet)
    vacuum = replace(vacuum_state(modes), time=1.0)
    q = np.full(len(modes), 0.1 + 0j)
    with pytest.raises(NodeError) as excinfo:
        evolve_coupled_modes(vacuum, ModeParticleState(q), 0.1, 5)
    assert excinfo.value.time == pytest.approx(1.2)
    assert_allclose(seen, [1.0, 1.05, 1.05, 1.1, 1.1, 1.15, 1.15, 1.2])
