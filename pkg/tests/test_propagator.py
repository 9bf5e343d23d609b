import logging
import math

import numpy as np
import pytest

from builders import dimer, random_aux, random_density, random_generators
from qcurrents import kernels
from qcurrents.model import (
    BathMode,
    DephasingChannel,
    EnvironmentSpec,
    Markovian,
    NonMarkovian,
    RelaxationChannel,
    RunParameters,
    SingleSite,
    SiteNetwork,
    build_generators,
)
from qcurrents.oracle import (
    decoherence_exponent,
    liouvillian_expm_propagate,
    rabi_dimer_exact,
)
from qcurrents.propagator import (
    AuxiliaryOperatorSet,
    PropagationError,
    Trajectory,
    aux_trajectory,
    lindblad_rhs,
    output_grid,
    propagate,
    select_step,
    zofe_rhs,
)


def deph_env(*sites, rate=0.5):
    return EnvironmentSpec(tuple(DephasingChannel(s, Markovian(rate)) for s in sites))


def test_lindblad_rhs_commutator_by_hand():
    gen = dimer(V=1.0)
    out = lindblad_rhs(np.diag([1.0, 0.0]).astype(complex), gen)
    np.testing.assert_allclose(out, [[0, 1j], [-1j, 0]], atol=1e-15)


def test_lindblad_rhs_dephasing_keeps_diagonal():
    gen = dimer(V=0.0, env=deph_env(0, 1))
    out = lindblad_rhs(np.diag([0.3, 0.7]).astype(complex), gen)
    np.testing.assert_array_equal(np.diagonal(out), [0, 0])


def test_lindblad_rhs_relaxation_rate():
    gen = dimer(V=0.0, env=EnvironmentSpec((), (RelaxationChannel(1, 0, Markovian(0.2)),)))
    out = lindblad_rhs(np.diag([0.0, 1.0]).astype(complex), gen)
    np.testing.assert_allclose(np.diagonal(out).real, [0.2, -0.2], atol=1e-15)


def test_lindblad_rhs_hermitian_traceless(rng):
    for n in (2, 3, 6):
        gen = random_generators(rng, n, "markov", "markov", n_relax=n)
        out = lindblad_rhs(random_density(rng, n), gen)
        assert np.max(np.abs(out - out.conj().T)) <= 1e-12
        assert abs(np.trace(out)) <= 1e-12


def test_lindblad_rhs_rejects_modes(rng):
    gen = random_generators(rng, 2, "modes", "none")
    with pytest.raises(ValueError, match="zofe_rhs"):
        lindblad_rhs(np.eye(2) / 2, gen)


def test_zofe_rhs_zero_aux_is_unitary(rng):
    gen = random_generators(rng, 4, "modes", "modes")
    rho = random_density(rng, 4)
    drho, _ = zofe_rhs((rho, gen.zero_aux()), gen)
    np.testing.assert_allclose(drho, -1j * (gen.H @ rho - rho @ gen.H), atol=1e-15)


def test_zofe_rhs_markovian_matches_lindblad(rng):
    for n in (2, 3, 5):
        gen = random_generators(rng, n, "markov", "markov", n_relax=n)
        rho = random_density(rng, n)
        drho, daux = zofe_rhs((rho, gen.zero_aux()), gen)
        assert daux.shape == (0, n, n)
        np.testing.assert_allclose(drho, lindblad_rhs(rho, gen), atol=1e-14)


def test_zofe_rhs_trace_free_for_any_aux(rng):
    gen = random_generators(rng, 4, "modes", "modes", n_relax=4)
    for _ in range(10):
        drho, _ = zofe_rhs((random_density(rng, 4), random_aux(rng, gen)), gen)
        assert abs(np.trace(drho)) <= 1e-12
        assert np.max(np.abs(drho - drho.conj().T)) <= 1e-12


def test_pure_dephasing_matches_exact():
    mode = BathMode(1.0, 1.0)
    env = EnvironmentSpec((DephasingChannel(0, NonMarkovian((mode,))),))
    gen = dimer(V=0.0, e1=0.3, env=env)
    rho0 = np.full((2, 2), 0.5, dtype=complex)
    traj = propagate(rho0, gen, RunParameters(2.0, 0.5, dt=1e-3))
    for t, rho in zip(traj.times, traj.states):
        expected = 0.5 * math.exp(-decoherence_exponent([mode], t).real)
        assert abs(rho[0, 1]) == pytest.approx(expected, abs=1e-10)
    assert abs(traj.states[2, 0, 1]) == pytest.approx(0.5 * math.exp(-math.exp(-1)), abs=1e-10)
    assert abs(traj.states[2, 0, 1]) == pytest.approx(0.346100, abs=1e-6)


def test_rabi_quarter_period():
    traj = propagate(SingleSite(0), dimer(), RunParameters(math.pi / 4, math.pi / 4, dt=1e-3))
    p1, p2, re, im = rabi_dimer_exact(1.0, traj.times[-1])
    rho = traj.states[-1]
    assert rho[0, 0].real == pytest.approx(0.5, abs=1e-8)
    np.testing.assert_allclose([rho[1, 1].real, rho[0, 1].real, rho[0, 1].imag], [p2, re, im],
                               atol=1e-8)


def test_zero_horizon_returns_initial_state(rng):
    gen = random_generators(rng, 3)
    rho0 = random_density(rng, 3)
    traj = propagate(rho0, gen, RunParameters(0.0, 0.1, dt=0.01))
    assert len(traj) == 1
    np.testing.assert_array_equal(traj.states[0], rho0)


def test_lindblad_against_expm(rng):
    gen = random_generators(rng, 4, "markov", "markov", n_relax=3)
    rho0 = random_density(rng, 4)
    traj = propagate(rho0, gen, RunParameters(1.0, 0.25, dt=1e-3))
    for t, rho in zip(traj.times, traj.states):
        assert np.max(np.abs(rho - liouvillian_expm_propagate(rho0, gen, t))) <= 1e-7


@pytest.mark.parametrize("deph, relax", [("markov", "markov"), ("modes", "none"),
                                         ("mixed", "mixed"), ("modes", "modes")])
def test_trace_and_hermiticity(rng, deph, relax):
    gen = random_generators(rng, 5, deph, relax, n_relax=3)
    traj = propagate(random_density(rng, 5), gen, RunParameters(3.0, 0.1, dt=5e-3))
    assert np.max(np.abs(np.trace(traj.states, axis1=1, axis2=2) - 1)) <= 1e-8
    assert np.max(np.abs(traj.states - traj.states.conj().transpose(0, 2, 1))) <= 1e-10


def test_backends_agree(rng):
    gen = random_generators(rng, 4, "mixed", "mixed")
    rho0 = random_density(rng, 4)
    run = RunParameters(2.0, 0.1, dt=0.01)
    outs = [propagate(rho0, gen, run, backend=b) for b in kernels.backends().values()]
    for other in outs[1:]:
        np.testing.assert_allclose(other.states, outs[0].states, atol=1e-12)
        np.testing.assert_allclose(other.aux, outs[0].aux, atol=1e-12)


def test_output_grid():
    np.testing.assert_allclose(output_grid(1.0, 0.25), [0, 0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(output_grid(1.0, 0.3), [0, 0.3, 0.6, 0.9, 1.0])
    assert output_grid(math.pi, 1e-3)[-1] == math.pi
    np.testing.assert_array_equal(output_grid(0.0, 0.1), [0.0])
    with pytest.raises(ValueError):
        output_grid(1.0, 0.0)


def test_step_smaller_than_output_interval(rng):
    gen = random_generators(rng, 3, "markov", "markov")
    rho0 = random_density(rng, 3)
    coarse = propagate(rho0, gen, RunParameters(1.0, 0.5, dt=1e-3))
    fine = propagate(rho0, gen, RunParameters(1.0, 1e-3, dt=1e-3))
    np.testing.assert_allclose(coarse.states[-1], fine.states[-1], atol=1e-12)
    assert coarse.dt == pytest.approx(1e-3)


def test_tolerance_driven_step(rng):
    gen = random_generators(rng, 3, "mixed", "markov")
    rho0 = random_density(rng, 3)
    dt = select_step(gen, rho0, 0.1, rtol=1e-8, atol=1e-10)
    assert 0 < dt <= 0.1
    auto = propagate(rho0, gen, RunParameters(1.0, 0.1, rtol=1e-8, atol=1e-10))
    ref = propagate(rho0, gen, RunParameters(1.0, 0.1, dt=1e-4))
    assert np.max(np.abs(auto.states - ref.states)) <= 1e-7
    loose = select_step(gen, rho0, 0.1, rtol=1e-3, atol=1e-3)
    assert loose >= dt


def test_aux_trajectory_properties(rng):
    gen = random_generators(rng, 3, "modes", "modes")
    times = output_grid(2.0, 0.1)
    full = aux_trajectory(gen, times, 0.01)
    np.testing.assert_array_equal(full[0], 0)
    tail = aux_trajectory(gen, times[5:], 0.01)
    np.testing.assert_allclose(tail, full[5:], atol=1e-13)
    # independent of rho: matches the aux stored by a full propagation
    traj = propagate(random_density(rng, 3), gen, RunParameters(2.0, 0.1, dt=0.01))
    np.testing.assert_allclose(traj.aux, full, atol=1e-13)
    markov = random_generators(rng, 3, "markov", "markov")
    assert aux_trajectory(markov, times, 0.01).shape == (len(times), 0, 3, 3)


def test_aux_markov_limit_is_constant():
    # large gamma with g = rate * gamma / 2: the mode settles at rate/2 * L
    g_rate, gamma = 0.4, 2000.0
    env = EnvironmentSpec((DephasingChannel(0, NonMarkovian((BathMode(g_rate * gamma / 2,
                                                                      gamma),))),))
    gen = dimer(V=0.0, env=env)
    aux = aux_trajectory(gen, np.array([0.0, 0.5]), 1e-4)
    assert aux[1, 0, 0, 0] == pytest.approx(g_rate / 2, rel=1e-9)


def test_auxiliary_operator_set(rng):
    net = SiteNetwork((0.0, 0.5, 1.0), ((0, 1, 0.3), (1, 2, 0.3)))
    env = EnvironmentSpec(
        (DephasingChannel(0, Markovian(0.4)),
         DephasingChannel(2, NonMarkovian((BathMode(1.0, 1.0), BathMode(0.5, 2.0))))),
        (RelaxationChannel(2, 1, Markovian(0.2)),))
    gen = build_generators(net, env)
    modes = random_aux(rng, gen)
    aux = AuxiliaryOperatorSet(gen, modes)
    np.testing.assert_allclose(aux.dephasing(0), np.diag([0.2, 0, 0]))
    np.testing.assert_allclose(aux.dephasing(2), modes[0] + modes[1])
    np.testing.assert_array_equal(aux.dephasing(1), 0)
    expected = np.zeros((3, 3))
    expected[1, 2] = 0.1
    np.testing.assert_allclose(aux.relaxation(2, 1), expected)
    np.testing.assert_array_equal(aux.relaxation(1, 2), 0)
    assert set(aux.dephasing_map()) == {0, 2}
    assert set(aux.relaxation_map()) == {(2, 1)}
    np.testing.assert_array_equal(AuxiliaryOperatorSet(gen).channel_matrices()[1], 0)


def test_numerical_abort_reports_last_good_time(rng):
    gen = random_generators(rng, 3, "markov", "markov")
    with pytest.raises(PropagationError) as info:
        propagate(random_density(rng, 3), gen, RunParameters(400.0, 4.0, dt=4.0))
    assert info.value.last_good_time >= 0
    assert "last good output time" in str(info.value)


def test_positivity_monitored_not_enforced(caplog):
    env = EnvironmentSpec((), (RelaxationChannel(0, 1, NonMarkovian((BathMode(2.0, 0.3, 2.0),))),))
    gen = build_generators(SiteNetwork((1.0, 0.0), ((0, 1, 0.5),)), env)
    with caplog.at_level(logging.WARNING, logger="qcurrents.propagator"):
        traj = propagate(SingleSite(0), gen, RunParameters(5.0, 0.01, dt=0.0025))
    assert traj.min_eigenvalues.min() < -1e-6
    assert len(traj.min_eigenvalues) == len(traj)
    assert traj.warnings and "positivity" in traj.warnings[0]
    assert any("positivity" in r.message for r in caplog.records)


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory([0.0, 1.0], np.zeros((3, 2, 2)))
    with pytest.raises(ValueError):
        Trajectory([0.0, 0.0], np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        Trajectory([0.0], np.zeros((1, 2, 3)))


def test_initial_shape_mismatch(rng):
    with pytest.raises(ValueError):
        propagate(np.eye(2) / 2, random_generators(rng, 3), RunParameters(1.0, 0.1, dt=0.1))
