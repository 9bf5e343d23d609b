"""Time integration of the master equation.

The right-hand side is always the convolutionless form

    d rho/dt = -i[H, rho] + sum_c (L_c rho A_c^+ + A_c rho L_c^+ - L_c^+ A_c rho - rho A_c^+ L_c)

where a Markovian channel has the constant ``A_c = rate/2 * L_c`` and a
non-Markovian channel sums per-mode matrices obeying

    dA/dt = g L - w A - i[H, A],   A(0) = 0,

for a bath correlation ``g exp(-w t)``. The auxiliary equation does not involve
``rho``, so auxiliary operators can be regenerated from the model alone.
Higher-order corrections of the convolutionless expansion are not included.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .model import GeneratorSet, InitialState, RunParameters

log = logging.getLogger(__name__)

TRACE_ABORT_TOL = 1e-6
POSITIVITY_WARN = -1e-6


class PropagationError(RuntimeError):
    """Integration aborted; ``last_good_time`` is the last stored output time."""

    def __init__(self, reason: str, last_good_time: float):
        self.reason = reason
        self.last_good_time = last_good_time
        super().__init__(f"{reason} (last good output time {last_good_time:.6g})")


def lindblad_rhs(rho: np.ndarray, gen: GeneratorSet) -> np.ndarray:
    """Dense Lindblad derivative ``-i[H,rho] + sum rate (L rho L^+ - {L^+L, rho}/2)``."""
    if not gen.is_markovian:
        raise ValueError("non-Markovian channel present; use zofe_rhs")
    H = gen.H
    out = -1j * (H @ rho - rho @ H)
    for ch, L in zip(gen.channels, gen.couplings()):
        if ch.rate == 0.0:
            continue
        LdL = L.conj().T @ L
        out += ch.rate * (L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL))
    return out


def zofe_rhs(state, gen: GeneratorSet):
    """Joint derivative of ``(rho, aux)``; ``aux`` holds one matrix per bath mode."""
    rho, aux = state
    aux = np.asarray(aux, dtype=complex).reshape(gen.n_modes, gen.n_sites, gen.n_sites)
    return kernels.rhs(*gen.kernel_args(), np.asarray(rho, dtype=complex), aux)


class AuxiliaryOperatorSet:
    """Channel auxiliary operators at one instant.

    ``modes`` is the per-mode array; Markovian channels contribute their
    constant ``rate/2 * L`` on top.
    """

    def __init__(self, gen: GeneratorSet, modes: np.ndarray | None = None):
        self.gen = gen
        self.modes = gen.zero_aux() if modes is None else np.asarray(modes, dtype=complex)

    def channel_matrices(self) -> np.ndarray:
        g = self.gen
        return kernels.channel_aux(self.modes, g.ch_src, g.ch_tgt, g.ch_const, g.mode_ch,
                                   g.n_sites)

    def _index(self, kind, source, target):
        for c, ch in enumerate(self.gen.channels):
            if ch.kind == kind and ch.source == source and ch.target == target:
                return c
        return None

    def dephasing(self, site: int) -> np.ndarray:
        c = self._index("dephasing", site, site)
        n = self.gen.n_sites
        return np.zeros((n, n), complex) if c is None else self.channel_matrices()[c]

    def relaxation(self, source: int, target: int) -> np.ndarray:
        c = self._index("relaxation", source, target)
        n = self.gen.n_sites
        return np.zeros((n, n), complex) if c is None else self.channel_matrices()[c]

    def dephasing_map(self) -> dict[int, np.ndarray]:
        mats = self.channel_matrices()
        return {ch.source: mats[c] for c, ch in enumerate(self.gen.channels)
                if ch.kind == "dephasing"}

    def relaxation_map(self) -> dict[tuple[int, int], np.ndarray]:
        mats = self.channel_matrices()
        return {(ch.source, ch.target): mats[c] for c, ch in enumerate(self.gen.channels)
                if ch.kind == "relaxation"}


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    aux: np.ndarray | None = None
    min_eigenvalues: np.ndarray | None = None
    dt: float | None = None
    integrator: str = "rk4"
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=complex)
        if self.states.ndim != 3 or self.states.shape[1] != self.states.shape[2]:
            raise ValueError("states must have shape (T, N, N)")
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    @property
    def n_sites(self) -> int:
        return self.states.shape[1]

    def __len__(self):
        return len(self.times)

    def populations(self) -> np.ndarray:
        return np.einsum("tnn->tn", self.states).real

    def aux_at(self, gen: GeneratorSet, k: int) -> AuxiliaryOperatorSet:
        modes = None if self.aux is None else self.aux[k]
        return AuxiliaryOperatorSet(gen, modes)


def output_grid(t_final: float, dt_output: float) -> np.ndarray:
    if t_final < 0 or dt_output <= 0:
        raise ValueError("need t_final >= 0 and dt_output > 0")
    k = int(math.floor(t_final / dt_output + 1e-9))
    times = dt_output * np.arange(k + 1)
    if t_final - times[-1] > 1e-12 * max(1.0, t_final):
        times = np.append(times, t_final)
    elif k:
        times[-1] = t_final
    return times


def _substeps(times: np.ndarray, dt: float):
    intervals = np.diff(times)
    nsub = np.maximum(1, np.ceil(intervals / dt - 1e-9)).astype(np.int64)
    return intervals / nsub, nsub


def _run(gen, rho0, times, dt, evolve_rho=True, trace_tol=TRACE_ABORT_TOL, backend=None):
    impl = backend or kernels
    h, nsub = _substeps(times, dt)
    n, nm = gen.n_sites, gen.n_modes
    out_rho = np.zeros((len(times), n, n), dtype=complex)
    out_aux = np.zeros((len(times), nm, n, n), dtype=complex)
    rho0 = np.zeros((n, n), complex) if rho0 is None else np.asarray(rho0, dtype=complex)
    status, k = impl.rk4_run(*gen.kernel_args(), rho0, gen.zero_aux(), h, nsub,
                             out_rho, out_aux, evolve_rho, trace_tol)
    return status, k, out_rho, out_aux


def aux_trajectory(gen: GeneratorSet, times, dt: float) -> np.ndarray:
    """Per-mode auxiliary matrices on ``times``, shape (T, M, N, N).

    Integration always starts from ``A(0) = 0`` at ``t = 0``.
    """
    times = np.asarray(times, dtype=float)
    if times[0] < 0:
        raise ValueError("auxiliary operators are defined for t >= 0")
    if gen.n_modes == 0:
        return np.zeros((len(times), 0, gen.n_sites, gen.n_sites), dtype=complex)
    shifted = times[0] > 0
    grid = np.concatenate([[0.0], times]) if shifted else times
    status, k, _, aux = _run(gen, None, grid, dt, evolve_rho=False)
    if status != kernels.STATUS_OK:
        raise PropagationError("auxiliary operators became non-finite", float(grid[k]))
    return aux[1:] if shifted else aux


def select_step(gen: GeneratorSet, rho0: np.ndarray, interval: float, rtol: float,
                atol: float, max_halvings: int = 30) -> float:
    """Pick a fixed RK4 step by step doubling over the first output interval."""
    dt = interval
    grid = np.array([0.0, interval])
    for _ in range(max_halvings):
        s1, _, r1, a1 = _run(gen, rho0, grid, dt, trace_tol=np.inf)
        s2, _, r2, a2 = _run(gen, rho0, grid, dt / 2, trace_tol=np.inf)
        if s1 == s2 == kernels.STATUS_OK:
            err = max(np.max(np.abs(r1[-1] - r2[-1])),
                      np.max(np.abs(a1[-1] - a2[-1]), initial=0.0)) / 15.0
            scale = max(np.max(np.abs(r2[-1])), np.max(np.abs(a2[-1]), initial=0.0))
            if err <= atol + rtol * scale:
                return dt
        dt /= 2
    raise PropagationError("could not meet rtol/atol with a fixed step", 0.0)


def propagate(initial, gen: GeneratorSet, run: RunParameters, *, store_aux: bool = True,
              trace_tol: float = TRACE_ABORT_TOL, backend=None) -> Trajectory:
    """Integrate from ``initial`` with fixed-step RK4, sampling on the output grid.

    ``initial`` is an :class:`InitialState` or an explicit (N, N) matrix. ``rho``
    is re-Hermitized after every step; a trace drift above ``trace_tol`` or a
    non-finite value raises :class:`PropagationError`.
    """
    n = gen.n_sites
    if isinstance(initial, np.ndarray):
        rho0 = np.asarray(initial, dtype=complex)
    else:
        rho0 = initial.density_matrix(n)
    if rho0.shape != (n, n):
        raise ValueError(f"initial state is {rho0.shape}, expected {(n, n)}")
    times = output_grid(run.t_final, run.dt_output)
    if run.dt is not None:
        dt = run.dt
    elif len(times) > 1:
        dt = select_step(gen, rho0, times[1] - times[0], run.rtol, run.atol)
    else:
        dt = run.dt_output

    status, k, states, aux = _run(gen, rho0, times, dt, trace_tol=trace_tol, backend=backend)
    if status == kernels.STATUS_NONFINITE:
        raise PropagationError("non-finite values (step unstable; reduce dt)", float(times[k]))
    if status == kernels.STATUS_TRACE_DRIFT:
        raise PropagationError(f"trace drift above {trace_tol:g}", float(times[k]))

    lam = np.linalg.eigvalsh(states)[:, 0]
    warnings = []
    worst = int(np.argmin(lam))
    if lam[worst] < POSITIVITY_WARN:
        msg = (f"positivity: smallest eigenvalue {lam[worst]:.3e} at t={times[worst]:.6g} "
               f"(below {POSITIVITY_WARN:g})")
        log.warning(msg)
        warnings.append(msg)
    h, _ = _substeps(times, dt)
    return Trajectory(
        times=times,
        states=states,
        aux=aux if store_aux else None,
        min_eigenvalues=lam,
        dt=float(h.max()) if len(h) else float(dt),
        integrator="rk4",
        warnings=warnings,
    )
