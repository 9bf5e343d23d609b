"""Excitation probability currents and their decompositions.

``j[l, n]`` is the net rate at which probability moves from site ``l`` to
site ``n``; every current matrix is antisymmetric and the populations obey
``d rho_nn/dt = sum_l j[l, n]``.

Two independent routes are kept on purpose: the per-mechanism components come
from the kernel (each channel's transfer attributed to its source/target pair),
while ``j_total`` is evaluated from the closed pair formula
``2 H_ln Im rho_ln + 2 Re(sum_k rho_lk conj(A_ln)_nk - (A_nl)_lk rho_kn)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from . import kernels
from .model import GeneratorSet
from .propagator import Trajectory, aux_trajectory


# ---------------------------------------------------------------------------
# single-pair formulas
# ---------------------------------------------------------------------------


def _pair(l, n):
    if l == n:
        raise ValueError("currents are defined between distinct sites (l != n)")


def unitary_current(rho, H, l: int, n: int) -> float:
    _pair(l, n)
    return 2.0 * float(np.real(H[l, n])) * float(np.imag(rho[l, n]))


def relaxation_current(rho, aux_relax: Mapping[tuple[int, int], np.ndarray], l: int,
                       n: int) -> float:
    """Relaxation part of ``j[l, n]`` for arbitrary auxiliary operators.

    ``aux_relax[(source, target)]`` is the channel's full auxiliary matrix;
    missing channels count as zero.
    """
    _pair(l, n)
    rho = np.asarray(rho)
    out = 0.0
    a_ln = aux_relax.get((l, n))
    if a_ln is not None:
        out += 2.0 * np.real(np.sum(rho[l, :] * np.conj(a_ln[n, :])))
    a_nl = aux_relax.get((n, l))
    if a_nl is not None:
        out -= 2.0 * np.real(np.sum(a_nl[l, :] * rho[:, n]))
    return float(out)


def markov_relaxation_current(rho, gamma_relax, l: int, n: int) -> float:
    """Rate-equation form ``gamma[l, n] rho_ll - gamma[n, l] rho_nn``."""
    _pair(l, n)
    return float(gamma_relax[l, n] * rho[l, l].real - gamma_relax[n, l] * rho[n, n].real)


def dephasing_population_rate(rho, aux_dephas: Mapping[int, np.ndarray]) -> np.ndarray:
    """Diagonal of the dephasing term applied to ``rho``, evaluated with dense products."""
    rho = np.asarray(rho, dtype=complex)
    n = rho.shape[0]
    total = np.zeros((n, n), dtype=complex)
    for site, A in aux_dephas.items():
        L = np.zeros((n, n), dtype=complex)
        L[site, site] = 1.0
        Ad = A.conj().T
        total += L @ rho @ Ad + A @ rho @ L.conj().T - L.conj().T @ A @ rho - rho @ Ad @ L
    return np.diagonal(total).real.copy()


def dephasing_current_check(rho, aux_dephas: Mapping[int, np.ndarray], n: int) -> float:
    """``<n| dephasing term (rho) |n>``; vanishes for projector couplings."""
    return float(dephasing_population_rate(rho, aux_dephas)[n])


class BoundCheck(NamedTuple):
    current: float
    bound: float
    clamped: bool


def unitary_bound_check(rho, H, l: int, n: int) -> BoundCheck:
    """``|j^U_ln|`` against ``2|H_ln| sqrt(rho_ll rho_nn - (Re rho_ln)^2)``.

    A negative radicand (non-positive ``rho``) is clamped to zero and flagged.
    """
    _pair(l, n)
    rad = rho[l, l].real * rho[n, n].real - rho[l, n].real ** 2
    clamped = bool(rad < 0)
    bound = 2.0 * abs(float(np.real(H[l, n]))) * float(np.sqrt(max(rad, 0.0)))
    return BoundCheck(abs(unitary_current(rho, H, l, n)), bound, clamped)


def unitary_bound_matrix(rho: np.ndarray, H: np.ndarray):
    """Vectorized bound over all pairs; returns ``(bound, clamped_mask)`` of shape rho.shape."""
    pops = np.einsum("...nn->...n", rho).real
    rad = pops[..., :, None] * pops[..., None, :] - rho.real**2
    return 2.0 * np.abs(H) * np.sqrt(np.maximum(rad, 0.0)), rad < 0


# ---------------------------------------------------------------------------
# whole-trajectory analysis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurrentRecord:
    time: float
    j_unitary: np.ndarray
    j_relax: np.ndarray
    j_dephas_check: np.ndarray
    j_total: np.ndarray
    j_pop: np.ndarray
    j_coher: np.ndarray


@dataclass
class CurrentSeries:
    """Current matrices stacked over time, each of shape (T, N, N)."""

    times: np.ndarray
    j_total: np.ndarray
    j_unitary: np.ndarray
    j_dephas_check: np.ndarray
    j_relax: np.ndarray
    j_pop: np.ndarray
    j_coher: np.ndarray
    labels: tuple[str, ...] | None = None

    COMPONENTS = ("j_total", "j_unitary", "j_relax", "j_pop", "j_coher", "j_dephas_check")

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k) -> CurrentRecord:
        return CurrentRecord(float(self.times[k]), self.j_unitary[k], self.j_relax[k],
                             self.j_dephas_check[k], self.j_total[k], self.j_pop[k],
                             self.j_coher[k])

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    @property
    def n_sites(self) -> int:
        return self.j_total.shape[1]

    def component(self, name: str) -> np.ndarray:
        if name not in self.COMPONENTS:
            raise KeyError(name)
        return getattr(self, name)


def channel_aux_rows(gen: GeneratorSet, aux_modes: np.ndarray) -> np.ndarray:
    """Target row of every channel's auxiliary operator, shape (T, C, N)."""
    T = aux_modes.shape[0]
    n, nch = gen.n_sites, len(gen.channels)
    rows = np.zeros((T, nch, n), dtype=complex)
    rows[:, np.arange(nch), gen.ch_src] = gen.ch_const
    for m in range(gen.n_modes):
        c = gen.mode_ch[m]
        rows[:, c, :] += aux_modes[:, m, gen.ch_tgt[c], :]
    return rows


def _closed_form_total(rho, H, gen, rows):
    """Closed pair formula, independent of the kernel's per-channel attribution."""
    n = rho.shape[1]
    J = 2.0 * H[None, :, :] * rho.imag
    idx = np.arange(n)
    J[:, idx, idx] = 0.0
    for c, ch in enumerate(gen.channels):
        if ch.kind != "relaxation":
            continue
        s, t = ch.source, ch.target
        r = rows[:, c, :]
        J[:, s, t] += 2.0 * np.real(np.einsum("tk,tk->t", rho[:, s, :], r.conj()))
        J[:, t, s] -= 2.0 * np.real(np.einsum("tk,tk->t", r, rho[:, :, s]))
    return J


def _components(rho, gen, rows):
    return kernels.current_components(gen.H, gen.ch_src, gen.ch_tgt, rho, rows)


def _split(rho):
    n = rho.shape[-1]
    diag = np.zeros_like(rho)
    idx = np.arange(n)
    diag[..., idx, idx] = rho[..., idx, idx]
    return diag, rho - diag


def resolve_aux(traj: Trajectory, gen: GeneratorSet, aux=None) -> np.ndarray:
    """Per-mode auxiliary matrices on the trajectory grid, regenerating if needed."""
    if aux is not None:
        return np.asarray(aux, dtype=complex)
    if gen.n_modes == 0:
        return np.zeros((len(traj), 0, gen.n_sites, gen.n_sites), dtype=complex)
    if traj.aux is not None and traj.aux.shape[1] == gen.n_modes:
        return traj.aux
    dt = traj.dt
    if dt is None:
        dt = float(np.min(np.diff(traj.times))) if len(traj) > 1 else 1.0
    return aux_trajectory(gen, traj.times, dt)


def total_currents(traj: Trajectory, gen: GeneratorSet, aux=None,
                   labels: Sequence[str] | None = None) -> CurrentSeries:
    """All current components at every output time of ``traj``."""
    if traj.n_sites != gen.n_sites:
        raise ValueError(f"trajectory has {traj.n_sites} sites, model has {gen.n_sites}")
    aux = resolve_aux(traj, gen, aux)
    if aux.shape[0] != len(traj):
        raise ValueError("auxiliary series length differs from trajectory")
    rho = traj.states
    rows = channel_aux_rows(gen, aux)
    unit, deph, relax = _components(rho, gen, rows)
    total = _closed_form_total(rho, gen.H, gen, rows)
    rd, rnd = _split(rho)
    pop = sum(_components(rd, gen, rows))
    coher = sum(_components(rnd, gen, rows))
    return CurrentSeries(traj.times.copy(), total, unit, deph, relax, pop, coher,
                         tuple(labels) if labels is not None else None)


def partition_currents(rho, gen: GeneratorSet, aux_modes=None):
    """Currents carried by the populations and by the coherences of ``rho``.

    Returns ``(j_pop, j_coher)``; their sum is the total current.
    """
    rho = np.asarray(rho, dtype=complex)[None]
    aux = gen.zero_aux()[None] if aux_modes is None else np.asarray(aux_modes)[None]
    rows = channel_aux_rows(gen, aux)
    rd, rnd = _split(rho)
    return sum(_components(rd, gen, rows))[0], sum(_components(rnd, gen, rows))[0]


def subcomplex_current(currents: CurrentSeries, A: Iterable[int], B: Iterable[int],
                       component: str = "j_total") -> np.ndarray:
    """Net current from site group ``A`` to site group ``B`` over time."""
    A, B = sorted(set(A)), sorted(set(B))
    if not A or not B:
        raise ValueError("sub-complexes must be non-empty")
    if set(A) & set(B):
        raise ValueError(f"sub-complexes overlap on sites {sorted(set(A) & set(B))}")
    j = currents.component(component)
    return j[:, A, :][:, :, B].sum(axis=(1, 2))


# ---------------------------------------------------------------------------
# continuity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContinuityReport:
    fd_residual: float
    fd_site: int
    fd_time: float
    dt_output: float
    c_estimate: float
    analytic_residual: float | None = None

    def summary(self) -> str:
        s = (f"continuity: central-difference residual {self.fd_residual:.3e} "
             f"(site {self.fd_site}, t={self.fd_time:.6g}; C~{self.c_estimate:.3e} at "
             f"dt_output={self.dt_output:.3g})")
        if self.analytic_residual is not None:
            s += f"; generator residual {self.analytic_residual:.3e}"
        return s


def population_rates(traj: Trajectory, gen: GeneratorSet, aux=None) -> np.ndarray:
    """``d rho_nn/dt`` from the generator at every output time, shape (T, N)."""
    aux = resolve_aux(traj, gen, aux)
    out = np.empty((len(traj), gen.n_sites))
    for k in range(len(traj)):
        drho, _ = kernels.rhs(*gen.kernel_args(), traj.states[k], aux[k])
        out[k] = np.diagonal(drho).real
    return out


def continuity_residual(traj: Trajectory, currents: CurrentSeries,
                        gen: GeneratorSet | None = None, aux=None) -> ContinuityReport:
    """Compare ``d rho_nn/dt`` with the inflow ``sum_l j[l, n]`` at interior output times.

    The derivative comes from second-order central differences; when ``gen``
    is given the generator's own population rates are compared as well.
    """
    if len(traj) < 3:
        raise ValueError("need at least 3 output times for central differences")
    if len(currents) != len(traj):
        raise ValueError("currents and trajectory lengths differ")
    t = traj.times
    pops = traj.populations()
    dpop = np.gradient(pops, t, axis=0)
    inflow = currents.j_total.sum(axis=1)
    res = np.abs(dpop - inflow)[1:-1]
    k, n = np.unravel_index(int(np.argmax(res)), res.shape)
    h = float(np.max(np.diff(t)))
    analytic = None
    if gen is not None:
        rates = population_rates(traj, gen, aux)
        analytic = float(np.max(np.abs(rates - inflow)[1:-1]))
    r = float(res[k, n])
    return ContinuityReport(r, int(n), float(t[k + 1]), h, r / h**2, analytic)


def fd_error_bound(gen: GeneratorSet, times, aux_modes) -> float:
    """Upper estimate of the central-difference truncation error on ``times``.

    Uses ``h^2/6 * max|d^3 rho/dt^3|`` with the third derivative bounded through
    Frobenius norms of the generator and of the auxiliary operators' first two
    time derivatives.
    """
    times = np.asarray(times, dtype=float)
    h = float(np.max(np.diff(times)))
    H = gen.H
    a = 2.0 * np.linalg.norm(H)
    b = c = 0.0
    if len(gen.channels):
        chans = np.stack([kernels.channel_aux(aux_modes[k], gen.ch_src, gen.ch_tgt,
                                              gen.ch_const, gen.mode_ch, gen.n_sites)
                          for k in range(len(times))])
        a += 4.0 * np.linalg.norm(chans, axis=(2, 3)).max(axis=0).sum()
    if gen.n_modes:
        d1 = np.stack([kernels.rhs(*gen.kernel_args(), np.zeros_like(H, dtype=complex),
                                   aux_modes[k], False)[1] for k in range(len(times))])
        w = gen.mode_w[None, :, None, None]
        d2 = -w * d1 - 1j * (H @ d1 - d1 @ H)
        per_ch = np.zeros((2, len(gen.channels)))
        for m in range(gen.n_modes):
            per_ch[0, gen.mode_ch[m]] += np.linalg.norm(d1[:, m], axis=(1, 2)).max()
            per_ch[1, gen.mode_ch[m]] += np.linalg.norm(d2[:, m], axis=(1, 2)).max()
        b = 4.0 * per_ch[0].sum()
        c = 4.0 * per_ch[1].sum()
    return h**2 / 6.0 * (a**3 + 3.0 * a * b + c)


# ---------------------------------------------------------------------------
# Markovian three-equation picture
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarkovianDiagnostics:
    delta: np.ndarray  # H_ll - H_nn
    gamma: np.ndarray  # combined coherence decay rate per pair
    d: np.ndarray  # (rho_ll - rho_nn)/2


def markovian_diagnostics(gen: GeneratorSet, rho=None) -> MarkovianDiagnostics:
    e = np.diagonal(gen.H)
    delta = e[:, None] - e[None, :]
    out_rate = gen.gamma_relaxation.sum(axis=1)
    per_site = gen.gamma_dephasing + out_rate
    gamma = 0.5 * (per_site[:, None] + per_site[None, :])
    if rho is None:
        d = np.zeros_like(delta)
    else:
        p = np.diagonal(rho).real
        d = 0.5 * (p[:, None] - p[None, :])
    return MarkovianDiagnostics(delta, gamma, d)


def markovian_coherence_rhs(rho, gen: GeneratorSet):
    """Coherence equations of a Lindblad model, pair by pair.

    Returns ``(dIm, dRe, j)`` as (N, N) arrays holding ``d Im rho_ln/dt``,
    ``d Re rho_ln/dt`` and the current ``j_ln`` (diagonals zero).
    """
    if not gen.is_markovian:
        raise ValueError("non-Markovian channel present")
    rho = np.asarray(rho, dtype=complex)
    n = rho.shape[0]
    V = gen.H.copy()
    np.fill_diagonal(V, 0.0)
    diag = markovian_diagnostics(gen, rho)
    re, im = rho.real, rho.imag
    g_r = gen.gamma_relaxation
    dim = np.zeros((n, n))
    dre = np.zeros((n, n))
    j = np.zeros((n, n))
    for l in range(n):
        for m in range(n):
            if l == m:
                continue
            others = [k for k in range(n) if k != l and k != m]
            nonlocal_re = sum(V[k, m] * re[l, k] - V[l, k] * re[k, m] for k in others)
            nonlocal_im = sum(V[k, m] * im[l, k] - V[l, k] * im[k, m] for k in others)
            dim[l, m] = (2.0 * V[l, m] * diag.d[l, m] - diag.delta[l, m] * re[l, m]
                         - diag.gamma[l, m] * im[l, m] + nonlocal_re)
            dre[l, m] = (diag.delta[l, m] * im[l, m] - diag.gamma[l, m] * re[l, m]
                         - nonlocal_im)
            j[l, m] = 2.0 * V[l, m] * im[l, m] + (g_r[l, m] * re[l, l] - g_r[m, l] * re[m, m])
    return dim, dre, j
