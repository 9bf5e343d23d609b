"""Slow reference solutions used to check the fast path.

Nothing in the production modules imports this; the superoperator here is
O(N^4) in memory.
"""
from __future__ import annotations

from typing import Iterable

import numpy as np
from scipy import integrate, linalg

from .model import BathMode, GeneratorSet

MAX_SUPEROPERATOR_SITES = 12


def rabi_dimer_exact(V: float, t):
    """Closed homo-dimer started on site 1: ``(rho_11, rho_22, Re rho_12, Im rho_12)``."""
    t = np.asarray(t, dtype=float)
    c, s = np.cos(V * t), np.sin(V * t)
    return c**2, s**2, np.zeros_like(t), s * c


def rabi_dimer_state(V: float, t: float) -> np.ndarray:
    p1, p2, re, im = rabi_dimer_exact(V, t)
    return np.array([[p1, re + 1j * im], [re - 1j * im, p2]], dtype=complex)


def decoherence_exponent(modes: Iterable[BathMode], t):
    """``D(t) = sum_i g_i (t/w_i + (exp(-w_i t) - 1)/w_i**2)``, complex in general."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape, dtype=complex)
    for m in modes:
        w = m.w
        if w == 0:
            raise ValueError("mode with w = 0 has no closed form")
        out = out + m.g * (t / w + (np.exp(-w * t) - 1.0) / w**2)
    return out


def decoherence_exponent_quadrature(modes: Iterable[BathMode], t: float) -> complex:
    """Same quantity as :func:`decoherence_exponent` by nested adaptive quadrature."""
    modes = list(modes)

    def alpha(tau, part):
        z = sum(m.g * np.exp(-m.w * tau) for m in modes)
        return z.real if part == 0 else z.imag

    def inner(s, part):
        return integrate.quad(alpha, 0.0, s, args=(part,), epsabs=1e-14, epsrel=1e-13)[0]

    re = integrate.quad(inner, 0.0, t, args=(0,), epsabs=1e-13, epsrel=1e-13)[0]
    im = integrate.quad(inner, 0.0, t, args=(1,), epsabs=1e-13, epsrel=1e-13)[0]
    return complex(re, im)


def pure_dephasing_exact(modes: Iterable[BathMode], t):
    """Decoherence exponent for an uncoupled dimer with one dephasing bath.

    The coherence obeys ``|rho_12(t)| = |rho_12(0)| * exp(-Re D(t))``.
    """
    return decoherence_exponent(modes, t)


def _spre(A):
    return np.kron(A, np.eye(A.shape[0]))


def _spost(A):
    return np.kron(np.eye(A.shape[0]), A.T)


def liouvillian(gen: GeneratorSet) -> np.ndarray:
    """Superoperator acting on row-major ``vec(rho)``: ``vec(A X B) = (A kron B^T) vec(X)``."""
    if not gen.is_markovian:
        raise ValueError("superoperator oracle covers Markovian models only")
    n = gen.n_sites
    if n > MAX_SUPEROPERATOR_SITES:
        raise ValueError(f"N = {n} too large for the superoperator oracle")
    H = gen.H.astype(complex)
    sup = -1j * (_spre(H) - _spost(H))
    for ch in gen.channels:
        L = ch.coupling(n)
        LdL = L.conj().T @ L
        sup += ch.rate * (np.kron(L, L.conj()) - 0.5 * _spre(LdL) - 0.5 * _spost(LdL))
    return sup


def liouvillian_expm_propagate(rho0, gen: GeneratorSet, t: float) -> np.ndarray:
    n = gen.n_sites
    rho0 = np.asarray(rho0, dtype=complex)
    if t == 0:
        return rho0.copy()
    prop = linalg.expm(liouvillian(gen) * t)
    return (prop @ rho0.reshape(n * n)).reshape(n, n)


def unitary_propagate(rho0, H, t: float) -> np.ndarray:
    """``exp(-iHt) rho0 exp(iHt)`` through the eigendecomposition of ``H``."""
    lam, vec = np.linalg.eigh(np.asarray(H, dtype=float))
    U = (vec * np.exp(-1j * lam * t)) @ vec.conj().T
    return U @ np.asarray(rho0, dtype=complex) @ U.conj().T
