"""Pure numpy implementation of the hot kernels.

Array conventions shared with the compiled core:

* ``H``: (N, N) float64, real symmetric.
* channel ``c``: coupling ``|ch_tgt[c]><ch_src[c]|``; Markovian constant aux
  ``ch_const[c] * L_c``.
* mode ``m``: belongs to channel ``mode_ch[m]``, amplitude ``mode_g[m]``,
  complex decay ``mode_w[m]``; its aux matrix is ``aux[m]`` (N, N) complex.
"""
import numpy as np

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_TRACE_DRIFT = 2


def channel_aux(aux, ch_src, ch_tgt, ch_const, mode_ch, n):
    """Full auxiliary operator of every channel, shape (C, N, N)."""
    nch = len(ch_src)
    out = np.zeros((nch, n, n), dtype=complex)
    out[np.arange(nch), ch_tgt, ch_src] = ch_const
    if len(mode_ch):
        np.add.at(out, mode_ch, aux)
    return out


def rhs(H, ch_src, ch_tgt, ch_const, mode_ch, mode_g, mode_w, rho, aux, evolve_rho=True):
    """Joint derivative ``(d rho/dt, d aux/dt)``."""
    n = H.shape[0]
    nmodes = len(mode_ch)
    if nmodes:
        daux = -mode_w[:, None, None] * aux - 1j * (H @ aux - aux @ H)
        daux[np.arange(nmodes), ch_tgt[mode_ch], ch_src[mode_ch]] += mode_g
    else:
        daux = np.zeros((0, n, n), dtype=complex)
    if not evolve_rho:
        return None, daux

    drho = -1j * (H @ rho - rho @ H)
    if len(ch_src):
        A = channel_aux(aux, ch_src, ch_tgt, ch_const, mode_ch, n)
        # row t of L rho A^dag is (rho A^dag)[s, :]; row s of L^dag A rho is (A rho)[t, :]
        v = np.einsum("cjk,ck->cj", A.conj(), rho[ch_src])
        u = A[np.arange(len(ch_src)), ch_tgt] @ rho
        X = np.zeros((n, n), dtype=complex)
        np.add.at(X, ch_tgt, v)
        np.add.at(X, ch_src, -u)
        drho += X + X.conj().T
    return drho, daux


def rk4_run(H, ch_src, ch_tgt, ch_const, mode_ch, mode_g, mode_w,
            rho0, aux0, h, nsub, out_rho, out_aux, evolve_rho, trace_tol):
    """Fixed-step RK4 over output intervals.

    Interval ``k`` is covered by ``nsub[k]`` steps of size ``h[k]``; the state
    after it lands in ``out_*[k + 1]``. Returns ``(status, last_good_index)``.
    """
    # overflow on the way to inf/nan is reported through the status code
    with np.errstate(over="ignore", invalid="ignore"):
        return _rk4_loop((H, ch_src, ch_tgt, ch_const, mode_ch, mode_g, mode_w),
                         rho0, aux0, h, nsub, out_rho, out_aux, evolve_rho, trace_tol)


def _rk4_loop(args, rho0, aux0, h, nsub, out_rho, out_aux, evolve_rho, trace_tol):
    rho = rho0.copy()
    aux = aux0.copy()
    if evolve_rho:
        out_rho[0] = rho
    out_aux[0] = aux
    for k in range(len(h)):
        dt = h[k]
        for _ in range(nsub[k]):
            if evolve_rho:
                k1r, k1a = rhs(*args, rho, aux)
                k2r, k2a = rhs(*args, rho + 0.5 * dt * k1r, aux + 0.5 * dt * k1a)
                k3r, k3a = rhs(*args, rho + 0.5 * dt * k2r, aux + 0.5 * dt * k2a)
                k4r, k4a = rhs(*args, rho + dt * k3r, aux + dt * k3a)
                rho = rho + (dt / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
                rho = 0.5 * (rho + rho.conj().T)
                if not np.all(np.isfinite(rho)):
                    return STATUS_NONFINITE, k
                if abs(np.trace(rho).real - 1.0) > trace_tol:
                    return STATUS_TRACE_DRIFT, k
            else:
                _, k1a = rhs(*args, rho, aux, False)
                _, k2a = rhs(*args, rho, aux + 0.5 * dt * k1a, False)
                _, k3a = rhs(*args, rho, aux + 0.5 * dt * k2a, False)
                _, k4a = rhs(*args, rho, aux + dt * k3a, False)
            aux = aux + (dt / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
            if not np.all(np.isfinite(aux)):
                return STATUS_NONFINITE, k
        if evolve_rho:
            out_rho[k + 1] = rho
        out_aux[k + 1] = aux
    return STATUS_OK, len(h)


def current_components(H, ch_src, ch_tgt, rho, aux_rows):
    """Per-pair unitary, dephasing and relaxation currents.

    ``rho`` is (T, N, N); ``aux_rows[t, c]`` is row ``ch_tgt[c]`` of channel
    ``c``'s auxiliary operator. Returns three (T, N, N) float arrays.
    """
    T, n, _ = rho.shape
    unit = 2.0 * H[None, :, :] * rho.imag
    idx = np.arange(n)
    unit[:, idx, idx] = 0.0
    deph = np.zeros((T, n, n))
    relax = np.zeros((T, n, n))
    for c in range(len(ch_src)):
        s, t = ch_src[c], ch_tgt[c]
        row = aux_rows[:, c, :]
        if s != t:
            # probability moved s -> t by this channel
            x = 2.0 * np.einsum("tk,tk->t", rho[:, s, :], row.conj()).real
            relax[:, s, t] += x
            relax[:, t, s] -= x
        else:
            gain = 2.0 * (rho[:, s, :] * row.conj()).real
            loss = 2.0 * (row * rho[:, :, s]).real
            e = 0.5 * (gain - loss)
            e[:, s] = 0.0
            deph[:, :, s] += e
            deph[:, s, :] -= e
    return unit, deph, relax
