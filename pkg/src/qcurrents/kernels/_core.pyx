# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4/right-hand-side/current kernels; same contracts as ``_reference``."""
import numpy as np

from libc.math cimport fabs, isfinite

ctypedef double complex dc

cdef int STATUS_OK = 0
cdef int STATUS_NONFINITE = 1
cdef int STATUS_TRACE_DRIFT = 2


cdef inline dc _conj(dc z) noexcept nogil:
    return z.real - 1j * z.imag


cdef void _rhs(const double[:, ::1] H,
               const long long[::1] ch_src, const long long[::1] ch_tgt,
               const dc[::1] ch_const, const long long[::1] ch_nmodes,
               const long long[::1] mode_ch, const double[::1] mode_g, const dc[::1] mode_w,
               const dc[:, ::1] rho, const dc[:, :, ::1] aux,
               dc[:, ::1] drho, dc[:, :, ::1] daux, dc[:, :, ::1] A,
               dc[::1] v, dc[::1] u, bint evolve_rho) noexcept nogil:
    cdef Py_ssize_t n = H.shape[0]
    cdef Py_ssize_t nch = ch_src.shape[0]
    cdef Py_ssize_t nmodes = mode_ch.shape[0]
    cdef Py_ssize_t i, j, k, m, c, s, t
    cdef dc acc, a, w

    for m in range(nmodes):
        w = mode_w[m]
        for i in range(n):
            for j in range(n):
                acc = 0
                for k in range(n):
                    acc = acc + H[i, k] * aux[m, k, j] - aux[m, i, k] * H[k, j]
                daux[m, i, j] = -w * aux[m, i, j] - 1j * acc
        c = mode_ch[m]
        daux[m, ch_tgt[c], ch_src[c]] = daux[m, ch_tgt[c], ch_src[c]] + mode_g[m]

    if not evolve_rho:
        return

    for i in range(n):
        for j in range(n):
            acc = 0
            for k in range(n):
                acc = acc + H[i, k] * rho[k, j] - rho[i, k] * H[k, j]
            drho[i, j] = -1j * acc

    for c in range(nch):
        s = ch_src[c]
        t = ch_tgt[c]
        if ch_nmodes[c] == 0:
            # A = const |t><s|: v = rho[s,s] conj(const) e_t, u = const rho[s, :]
            a = ch_const[c]
            for j in range(n):
                v[j] = 0
                u[j] = a * rho[s, j]
            v[t] = rho[s, s] * _conj(a)
        else:
            for i in range(n):
                for j in range(n):
                    A[c, i, j] = 0
            A[c, t, s] = ch_const[c]
            for m in range(nmodes):
                if mode_ch[m] == c:
                    for i in range(n):
                        for j in range(n):
                            A[c, i, j] = A[c, i, j] + aux[m, i, j]
            for j in range(n):
                acc = 0
                for k in range(n):
                    acc = acc + rho[s, k] * _conj(A[c, j, k])
                v[j] = acc
                acc = 0
                for k in range(n):
                    acc = acc + A[c, t, k] * rho[k, j]
                u[j] = acc
        for j in range(n):
            drho[t, j] = drho[t, j] + v[j]
            drho[j, t] = drho[j, t] + _conj(v[j])
            drho[s, j] = drho[s, j] - u[j]
            drho[j, s] = drho[j, s] - _conj(u[j])


def _nmodes(ch_src, mode_ch):
    return np.bincount(np.asarray(mode_ch, dtype=np.int64),
                       minlength=len(ch_src)).astype(np.int64)


def rhs(H, ch_src, ch_tgt, ch_const, mode_ch, mode_g, mode_w, rho, aux, evolve_rho=True):
    n = H.shape[0]
    nch = len(ch_src)
    nm = len(mode_ch)
    rho = np.ascontiguousarray(rho, dtype=complex)
    aux = np.ascontiguousarray(aux, dtype=complex).reshape(nm, n, n)
    drho = np.zeros((n, n), dtype=complex)
    daux = np.zeros((nm, n, n), dtype=complex)
    A = np.zeros((max(nch, 1), n, n), dtype=complex)
    v = np.zeros(n, dtype=complex)
    u = np.zeros(n, dtype=complex)
    _rhs(H, ch_src, ch_tgt, ch_const, _nmodes(ch_src, mode_ch), mode_ch, mode_g, mode_w,
         rho, aux, drho, daux, A, v, u, evolve_rho)
    return (drho if evolve_rho else None), daux


def rk4_run(H, ch_src, ch_tgt, ch_const, mode_ch, mode_g, mode_w,
            rho0, aux0, h, nsub, out_rho, out_aux, evolve_rho, double trace_tol):
    cdef Py_ssize_t n = H.shape[0]
    cdef Py_ssize_t nch = len(ch_src)
    cdef Py_ssize_t nm = len(mode_ch)
    cdef Py_ssize_t K = len(h)
    cdef Py_ssize_t k, step, i, j, m, stage
    cdef double dt, coef, tr
    cdef bint ev = evolve_rho
    cdef int status = STATUS_OK

    cdef const double[:, ::1] Hv = H
    cdef const long long[::1] srcv = ch_src
    cdef const long long[::1] tgtv = ch_tgt
    cdef const dc[::1] constv = ch_const
    cdef const long long[::1] nmv = _nmodes(ch_src, mode_ch)
    cdef const long long[::1] mchv = mode_ch
    cdef const double[::1] gv = mode_g
    cdef const dc[::1] wv = mode_w
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=float)
    cdef const long long[::1] nsubv = np.ascontiguousarray(nsub, dtype=np.int64)
    cdef dc[:, :, ::1] orho = out_rho
    cdef dc[:, :, :, ::1] oaux = out_aux

    cdef dc[:, ::1] rho = np.array(rho0, dtype=complex, order="C")
    cdef dc[:, :, ::1] aux = np.array(aux0, dtype=complex, order="C").reshape(nm, n, n)
    cdef dc[:, ::1] rtmp = np.zeros((n, n), dtype=complex)
    cdef dc[:, :, ::1] atmp = np.zeros((nm, n, n), dtype=complex)
    cdef dc[:, ::1] racc = np.zeros((n, n), dtype=complex)
    cdef dc[:, :, ::1] aacc = np.zeros((nm, n, n), dtype=complex)
    cdef dc[:, ::1] kr = np.zeros((n, n), dtype=complex)
    cdef dc[:, :, ::1] ka = np.zeros((nm, n, n), dtype=complex)
    cdef dc[:, :, ::1] A = np.zeros((max(nch, 1), n, n), dtype=complex)
    cdef dc[::1] v = np.zeros(n, dtype=complex)
    cdef dc[::1] u = np.zeros(n, dtype=complex)
    cdef dc z

    if ev:
        orho[0, :, :] = rho
    oaux[0, :, :, :] = aux

    with nogil:
        for k in range(K):
            dt = hv[k]
            for step in range(nsubv[k]):
                # stage 1 evaluates at the current state
                for i in range(n):
                    for j in range(n):
                        rtmp[i, j] = rho[i, j]
                        racc[i, j] = 0
                for m in range(nm):
                    for i in range(n):
                        for j in range(n):
                            atmp[m, i, j] = aux[m, i, j]
                            aacc[m, i, j] = 0
                for stage in range(4):
                    _rhs(Hv, srcv, tgtv, constv, nmv, mchv, gv, wv, rtmp, atmp,
                         kr, ka, A, v, u, ev)
                    coef = 1.0 if (stage == 0 or stage == 3) else 2.0
                    # next stage point: y + c*dt*k with c = 1/2, 1/2, 1
                    if ev:
                        for i in range(n):
                            for j in range(n):
                                racc[i, j] = racc[i, j] + coef * kr[i, j]
                                if stage < 2:
                                    rtmp[i, j] = rho[i, j] + 0.5 * dt * kr[i, j]
                                elif stage == 2:
                                    rtmp[i, j] = rho[i, j] + dt * kr[i, j]
                    for m in range(nm):
                        for i in range(n):
                            for j in range(n):
                                aacc[m, i, j] = aacc[m, i, j] + coef * ka[m, i, j]
                                if stage < 2:
                                    atmp[m, i, j] = aux[m, i, j] + 0.5 * dt * ka[m, i, j]
                                elif stage == 2:
                                    atmp[m, i, j] = aux[m, i, j] + dt * ka[m, i, j]
                if ev:
                    for i in range(n):
                        for j in range(n):
                            rho[i, j] = rho[i, j] + (dt / 6.0) * racc[i, j]
                    tr = 0.0
                    for i in range(n):
                        for j in range(i, n):
                            z = 0.5 * (rho[i, j] + _conj(rho[j, i]))
                            rho[i, j] = z
                            rho[j, i] = _conj(z)
                        tr = tr + rho[i, i].real
                    for i in range(n):
                        for j in range(n):
                            if not (isfinite(rho[i, j].real) and isfinite(rho[i, j].imag)):
                                status = STATUS_NONFINITE
                    if status == STATUS_OK and not fabs(tr - 1.0) <= trace_tol:
                        status = STATUS_TRACE_DRIFT
                for m in range(nm):
                    for i in range(n):
                        for j in range(n):
                            aux[m, i, j] = aux[m, i, j] + (dt / 6.0) * aacc[m, i, j]
                            if not (isfinite(aux[m, i, j].real) and isfinite(aux[m, i, j].imag)):
                                status = STATUS_NONFINITE
                if status != STATUS_OK:
                    break
            if status != STATUS_OK:
                break
            if ev:
                for i in range(n):
                    for j in range(n):
                        orho[k + 1, i, j] = rho[i, j]
            for m in range(nm):
                for i in range(n):
                    for j in range(n):
                        oaux[k + 1, m, i, j] = aux[m, i, j]
    if status != STATUS_OK:
        return status, k
    return STATUS_OK, K


def current_components(H, ch_src, ch_tgt, rho, aux_rows):
    cdef const double[:, ::1] Hv = H
    cdef const long long[::1] srcv = ch_src
    cdef const long long[::1] tgtv = ch_tgt
    cdef const dc[:, :, ::1] r = np.ascontiguousarray(rho, dtype=complex)
    cdef const dc[:, :, ::1] rows = np.ascontiguousarray(aux_rows, dtype=complex)
    cdef Py_ssize_t T = r.shape[0]
    cdef Py_ssize_t n = r.shape[1]
    cdef Py_ssize_t nch = srcv.shape[0]
    unit_a = np.zeros((T, n, n))
    deph_a = np.zeros((T, n, n))
    relax_a = np.zeros((T, n, n))
    cdef double[:, :, ::1] unit = unit_a
    cdef double[:, :, ::1] deph = deph_a
    cdef double[:, :, ::1] relax = relax_a
    cdef Py_ssize_t ti, l, m, c, s, t, k
    cdef double x, gain, loss, e
    cdef dc acc, a

    with nogil:
        for ti in range(T):
            for l in range(n):
                for m in range(n):
                    if l != m:
                        unit[ti, l, m] = 2.0 * Hv[l, m] * r[ti, l, m].imag
            for c in range(nch):
                s = srcv[c]
                t = tgtv[c]
                if s != t:
                    acc = 0
                    for k in range(n):
                        acc = acc + r[ti, s, k] * _conj(rows[ti, c, k])
                    x = 2.0 * acc.real
                    relax[ti, s, t] += x
                    relax[ti, t, s] -= x
                else:
                    for l in range(n):
                        if l == s:
                            continue
                        a = rows[ti, c, l]
                        gain = 2.0 * (r[ti, s, l] * _conj(a)).real
                        loss = 2.0 * (a * r[ti, l, s]).real
                        e = 0.5 * (gain - loss)
                        deph[ti, l, s] += e
                        deph[ti, s, l] -= e
    return unit_a, deph_a, relax_a
