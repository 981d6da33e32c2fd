# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Lindblad integration kernel.

Mirrors ``_kernel_py.integrate`` exactly (same Dormand-Prince 5(4) tableau,
same error control, same re-symmetrization), with the right-hand side and the
stepping loop written as C loops over flat complex buffers.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport cos, fabs, fmax, fmin, pow, sin, sqrt

BACKEND = "cython"


class IntegrationError(RuntimeError):
    """Step-size underflow or tolerance failure; carries the time reached."""

    def __init__(self, message, time_reached):
        super().__init__(f"{message} (t = {time_reached:.6g} s)")
        self.time_reached = time_reached


cdef double _C2 = 1.0 / 5, _C3 = 3.0 / 10, _C4 = 4.0 / 5, _C5 = 8.0 / 9

cdef double[7][7] _A
_A[1][0] = 1.0 / 5
_A[2][0] = 3.0 / 40; _A[2][1] = 9.0 / 40
_A[3][0] = 44.0 / 45; _A[3][1] = -56.0 / 15; _A[3][2] = 32.0 / 9
_A[4][0] = 19372.0 / 6561; _A[4][1] = -25360.0 / 2187
_A[4][2] = 64448.0 / 6561; _A[4][3] = -212.0 / 729
_A[5][0] = 9017.0 / 3168; _A[5][1] = -355.0 / 33; _A[5][2] = 46732.0 / 5247
_A[5][3] = 49.0 / 176; _A[5][4] = -5103.0 / 18656
_A[6][0] = 35.0 / 384; _A[6][1] = 0.0; _A[6][2] = 500.0 / 1113
_A[6][3] = 125.0 / 192; _A[6][4] = -2187.0 / 6784; _A[6][5] = 11.0 / 84

cdef double[7] _B5
_B5[0] = 35.0 / 384; _B5[1] = 0.0; _B5[2] = 500.0 / 1113
_B5[3] = 125.0 / 192; _B5[4] = -2187.0 / 6784; _B5[5] = 11.0 / 84; _B5[6] = 0.0

cdef double[7] _E
_E[0] = 71.0 / 57600; _E[1] = 0.0; _E[2] = -71.0 / 16695
_E[3] = 71.0 / 1920; _E[4] = -17253.0 / 339200; _E[5] = 22.0 / 525
_E[6] = -1.0 / 40


cdef void _rhs(double t,
               double complex[::1] y,
               double complex[::1] dy,
               int n,
               int nk,
               int[::1] coup_g, int[::1] coup_e,
               double complex[::1] coup_amp, double[::1] coup_freq,
               int nc,
               int[::1] gain_g, int[::1] gain_e, double[::1] gain_rate,
               double[::1] loss) noexcept nogil:
    cdef int i, a, b, g, e, c
    cdef double complex h, hc, ih, ihc
    cdef double w, feed
    cdef int n2 = n * n
    cdef double complex I = 1j

    for i in range(n2 + nc):
        dy[i] = 0.0

    # Unitary part: -(i)[rho, H] = i(H rho - rho H), sparse couplings.
    for i in range(nk):
        g = coup_g[i]
        e = coup_e[i]
        w = coup_freq[i]
        if w == 0.0:
            h = coup_amp[i]
        else:
            h = coup_amp[i] * (cos(w * t) + I * sin(w * t))
        hc = h.conjugate()
        ih = I * h
        ihc = I * hc
        for c in range(n):
            dy[g * n + c] = dy[g * n + c] + ih * y[e * n + c]
            dy[e * n + c] = dy[e * n + c] + ihc * y[g * n + c]
        for c in range(n):
            dy[c * n + e] = dy[c * n + e] - ih * y[c * n + g]
            dy[c * n + g] = dy[c * n + g] - ihc * y[c * n + e]

    # Diagonal loss.
    for a in range(n):
        for b in range(n):
            dy[a * n + b] = dy[a * n + b] - 0.5 * (loss[a] + loss[b]) * y[a * n + b]

    # Diagonal feeding plus flux quadrature states.
    for i in range(nc):
        feed = gain_rate[i] * y[gain_e[i] * n + gain_e[i]].real
        g = gain_g[i]
        dy[g * n + g] = dy[g * n + g] + feed
        dy[n2 + i] = feed


def integrate(rho0,
              coup_g, coup_e, coup_amp, coup_freq,
              gain_g, gain_e, gain_rate,
              loss,
              double duration,
              double rtol=1e-8,
              double atol=1e-10,
              double max_step=np.inf,
              double t0=0.0):
    """Integrate the master equation over [t0, t0 + duration].

    The start time matters because the coupling phases e^{i w t} are defined
    in absolute time; passing a running t0 keeps beam phases continuous
    across consecutive segments. Returns (rho_final, fluxes, steps_taken,
    max_trace_drift).
    """
    cdef int n = rho0.shape[0]
    cdef int nc = len(gain_rate)
    cdef int n2 = n * n
    cdef int ntot = n2 + nc

    if duration == 0.0:
        return rho0.copy(), np.zeros(nc), 0, 0.0

    y_arr = np.concatenate([np.ascontiguousarray(rho0, dtype=complex).ravel(),
                            np.zeros(nc, dtype=complex)])
    cdef double complex[::1] y = y_arr

    cg_arr = np.ascontiguousarray(coup_g, dtype=np.int32)
    ce_arr = np.ascontiguousarray(coup_e, dtype=np.int32)
    ca_arr = np.ascontiguousarray(coup_amp, dtype=complex)
    cf_arr = np.ascontiguousarray(coup_freq, dtype=float)
    gg_arr = np.ascontiguousarray(gain_g, dtype=np.int32)
    ge_arr = np.ascontiguousarray(gain_e, dtype=np.int32)
    gr_arr = np.ascontiguousarray(gain_rate, dtype=float)
    ls_arr = np.ascontiguousarray(loss, dtype=float)

    cdef int[::1] cg = cg_arr
    cdef int[::1] ce = ce_arr
    cdef double complex[::1] ca = ca_arr
    cdef double[::1] cf = cf_arr
    cdef int[::1] gg = gg_arr
    cdef int[::1] ge = ge_arr
    cdef double[::1] gr = gr_arr
    cdef double[::1] ls = ls_arr
    cdef int nk = cg.shape[0]

    k_arr = np.zeros((7, ntot), dtype=complex)
    ys_arr = np.zeros(ntot, dtype=complex)
    y5_arr = np.zeros(ntot, dtype=complex)
    cdef double complex[:, ::1] k = k_arr
    cdef double complex[::1] ys = ys_arr
    cdef double complex[::1] y5 = y5_arr

    cdef double scale = 1.0 / duration
    cdef int i, s, j
    for i in range(n):
        scale = fmax(scale, ls[i])
    for i in range(nk):
        scale = fmax(scale, 2.0 * abs(ca[i]))
        scale = fmax(scale, fabs(cf[i]))

    cdef double h = fmin(fmin(0.5 / scale, max_step), duration)
    cdef double t = t0
    cdef double t_end = t0 + duration
    cdef double min_step = 1e-14 * duration
    cdef double max_drift = 0.0, drift, err, tol, factor, mag_y, mag_y5, tr
    cdef double complex acc, ev, tmp
    cdef long steps = 0
    cdef double[7] cs
    cs[0] = 0.0; cs[1] = _C2; cs[2] = _C3; cs[3] = _C4; cs[4] = _C5
    cs[5] = 1.0; cs[6] = 1.0

    # First stage; thereafter FSAL reuses the last stage of an accepted step.
    _rhs(t, y, k[0], n, nk, cg, ce, ca, cf, nc, gg, ge, gr, ls)

    while t < t_end:
        h = fmin(fmin(h, max_step), t_end - t)
        if h < min_step:
            raise IntegrationError("step size underflow", t - t0)

        # Stages 2-6 with the tableau unrolled (zero entries dropped).
        for i in range(ntot):
            ys[i] = y[i] + h * (_A[1][0] * k[0, i])
        _rhs(t + cs[1] * h, ys, k[1], n, nk, cg, ce, ca, cf, nc, gg, ge, gr, ls)
        for i in range(ntot):
            ys[i] = y[i] + h * (_A[2][0] * k[0, i] + _A[2][1] * k[1, i])
        _rhs(t + cs[2] * h, ys, k[2], n, nk, cg, ce, ca, cf, nc, gg, ge, gr, ls)
        for i in range(ntot):
            ys[i] = y[i] + h * (_A[3][0] * k[0, i] + _A[3][1] * k[1, i]
                                + _A[3][2] * k[2, i])
        _rhs(t + cs[3] * h, ys, k[3], n, nk, cg, ce, ca, cf, nc, gg, ge, gr, ls)
        for i in range(ntot):
            ys[i] = y[i] + h * (_A[4][0] * k[0, i] + _A[4][1] * k[1, i]
                                + _A[4][2] * k[2, i] + _A[4][3] * k[3, i])
        _rhs(t + cs[4] * h, ys, k[4], n, nk, cg, ce, ca, cf, nc, gg, ge, gr, ls)
        for i in range(ntot):
            ys[i] = y[i] + h * (_A[5][0] * k[0, i] + _A[5][1] * k[1, i]
                                + _A[5][2] * k[2, i] + _A[5][3] * k[3, i]
                                + _A[5][4] * k[4, i])
        _rhs(t + cs[5] * h, ys, k[5], n, nk, cg, ce, ca, cf, nc, gg, ge, gr, ls)

        # Row 7 of the tableau equals the 5th-order weights, so the last
        # stage is evaluated at the candidate solution (FSAL).
        for i in range(ntot):
            y5[i] = y[i] + h * (_A[6][0] * k[0, i] + _A[6][2] * k[2, i]
                                + _A[6][3] * k[3, i] + _A[6][4] * k[4, i]
                                + _A[6][5] * k[5, i])
        _rhs(t + h, y5, k[6], n, nk, cg, ce, ca, cf, nc, gg, ge, gr, ls)

        err = 0.0
        for i in range(ntot):
            ev = h * (_E[0] * k[0, i] + _E[2] * k[2, i] + _E[3] * k[3, i]
                      + _E[4] * k[4, i] + _E[5] * k[5, i] + _E[6] * k[6, i])
            mag_y = sqrt(y[i].real * y[i].real + y[i].imag * y[i].imag)
            mag_y5 = sqrt(y5[i].real * y5[i].real + y5[i].imag * y5[i].imag)
            tol = atol + rtol * fmax(mag_y, mag_y5)
            mag_y = sqrt(ev.real * ev.real + ev.imag * ev.imag) / tol
            err += mag_y * mag_y
        err = sqrt(err / ntot)

        if err <= 1.0:
            t += h
            for i in range(ntot):
                y[i] = y5[i]
                k[0, i] = k[6, i]
            steps += 1
            # Re-symmetrize the density matrix after each accepted step.
            tr = 0.0
            for i in range(n):
                for j in range(i, n):
                    tmp = 0.5 * (y[i * n + j] + y[j * n + i].conjugate())
                    y[i * n + j] = tmp
                    y[j * n + i] = tmp.conjugate()
                tr += y[i * n + i].real
            drift = fabs(tr - 1.0)
            if drift > max_drift:
                max_drift = drift
            if err == 0.0:
                factor = 5.0
            else:
                factor = fmin(5.0, 0.9 * pow(err, -0.2))
        else:
            factor = fmax(0.2, 0.9 * pow(err, -0.2))
        h *= factor

    rho_final = np.asarray(y[:n2]).reshape(n, n).copy()
    fluxes = np.asarray(y[n2:]).real.copy()
    return rho_final, fluxes, steps, max_drift
