"""Pure-numpy Lindblad integration kernel (fallback for the compiled core).

Implements a Dormand-Prince 5(4) embedded pair over the density matrix plus
per-channel decay-flux quadrature states. The compiled Cython kernel in
``_kernel.pyx`` implements the identical algorithm; tests and the benchmark
compare the two.

Structure exploited for speed and exactness:
  * every jump operator is rank one, C = a |g><e|, so the dissipator reduces
    to diagonal loss rates and diagonal-to-diagonal feeding terms;
  * the Hamiltonian is a sparse set of couplings amp e^{i w t} |g><e| + h.c.
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"

# Dormand-Prince 5(4) tableau (same coefficients as scipy's RK45).
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# Error weights: 5th-order solution minus 4th-order solution.
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)


class IntegrationError(RuntimeError):
    """Step-size underflow or tolerance failure; carries the time reached."""

    def __init__(self, message: str, time_reached: float):
        super().__init__(f"{message} (t = {time_reached:.6g} s)")
        self.time_reached = time_reached


def _rhs(t, y, n, coup_g, coup_e, coup_amp, coup_freq, gain_g, gain_e, gain_rate, loss):
    rho = y[: n * n].reshape(n, n)
    dy = np.empty_like(y)
    drho = dy[: n * n].reshape(n, n)

    # Unitary part, -(i)[rho, H] = i(H rho - rho H), with sparse H(t).
    if len(coup_g):
        H = np.zeros((n, n), dtype=complex)
        phases = coup_amp * np.exp(1j * coup_freq * t)
        np.add.at(H, (coup_g, coup_e), phases)
        H += H.conj().T
        np.matmul(H, rho, out=drho)
        drho -= rho @ H
        drho *= 1j
    else:
        drho[:] = 0.0

    # Dissipator: diagonal loss plus diagonal feeding (rank-one jumps).
    drho -= 0.5 * (loss[:, None] + loss[None, :]) * rho
    diag = rho.real.diagonal()
    feed = gain_rate * diag[gain_e]
    np.add.at(drho, (gain_g, gain_g), feed)

    # Flux quadrature states, one per channel: d q_c/dt = rate_c * rho_ee.
    dy[n * n :] = feed
    return dy


def integrate(
    rho0,
    coup_g,
    coup_e,
    coup_amp,
    coup_freq,
    gain_g,
    gain_e,
    gain_rate,
    loss,
    duration,
    rtol=1e-8,
    atol=1e-10,
    max_step=np.inf,
    t0=0.0,
):
    """Integrate the master equation over [t0, t0 + duration].

    The start time matters because the coupling phases e^{i w t} are defined
    in absolute time; passing a running t0 keeps beam phases continuous
    across consecutive segments. Returns (rho_final, fluxes, steps_taken,
    max_trace_drift).
    """
    n = rho0.shape[0]
    nc = len(gain_rate)
    if duration == 0.0:
        return rho0.copy(), np.zeros(nc), 0, 0.0

    y = np.concatenate([rho0.astype(complex).ravel(), np.zeros(nc, dtype=complex)])
    args = (n, coup_g, coup_e, coup_amp, coup_freq, gain_g, gain_e, gain_rate, loss)

    # Initial step from the stiffest rate present.
    scale = max(
        loss.max(initial=0.0),
        2 * np.abs(coup_amp).max(initial=0.0),
        np.abs(coup_freq).max(initial=0.0),
        1.0 / duration,
    )
    h = min(0.5 / scale, max_step, duration)

    t = t0
    t_end = t0 + duration
    steps = 0
    max_drift = 0.0
    k = np.empty((7, y.size), dtype=complex)
    min_step = 1e-14 * duration

    # First stage; thereafter FSAL reuses the last stage of an accepted step.
    k[0] = _rhs(t, y, *args)

    while t < t_end:
        h = min(h, max_step, t_end - t)
        if h < min_step:
            raise IntegrationError("step size underflow", t - t0)

        for s in range(1, 6):
            ys = y + h * (_A[s] @ k[:s])
            k[s] = _rhs(t + _C[s] * h, ys, *args)
        # Row 7 of the tableau equals the 5th-order weights, so the last
        # stage is evaluated at the candidate solution (FSAL).
        y5 = y + h * (_A[6] @ k[:6])
        k[6] = _rhs(t + h, y5, *args)
        err_vec = h * (_E @ k)

        # Magnitudes via sqrt(re^2 + im^2), bit-identical to the compiled
        # kernel (which avoids hypot for speed).
        mag_y = np.sqrt(y.real * y.real + y.imag * y.imag)
        mag_y5 = np.sqrt(y5.real * y5.real + y5.imag * y5.imag)
        tol = atol + rtol * np.maximum(mag_y, mag_y5)
        ratio = np.sqrt(err_vec.real * err_vec.real + err_vec.imag * err_vec.imag) / tol
        err = np.sqrt(np.mean(ratio * ratio))

        if err <= 1.0:
            t += h
            y = y5
            k[0] = k[6]
            steps += 1
            # Re-symmetrize the density matrix after each accepted step.
            rho = y[: n * n].reshape(n, n)
            rho += rho.conj().T.copy()
            rho *= 0.5
            drift = abs(rho.trace().real - 1.0)
            if drift > max_drift:
                max_drift = drift
            factor = 5.0 if err == 0 else min(5.0, 0.9 * err**-0.2)
        else:
            factor = max(0.2, 0.9 * err**-0.2)
        h *= factor

    rho_final = y[: n * n].reshape(n, n).copy()
    fluxes = y[n * n :].real.copy()
    return rho_final, fluxes, steps, max_drift
