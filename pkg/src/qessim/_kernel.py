"""Compiled inner loop of the coupled-laser integrator.

One call advances both lasers through one modulation cycle with the
Euler-Maruyama scheme.  All stochastic input (complex field-noise
increments) is pregenerated by the caller, so the kernel itself is
deterministic and bit-reproducible.

Fail codes returned by integrate_cycle: 0 = ok, 1..4 = first non-finite
variable (e1, e2, n1, n2) with the step index at which it happened.
"""

from __future__ import annotations

import numba as nb
import numpy as np


@nb.njit(cache=True, nogil=True, fastmath={"contract"})
def integrate_cycle(
    e1,
    e2,
    n1,
    n2,  # state at cycle start
    alpha1,
    gamma1,
    inv_tau1,
    alpha2,
    gamma2,
    inv_tau2,
    kappa_c,  # kappa * exp(i psi), complex
    delayed,  # bool: use the ring buffers for the coupling term
    dly_idx,
    dly_frac,  # tau_d = (dly_idx + dly_frac) * dt
    buf1,
    buf2,
    buf_pos,  # ring buffers of past fields; buf[buf_pos] == E(t_now)
    p1_arr,
    p2_arr,  # pump value per step
    det_arr,  # angular detuning (incl. chirp) per step, rad/ns
    g1,
    g2,  # raw standard-normal draws, shape (n_steps, 2) per laser
    s1,
    s2,  # noise increment scales sqrt(r_sp * dt) per laser
    dt,
    stride,
    rec_first,  # first in-cycle step index to record (-1: record nothing)
    rec_e1,
    rec_e2,
    rec_n1,
    rec_n2,
    rec_start,  # write position in the record arrays
):
    n_steps = p2_arr.shape[0]
    depth = buf1.shape[0]
    rec_pos = rec_start
    next_rec = rec_first if rec_first >= 0 else n_steps

    for i in range(n_steps):
        if i == next_rec:
            rec_e1[rec_pos] = e1
            rec_e2[rec_pos] = e2
            rec_n1[rec_pos] = n1
            rec_n2[rec_pos] = n2
            rec_pos += 1
            next_rec += stride

        if delayed:
            j0 = buf_pos - dly_idx
            j1 = j0 - 1
            if j0 < 0:
                j0 += depth
            if j1 < 0:
                j1 += depth
            e1_d = (1.0 - dly_frac) * buf1[j0] + dly_frac * buf1[j1]
            e2_d = (1.0 - dly_frac) * buf2[j0] + dly_frac * buf2[j1]
        else:
            e1_d = e1
            e2_d = e2

        ae1 = e1.real * e1.real + e1.imag * e1.imag
        ae2 = e2.real * e2.real + e2.imag * e2.imag

        de1 = gamma1 * n1 * (e1 + 1j * (alpha1 * e1)) + kappa_c * e2_d
        de2 = (
            gamma2 * n2 * (e2 + 1j * (alpha2 * e2))
            + kappa_c * e1_d
            + 1j * (det_arr[i] * e2)
        )
        dn1 = (p1_arr[i] - n1 - (1.0 + 2.0 * n1) * ae1) * inv_tau1
        dn2 = (p2_arr[i] - n2 - (1.0 + 2.0 * n2) * ae2) * inv_tau2

        e1 = e1 + dt * de1 + complex(s1 * g1[i, 0], s1 * g1[i, 1])
        e2 = e2 + dt * de2 + complex(s2 * g2[i, 0], s2 * g2[i, 1])
        n1 = n1 + dt * dn1
        n2 = n2 + dt * dn2

        if delayed:
            buf_pos += 1
            if buf_pos == depth:
                buf_pos = 0
            buf1[buf_pos] = e1
            buf2[buf_pos] = e2

        if not (np.isfinite(e1.real) and np.isfinite(e1.imag)):
            return e1, e2, n1, n2, buf_pos, rec_pos, 1, i
        if not (np.isfinite(e2.real) and np.isfinite(e2.imag)):
            return e1, e2, n1, n2, buf_pos, rec_pos, 2, i
        if not np.isfinite(n1):
            return e1, e2, n1, n2, buf_pos, rec_pos, 3, i
        if not np.isfinite(n2):
            return e1, e2, n1, n2, buf_pos, rec_pos, 4, i

    return e1, e2, n1, n2, buf_pos, rec_pos, 0, n_steps
