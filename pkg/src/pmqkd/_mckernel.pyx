# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-round simulation kernel.

Mirrors _mckernel_np.simulate_block variate for variate so that both
backends turn the same uniform block into the same round stream.
"""
from libc.math cimport cos, expm1, log1p, floor, M_PI

ctypedef signed char int8
ctypedef short int16


def simulate_block(
    double[:, ::1] u,
    double eta,
    double p_d,
    double[::1] intensities,
    int m_slices,
    double phi0_value,
    double phi0_rate,
    long t0,
    int8[::1] kappa_a,
    int8[::1] kappa_b,
    int16[::1] mu_idx,
    int16[::1] j_a,
    int16[::1] j_b,
    int8[::1] outcome,
    double[::1] phi_a,
    double[::1] phi_b,
):
    cdef Py_ssize_t n = u.shape[1]
    cdef Py_ssize_t i
    cdef int n_int = intensities.shape[0]
    cdef double two_pi = 2.0 * M_PI
    cdef double log_q = log1p(-p_d)
    cdef double scale = m_slices / two_pi
    cdef double pa, pb, phi0, delta, c, c2, s2, mu, pl, pr
    cdef int ka, kb, idx, l_click, r_click

    for i in range(n):
        ka = 1 if u[0, i] < 0.5 else 0
        kb = 1 if u[1, i] < 0.5 else 0
        pa = u[2, i] * two_pi
        pb = u[3, i] * two_pi
        idx = <int>(u[4, i] * n_int)
        if idx >= n_int:
            idx = n_int - 1
        mu = intensities[idx]
        phi0 = phi0_value + phi0_rate * (t0 + i) if phi0_rate != 0.0 else phi0_value
        delta = (pb + M_PI * kb) - (pa + M_PI * ka) + phi0
        # half-angle identities: one cosine per round covers both detectors
        c = cos(delta)
        c2 = 0.5 * (1.0 + c)
        s2 = 0.5 * (1.0 - c)
        pl = -expm1(log_q - eta * mu * c2)
        pr = -expm1(log_q - eta * mu * s2)
        l_click = 1 if u[5, i] < pl else 0
        r_click = 1 if u[6, i] < pr else 0

        kappa_a[i] = <int8>ka
        kappa_b[i] = <int8>kb
        mu_idx[i] = <int16>idx
        outcome[i] = <int8>(l_click + 2 * r_click)
        phi_a[i] = pa
        phi_b[i] = pb
        j_a[i] = <int16>(<long>floor(pa * scale + 0.5) % m_slices)
        j_b[i] = <int16>(<long>floor(pb * scale + 0.5) % m_slices)
