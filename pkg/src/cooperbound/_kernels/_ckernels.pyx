# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_pykernels`` for the reference semantics."""
import numpy as np
from libc.math cimport cos, exp, fmod, M_PI
from libc.stdint cimport uint64_t, int64_t

NAME = "cython"


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline int _parity(uint64_t x) nogil:
    return __builtin_popcountll(x) & 1


def hopping_entries(Py_ssize_t dim, int a, int b):
    cdef uint64_t bit_a = (<uint64_t>1) << a
    cdef uint64_t bit_b = (<uint64_t>1) << b
    cdef uint64_t s, mid
    cdef Py_ssize_t n = 0
    rows_np = np.empty(dim, dtype=np.int64)
    cols_np = np.empty(dim, dtype=np.int64)
    signs_np = np.empty(dim, dtype=np.float64)
    cdef int64_t[:] rows = rows_np
    cdef int64_t[:] cols = cols_np
    cdef double[:] signs = signs_np
    for s in range(<uint64_t>dim):
        if not (s & bit_b):
            continue
        if a != b and (s & bit_a):
            continue
        mid = s ^ bit_b
        rows[n] = <int64_t>(mid | bit_a)
        cols[n] = <int64_t>s
        if (_parity(s & (bit_b - 1)) + _parity(mid & (bit_a - 1))) & 1:
            signs[n] = -1.0
        else:
            signs[n] = 1.0
        n += 1
    return rows_np[:n], cols_np[:n], signs_np[:n]


def fill_hopping(double complex[:] out, int64_t[:] fwd, int64_t[:] bwd, int64_t[:] bond,
                 double complex[:] amp, double complex[:] ef, double complex[:] eb):
    cdef Py_ssize_t e, f, g
    cdef double ar, ai, fr, fi, br, bi
    # real arithmetic avoids the C99 inf/nan handling of complex multiplication
    for e in range(fwd.shape[0]):
        ar, ai = amp[e].real, amp[e].imag
        fr, fi = ef[bond[e]].real, ef[bond[e]].imag
        br, bi = eb[bond[e]].real, eb[bond[e]].imag
        f, g = fwd[e], bwd[e]
        out[f] = out[f] + (ar * fr - ai * fi + 1j * (ar * fi + ai * fr))
        out[g] = out[g] + (ar * br + ai * bi + 1j * (ar * bi - ai * br))


def gauge_sweep(double[:] angles, double[:] div, double[:] flux, int64_t[:, :] bond_sites,
                int64_t[:] plaq_ptr, int64_t[:] plaq_idx, double[:] plaq_sign,
                double[:] shifts, double[:] uniforms, double beta_kappa, double beta_over_alpha):
    cdef Py_ssize_t b, k, p, i, j
    cdef double delta, dS, new
    cdef double two_pi = 2.0 * M_PI
    cdef long accepted = 0
    for b in range(angles.shape[0]):
        delta = shifts[b]
        i = bond_sites[b, 0]
        j = bond_sites[b, 1]
        dS = -beta_over_alpha * (cos(div[i] - delta) - cos(div[i])
                                 + cos(div[j] + delta) - cos(div[j]))
        for k in range(plaq_ptr[b], plaq_ptr[b + 1]):
            p = plaq_idx[k]
            dS -= beta_kappa * (cos(flux[p] + plaq_sign[k] * delta) - cos(flux[p]))
        if dS <= 0.0 or uniforms[b] < exp(-dS):
            accepted += 1
            new = angles[b] + delta
            new = -(fmod(fmod(-new + M_PI, two_pi) + two_pi, two_pi) - M_PI)
            delta = new - angles[b]
            angles[b] = new
            div[i] -= delta
            div[j] += delta
            for k in range(plaq_ptr[b], plaq_ptr[b + 1]):
                flux[plaq_idx[k]] += plaq_sign[k] * delta
    return accepted
