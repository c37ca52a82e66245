"""Reference implementations of the hot kernels (no compiled code).

Signatures and in-place semantics match ``_ckernels.pyx`` exactly.
"""
import math

import numpy as np

NAME = "python"


def hopping_entries(dim, a, b):
    """Nonzero elements of ``c_a^dagger c_b`` on the Fock states ``0..dim-1``.

    Mode ``m`` is occupied when bit ``m`` is set; the sign is the parity of
    occupied modes below the acted-on mode, applied annihilation first.
    Returns ``(rows, cols, signs)``.
    """
    states = np.arange(dim, dtype=np.uint64)
    bit_a = np.uint64(1) << np.uint64(a)
    bit_b = np.uint64(1) << np.uint64(b)
    ok = (states & bit_b) != 0
    if a != b:
        ok &= (states & bit_a) == 0
    cols = states[ok]
    mid = cols ^ bit_b
    sign_b = np.bitwise_count(cols & (bit_b - np.uint64(1))) & 1
    sign_a = np.bitwise_count(mid & (bit_a - np.uint64(1))) & 1
    rows = mid | bit_a
    signs = 1.0 - 2.0 * ((sign_a + sign_b) & 1)
    return rows.astype(np.int64), cols.astype(np.int64), signs.astype(float)


def fill_hopping(out, fwd, bwd, bond, amp, ef, eb):
    """``out[fwd[e]] += amp[e] * ef[bond[e]]``, ``out[bwd[e]] += conj(amp[e]) * eb[bond[e]]``."""
    np.add.at(out, fwd, amp * ef[bond])
    np.add.at(out, bwd, np.conj(amp) * eb[bond])


def gauge_sweep(angles, div, flux, bond_sites, plaq_ptr, plaq_idx, plaq_sign,
                shifts, uniforms, beta_kappa, beta_over_alpha):
    """One Metropolis sweep of single-bond updates for the pure gauge action.

    ``div`` and ``flux`` are the current (unwrapped) site divergences and
    plaquette sums; all three arrays are updated in place.  Returns the
    number of accepted proposals.
    """
    accepted = 0
    two_pi = 2.0 * math.pi
    for b in range(angles.shape[0]):
        delta = shifts[b]
        i = bond_sites[b, 0]
        j = bond_sites[b, 1]
        dS = -beta_over_alpha * (math.cos(div[i] - delta) - math.cos(div[i])
                                 + math.cos(div[j] + delta) - math.cos(div[j]))
        for k in range(plaq_ptr[b], plaq_ptr[b + 1]):
            p = plaq_idx[k]
            dS -= beta_kappa * (math.cos(flux[p] + plaq_sign[k] * delta) - math.cos(flux[p]))
        if dS <= 0.0 or uniforms[b] < math.exp(-dS):
            accepted += 1
            new = angles[b] + delta
            # keep angles in (-pi, pi]
            new = -(math.fmod(math.fmod(-new + math.pi, two_pi) + two_pi, two_pi) - math.pi)
            delta = new - angles[b]
            angles[b] = new
            div[i] -= delta
            div[j] += delta
            for k in range(plaq_ptr[b], plaq_ptr[b + 1]):
                flux[plaq_idx[k]] += plaq_sign[k] * delta
    return accepted
