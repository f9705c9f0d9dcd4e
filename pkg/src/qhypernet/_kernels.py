"""In-place statevector kernels.

States are held as separate real and imaginary float64 arrays so the inner
loops vectorize. Qubit arguments are 0-indexed bit positions (``q = j - 1``).
Each kernel splits the array into blocks of ``2 * stride`` and hands the two
halves to a contiguous inner loop.
"""

import numpy as np
from numba import njit

# Below this stride the per-block slice overhead dominates; use a flat loop.
_SMALL = 8


@njit(fastmath=True, cache=True)
def _rot_halves(xr, xi, yr, yi, ar, ai, br, bi, cr, ci, dr, di):
    for k in range(xr.shape[0]):
        pr = xr[k]
        pi = xi[k]
        qr = yr[k]
        qi = yi[k]
        xr[k] = ar * pr - ai * pi + br * qr - bi * qi
        xi[k] = ar * pi + ai * pr + br * qi + bi * qr
        yr[k] = cr * pr - ci * pi + dr * qr - di * qi
        yi[k] = cr * pi + ci * pr + dr * qi + di * qr


@njit(fastmath=True, cache=True)
def apply_1q(re, im, q, u00, u01, u10, u11):
    """Apply the 2x2 matrix ``[[u00, u01], [u10, u11]]`` to bit ``q``."""
    ar, ai, br, bi = u00.real, u00.imag, u01.real, u01.imag
    cr, ci, dr, di = u10.real, u10.imag, u11.real, u11.imag
    stride = 1 << q
    dim = re.shape[0]
    if stride < _SMALL:
        for base in range(0, dim, 2 * stride):
            for i0 in range(base, base + stride):
                i1 = i0 + stride
                pr = re[i0]
                pi = im[i0]
                qr = re[i1]
                qi = im[i1]
                re[i0] = ar * pr - ai * pi + br * qr - bi * qi
                im[i0] = ar * pi + ai * pr + br * qi + bi * qr
                re[i1] = cr * pr - ci * pi + dr * qr - di * qi
                im[i1] = cr * pi + ci * pr + dr * qi + di * qr
        return
    for base in range(0, dim, 2 * stride):
        mid = base + stride
        end = mid + stride
        _rot_halves(re[base:mid], im[base:mid], re[mid:end], im[mid:end],
                    ar, ai, br, bi, cr, ci, dr, di)


@njit(cache=True)
def apply_cx(re, im, c, t):
    cbit = 1 << c
    tbit = 1 << t
    for i in range(re.shape[0]):
        if (i & cbit) and not (i & tbit):
            j = i | tbit
            re[i], re[j] = re[j], re[i]
            im[i], im[j] = im[j], im[i]


@njit(cache=True)
def apply_ladder(re, im, out_re, out_im, cmask):
    """CX from every bit in ``cmask`` onto the next-higher bit, as one permutation.

    Pairs must be disjoint; the permutation is an involution.
    """
    for i in range(re.shape[0]):
        j = i ^ ((i & cmask) << 1)
        out_re[j] = re[i]
        out_im[j] = im[i]


@njit(fastmath=True, cache=True)
def expectation(re, im, table):
    acc = 0.0
    for i in range(re.shape[0]):
        acc += (re[i] * re[i] + im[i] * im[i]) * table[i]
    return acc


@njit(fastmath=True, cache=True)
def _adjoint_halves(pr0, pi0, pr1, pi1, lr0, li0, lr1, li1,
                    ar, ai, br, bi, cr, ci, dr, di):
    gy = 0.0
    gz = 0.0
    for k in range(pr0.shape[0]):
        p0r = pr0[k]
        p0i = pi0[k]
        p1r = pr1[k]
        p1i = pi1[k]
        l0r = lr0[k]
        l0i = li0[k]
        l1r = lr1[k]
        l1i = li1[k]
        # Im <l|Y|p> = Re(conj(l1) p0) - Re(conj(l0) p1)
        gy += (l1r * p0r + l1i * p0i) - (l0r * p1r + l0i * p1i)
        # un-apply U: multiply by U^dagger = [[conj a, conj c], [conj b, conj d]]
        q0r = ar * p0r + ai * p0i + cr * p1r + ci * p1i
        q0i = ar * p0i - ai * p0r + cr * p1i - ci * p1r
        q1r = br * p0r + bi * p0i + dr * p1r + di * p1i
        q1i = br * p0i - bi * p0r + dr * p1i - di * p1r
        m0r = ar * l0r + ai * l0i + cr * l1r + ci * l1i
        m0i = ar * l0i - ai * l0r + cr * l1i - ci * l1r
        m1r = br * l0r + bi * l0i + dr * l1r + di * l1i
        m1i = br * l0i - bi * l0r + dr * l1i - di * l1r
        pr0[k] = q0r
        pi0[k] = q0i
        pr1[k] = q1r
        pi1[k] = q1i
        lr0[k] = m0r
        li0[k] = m0i
        lr1[k] = m1r
        li1[k] = m1i
        # Im <m|Z|q> = Im(conj(m0) q0) - Im(conj(m1) q1)
        gz += (m0r * q0i - m0i * q0r) - (m1r * q1i - m1i * q1r)
    return gy, gz


@njit(fastmath=True, cache=True, inline="always")
def _adjoint_pair(pr, pi, lr, li, i0, i1, ar, ai, br, bi, cr, ci, dr, di):
    p0r = pr[i0]
    p0i = pi[i0]
    p1r = pr[i1]
    p1i = pi[i1]
    l0r = lr[i0]
    l0i = li[i0]
    l1r = lr[i1]
    l1i = li[i1]
    gy = (l1r * p0r + l1i * p0i) - (l0r * p1r + l0i * p1i)
    q0r = ar * p0r + ai * p0i + cr * p1r + ci * p1i
    q0i = ar * p0i - ai * p0r + cr * p1i - ci * p1r
    q1r = br * p0r + bi * p0i + dr * p1r + di * p1i
    q1i = br * p0i - bi * p0r + dr * p1i - di * p1r
    m0r = ar * l0r + ai * l0i + cr * l1r + ci * l1i
    m0i = ar * l0i - ai * l0r + cr * l1i - ci * l1r
    m1r = br * l0r + bi * l0i + dr * l1r + di * l1i
    m1i = br * l0i - bi * l0r + dr * l1i - di * l1r
    pr[i0] = q0r
    pi[i0] = q0i
    pr[i1] = q1r
    pi[i1] = q1i
    lr[i0] = m0r
    li[i0] = m0i
    lr[i1] = m1r
    li[i1] = m1i
    gz = (m0r * q0i - m0i * q0r) - (m1r * q1i - m1i * q1r)
    return gy, gz


@njit(fastmath=True, cache=True)
def adjoint_rotation(pr, pi, lr, li, q, u00, u01, u10, u11):
    """Backward step through ``U = RY(a) RZ(b)`` on bit ``q``.

    On entry ``p`` is the state just after U and ``l`` the back-propagated
    cost vector at the same point. Returns ``(dE/da, dE/db)`` and leaves both
    un-rotated to the point just before U.
    """
    ar, ai, br, bi = u00.real, u00.imag, u01.real, u01.imag
    cr, ci, dr, di = u10.real, u10.imag, u11.real, u11.imag
    stride = 1 << q
    dim = pr.shape[0]
    gy = 0.0
    gz = 0.0
    if stride < _SMALL:
        for base in range(0, dim, 2 * stride):
            for i0 in range(base, base + stride):
                i1 = i0 + stride
                y, z = _adjoint_pair(pr, pi, lr, li, i0, i1, ar, ai, br, bi, cr, ci, dr, di)
                gy += y
                gz += z
        return gy, gz
    for base in range(0, dim, 2 * stride):
        mid = base + stride
        end = mid + stride
        y, z = _adjoint_halves(pr[base:mid], pi[base:mid], pr[mid:end], pi[mid:end],
                               lr[base:mid], li[base:mid], lr[mid:end], li[mid:end],
                               ar, ai, br, bi, cr, ci, dr, di)
        gy += y
        gz += z
    return gy, gz
