# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: cyclic Jacobi eigensolvers and Schur-matrix assembly.

Same contracts as treeqcqp._kernels.pure; eigenvalues ascending.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, hypot, sqrt

cnp.import_array()


def eigh_sym(a):
    """Eigendecomposition of a real symmetric matrix via cyclic Jacobi."""
    cdef cnp.ndarray[double, ndim=2] A = np.array(a, dtype=np.float64, order="C")
    cdef Py_ssize_t n = A.shape[0]
    cdef cnp.ndarray[double, ndim=2] V = np.eye(n)
    if n == 1:
        return np.array([A[0, 0]]), V

    cdef double[:, :] Am = A
    cdef double[:, :] Vm = V
    cdef Py_ssize_t p, q, r, sweep
    cdef double off, scale, thresh, apq, app, aqq, tau, t, c, s, akp, akq
    cdef double tol = 1e-15

    scale = 0.0
    for p in range(n):
        for q in range(n):
            scale += Am[p, q] * Am[p, q]
    scale = sqrt(scale)
    if scale == 0.0:
        return np.zeros(n), V

    for sweep in range(64):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += Am[p, q] * Am[p, q]
        off = sqrt(2.0 * off)
        if off <= tol * scale:
            break
        # first sweeps: skip entries far below the current off-norm
        thresh = 0.0
        if sweep < 3:
            thresh = 0.2 * off / (n * n)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = Am[p, q]
                if fabs(apq) <= thresh or apq == 0.0:
                    continue
                app = Am[p, p]
                aqq = Am[q, q]
                tau = (aqq - app) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + sqrt(1.0 + tau * tau))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                for r in range(n):
                    akp = Am[r, p]
                    akq = Am[r, q]
                    Am[r, p] = c * akp - s * akq
                    Am[r, q] = s * akp + c * akq
                for r in range(n):
                    akp = Am[p, r]
                    akq = Am[q, r]
                    Am[p, r] = c * akp - s * akq
                    Am[q, r] = s * akp + c * akq
                Am[p, q] = 0.0
                Am[q, p] = 0.0
                for r in range(n):
                    akp = Vm[r, p]
                    akq = Vm[r, q]
                    Vm[r, p] = c * akp - s * akq
                    Vm[r, q] = s * akp + c * akq

    w = np.empty(n)
    cdef double[:] wm = w
    for p in range(n):
        wm[p] = Am[p, p]
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def eigh_herm(h):
    """Eigendecomposition of a complex Hermitian matrix via cyclic Jacobi.

    The rotation absorbs the phase of the pivot entry, then applies the real
    Jacobi angle, so eigenvectors stay unitary throughout.
    """
    cdef cnp.ndarray[complex, ndim=2] H = np.array(h, dtype=np.complex128, order="C")
    cdef Py_ssize_t n = H.shape[0]
    cdef cnp.ndarray[complex, ndim=2] U = np.eye(n, dtype=np.complex128)
    if n == 1:
        return np.array([H[0, 0].real]), U

    cdef complex[:, :] Hm = H
    cdef complex[:, :] Um = U
    cdef Py_ssize_t p, q, r, sweep
    cdef double off, scale, thresh, abspq, app, aqq, tau, t, c, s
    cdef complex hpq
    cdef double scr, sci, ar, ai, dr, di
    cdef double tol = 1e-15

    scale = 0.0
    for p in range(n):
        for q in range(n):
            scale += Hm[p, q].real ** 2 + Hm[p, q].imag ** 2
    scale = sqrt(scale)
    if scale == 0.0:
        return np.zeros(n), U

    for sweep in range(64):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += Hm[p, q].real ** 2 + Hm[p, q].imag ** 2
        off = sqrt(2.0 * off)
        if off <= tol * scale:
            break
        thresh = 0.0
        if sweep < 3:
            thresh = 0.2 * off / (n * n)
        for p in range(n - 1):
            for q in range(p + 1, n):
                hpq = Hm[p, q]
                abspq = hypot(hpq.real, hpq.imag)
                if abspq <= thresh or abspq == 0.0:
                    continue
                app = Hm[p, p].real
                aqq = Hm[q, q].real
                # this unitary zeroes H[p,q] when cot(2 theta) = (app-aqq)/(2|h|)
                tau = (app - aqq) / (2.0 * abspq)
                if tau >= 0.0:
                    t = 1.0 / (tau + sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + sqrt(1.0 + tau * tau))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                # columns: (col_p, col_q) <- (c*col_p + conj(sc)*col_q,
                #                             -sc*col_p + c*col_q), sc = s*phase
                scr = s * hpq.real / abspq
                sci = s * hpq.imag / abspq
                for r in range(n):
                    ar = Hm[r, p].real; ai = Hm[r, p].imag
                    dr = Hm[r, q].real; di = Hm[r, q].imag
                    Hm[r, p] = (c * ar + scr * dr + sci * di) + 1j * (c * ai + scr * di - sci * dr)
                    Hm[r, q] = (c * dr - scr * ar + sci * ai) + 1j * (c * di - scr * ai - sci * ar)
                for r in range(n):
                    ar = Hm[p, r].real; ai = Hm[p, r].imag
                    dr = Hm[q, r].real; di = Hm[q, r].imag
                    Hm[p, r] = (c * ar + scr * dr - sci * di) + 1j * (c * ai + scr * di + sci * dr)
                    Hm[q, r] = (c * dr - scr * ar - sci * ai) + 1j * (c * di - scr * ai + sci * ar)
                Hm[p, q] = 0.0
                Hm[q, p] = 0.0
                Hm[p, p] = Hm[p, p].real
                Hm[q, q] = Hm[q, q].real
                for r in range(n):
                    ar = Um[r, p].real; ai = Um[r, p].imag
                    dr = Um[r, q].real; di = Um[r, q].imag
                    Um[r, p] = (c * ar + scr * dr + sci * di) + 1j * (c * ai + scr * di - sci * dr)
                    Um[r, q] = (c * dr - scr * ar + sci * ai) + 1j * (c * di - scr * ai - sci * ar)

    w = np.empty(n)
    cdef double[:] wm = w
    for p in range(n):
        wm[p] = Hm[p, p].real
    order = np.argsort(w, kind="stable")
    return w[order], U[:, order]


def schur_matrix(supports, sup_off, blocks, blk_off, scaling):
    """M[p, q] = tr(A_p R A_q R) over support-compressed symmetric A's.

    Every term reduces to tr(B_p R[I_p, I_q] B_q R[I_q, I_p]), which only
    touches support-sized blocks of R, so the pair loop never sees N x N data.
    """
    cdef cnp.ndarray[cnp.int64_t, ndim=1] sup = np.ascontiguousarray(supports, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] soff = np.ascontiguousarray(sup_off, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] blk = np.ascontiguousarray(blocks, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] boff = np.ascontiguousarray(blk_off, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=2] R = np.ascontiguousarray(scaling, dtype=np.float64)
    cdef Py_ssize_t m = soff.shape[0] - 1
    cdef Py_ssize_t n = R.shape[0]
    cdef cnp.ndarray[double, ndim=2] M = np.zeros((m, m))
    cdef double[:, :] Rm = R
    cdef double[:, :] Mm = M
    cdef cnp.int64_t[:] supm = sup
    cdef cnp.int64_t[:] soffm = soff
    cdef double[:] blkm = blk
    cdef cnp.int64_t[:] boffm = boff

    cdef Py_ssize_t cmax = 0, c
    for c in range(m):
        if soffm[c + 1] - soffm[c] > cmax:
            cmax = soffm[c + 1] - soffm[c]
    cdef cnp.ndarray[double, ndim=1] t1buf = np.empty(cmax * cmax)
    cdef cnp.ndarray[double, ndim=1] t2buf = np.empty(cmax * cmax)
    cdef double[:] T1 = t1buf
    cdef double[:] T2 = t2buf

    cdef Py_ssize_t p, q, a, b, d, cp, cq, s0p, s0q, b0p, b0q
    cdef double acc

    for p in range(m):
        s0p = soffm[p]
        cp = soffm[p + 1] - s0p
        b0p = boffm[p]
        for q in range(p, m):
            s0q = soffm[q]
            cq = soffm[q + 1] - s0q
            b0q = boffm[q]
            # T1 = B_p * R[I_p, I_q]  (cp x cq)
            for a in range(cp):
                for d in range(cq):
                    acc = 0.0
                    for b in range(cp):
                        acc += blkm[b0p + a * cp + b] * Rm[supm[s0p + b], supm[s0q + d]]
                    T1[a * cq + d] = acc
            # T2 = T1 * B_q  (cp x cq)
            for a in range(cp):
                for d in range(cq):
                    acc = 0.0
                    for b in range(cq):
                        acc += T1[a * cq + b] * blkm[b0q + b * cq + d]
                    T2[a * cq + d] = acc
            # tr(T2 * R[I_q, I_p])
            acc = 0.0
            for a in range(cp):
                for d in range(cq):
                    acc += T2[a * cq + d] * Rm[supm[s0q + d], supm[s0p + a]]
            Mm[p, q] = acc
            Mm[q, p] = acc
    return M
