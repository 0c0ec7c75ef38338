"""Pure numpy kernel implementations.

These back the same three entry points as the compiled extension:

* ``eigh_sym``  - full eigendecomposition of a real symmetric matrix,
* ``eigh_herm`` - full eigendecomposition of a complex Hermitian matrix,
* ``schur_matrix`` - the interior-point Schur matrix M[p, q] = tr(A_p R A_q R)
  for symmetric A_p with small supports.

Eigendecompositions go through LAPACK here; the compiled backend uses cyclic
Jacobi sweeps instead (self-contained, better for many tiny matrices).
Eigenvalues are returned in ascending order in both backends.
"""

from __future__ import annotations

import numpy as np


def eigh_sym(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(a)
    return w, v


def eigh_herm(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, u = np.linalg.eigh(h)
    return w, u


def schur_matrix(
    supports: np.ndarray,
    sup_off: np.ndarray,
    blocks: np.ndarray,
    blk_off: np.ndarray,
    scaling: np.ndarray,
) -> np.ndarray:
    """Assemble M[p, q] = tr(A_p R A_q R) with R = ``scaling``.

    Constraint p is stored as a dense block ``B_p`` over the index support
    ``I_p`` (so A_p = E B_p E^T with E the selection onto I_p).  Strategy:
    compute the congruence U_p = R A_p R restricted through the support
    (cost c * N^2 per row), then contract every U_p against the sparse
    entries of each A_q in one gather + segment reduction.
    """
    m = len(sup_off) - 1
    n = scaling.shape[0]
    M = np.empty((m, m))
    if m == 0:
        return M

    # flat (row, col, value) triplets of every A_q, plus per-q boundaries
    lin_idx = []
    vals = []
    bounds = np.empty(m + 1, dtype=np.intp)
    bounds[0] = 0
    for q in range(m):
        iq = supports[sup_off[q]:sup_off[q + 1]]
        c = len(iq)
        bq = blocks[blk_off[q]:blk_off[q + 1]].reshape(c, c)
        lin_idx.append((iq[:, None] * n + iq[None, :]).ravel())
        vals.append(bq.ravel())
        bounds[q + 1] = bounds[q] + c * c
    lin_idx = np.concatenate(lin_idx)
    vals = np.concatenate(vals)

    for p in range(m):
        ip = supports[sup_off[p]:sup_off[p + 1]]
        c = len(ip)
        bp = blocks[blk_off[p]:blk_off[p + 1]].reshape(c, c)
        rp = scaling[:, ip]                      # (N, c)
        up = (rp @ bp) @ rp.T                    # R A_p R, (N, N)
        gathered = up.ravel()[lin_idx] * vals
        M[p, :] = np.add.reduceat(gathered, bounds[:-1])
    return M
