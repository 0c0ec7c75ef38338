"""Dense complex Hermitian linear algebra.

Matrices are plain ``numpy.ndarray`` values (complex128, square); the
functions here validate Hermitian structure instead of wrapping arrays in a
class.  Eigenvalues of a :class:`Spectrum` are sorted descending and its
eigenvectors are complex-orthonormal columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-8          # relative lambda_min tolerance for "is PSD"
RANK_TOL = 1e-5         # relative eigenvalue cutoff for numeric rank
RANK_ABS = 1e-12


class ValidationError(ValueError):
    """Raised when an input violates a structural contract."""


def as_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate and return ``h`` as a complex Hermitian array.

    Asymmetry beyond ``tol`` (relative to the matrix scale) is an error;
    below it, the Hermitian part is returned so downstream math sees an
    exactly Hermitian matrix.
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {h.shape}")
    if h.shape[0] < 1:
        raise ValidationError("matrix dimension must be >= 1")
    scale = max(1.0, float(np.abs(h).max(initial=0.0)))
    asym = float(np.abs(h - h.conj().T).max(initial=0.0))
    if asym > tol * scale:
        raise ValidationError(f"matrix is not Hermitian (asymmetry {asym:.3e})")
    return (h + h.conj().T) / 2.0


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues (descending) and matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


def _phase_fix(u: np.ndarray) -> np.ndarray:
    """Rotate each eigenvector so its largest-magnitude entry is real >= 0."""
    u = u.copy()
    for j in range(u.shape[1]):
        k = int(np.argmax(np.abs(u[:, j])))
        piv = u[k, j]
        if abs(piv) > 0:
            u[:, j] *= piv.conjugate() / abs(piv)
    return u


def eig_hermitian(h: np.ndarray) -> Spectrum:
    """Full eigendecomposition of a Hermitian matrix.

    Deterministic for a fixed input: the backend solve is deterministic and
    each eigenvector's phase gauge is fixed afterwards.
    """
    h = as_hermitian(h)
    w, u = _kernels.eigh_herm(h)
    order = np.argsort(-w, kind="stable")
    return Spectrum(np.asarray(w)[order], _phase_fix(np.asarray(u)[:, order]))


def trace_product(h1: np.ndarray, h2: np.ndarray) -> float:
    """tr(H1 H2) for Hermitian H1, H2; guaranteed real."""
    h1 = as_hermitian(h1)
    h2 = as_hermitian(h2)
    if h1.shape != h2.shape:
        raise ValidationError(f"dimension mismatch: {h1.shape} vs {h2.shape}")
    # H2[j, i] = conj(H2[i, j]) turns the trace into an elementwise product
    return float(np.real(np.sum(h1 * h2.conj())))


def min_eigenvalue(h: np.ndarray) -> float:
    """Smallest eigenvalue of a Hermitian matrix."""
    h = as_hermitian(h)
    w, _ = _kernels.eigh_herm(h)
    return float(np.min(w))


def is_psd(h: np.ndarray, tol: float = PSD_TOL) -> bool:
    """PSD test: lambda_min >= -tol * (1 + ||H||_2)."""
    h = as_hermitian(h)
    w, _ = _kernels.eigh_herm(h)
    norm2 = float(np.max(np.abs(w), initial=0.0))
    return float(np.min(w)) >= -tol * (1.0 + norm2)


def numeric_rank(spectrum: Spectrum, rank_tol: float = RANK_TOL) -> int:
    """Count of eigenvalues above ``rank_tol * max(rho_1, RANK_ABS)``.

    Intended for spectra of (numerically) PSD matrices; the zero matrix has
    rank 0.
    """
    w = spectrum.eigenvalues
    if len(w) == 0:
        return 0
    top = max(float(w[0]), RANK_ABS)
    return int(np.sum(w > rank_tol * top))


def real_embedding(h: np.ndarray) -> np.ndarray:
    """Map a Hermitian H to the real symmetric [[Re H, -Im H], [Im H, Re H]].

    The embedding is linear, sends PSD to PSD, doubles every eigenvalue's
    multiplicity, and doubles trace products:
    tr(embed(H1) embed(H2)) = 2 tr(H1 H2).
    """
    h = as_hermitian(h)
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def from_real_embedding(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`real_embedding` with block-symmetry averaging.

    A general real symmetric 2n x 2n matrix is first averaged over the
    embedding's structure group ((A, B) -> ((A + A^T)/2, (B - B^T)/2)), which
    exactly restores Hermitian structure for matrices coming from a solver.
    """
    x = np.asarray(x, dtype=np.float64)
    n2 = x.shape[0]
    if n2 % 2 != 0:
        raise ValidationError("embedded matrix must have even dimension")
    n = n2 // 2
    a = (x[:n, :n] + x[n:, n:]) / 2.0
    b = (x[n:, :n] - x[:n, n:]) / 2.0
    re = (a + a.T) / 2.0
    im = (b - b.T) / 2.0
    return re + 1j * im
