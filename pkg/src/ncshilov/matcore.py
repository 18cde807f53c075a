"""Dense complex matrix kernel.

Everything downstream (algebra closures, the conic solver, the envelope
pipeline) reduces to a handful of primitives on complex matrices: Hermitian
eigendecomposition, operator norms, PSD tests with witnesses, the
Hilbert-Schmidt geometry used to orthonormalize bases of matrix subspaces,
and amplification of space elements to matrix levels.

Matrices are plain ``numpy.ndarray`` values with dtype complex128.  A
"CMatrix" is any finite 2-d complex array; a "HermMatrix" is a square one
that has been symmetrized through :func:`hermitize`.  All tolerances are
relative to the matrix scale with an absolute floor of 1e-12.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ncshilov.errors import NonFinite, RankAmbiguous, ShapeMismatch

ABS_FLOOR = 1e-12

# Numerical-rank policy for span closures: singular values below CUTOFF
# (relative to the largest) are treated as zero, but values inside the
# ambiguity band are refused rather than guessed.
RANK_CUTOFF = 1e-8
RANK_BAND = (1e-10, 1e-6)


def as_cmatrix(a) -> np.ndarray:
    """Validate and coerce to a finite 2-d complex128 array."""
    m = np.array(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ShapeMismatch(f"expected a 2-d matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise NonFinite("matrix has NaN or Inf entries")
    return m


def hermitize(a, rtol: float = 1e-12) -> np.ndarray:
    """Validate Hermitian-ness and return the exactly symmetrized matrix.

    The deviation ||M - M*|| must not exceed ``rtol * ||M||`` (with the
    absolute floor); the returned matrix is (M + M*)/2.
    """
    m = as_cmatrix(a)
    if m.shape[0] != m.shape[1]:
        raise ShapeMismatch(f"Hermitian matrix must be square, got {m.shape}")
    scale = max(np.abs(m).max(initial=0.0), 1.0)
    dev = np.abs(m - m.conj().T).max(initial=0.0)
    if dev > rtol * scale + ABS_FLOOR:
        raise ShapeMismatch(
            f"matrix is not Hermitian: deviation {dev:.3e} exceeds {rtol:.1e} * scale"
        )
    return 0.5 * (m + m.conj().T)


def herm_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns ``(w, u)`` with eigenvalues ``w`` sorted descending and unitary
    ``u`` whose columns are the matching eigenvectors, so that
    ``u @ diag(w) @ u.conj().T`` reconstructs the input.
    """
    h = hermitize(m, rtol=1e-10)
    w, u = np.linalg.eigh(h)
    return w[::-1].copy(), u[:, ::-1].copy()


def op_norm(m) -> float:
    """Largest singular value."""
    a = as_cmatrix(m)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


@dataclass(frozen=True)
class PsdResult:
    """Outcome of a PSD test: ``positive`` or a witness vector with
    ``witness* M witness = witness_value < -tol``."""

    positive: bool
    min_eig: float
    witness: np.ndarray | None = None
    witness_value: float | None = None


def psd_check(m, tol: float = 1e-9) -> PsdResult:
    """Decide M >= 0 up to ``tol``: positive iff min eigenvalue >= -tol.

    When indefinite, the eigenvector of the most negative eigenvalue is
    returned as a witness.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    w, u = herm_eig(m)
    mn = float(w[-1])
    if mn >= -tol:
        return PsdResult(positive=True, min_eig=mn)
    xi = u[:, -1]
    val = float(np.real(xi.conj() @ np.asarray(m, dtype=np.complex128) @ xi))
    return PsdResult(positive=False, min_eig=mn, witness=xi, witness_value=val)


def hs_inner(a, b) -> complex:
    """Hilbert-Schmidt inner product trace(b* a)."""
    ma, mb = as_cmatrix(a), as_cmatrix(b)
    if ma.shape != mb.shape:
        raise ShapeMismatch(f"shape mismatch {ma.shape} vs {mb.shape}")
    return complex(np.sum(mb.conj() * ma))


def hs_norm(a) -> float:
    return float(np.linalg.norm(as_cmatrix(a)))


def amplify(coeffs, basis) -> np.ndarray:
    """Assemble a level-k element of the space spanned by ``basis``.

    ``coeffs`` has shape (k, k, d); the result is the kn x kn matrix whose
    (i, j) block is sum_t coeffs[i, j, t] * basis[t].
    """
    c = np.asarray(coeffs, dtype=np.complex128)
    stack = np.asarray(basis, dtype=np.complex128)
    if stack.ndim == 2:
        stack = stack[None]
    if c.ndim != 3 or c.shape[0] != c.shape[1]:
        raise ShapeMismatch(f"coeffs must have shape (k, k, d), got {c.shape}")
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise ShapeMismatch("basis elements must be square and share shape")
    if c.shape[2] != stack.shape[0]:
        raise ShapeMismatch(
            f"coefficient depth {c.shape[2]} does not match basis size {stack.shape[0]}"
        )
    k = c.shape[0]
    n = stack.shape[1]
    blocks = np.einsum("ijt,tab->iajb", c, stack)
    return blocks.reshape(k * n, k * n)


def block_entry(big, i, j, n) -> np.ndarray:
    """Extract the (i, j) n x n block of a level-k matrix."""
    return np.array(big[i * n : (i + 1) * n, j * n : (j + 1) * n])


# ---------------------------------------------------------------------------
# Hilbert-Schmidt geometry of matrix subspaces
# ---------------------------------------------------------------------------


def orthonormalize(stack, rank_band: tuple[float, float] = RANK_BAND):
    """Orthonormal (HS) basis of the complex span of a stack of matrices.

    Returns ``(basis, svals)`` where ``basis`` is a (r, p, q) stack with
    HS-orthonormal slices spanning the same space.  Raises
    :class:`RankAmbiguous` when any singular value falls inside the
    ambiguity band relative to the largest: downstream closure dimensions
    must be crisp, so near-threshold ranks are refused, not guessed.
    """
    s = np.asarray(stack, dtype=np.complex128)
    if s.ndim != 3:
        raise ShapeMismatch("expected a stack of matrices with shape (d, p, q)")
    d, p, q = s.shape
    flat = s.reshape(d, p * q)
    svals = np.linalg.svd(flat, compute_uv=False) if d else np.zeros(0)
    top = svals[0] if len(svals) and svals[0] > 0 else 0.0
    if top == 0.0:
        return np.zeros((0, p, q), dtype=np.complex128), svals
    rel = svals / top
    lo, hi = rank_band
    if np.any((rel > lo) & (rel < hi)):
        raise RankAmbiguous(
            f"singular value ratios {rel[(rel > lo) & (rel < hi)]} fall in the band {rank_band}"
        )
    rank = int(np.sum(rel >= hi))
    _, _, vh = np.linalg.svd(flat, full_matrices=False)
    return vh[:rank].reshape(rank, p, q).copy(), svals


def orthonormalize_real(stack, rank_band: tuple[float, float] = RANK_BAND):
    """Orthonormal basis of the REAL span of a stack of matrices.

    Works in the realified coordinates (Re, Im stacked), so the output
    slices are real-linear combinations of the inputs; used for Hermitian
    (selfadjoint-part) bases where only real coefficients are allowed.
    """
    s = np.asarray(stack, dtype=np.complex128)
    if s.ndim != 3:
        raise ShapeMismatch("expected a stack of matrices with shape (d, p, q)")
    d, p, q = s.shape
    flat = np.concatenate([s.reshape(d, p * q).real, s.reshape(d, p * q).imag], axis=1)
    svals = np.linalg.svd(flat, compute_uv=False) if d else np.zeros(0)
    top = svals[0] if len(svals) and svals[0] > 0 else 0.0
    if top == 0.0:
        return np.zeros((0, p, q), dtype=np.complex128), svals
    rel = svals / top
    lo, hi = rank_band
    if np.any((rel > lo) & (rel < hi)):
        raise RankAmbiguous(
            f"singular value ratios {rel[(rel > lo) & (rel < hi)]} fall in the band {rank_band}"
        )
    rank = int(np.sum(rel >= hi))
    _, _, vh = np.linalg.svd(flat, full_matrices=False)
    rows = vh[:rank]
    out = rows[:, : p * q] + 1j * rows[:, p * q :]
    return out.reshape(rank, p, q).copy(), svals


def project_coeffs(stack, m) -> np.ndarray:
    """Coefficients of ``m`` against an HS-orthonormal stack."""
    s = np.asarray(stack, dtype=np.complex128)
    return np.einsum("tab,ab->t", s.conj(), np.asarray(m, dtype=np.complex128))


def project_onto_span(stack, m) -> np.ndarray:
    """HS-orthogonal projection of ``m`` onto the span of an ON stack."""
    c = project_coeffs(stack, m)
    return np.einsum("t,tab->ab", c, np.asarray(stack, dtype=np.complex128))


def span_residual(stack, m) -> float:
    """Distance (HS) from ``m`` to the span of an ON stack, relative to ||m||."""
    mm = np.asarray(m, dtype=np.complex128)
    nm = np.linalg.norm(mm)
    if nm == 0:
        return 0.0
    return float(np.linalg.norm(mm - project_onto_span(stack, mm)) / nm)


def hermitian_part_basis(stack):
    """Real-orthonormal basis of the selfadjoint part of a *-closed span.

    From a complex ON basis of a *-closed subspace, build candidates
    (b + b*)/2 and i(b - b*)/2 and real-orthonormalize; for a genuinely
    *-closed span of complex dimension d the result has d slices.
    """
    s = np.asarray(stack, dtype=np.complex128)
    cands = np.concatenate([0.5 * (s + s.conj().transpose(0, 2, 1)),
                            0.5j * (s - s.conj().transpose(0, 2, 1))], axis=0)
    basis, _ = orthonormalize_real(cands)
    return np.ascontiguousarray(0.5 * (basis + basis.conj().transpose(0, 2, 1)))


# Real isometric vectorization of Hermitian matrices: diagonal entries,
# then sqrt(2)-scaled real and imaginary parts of the upper triangle.
@lru_cache(maxsize=None)
def _triu_cache(n):
    iu = np.triu_indices(n, k=1)
    return iu[0].copy(), iu[1].copy()


def herm_to_rvec(h) -> np.ndarray:
    m = np.asarray(h, dtype=np.complex128)
    n = m.shape[0]
    iu = _triu_cache(n)
    return np.concatenate([m.diagonal().real,
                           np.sqrt(2.0) * m[iu].real,
                           np.sqrt(2.0) * m[iu].imag])


def rvec_to_herm(v, n) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    m = np.zeros((n, n), dtype=np.complex128)
    m[np.diag_indices(n)] = v[:n]
    iu = _triu_cache(n)
    k = len(iu[0])
    upper = (v[n : n + k] + 1j * v[n + k : n + 2 * k]) / np.sqrt(2.0)
    m[iu] = upper
    m[(iu[1], iu[0])] = upper.conj()
    return m


def herm_complement(hb, n) -> list:
    """Hermitian pairing rows spanning the real orthocomplement of the span
    of ``hb`` inside the Hermitian n x n matrices."""
    rows = np.stack([herm_to_rvec(h) for h in hb]) if len(hb) else np.zeros((0, n * n))
    _, s, vh = np.linalg.svd(rows, full_matrices=True) if rows.size else (None, np.zeros(0), np.eye(n * n))
    rank = int(np.sum(s > 1e-10 * (s[0] if s.size else 1.0)))
    return [rvec_to_herm(r, n) for r in vh[rank:]]


def random_complex(rng, shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_hermitian(rng, n) -> np.ndarray:
    g = random_complex(rng, (n, n))
    return 0.5 * (g + g.conj().T)


def random_psd(rng, n) -> np.ndarray:
    g = random_complex(rng, (n, n))
    return g @ g.conj().T
