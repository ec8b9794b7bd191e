"""Dense complex linear algebra primitives.

Matrices are plain ``numpy`` arrays of dtype ``complex128``; vectors are 1-d
arrays.  Inner products are linear in the first argument,
``inner(x, y) = sum x_i * conj(y_i)``, so ``inner(x, y) == np.vdot(y, x)``.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, DegeneracyError, InvalidInputError, StructureError

KRON_DIM_CAP = 16384
DEPENDENCE_TOL = 1e-8
RANK_TOL = 1e-10
ZERO_TOL = 1e-14
PHASE_TOL = 1e-12


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    A = np.asarray(M, dtype=np.complex128)
    if A.ndim != 2 or A.size == 0:
        raise InvalidInputError(f"{name} must be a nonempty 2-d array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return A


def as_vector(v, name: str = "vector") -> np.ndarray:
    x = np.asarray(v, dtype=np.complex128)
    if x.ndim != 1 or x.size == 0:
        raise InvalidInputError(f"{name} must be a nonempty 1-d array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return x


def inner(x, y) -> complex:
    """<x, y>, conjugate-linear in the second slot."""
    return complex(np.vdot(y, x))


def outer(v, f) -> np.ndarray:
    """The rank-one operator v f*."""
    return np.outer(v, np.conj(f))


def operator_norm(M) -> float:
    """Largest singular value.

    Full LAPACK SVD (no iteration, no random start), so the result is a
    deterministic function of the input for a fixed build.
    """
    A = as_matrix(M)
    return float(np.linalg.svd(A, compute_uv=False)[0])


def unitarity_residual(U) -> float:
    """max(||U*U - I||, ||UU* - I||)."""
    U = as_matrix(U)
    if U.shape[0] != U.shape[1]:
        raise InvalidInputError("unitarity check needs a square matrix")
    eye = np.eye(U.shape[0])
    return max(operator_norm(U.conj().T @ U - eye), operator_norm(U @ U.conj().T - eye))


def isometry_residual(E) -> float:
    E = as_matrix(E)
    return operator_norm(E.conj().T @ E - np.eye(E.shape[1]))


def commutation_residual(A, B) -> float:
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"commutator needs square matrices of equal size, got {A.shape} and {B.shape}")
    return operator_norm(A @ B - B @ A)


def gram_schmidt(vectors: Sequence, tol: float = DEPENDENCE_TOL) -> list[np.ndarray]:
    """Modified Gram-Schmidt with one re-orthogonalization pass.

    The k-th output lies in the span of the first k inputs and has a real
    positive inner product with the k-th input.  Raises ``DegeneracyError``
    when the residual of an input after projection drops below ``tol`` times
    its norm.
    """
    vs = [as_vector(v, f"vector {i}") for i, v in enumerate(vectors)]
    if not vs:
        raise InvalidInputError("gram_schmidt needs at least one vector")
    dim = vs[0].size
    basis: list[np.ndarray] = []
    for idx, v in enumerate(vs):
        if v.size != dim:
            raise InvalidInputError(f"vector {idx} has dimension {v.size}, expected {dim}")
        scale = np.linalg.norm(v)
        w = v.copy()
        for _ in range(2):
            for q in basis:
                w = w - np.vdot(q, w) * q
        r = np.linalg.norm(w)
        if scale == 0.0 or r < tol * scale:
            raise DegeneracyError(
                f"vector {idx} is numerically dependent on its predecessors "
                f"(residual {r:.3e}, norm {scale:.3e})",
                index=idx,
            )
        basis.append(w / r)
    return basis


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-like unitary: Gram-Schmidt of complex Gaussian columns."""
    cols = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return np.column_stack(gram_schmidt(list(cols.T)))


def kronecker(A, B, cap: int = KRON_DIM_CAP) -> np.ndarray:
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    rows, cols = A.shape[0] * B.shape[0], A.shape[1] * B.shape[1]
    if max(rows, cols) > cap:
        raise CapacityError(f"Kronecker product of size {rows}x{cols} exceeds the cap {cap}")
    return np.kron(A, B)


def kron_all(factors: Iterable, cap: int = KRON_DIM_CAP) -> np.ndarray:
    out = None
    for F in factors:
        out = as_matrix(F) if out is None else kronecker(out, F, cap=cap)
    if out is None:
        raise InvalidInputError("kron_all needs at least one factor")
    return out


def cyclic_shift(N: int) -> np.ndarray:
    """N x N permutation with C e_j = e_{j+1 mod N}."""
    if int(N) != N or N < 2:
        raise InvalidInputError(f"cyclic shift needs N >= 2, got {N}")
    N = int(N)
    C = np.zeros((N, N), dtype=np.complex128)
    C[(np.arange(N) + 1) % N, np.arange(N)] = 1.0
    return C


def fix_phase(f, tol: float = PHASE_TOL) -> complex:
    """Unimodular w such that the first entry of f above tol, times conj(w), is real positive."""
    f = np.asarray(f)
    big = np.nonzero(np.abs(f) > tol)[0]
    if big.size == 0:
        return 1.0 + 0j
    z = f[big[0]]
    return complex(z / abs(z))


def rank_one_factor(A, rank_tol: float = RANK_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Factor a numerically rank-one matrix as A = v f* with ||f|| = 1.

    The first entry of f exceeding 1e-12 in modulus is real and positive,
    which pins down the otherwise free unimodular scaling.
    """
    A = as_matrix(A)
    U, s, Vh = np.linalg.svd(A)
    s1 = float(s[1]) if s.size > 1 else 0.0
    if s[0] <= ZERO_TOL:
        raise StructureError(f"matrix is zero (singular values {s[0]:.3e}, {s1:.3e}); rank is not 1")
    if s1 > rank_tol * s[0]:
        raise StructureError(f"matrix does not have rank one: singular values {s[0]:.6e}, {s1:.6e}")
    f = Vh[0].conj()
    f = f * np.conj(fix_phase(f))
    v = A @ f
    return v, f


# -- serialization ----------------------------------------------------------

def matrix_to_dict(M) -> dict:
    A = as_matrix(M)
    return {
        "rows": int(A.shape[0]),
        "cols": int(A.shape[1]),
        "re": A.real.tolist(),
        "im": A.imag.tolist(),
    }


def matrix_from_dict(obj: dict) -> np.ndarray:
    try:
        rows, cols = int(obj["rows"]), int(obj["cols"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros((rows, cols))), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed matrix object: {exc}") from exc
    if re.shape != (rows, cols) or im.shape != (rows, cols):
        raise InvalidInputError(f"matrix object declares {rows}x{cols} but carries {re.shape} / {im.shape}")
    return as_matrix(re + 1j * im)


def vector_to_dict(v) -> dict:
    x = as_vector(v)
    return {"re": x.real.tolist(), "im": x.imag.tolist()}


def vector_from_dict(obj: dict) -> np.ndarray:
    return as_vector(np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float))
