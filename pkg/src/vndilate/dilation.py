"""Commuting unitary power dilations of triples of 3x3 contractions.

Finite model
------------
The bilateral shift is replaced by the cyclic shift ``C_N``.  For unit
vectors ``v_i`` orthogonal to ``f`` the operators ``W_i = C_N (x) U_i`` on
``C^N (x) C^2`` (cell-major indexing, cell ``j`` coordinate ``r`` at
``2 j + r``) are commuting unitaries, and with ``H`` embedded as
``(cell 0, r=1) + (cell 1, r=0..1)`` the compressions ``E* W^k E`` reproduce
``A^k`` exactly for total degree at most ``N - 2``.

Norms below one are produced by corner unitaries ``M_a`` on ``C^D`` with
``(M_a^m)_{11} = a^m`` for ``m <= D - 2``; each coordinate that needs one
gets its own tensor slot, so the factors still commute.  Scalar-plus-
nilpotent coordinates are moved to the nilpotent case by a Moebius map and
moved back by applying its inverse to the finite unitaries.

Every output operator is stored as tensor factors,

    Y = scale * b_mu^{-1}(kron(factors)),   optionally adjointed,

and compressions are evaluated factor by factor, never by materializing the
(possibly huge) space.  Construction uses the joint eigenbasis of the
factors; ``verify_power_dilation`` uses the power series of ``b_mu^{-1}``
instead, so the two routes are independent.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import CapacityError, InvalidInputError, StructureError
from .linalg import (
    as_matrix,
    as_vector,
    cyclic_shift,
    gram_schmidt,
    inner,
    kron_all,
    matrix_from_dict,
    matrix_to_dict,
    operator_norm,
    unitarity_residual,
)
from .polynomials import mobius_of_matrix, multi_indices
from .tuples import NilpotentStructure, decompose_nilpotents, split_scalar_nilpotent

UNIT_TOL = 1e-10
DEPENDENT_TOL = 1e-12
CONTRACTION_TOL = 1e-10
ZERO_NILPOTENT = 1e-12
DENSE_CAP = 4096
SERIES_TAIL = 1e-18


# -- three commuting 2x2 unitaries ----------------------------------------------

@dataclass
class UnitaryTripleResult:
    U: list
    a: float | None
    b: float | None
    sigma2: complex
    sigma3: complex
    basis_rotation: np.ndarray
    frame_unitaries: list = field(default_factory=list)
    dependent: bool = False

    @property
    def U1(self):
        return self.U[0]

    @property
    def U2(self):
        return self.U[1]

    @property
    def U3(self):
        return self.U[2]


def _bloch(u) -> np.ndarray:
    """Bloch vector of a unit vector in C^2 (the rank-one projector u u* as a point of the sphere)."""
    z = np.conj(u[0]) * u[1]
    return np.array([2 * z.real, 2 * z.imag, abs(u[0]) ** 2 - abs(u[1]) ** 2])


def _from_bloch(n) -> np.ndarray:
    """A unit vector with Bloch vector n, using the better conditioned of the two standard charts."""
    if n[2] >= 0:
        u = np.array([1 + n[2], n[0] + 1j * n[1]])
    else:
        u = np.array([n[0] - 1j * n[1], 1 - n[2]])
    return u / np.linalg.norm(u)


def _phase(z: complex) -> complex:
    return z / abs(z) if z != 0 else 1.0 + 0j


def three_vector_unitaries(v1, v2, v3) -> UnitaryTripleResult:
    """Commuting unitaries U_1 = I, U_2, U_3 on C^2 with U_i v_j = U_j v_i and U_i v_1 = v_i.

    Works in the frame Q v_1 = e2.  The joint eigenvector p must satisfy
    |<p, e2>| = |<p, w2>| = |<p, w3>| with w_i = Q v_i, i.e. its Bloch vector
    is orthogonal to n(w2) - n(e2) and n(w3) - n(e2); it is taken as a null
    vector from an SVD and the eigenvalues are the phases of <w_i, p> /
    <e2, p>.  No step divides by a small quantity, so nearly dependent
    inputs are handled as accurately as generic ones.

    When U_2 is not scalar, U_3 = a0 I + b0 U_2; with sigma3 = exp(-i arg a0)
    and sigma2 = exp(i arg(b0 sigma3)) the phase-normalized frame matrices
    U_i' = sigma_i Q U_i Q* satisfy a U_1' + b U_2' = U_3' with a, b >= 0.
    """
    vs = [as_vector(v, f"v{i + 1}") for i, v in enumerate((v1, v2, v3))]
    for i, v in enumerate(vs):
        if v.size != 2 or abs(np.linalg.norm(v) - 1) > UNIT_TOL:
            raise InvalidInputError(f"v{i + 1} must be a unit vector in C^2")
    x, y = vs[0]
    Q = np.array([[y, -x], [np.conj(x), np.conj(y)]], dtype=np.complex128)
    e = np.array([0.0, 1.0], dtype=np.complex128)
    ws = [Q @ v for v in vs[1:]]
    ws = [w / np.linalg.norm(w) for w in ws]
    n0 = _bloch(e)
    rows = np.vstack([_bloch(w) - n0 for w in ws])
    _, _, Vh = np.linalg.svd(rows)
    p = _from_bloch(Vh[2] / np.linalg.norm(Vh[2]))
    Z = np.column_stack([p, [-np.conj(p[1]), np.conj(p[0])]])
    xs = Z.conj().T @ e
    eigs = []
    for w in ws:
        yw = Z.conj().T @ w
        eigs.append(np.array([_phase(yw[j] * np.conj(xs[j])) for j in range(2)]))
    eye = np.eye(2, dtype=np.complex128)
    frame = [eye] + [(Z * ev) @ Z.conj().T for ev in eigs]

    dependent = 1 - abs(inner(vs[1], vs[0])) < DEPENDENT_TOL
    a = b = None
    sigma2 = sigma3 = 1.0 + 0j
    (al, al2), (be, be2) = eigs
    if not dependent and al != al2:
        b0 = (be - be2) / (al - al2)
        a0 = be - b0 * al
        sigma3 = _phase(np.conj(a0))
        sigma2 = _phase(b0 * sigma3)
        a, b = float(abs(a0)), float(abs(b0))
    normalized = [eye, sigma2 * frame[1], sigma3 * frame[2]]
    U = [Q.conj().T @ M @ Q for M in frame]
    return UnitaryTripleResult(U, a, b, complex(sigma2), complex(sigma3), Q, normalized, dependent)


# -- corner unitaries ------------------------------------------------------------

@dataclass
class CornerUnitary:
    a: complex
    d: float
    D: int
    matrix: np.ndarray


def corner_unitary(a, D: int) -> CornerUnitary:
    """Unitary M on C^D with M e1 = a e1 + d e2, M e_j = e_{j+1}, M e_D = -d e1 + conj(a) e2."""
    a = complex(a)
    if abs(a) > 1 + 1e-12:
        raise InvalidInputError(f"corner parameter must satisfy |a| <= 1, got |a| = {abs(a)}")
    if int(D) != D or D < 3:
        raise InvalidInputError(f"corner window must be at least 3, got {D}")
    D = int(D)
    if abs(a) > 1:
        a /= abs(a)
    d = math.sqrt(max(0.0, 1.0 - abs(a) ** 2))
    M = np.zeros((D, D), dtype=np.complex128)
    M[0, 0], M[1, 0] = a, d
    for j in range(1, D - 1):
        M[j + 1, j] = 1.0
    M[0, D - 1], M[1, D - 1] = -d, np.conj(a)
    return CornerUnitary(a, d, D, M)


# -- tensor-structured operators ----------------------------------------------------

def _series_coefficients(lam: complex, power: int, length: int) -> np.ndarray:
    """Taylor coefficients of (b_lam^{-1}(x))**power, x -> (x + lam) / (1 + conj(lam) x)."""
    base = np.zeros(length, dtype=np.complex128)
    base[0] = lam
    if length > 1:
        base[1:] = (1 - abs(lam) ** 2) * (-np.conj(lam)) ** np.arange(length - 1)
    out = np.zeros(length, dtype=np.complex128)
    out[0] = 1.0
    for _ in range(power):
        out = np.convolve(out, base)[:length]
    return out


def _series_length(lam: complex, power: int) -> int:
    rho = abs(lam)
    if rho == 0 or power == 0:
        return power + 1
    extra = (math.log(SERIES_TAIL) - 2 * power * math.log(power + 10)) / math.log(rho)
    return int(min(20000, power + 1 + math.ceil(extra)))


@dataclass
class TensorUnitary:
    """scale * b_mu^{-1}(kron(factors)), adjointed when ``adjoint`` is set."""

    factors: list
    mobius: complex = 0j
    scale: complex = 1.0 + 0j
    adjoint: bool = False

    @property
    def dim(self) -> int:
        return int(np.prod([F.shape[0] for F in self.factors]))

    def dense(self, cap: int = DENSE_CAP) -> np.ndarray:
        if self.dim > cap:
            raise CapacityError(f"operator of dimension {self.dim} exceeds the dense cap {cap}")
        X = kron_all(self.factors, cap=cap)
        if self.mobius != 0:
            X = mobius_of_matrix(self.mobius, X, inverse=True)
        X = self.scale * X
        return X.conj().T if self.adjoint else X

    def dagger(self) -> "TensorUnitary":
        return TensorUnitary(self.factors, self.mobius, self.scale, not self.adjoint)

    def to_dict(self) -> dict:
        return {
            "factors": [matrix_to_dict(F) for F in self.factors],
            "mobius": [self.mobius.real, self.mobius.imag],
            "scale": [self.scale.real, self.scale.imag],
            "adjoint": self.adjoint,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TensorUnitary":
        mob = obj.get("mobius", [0.0, 0.0])
        sc = obj.get("scale", [1.0, 0.0])
        return cls([matrix_from_dict(F) for F in obj["factors"]], complex(*mob), complex(*sc),
                   bool(obj.get("adjoint", False)))


@dataclass
class DilationResult:
    unitaries: list
    embedding: list
    window: int
    scale_windows: list
    max_degree: int
    error_table: dict
    max_error: float
    unitarity_residual: float = 0.0
    commutation_residual: float = 0.0
    error_bound: float | None = None

    @property
    def space_dim(self) -> int:
        return int(np.prod([E.shape[0] for E in self.embedding]))

    @property
    def validity_window(self) -> int:
        ds = [D - 2 for D in self.scale_windows if D]
        return min([self.window - 2] + ds)

    def dense_embedding(self, cap: int = DENSE_CAP) -> np.ndarray:
        if self.space_dim > cap:
            raise CapacityError(f"space of dimension {self.space_dim} exceeds the dense cap {cap}")
        return kron_all(self.embedding, cap=cap)

    def dense_unitaries(self, cap: int = DENSE_CAP) -> list[np.ndarray]:
        return [U.dense(cap) for U in self.unitaries]

    def to_dict(self) -> dict:
        return {
            "space_dim": self.space_dim,
            "window": self.window,
            "scale_window": list(self.scale_windows),
            "max_degree": self.max_degree,
            "unitaries": [U.to_dict() for U in self.unitaries],
            "embedding": {"factors": [matrix_to_dict(E) for E in self.embedding]},
            "error_table": [{"k": list(k), "err": e} for k, e in sorted(self.error_table.items())],
            "max_error": self.max_error,
            "unitarity_residual": self.unitarity_residual,
            "commutation_residual": self.commutation_residual,
            "error_bound": self.error_bound,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DilationResult":
        emb = obj["embedding"]
        factors = emb["factors"] if isinstance(emb, dict) and "factors" in emb else [emb]
        return cls(
            unitaries=[TensorUnitary.from_dict(u) if "factors" in u else TensorUnitary([matrix_from_dict(u)])
                       for u in obj["unitaries"]],
            embedding=[matrix_from_dict(E) for E in factors],
            window=int(obj["window"]),
            scale_windows=list(obj.get("scale_window") or []),
            max_degree=int(obj["max_degree"]),
            error_table={tuple(e["k"]): float(e["err"]) for e in obj["error_table"]},
            max_error=float(obj["max_error"]),
            unitarity_residual=float(obj.get("unitarity_residual", 0.0)),
            commutation_residual=float(obj.get("commutation_residual", 0.0)),
            error_bound=obj.get("error_bound"),
        )


# -- helpers shared by the constructions ------------------------------------------------

def _perp_frame(f: np.ndarray) -> np.ndarray:
    """Columns q1, q2: orthonormal basis of f-perp, completing f with the standard vectors least aligned with it."""
    order = sorted(range(3), key=lambda j: (abs(f[j]), j))
    eye = np.eye(3, dtype=np.complex128)
    _, q1, q2 = gram_schmidt([f, eye[order[0]], eye[order[1]]])
    return np.column_stack([q1, q2])


def _monomial(mats, k) -> np.ndarray:
    out = np.eye(mats[0].shape[0], dtype=np.complex128)
    for A, e in zip(mats, k):
        for _ in range(e):
            out = out @ A
    return out


def _shift_embedding(N: int, f: np.ndarray, frame: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """E: C^3 -> C^N (x) C^2, f to (cell 0, r=1), f-perp to cell 1 through Q."""
    E = np.zeros((2 * N, 3), dtype=np.complex128)
    E[1, :] = f.conj()
    E[2:4, :] = Q @ frame.conj().T
    return E


def _factor_residuals(ops: Sequence[TensorUnitary]):
    """Bounds on unitarity and pairwise commutation residuals from the tensor factors."""
    unit = 0.0
    kappas = []
    for U in ops:
        deltas = [unitarity_residual(F) for F in U.factors]
        dx = float(np.prod([1 + d for d in deltas]) - 1)
        rho = abs(U.mobius)
        kappa = (1 + rho) / (1 - rho)
        kappas.append(kappa)
        unit = max(unit, kappa * dx + abs(abs(U.scale) - 1) * 2)
    comm = 0.0
    for (i, U), (j, V) in itertools.combinations(enumerate(ops), 2):
        eps = 0.0
        for s, (F, G) in enumerate(zip(U.factors, V.factors)):
            others = np.prod([operator_norm(U.factors[t]) * operator_norm(V.factors[t])
                              for t in range(len(U.factors)) if t != s])
            eps += operator_norm(F @ G - G @ F) * others
        comm = max(comm, kappas[i] * kappas[j] * eps)
    return unit, comm


def _per_coordinate_corners(ops: Sequence[TensorUnitary]):
    """Map corner slot -> owning coordinate; raises if two coordinates act non-trivially on one slot."""
    owner = {}
    for s in range(1, len(ops[0].factors)):
        users = [i for i, U in enumerate(ops)
                 if operator_norm(U.factors[s] - np.eye(U.factors[s].shape[0])) > 0]
        if len(users) > 1:
            raise StructureError(f"tensor slot {s} is shared by coordinates {users}; compressions do not factor")
        owner[s] = users[0] if users else None
    return owner


# -- constructions ------------------------------------------------------------------

def _check_window(N: int, K: int):
    if int(N) != N or N < 3:
        raise InvalidInputError(f"window must be an integer >= 3, got {N}")
    if K < 0 or N < K + 2:
        raise InvalidInputError(f"window N = {N} is too small for max degree K = {K} (need N >= K + 2)")


def dilate_unit_nilpotent_triple(structure: NilpotentStructure, N: int = 8, K: int | None = None,
                                 targets: Sequence | None = None) -> DilationResult:
    """Cyclic-shift dilation W_i = C_N (x) U_i of A_i = v_i f* with unit v_i.

    ``targets`` are the matrices the error table compares against; by
    default the reconstruction v_i f* of the structure.
    """
    if structure.orientation != "column":
        raise StructureError("row-form structure: dilate the adjoint tuple instead")
    if len(structure.vs) != 3:
        raise InvalidInputError(f"exactly three operators are required, got {len(structure.vs)}")
    f = as_vector(structure.f, "f")
    if f.size != 3:
        raise InvalidInputError("the triple must act on C^3")
    for i, v in enumerate(structure.vs):
        if abs(np.linalg.norm(v) - 1) > UNIT_TOL:
            raise InvalidInputError(f"v{i + 1} is not a unit vector (norm {np.linalg.norm(v):.12g})")
    K = N - 2 if K is None else K
    _check_window(N, K)
    frame = _perp_frame(f)
    coords = [frame.conj().T @ v for v in structure.vs]
    coords = [c / np.linalg.norm(c) for c in coords]
    triple = three_vector_unitaries(*coords)
    Q = triple.basis_rotation
    C = cyclic_shift(N)
    ops = [TensorUnitary([np.kron(C, Q @ U @ Q.conj().T)]) for U in triple.U]
    E = _shift_embedding(N, f, frame, Q)
    target = [as_matrix(A) for A in (targets if targets is not None else structure.reconstruct())]
    Ws = [U.factors[0] for U in ops]
    table = {}
    for k in multi_indices(3, K):
        table[k] = operator_norm(E.conj().T @ _monomial(Ws, k) @ E - _monomial(target, k))
    unit = max(unitarity_residual(W) for W in Ws)
    comm = max(operator_norm(a @ b - b @ a) for a, b in itertools.combinations(Ws, 2))
    return DilationResult(ops, [E], N, [], K, table, max(table.values()), unit, comm, 0.0)


@dataclass
class _Coordinate:
    kind: str  # 'nilpotent' | 'scalar' | 'unimodular'
    lam: complex
    radius: float = 0.0
    corner: CornerUnitary | None = None
    slot: int | None = None


def dilate_triple(T, N: int = 16, D: int = 16, K: int = 4) -> DilationResult:
    """Commuting unitary power dilation of three commuting scalar-plus-nilpotent 3x3 contractions.

    Exact in compressions up to total degree min(N - 2, D - 2) when no
    Moebius step is needed; otherwise the error decays geometrically in the
    window and an a priori bound is reported in ``error_bound``.
    """
    mats = [as_matrix(A) for A in getattr(T, "matrices", T)]
    if len(mats) != 3 or any(A.shape != (3, 3) for A in mats):
        raise InvalidInputError("dilate_triple needs exactly three 3x3 matrices")
    for i, A in enumerate(mats):
        if operator_norm(A) > 1 + CONTRACTION_TOL:
            raise InvalidInputError(f"matrix {i} is not a contraction (norm {operator_norm(A):.12g})")
    _check_window(N, K)
    if int(D) != D or D < 3:
        raise InvalidInputError(f"scale window must be an integer >= 3, got {D}")
    split = split_scalar_nilpotent(mats)

    coords: list[_Coordinate] = []
    Bs = []
    for lam, Nm, pure in zip(split.lams, split.Ns, split.pure_scalar_flags):
        nn = operator_norm(Nm)
        if pure:
            if nn > CONTRACTION_TOL:
                raise InvalidInputError("unimodular scalar part with a nonzero nilpotent part is not a contraction")
            coords.append(_Coordinate("unimodular", lam / abs(lam)))
            Bs.append(np.zeros((3, 3), dtype=np.complex128))
        elif nn <= ZERO_NILPOTENT:
            coords.append(_Coordinate("scalar", lam))
            Bs.append(np.zeros((3, 3), dtype=np.complex128))
        else:
            B = mobius_of_matrix(lam, lam * np.eye(3) + Nm)
            r = operator_norm(B)
            if r > 1 + CONTRACTION_TOL:
                raise InvalidInputError(f"Moebius image has norm {r:.12g} > 1")
            coords.append(_Coordinate("nilpotent", lam, min(r, 1.0)))
            Bs.append(B / r)

    structure = decompose_nilpotents(Bs)
    if structure.orientation == "row":
        R = dilate_triple([A.conj().T for A in mats], N, D, K)
        R.unitaries = [U.dagger() for U in R.unitaries]
        R.error_table = _spectral_error_table(R.unitaries, R.embedding, mats, K)
        R.max_error = max(R.error_table.values())
        return R

    f = structure.f
    frame = _perp_frame(f)
    units = {}
    for i, c in enumerate(coords):
        if c.kind == "nilpotent":
            w = frame.conj().T @ structure.vs[i]
            units[i] = w / np.linalg.norm(w)
    fallback = next(iter(units.values()), np.array([0.0, 1.0], dtype=np.complex128))
    triple = three_vector_unitaries(*[units.get(i, fallback) for i in range(3)])
    Q = triple.basis_rotation
    C = cyclic_shift(N)

    slot = 1
    for c in coords:
        if c.kind == "nilpotent" and c.radius < 1 - 1e-12:
            c.corner, c.slot = corner_unitary(c.radius, D), slot
            slot += 1
        elif c.kind == "scalar":
            c.corner, c.slot = corner_unitary(c.lam, D), slot
            slot += 1
    n_slots = slot
    eye_w = np.eye(2 * N, dtype=np.complex128)
    eye_d = np.eye(D, dtype=np.complex128)
    ops = []
    for i, c in enumerate(coords):
        factors = [eye_w] + [eye_d] * (n_slots - 1)
        if c.kind == "nilpotent":
            factors[0] = np.kron(C, Q @ triple.U[i] @ Q.conj().T)
        if c.corner is not None:
            factors[c.slot] = c.corner.matrix
        mob = c.lam if c.kind == "nilpotent" else 0j
        scale = c.lam if c.kind == "unimodular" else 1.0 + 0j
        ops.append(TensorUnitary(factors, complex(mob), complex(scale)))
    e1 = np.zeros((D, 1), dtype=np.complex128)
    e1[0, 0] = 1.0
    embedding = [_shift_embedding(N, f, frame, Q)] + [e1] * (n_slots - 1)

    table = _spectral_error_table(ops, embedding, mats, K)
    unit, comm = _factor_residuals(ops)
    bound = _tail_bound(coords, N, D, K)
    scale_windows = [D if c.corner is not None else 0 for c in coords]
    return DilationResult(ops, embedding, N, scale_windows, K, table, max(table.values()), unit, comm, bound)


_MIX = (1.0, 0.5772156649 + 0.2718281828j, -0.3183098862 + 0.7071067812j)


def _joint_schur(mats: Sequence[np.ndarray], tol: float = 1e-10):
    """Unitary Z and eigenvalue columns for commuting normal matrices (one column per matrix).

    Schur form of a fixed generic combination; repeated eigenvalues of a
    single factor (C_N (x) U has many) do not spoil the joint basis.
    """
    for shift in range(3):
        mix = sum(_MIX[(i + shift) % 3] * (1 + 0.1 * i) * M for i, M in enumerate(mats))
        _, Z = scipy.linalg.schur(mix, output="complex")
        reduced = [Z.conj().T @ M @ Z for M in mats]
        off = max(operator_norm(R - np.diag(np.diag(R))) for R in reduced)
        if off <= tol * max(1.0, max(operator_norm(M) for M in mats)):
            return Z, np.column_stack([np.diag(R) for R in reduced])
    raise StructureError(f"factors are not jointly diagonalizable (off-diagonal residual {off:.3e})")


def _spectral_error_table(ops: Sequence[TensorUnitary], embedding, targets, K: int) -> dict:
    """||E* Y^k E - A^k|| for |k| <= K through the joint eigenbasis of the tensor factors."""
    owner = _per_coordinate_corners(ops)
    Zw, eig_w = _joint_schur([U.factors[0] for U in ops])
    Ew = Zw.conj().T @ embedding[0]
    corners = {}
    for s, i in owner.items():
        if i is None:
            continue
        Zc, eig_c = _joint_schur([ops[i].factors[s]])
        weights = np.abs(Zc.conj().T @ embedding[s][:, 0]) ** 2
        corners.setdefault(i, []).append((eig_c[:, 0], weights))

    cache = {}

    def G(i, k):
        if (i, k) not in cache:
            U = ops[i]
            x = eig_w[:, i][:, None]
            for mu, wts in corners.get(i, []):
                x = (x[..., None] * mu).reshape(x.shape[0], -1)
            if U.mobius != 0:
                x = (x + U.mobius) / (1 + np.conj(U.mobius) * x)
            weights = np.ones(1)
            for _, wts in corners.get(i, []):
                weights = np.outer(weights, wts).ravel()
            val = (U.scale ** k) * (x ** k) @ weights
            cache[(i, k)] = np.conj(val) if U.adjoint else val
        return cache[(i, k)]

    table = {}
    for k in multi_indices(len(ops), K):
        diag = np.ones(Ew.shape[0], dtype=np.complex128)
        for i, e in enumerate(k):
            diag = diag * G(i, e)
        comp = Ew.conj().T @ (diag[:, None] * Ew)
        table[k] = operator_norm(comp - _monomial(targets, k))
    return table


def _tail_bound(coords: Sequence[_Coordinate], N: int, D: int, K: int) -> float:
    """A priori bound on max_k ||E* Y^k E - A^k|| from the Moebius series outside the exact window.

    Y_i^k = sum_m g_{i,k}(m) X_i^m and the compressions of X^m agree with B^m
    whenever |m| <= N - 2 and every cornered m_i <= D - 1; outside that
    window B^m = 0 and ||E* X^m E|| <= 1, so the error is at most the l1 mass
    of the coefficients outside the window.
    """
    if any(c.kind == "scalar" for c in coords) and K > D - 1:
        return 2.0
    nil = [c for c in coords if c.kind == "nilpotent" and c.lam != 0]
    if not nil:
        return 0.0
    worst = 0.0
    for k in multi_indices(len(nil), K):
        total = 1.0
        inside = np.ones(1)
        for c, e in zip(nil, k):
            s = np.abs(_series_coefficients(c.lam, e, max(_series_length(c.lam, e), N + D)))
            total *= float(s.sum())
            kept = s[:D] if c.corner is not None else s
            inside = np.convolve(inside, kept)[: N - 1]
        worst = max(worst, total - float(inside.sum()))
    return max(worst, 0.0)


# -- verification -------------------------------------------------------------------

@dataclass
class PowerDilationCheck:
    table: dict
    max_error: float
    window_exceeded: bool
    route: str


def verify_power_dilation(R: DilationResult, T, K: int | None = None) -> PowerDilationCheck:
    """Recompute ||E* W^k E - A^k|| for |k| <= K from the operators in R.

    Independent of ``R.error_table``: the inverse Moebius maps are expanded
    in power series and compressions are taken tensor slot by tensor slot
    (E* Y^k E = E_0* prod_i G_i E_0 with G_i = sum_m g_m c_i(m) W_i^m).
    """
    K = R.max_degree if K is None else K
    mats = [as_matrix(A) for A in getattr(T, "matrices", T)]
    ops = R.unitaries
    if len(mats) != len(ops):
        raise InvalidInputError("tuple size does not match the number of dilation operators")
    if R.embedding[0].shape[1] != mats[0].shape[0]:
        raise InvalidInputError("embedding does not match the tuple dimension")
    owner = _per_coordinate_corners(ops)
    E0 = R.embedding[0]
    corner_vecs = {s: R.embedding[s][:, 0] for s in owner}

    cache = {}

    def G(i, k):
        if (i, k) in cache:
            return cache[(i, k)]
        U = ops[i]
        W = U.factors[0]
        L = _series_length(U.mobius, k)
        g = _series_coefficients(U.mobius, k, L)
        c = np.ones(L, dtype=np.complex128)
        for s, who in owner.items():
            if who != i:
                continue
            F, x = U.factors[s], corner_vecs[s].astype(np.complex128)
            y, seq = x.copy(), np.empty(L, dtype=np.complex128)
            for m in range(L):
                seq[m] = np.vdot(x, y)
                y = F @ y
            c = c * seq
        coeff = g * c
        acc = np.zeros_like(W)
        for m in range(L - 1, -1, -1):
            acc = acc @ W + coeff[m] * np.eye(W.shape[0])
        acc = acc * U.scale ** k
        cache[(i, k)] = acc
        return acc

    table = {}
    for k in multi_indices(len(ops), K):
        prod = np.eye(E0.shape[0], dtype=np.complex128)
        for i, e in enumerate(k):
            prod = prod @ G(i, e)
        comp = E0.conj().T @ prod @ E0
        adj = [U.adjoint for U in ops]
        if all(adj):
            comp = comp.conj().T
        elif any(adj):
            raise StructureError("mixed adjoint flags are not supported by the factor-wise route")
        table[k] = operator_norm(comp - _monomial(mats, k))
    return PowerDilationCheck(table, max(table.values()), K > R.validity_window, "series")


# -- single contraction ------------------------------------------------------------

def defect_operator(A) -> np.ndarray:
    """(I - A*A)^{1/2} through a Hermitian eigendecomposition."""
    A = as_matrix(A)
    P = np.eye(A.shape[1]) - A.conj().T @ A
    w, V = np.linalg.eigh((P + P.conj().T) / 2)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


def isometric_coextension_single(A, depth: int = 2) -> np.ndarray:
    """S(h, x_1, ..., x_depth) = (A h, D_A h, x_1, ..., x_{depth-1}) on C^d (+) (C^d)^depth."""
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise InvalidInputError("coextension needs a square matrix")
    if operator_norm(A) > 1 + 1e-12:
        raise InvalidInputError(f"matrix is not a contraction (norm {operator_norm(A):.12g})")
    if depth < 2:
        raise InvalidInputError(f"depth must be at least 2, got {depth}")
    d = A.shape[0]
    S = np.zeros((d * (depth + 1), d * (depth + 1)), dtype=np.complex128)
    S[:d, :d] = A
    S[d:2 * d, :d] = defect_operator(A)
    for j in range(1, depth):
        S[(j + 1) * d:(j + 2) * d, j * d:(j + 1) * d] = np.eye(d)
    return S
