"""Commuting tuples: the 3x3 counterexample family and structure analysis.

The counterexample lives on C^3 with ordered orthonormal basis (f, e1, e2):

    A1 = e1 f*,  A2 = e2 f*,  A3 = (c1 e1 + s1 e2) f*,  A4 = (c2 e1 + i s2 e2) f*,

with c_i = cos(theta_i), s_i = sin(theta_i) and 0 < theta_i < pi/2.  Every
product A_i A_j vanishes.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, StructureError
from .linalg import (
    as_matrix,
    fix_phase,
    inner,
    matrix_from_dict,
    matrix_to_dict,
    operator_norm,
    outer,
    rank_one_factor,
)

NILPOTENT_TOL = 1e-10
ALIGN_TOL = 1e-10
ZERO_NORM = 1e-12
PURE_SCALAR_TOL = 1e-12
CONTRACTION_MARGIN = 1e-6
SCHEMES = ("poly-of-seed-matrix", "structured-nilpotent", "scalar-plus-nilpotent")


@dataclass(frozen=True)
class CounterexampleParams:
    theta1: float = math.pi / 4
    theta2: float = math.pi / 4

    def __post_init__(self):
        for name in ("theta1", "theta2"):
            t = getattr(self, name)
            if not (isinstance(t, (int, float)) and 0.0 < t < math.pi / 2):
                raise InvalidInputError(f"{name} must lie strictly between 0 and pi/2, got {t!r}")

    @property
    def c1(self) -> float:
        return math.cos(self.theta1)

    @property
    def s1(self) -> float:
        return math.sin(self.theta1)

    @property
    def c2(self) -> float:
        return math.cos(self.theta2)

    @property
    def s2(self) -> float:
        return math.sin(self.theta2)

    def to_dict(self) -> dict:
        return {"theta1": self.theta1, "theta2": self.theta2}


@dataclass(eq=False)
class CommutingTuple:
    matrices: list
    labels: list | None = None
    meta: dict = field(default_factory=dict)
    commutation_residual: float = field(init=False)

    def __post_init__(self):
        mats = [as_matrix(A, f"matrix {i}") for i, A in enumerate(self.matrices)]
        if not mats:
            raise InvalidInputError("a tuple needs at least one matrix")
        d = mats[0].shape[0]
        for i, A in enumerate(mats):
            if A.shape != (d, d):
                raise InvalidInputError(f"matrix {i} has shape {A.shape}, expected {(d, d)}")
        if self.labels is not None and len(self.labels) != len(mats):
            raise InvalidInputError("labels must match the number of matrices")
        self.matrices = mats
        self.commutation_residual = max(
            (operator_norm(a @ b - b @ a) for a, b in itertools.combinations(mats, 2)), default=0.0
        )

    @property
    def dim(self) -> int:
        return self.matrices[0].shape[0]

    def __len__(self) -> int:
        return len(self.matrices)

    def __getitem__(self, i) -> np.ndarray:
        return self.matrices[i]

    def adjoint(self) -> "CommutingTuple":
        labels = None if self.labels is None else [f"{l}*" for l in self.labels]
        return CommutingTuple([A.conj().T for A in self.matrices], labels, dict(self.meta))

    def subset(self, indices: Sequence[int]) -> "CommutingTuple":
        labels = None if self.labels is None else [self.labels[i] for i in indices]
        return CommutingTuple([self.matrices[i] for i in indices], labels, dict(self.meta))

    def to_dict(self) -> dict:
        out = {"dim": self.dim, "matrices": [matrix_to_dict(A) for A in self.matrices]}
        if self.labels is not None:
            out["labels"] = list(self.labels)
        if self.meta:
            out["meta"] = dict(self.meta)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "CommutingTuple":
        try:
            mats = [matrix_from_dict(m) for m in obj["matrices"]]
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed tuple object: {exc}") from exc
        T = cls(mats, obj.get("labels"), dict(obj.get("meta") or {}))
        if "dim" in obj and int(obj["dim"]) != T.dim:
            raise InvalidInputError(f"tuple declares dim {obj['dim']} but matrices are {T.dim}x{T.dim}")
        return T


@dataclass
class NilpotentStructure:
    """A_i = v_i f* (column form) or A_i = f v_i* (row form) with v_i orthogonal to f."""

    orientation: str
    f: np.ndarray
    vs: list
    residual: float

    def reconstruct(self) -> list[np.ndarray]:
        if self.orientation == "column":
            return [outer(v, self.f) for v in self.vs]
        return [outer(self.f, v) for v in self.vs]


@dataclass
class ScalarNilpotentSplit:
    lams: list
    Ns: list
    pure_scalar_flags: list
    residual: float = 0.0

    def reassemble(self) -> list[np.ndarray]:
        d = self.Ns[0].shape[0]
        return [lam * np.eye(d) + N for lam, N in zip(self.lams, self.Ns)]


def build_counterexample(params: CounterexampleParams | None = None) -> CommutingTuple:
    params = params or CounterexampleParams()
    cols = [
        (1.0, 0.0),
        (0.0, 1.0),
        (params.c1, params.s1),
        (params.c2, 1j * params.s2),
    ]
    mats = []
    for a, b in cols:
        A = np.zeros((3, 3), dtype=np.complex128)
        A[1, 0], A[2, 0] = a, b
        mats.append(A)
    return CommutingTuple(mats, ["A1", "A2", "A3", "A4"], {"theta1": params.theta1, "theta2": params.theta2})


def split_scalar_nilpotent(T) -> ScalarNilpotentSplit:
    """Write each A_i as lam_i I + N_i with lam_i = trace / dim and N_i^2 = 0."""
    mats = getattr(T, "matrices", T)
    lams, Ns, flags = [], [], []
    for i, A in enumerate(mats):
        A = as_matrix(A)
        d = A.shape[0]
        lam = complex(np.trace(A) / d)
        N = A - lam * np.eye(d)
        nn = operator_norm(N)
        sq = operator_norm(N @ N)
        if sq > NILPOTENT_TOL * max(1.0, nn**2):
            raise StructureError(
                f"matrix {i} is not scalar plus order-2 nilpotent: ||N^2|| = {sq:.3e} with ||N|| = {nn:.3e}"
            )
        lams.append(lam)
        Ns.append(N)
        flags.append(abs(lam) >= 1 - PURE_SCALAR_TOL)
    split = ScalarNilpotentSplit(lams, Ns, flags)
    split.residual = max(operator_norm(B - as_matrix(A)) for A, B in zip(mats, split.reassemble()))
    return split


def decompose_nilpotents(T, tol: float = NILPOTENT_TOL, align_tol: float = ALIGN_TOL) -> NilpotentStructure:
    """Common rank-one normal form of commuting square-zero matrices.

    Column form A_i = v_i f* is preferred; row form A_i = f v_i* is returned
    when only the left factors are aligned.  Zero matrices get v_i = 0.
    """
    mats = [as_matrix(A) for A in getattr(T, "matrices", T)]
    d = mats[0].shape[0]
    for i, j in itertools.combinations(range(len(mats)), 2):
        r = operator_norm(mats[i] @ mats[j] - mats[j] @ mats[i])
        if r > tol:
            raise StructureError(f"matrices {i} and {j} do not commute (residual {r:.3e})")
    nonzero = []
    lefts, rights = {}, {}
    for i, A in enumerate(mats):
        if operator_norm(A) <= ZERO_NORM:
            continue
        sq = operator_norm(A @ A)
        if sq > tol:
            raise StructureError(f"matrix {i} does not square to zero (||A^2|| = {sq:.3e})")
        try:
            x, y = rank_one_factor(A)
        except StructureError as exc:
            raise StructureError(f"matrix {i}: {exc}") from exc
        nonzero.append(i)
        lefts[i], rights[i] = x / np.linalg.norm(x), y

    if not nonzero:
        f = np.zeros(d, dtype=np.complex128)
        f[0] = 1.0
        return NilpotentStructure("column", f, [np.zeros(d, dtype=np.complex128) for _ in mats], 0.0)

    def aligned(vecs):
        ref = vecs[nonzero[0]]
        return all(abs(inner(vecs[i], ref)) >= 1 - align_tol for i in nonzero)

    if aligned(rights):
        orientation = "column"
        f = rights[nonzero[0]]
        vs = [A @ f for A in mats]
    elif aligned(lefts):
        orientation = "row"
        f = lefts[nonzero[0]]
        f = f * np.conj(fix_phase(f))
        vs = [A.conj().T @ f for A in mats]
    else:
        raise StructureError("neither the left nor the right factors span a line; "
                             "input is not a commuting family of square-zero 3x3 matrices")

    for i, v in enumerate(vs):
        if abs(inner(v, f)) > tol * max(1.0, np.linalg.norm(v)):
            raise StructureError(f"factor of matrix {i} is not orthogonal to f (<v, f> = {inner(v, f):.3e})")
    S = NilpotentStructure(orientation, f, vs, 0.0)
    S.residual = max(operator_norm(A - B) for A, B in zip(mats, S.reconstruct()))
    if S.residual > tol:
        raise StructureError(f"rank-one reconstruction residual {S.residual:.3e} exceeds {tol:.1e}")
    return S


# -- random families ----------------------------------------------------------

def _unit(rng, d):
    x = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return x / np.linalg.norm(x)


def _orthogonal_to(rng, f):
    v = rng.standard_normal(f.size) + 1j * rng.standard_normal(f.size)
    v = v - np.vdot(f, v) * f
    return v / np.linalg.norm(v)


def _cap_norm(A, bound=1 - CONTRACTION_MARGIN):
    n = operator_norm(A)
    return A * (bound / n) if n > bound else A


def random_commuting_contractions(dim: int, count: int, seed: int, scheme: str,
                                  max_scalar: float = 0.9, orientation: str | None = None) -> CommutingTuple:
    """Seeded random commuting contractions, each of norm at most 1 - 1e-6.

    ``orientation`` ('column' or 'row') fixes the nilpotent normal form for
    the structured schemes; by default it is drawn at random.
    """
    if dim not in (2, 3, 4):
        raise InvalidInputError(f"dim must be 2, 3 or 4, got {dim}")
    if count < 2:
        raise InvalidInputError(f"count must be at least 2, got {count}")
    if scheme not in SCHEMES:
        raise InvalidInputError(f"unknown scheme {scheme!r}; choose from {', '.join(SCHEMES)}")
    rng = np.random.default_rng(seed)
    bound = 1 - CONTRACTION_MARGIN
    if scheme == "poly-of-seed-matrix":
        S = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        S /= operator_norm(S)
        powers = [np.eye(dim, dtype=np.complex128)]
        for _ in range(dim - 1):
            powers.append(powers[-1] @ S)
        mats = []
        for _ in range(count):
            c = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
            A = sum(cj * P for cj, P in zip(c, powers))
            mats.append(A * (bound / operator_norm(A)))
    else:
        form = orientation or ("column" if rng.random() < 0.5 else "row")
        if form not in ("column", "row"):
            raise InvalidInputError(f"orientation must be 'column' or 'row', got {form!r}")
        f = _unit(rng, dim)
        mats = []
        for _ in range(count):
            v = _orthogonal_to(rng, f)
            if scheme == "structured-nilpotent":
                lam = 0j
                t = bound * rng.uniform(0.05, 1.0)
            else:
                lam = max_scalar * rng.uniform(0.0, 1.0) * np.exp(2j * np.pi * rng.uniform())
                t = (1 - abs(lam) ** 2) * bound * rng.uniform(0.05, 1.0)
            N = outer(t * v, f) if form == "column" else outer(f, t * v)
            mats.append(_cap_norm(lam * np.eye(dim) + N))
    labels = [f"A{i + 1}" for i in range(count)]
    return CommutingTuple(mats, labels, {"seed": int(seed), "scheme": scheme})
