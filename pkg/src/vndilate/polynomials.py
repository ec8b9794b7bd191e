"""Polynomials in several variables with matrix coefficients.

A ``MatrixPolynomial`` maps multi-indices ``k = (k_1, ..., k_n)`` to
``out_rows x out_cols`` coefficient matrices and stands for
``p(z) = sum_k C_k z_1^{k_1} ... z_n^{k_n}``.  Scalar polynomials are the
1 x 1 case.

Sup norms over the torus are estimated on a uniform grid, evaluated exactly
by folding exponents modulo the mesh, and certified from above by two
independent bounds:

* first order: ``grid_max + L * (h/2) * sqrt(n)`` with
  ``L = sum_k |k|_1 ||C_k||``;
* second order: ``grid_max / (1 - sigma**2 / 2)`` with ``sigma = d h / 2``
  and ``d`` the total degree.  Along the segment from a true maximiser to
  its nearest grid point, ``t -> Re <p(theta(t)) x, y>`` is an exponential
  sum of type ``sigma`` bounded by the sup, so Bernstein's inequality bounds
  its second derivative by ``sigma**2 * sup`` while the first derivative
  vanishes at the maximiser.

The reported bound is the smaller of the two (and of ``sum_k ||C_k||``).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import CapacityError, DomainError, InvalidInputError, NumericError, StructureError
from .linalg import as_matrix, matrix_from_dict, matrix_to_dict, operator_norm

GRID_POINT_CAP = 10**8
BLOCK_POINTS = 1 << 20
COMMUTATION_TOL = 1e-8
SHRINK = 0.618
POLE_TOL = 1e-14
RESOLVENT_COND_CAP = 1e12

def multi_indices(num_vars: int, max_degree: int) -> list[tuple[int, ...]]:
    """All exponent tuples of total degree <= max_degree, by degree then lexicographically."""
    out = []
    for deg in range(max_degree + 1):
        level = [k for k in itertools.product(range(deg + 1), repeat=num_vars) if sum(k) == deg]
        out.extend(sorted(level, reverse=True))
    return out


@dataclass(eq=False)
class MatrixPolynomial:
    num_vars: int
    out_rows: int
    out_cols: int
    terms: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.num_vars < 1 or self.out_rows < 1 or self.out_cols < 1:
            raise InvalidInputError("polynomial dimensions must be positive")
        clean = {}
        for k, C in self.terms.items():
            k = tuple(int(e) for e in k)
            if len(k) != self.num_vars or min(k) < 0:
                raise InvalidInputError(f"bad multi-index {k} for {self.num_vars} variables")
            C = as_matrix(np.atleast_2d(C), f"coefficient {k}")
            if C.shape != (self.out_rows, self.out_cols):
                raise InvalidInputError(f"coefficient {k} has shape {C.shape}, expected {(self.out_rows, self.out_cols)}")
            if k in clean:
                raise InvalidInputError(f"duplicate multi-index {k}")
            if np.any(C != 0):
                clean[k] = C
        self.terms = clean

    @classmethod
    def scalar(cls, num_vars: int, coeffs: Mapping) -> "MatrixPolynomial":
        return cls(num_vars, 1, 1, {k: np.array([[c]]) for k, c in coeffs.items()})

    @classmethod
    def linear(cls, R) -> "MatrixPolynomial":
        """Column-vector valued p(z) = R z, one variable per column of R."""
        R = as_matrix(R)
        n = R.shape[1]
        terms = {tuple(int(i == j) for i in range(n)): R[:, j : j + 1] for j in range(n)}
        return cls(n, R.shape[0], 1, terms)

    @property
    def is_scalar(self) -> bool:
        return self.out_rows == 1 and self.out_cols == 1

    @property
    def degree(self) -> int:
        return max((sum(k) for k in self.terms), default=0)

    def coefficient(self, k) -> np.ndarray:
        return self.terms.get(tuple(k), np.zeros((self.out_rows, self.out_cols), dtype=np.complex128))

    def coefficient_norm_sum(self) -> float:
        return sum(operator_norm(C) for C in self.terms.values())

    def lipschitz_constant(self) -> float:
        """sum_k |k|_1 ||C_k||, a Lipschitz constant in the torus angles."""
        return sum(sum(k) * operator_norm(C) for k, C in self.terms.items())

    def __add__(self, other: "MatrixPolynomial") -> "MatrixPolynomial":
        if (self.num_vars, self.out_rows, self.out_cols) != (other.num_vars, other.out_rows, other.out_cols):
            raise InvalidInputError("cannot add polynomials of different shapes")
        terms = {k: C.copy() for k, C in self.terms.items()}
        for k, C in other.terms.items():
            terms[k] = terms[k] + C if k in terms else C.copy()
        return MatrixPolynomial(self.num_vars, self.out_rows, self.out_cols, terms)

    def __mul__(self, other):
        if np.isscalar(other):
            return MatrixPolynomial(self.num_vars, self.out_rows, self.out_cols,
                                    {k: other * C for k, C in self.terms.items()})
        if self.num_vars != other.num_vars or self.out_cols != other.out_rows:
            raise InvalidInputError("incompatible polynomial product")
        terms: dict = {}
        for k1, C1 in self.terms.items():
            for k2, C2 in other.terms.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                terms[k] = terms.get(k, 0) + C1 @ C2
        return MatrixPolynomial(self.num_vars, self.out_rows, other.out_cols, terms)

    __rmul__ = __mul__

    def to_dict(self) -> dict:
        return {
            "num_vars": self.num_vars,
            "out_rows": self.out_rows,
            "out_cols": self.out_cols,
            "terms": [{"k": list(k), "coeff": matrix_to_dict(C)} for k, C in sorted(self.terms.items())],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "MatrixPolynomial":
        try:
            terms = {tuple(t["k"]): matrix_from_dict(t["coeff"]) for t in obj["terms"]}
            return cls(int(obj["num_vars"]), int(obj["out_rows"]), int(obj["out_cols"]), terms)
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed polynomial object: {exc}") from exc


def random_scalar_polynomial(num_vars: int, degree: int, rng: np.random.Generator) -> MatrixPolynomial:
    """Dense random polynomial, complex Gaussian coefficients scaled to unit l1 mass."""
    ks = multi_indices(num_vars, degree)
    c = rng.standard_normal(len(ks)) + 1j * rng.standard_normal(len(ks))
    c /= np.abs(c).sum()
    return MatrixPolynomial.scalar(num_vars, dict(zip(ks, c)))


# -- evaluation ---------------------------------------------------------------

def evaluate_scalar_point(p: MatrixPolynomial, z: Sequence[complex]) -> np.ndarray:
    z = np.asarray(z, dtype=np.complex128)
    if z.shape != (p.num_vars,):
        raise InvalidInputError(f"point has {z.size} coordinates, polynomial has {p.num_vars} variables")
    out = np.zeros((p.out_rows, p.out_cols), dtype=np.complex128)
    for k, C in p.terms.items():
        out += C * np.prod(z ** np.array(k))
    return out


def _tuple_matrices(T) -> list[np.ndarray]:
    mats = getattr(T, "matrices", T)
    return [as_matrix(A) for A in mats]


def evaluate_matrix_tuple(p: MatrixPolynomial, T, commutation_tol: float = COMMUTATION_TOL) -> np.ndarray:
    """Block matrix [sum_k (C_k)_ij A^k]_{ij} for a commuting tuple A."""
    mats = _tuple_matrices(T)
    if len(mats) != p.num_vars:
        raise InvalidInputError(f"tuple has {len(mats)} matrices, polynomial has {p.num_vars} variables")
    d = mats[0].shape[0]
    if any(A.shape != (d, d) for A in mats):
        raise InvalidInputError("tuple matrices must be square of a common size")
    for i, j in itertools.combinations(range(len(mats)), 2):
        r = operator_norm(mats[i] @ mats[j] - mats[j] @ mats[i])
        if r > commutation_tol:
            raise StructureError(f"matrices {i} and {j} do not commute (residual {r:.3e}); monomial order is ambiguous")
    powers = [[np.eye(d, dtype=np.complex128)] for _ in mats]

    def power(i, e):
        while len(powers[i]) <= e:
            powers[i].append(powers[i][-1] @ mats[i])
        return powers[i][e]

    out = np.zeros((p.out_rows * d, p.out_cols * d), dtype=np.complex128)
    for k, C in p.terms.items():
        mono = np.eye(d, dtype=np.complex128)
        for i, e in enumerate(k):
            if e:
                mono = mono @ power(i, e)
        out += np.kron(C, mono)
    return out


def _pointwise_norms(values: np.ndarray) -> np.ndarray:
    """values has shape (r, c, *grid); returns operator norms over the grid."""
    r, c = values.shape[:2]
    if r == 1 or c == 1:
        return np.sqrt(np.sum(np.abs(values.reshape(r * c, *values.shape[2:])) ** 2, axis=0))
    return np.linalg.norm(values, ord=2, axis=(0, 1))


# -- Moebius maps -------------------------------------------------------------

def _check_disc(lam) -> complex:
    lam = complex(lam)
    if not abs(lam) < 1:
        raise InvalidInputError(f"Moebius parameter must satisfy |lambda| < 1, got {lam}")
    return lam


def mobius(lam, z) -> complex:
    """b(z) = (z - lam) / (1 - conj(lam) z)."""
    lam = _check_disc(lam)
    den = 1 - np.conj(lam) * z
    if np.any(np.abs(den) < POLE_TOL):
        raise DomainError(f"z = {z} is at the pole of the Moebius map for lambda = {lam}")
    return (z - lam) / den


def mobius_inverse(lam, w) -> complex:
    """b^{-1}(w) = (w + lam) / (1 + conj(lam) w)."""
    lam = _check_disc(lam)
    den = 1 + np.conj(lam) * w
    if np.any(np.abs(den) < POLE_TOL):
        raise DomainError(f"w = {w} is at the pole of the inverse Moebius map for lambda = {lam}")
    return (w + lam) / den


def mobius_of_matrix(lam, M, inverse: bool = False) -> np.ndarray:
    """(M - lam I)(I - conj(lam) M)^{-1}; with ``inverse``, (M + lam I)(I + conj(lam) M)^{-1}."""
    lam = _check_disc(lam)
    M = as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise InvalidInputError("Moebius calculus needs a square matrix")
    norm = operator_norm(M)
    if norm > 1 + 1e-10:
        raise InvalidInputError(f"matrix is not a contraction (norm {norm:.12g})")
    sgn = 1.0 if inverse else -1.0
    eye = np.eye(M.shape[0], dtype=np.complex128)
    den = eye + sgn * np.conj(lam) * M
    # ||den|| <= 1 + |lam| ||M|| and ||den^{-1}|| <= 1 / (1 - |lam| ||M||)
    shrink = abs(lam) * norm
    cond = (1 + shrink) / (1 - shrink) if shrink < 1 else math.inf
    if not cond <= RESOLVENT_COND_CAP:
        raise NumericError(f"resolvent is ill-conditioned (condition number {cond:.3e})")
    return np.linalg.solve(den, M + sgn * lam * eye)


# -- torus sup norms ----------------------------------------------------------

@dataclass
class TorusSupEstimate:
    lower: float
    certified_upper: float | None
    argmax_point: tuple
    mesh: int
    certified: bool
    grid_max: float = 0.0
    lipschitz_bound: float | None = None
    curvature_bound: float | None = None

    @property
    def gap(self) -> float | None:
        if self.certified_upper is None:
            return None
        return self.certified_upper - self.lower

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "certified_upper": self.certified_upper,
            "argmax_point": list(self.argmax_point),
            "mesh": self.mesh,
            "certified": self.certified,
            "grid_max": self.grid_max,
            "lipschitz_bound": self.lipschitz_bound,
            "curvature_bound": self.curvature_bound,
        }


def _grid_layout(num_vars: int, mesh: int, cap: int):
    total = mesh ** num_vars
    if total > cap:
        raise CapacityError(f"grid of {mesh}^{num_vars} = {total} points exceeds the cap {cap}; use a coarser mesh")
    lead = 0
    while lead < num_vars - 1 and mesh ** (num_vars - lead) > BLOCK_POINTS:
        lead += 1
    return lead


def _scan_blocks(block_values, num_vars: int, mesh: int, lead: int):
    """Lexicographic argmax over the grid; block_values(lead_idx) -> norms on the trailing grid."""
    best, best_idx = -1.0, None
    for lead_idx in itertools.product(range(mesh), repeat=lead):
        norms = block_values(lead_idx)
        flat = int(np.argmax(norms))
        val = float(norms.flat[flat])
        if val > best:
            best = val
            best_idx = lead_idx + tuple(int(i) for i in np.unravel_index(flat, norms.shape))
    return best, best_idx


def grid_values(p: MatrixPolynomial, mesh: int, lead_idx: tuple) -> np.ndarray:
    """Values of p on the trailing grid for fixed leading grid indices, shape (r, c, mesh, ...).

    Exponents fold modulo the mesh, which is exact on the grid.  Low degrees
    are contracted against a mesh x (degree+1) Vandermonde block per axis;
    otherwise an inverse FFT does the same job.
    """
    lead = len(lead_idx)
    trail = p.num_vars - lead
    width = min(p.degree + 1, mesh)
    arr = np.zeros((p.out_rows, p.out_cols) + (width,) * trail, dtype=np.complex128)
    folded = width == mesh
    for k, C in p.terms.items():
        phase = np.exp(2j * np.pi * sum(ki * ji for ki, ji in zip(k[:lead], lead_idx)) / mesh) if lead else 1.0
        arr[(slice(None), slice(None)) + tuple(e % mesh for e in k[lead:])] += C * phase
    if trail == 0:
        return arr
    if folded:
        return np.fft.ifftn(arr, axes=tuple(range(2, 2 + trail))) * float(mesh) ** trail
    vander = np.exp(2j * np.pi * np.outer(np.arange(mesh), np.arange(width)) / mesh)
    out = arr
    for ax in range(2, 2 + trail):
        out = np.moveaxis(np.tensordot(out, vander, axes=([ax], [1])), -1, ax)
    return out


def _norm_at_angles(p: MatrixPolynomial, theta: np.ndarray) -> float:
    return operator_norm(evaluate_scalar_point(p, np.exp(1j * theta)))


def _ascend(func, theta0: np.ndarray, step: float, iters: int):
    """Deterministic coordinate ascent: try +-step on each angle, shrink the step every sweep."""
    theta = np.array(theta0, dtype=float)
    best = func(theta)
    for _ in range(iters):
        for i in range(theta.size):
            for sgn in (1.0, -1.0):
                cand = theta.copy()
                cand[i] = (cand[i] + sgn * step) % (2 * np.pi)
                val = func(cand)
                if val > best:
                    theta, best = cand, val
                    break
        step *= SHRINK
    return best, theta


def sup_norm_torus(p: MatrixPolynomial, mesh: int = 64, refine: int = 40,
                   cap: int = GRID_POINT_CAP) -> TorusSupEstimate:
    """Certified estimate of sup_{|z_i| = 1} ||p(z)||."""
    if mesh < 8:
        raise InvalidInputError(f"mesh must be at least 8, got {mesh}")
    n = p.num_vars
    lead = _grid_layout(n, mesh, cap)
    grid_max, idx = _scan_blocks(lambda li: _pointwise_norms(grid_values(p, mesh, li)), n, mesh, lead)
    h = 2 * np.pi / mesh
    theta0 = np.array(idx, dtype=float) * h
    lower, theta = _ascend(lambda t: _norm_at_angles(p, t), theta0, h, refine)

    mass = p.coefficient_norm_sum()
    slack = 64 * np.finfo(float).eps * max(mass, 1e-300) * n
    lip = grid_max + p.lipschitz_constant() * (h / 2) * math.sqrt(n)
    sigma = p.degree * h / 2
    curv = grid_max / (1 - sigma**2 / 2) if sigma**2 < 2 else math.inf
    upper = max(min(lip, curv, mass) + slack, lower)
    return TorusSupEstimate(
        lower=float(lower),
        certified_upper=float(upper),
        argmax_point=tuple(float(t) for t in theta),
        mesh=mesh,
        certified=True,
        grid_max=float(grid_max),
        lipschitz_bound=float(lip),
        curvature_bound=float(curv),
    )


def _product_grid_values(p: MatrixPolynomial, points: list[np.ndarray], lead_idx: tuple) -> np.ndarray:
    """Direct evaluation of p on a product point set, leading coordinates fixed by index."""
    lead = len(lead_idx)
    trail_pts = points[lead:]
    shape = tuple(len(x) for x in trail_pts)
    out = np.zeros((p.out_rows, p.out_cols) + shape, dtype=np.complex128)
    for k, C in p.terms.items():
        w = complex(np.prod([points[i][j] ** k[i] for i, j in enumerate(lead_idx)])) if lead else 1.0
        factor = np.array(w)
        for i, x in enumerate(trail_pts):
            factor = np.multiply.outer(factor, x ** k[lead + i])
        out += C.reshape(C.shape + (1,) * len(shape)) * factor
    return out


def sample_sup_composed(p: MatrixPolynomial, lams: Sequence[complex], mesh: int = 64, refine: int = 0,
                        cap: int = GRID_POINT_CAP) -> TorusSupEstimate:
    """Sampled sup over the torus of z -> ||p(b_1^{-1}(z_1), ..., b_n^{-1}(z_n))||; never certified."""
    if mesh < 8:
        raise InvalidInputError(f"mesh must be at least 8, got {mesh}")
    lams = [complex(l) for l in lams]
    if len(lams) != p.num_vars:
        raise InvalidInputError("one Moebius parameter per variable is required")
    for lam in lams:
        _check_disc(lam)
    n = p.num_vars
    lead = _grid_layout(n, mesh, cap)
    h = 2 * np.pi / mesh
    circle = np.exp(1j * h * np.arange(mesh))
    points = [mobius_inverse(lam, circle) for lam in lams]
    best, idx = _scan_blocks(lambda li: _pointwise_norms(_product_grid_values(p, points, li)), n, mesh, lead)

    def composed(theta):
        z = np.exp(1j * theta)
        return operator_norm(evaluate_scalar_point(p, [mobius_inverse(l, zi) for l, zi in zip(lams, z)]))

    theta0 = np.array(idx, dtype=float) * h
    if refine:
        best, theta = _ascend(composed, theta0, h, refine)
    else:
        theta = theta0
    return TorusSupEstimate(
        lower=float(best),
        certified_upper=None,
        argmax_point=tuple(float(t) for t in theta),
        mesh=mesh,
        certified=False,
        grid_max=float(best),
    )
