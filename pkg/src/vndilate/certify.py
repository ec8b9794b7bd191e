"""Von Neumann inequality checks.

Two directions are covered: a certificate that the *matrix* inequality fails
for the 4-tuple counterexample, and tri-state checks of the *scalar*
inequality for arbitrary commuting tuples.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DegenerateInputError, InvalidInputError
from .linalg import gram_schmidt, operator_norm, vector_to_dict
from .polynomials import (
    MatrixPolynomial,
    TorusSupEstimate,
    evaluate_matrix_tuple,
    sample_sup_composed,
    sup_norm_torus,
)
from .tuples import (
    PURE_SCALAR_TOL,
    CommutingTuple,
    CounterexampleParams,
    build_counterexample,
    decompose_nilpotents,
    split_scalar_nilpotent,
)

ARVESON_IMPLICATION = (
    "The matrix-valued von Neumann inequality fails for this tuple, so the unital map sending "
    "z_i to A_i is not completely contractive on the polydisc algebra. By Arveson's dilation "
    "theorem a commuting unitary dilation would force complete contractivity, hence the tuple "
    "has no simultaneous coextension to commuting isometries."
)
LHS_TARGET = 2.0
LHS_TOL = 1e-10


def failure_vectors(params: CounterexampleParams):
    """u1, u2 and their Gram-Schmidt orthonormalization f1, f2 in C^4."""
    u1 = np.array([1.0, 0.0, params.c1, params.c2], dtype=np.complex128)
    u2 = np.array([0.0, 1.0, params.s1, 1j * params.s2], dtype=np.complex128)
    f1, f2 = gram_schmidt([u1, u2])
    return u1, u2, f1, f2


def failing_polynomial(params: CounterexampleParams | None = None) -> MatrixPolynomial:
    """Linear C^2-valued polynomial whose rows are conj(f1), conj(f2)."""
    params = params or CounterexampleParams()
    _, _, f1, f2 = failure_vectors(params)
    return MatrixPolynomial.linear(np.vstack([f1.conj(), f2.conj()]))


@dataclass
class FailureCertificate:
    polynomial: MatrixPolynomial
    lhs_norm: float
    sup_estimate: TorusSupEstimate
    margin: float
    params: CounterexampleParams
    conclusion: str
    provenance: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        return "pass" if self.conclusion == "dilation-impossible" else "inconclusive"

    def to_report(self, runtime_ms: int = 0) -> dict:
        est = self.sup_estimate
        extra = {
            "conclusion": self.conclusion,
            "claim": ARVESON_IMPLICATION if self.status == "pass" else
            "Certified sup bound does not separate from 2; raise --mesh to sharpen the certificate.",
            "lhs_squared": self.lhs_norm**2,
            "sup_estimate": est.to_dict(),
            "polynomial": self.polynomial.to_dict(),
            "provenance": self.provenance,
        }
        return make_report("matrix-vn-failure", self.status, self.lhs_norm, est.lower, est.certified_upper,
                           self.margin, self.params.to_dict(), est.mesh, runtime_ms, **extra)


def make_report(check, status, lhs, sup_lower, sup_certified_upper, margin, params, mesh, runtime_ms, **extra):
    report = {
        "check": check,
        "status": status,
        "lhs": lhs,
        "sup_lower": sup_lower,
        "sup_certified_upper": sup_certified_upper,
        "margin": margin,
        "params": params,
        "mesh": mesh,
        "runtime_ms": int(runtime_ms),
    }
    report.update(extra)
    return report


def certify_matrix_vn_failure(T: CommutingTuple | None = None, params: CounterexampleParams | None = None,
                              mesh: int = 64, refine: int = 40) -> FailureCertificate:
    """||p(A)|| = 2 against a certified torus sup < 2.

    A coarse mesh that cannot separate the sup from 2 gives an inconclusive
    certificate, not an error.
    """
    params = params or CounterexampleParams()
    expected = build_counterexample(params)
    if T is None:
        T = expected
    if len(T) != 4 or any(operator_norm(A - B) > 1e-14 for A, B in zip(T.matrices, expected.matrices)):
        raise InvalidInputError("tuple does not match the counterexample for the given angles")
    p = failing_polynomial(params)
    lhs = operator_norm(evaluate_matrix_tuple(p, T))
    est = sup_norm_torus(p, mesh=mesh, refine=refine)
    margin = LHS_TARGET - est.certified_upper
    ok = margin > 0 and lhs >= LHS_TARGET - LHS_TOL
    u1, u2, f1, f2 = failure_vectors(params)
    provenance = {name: vector_to_dict(v) for name, v in (("u1", u1), ("u2", u2), ("f1", f1), ("f2", f2))}
    return FailureCertificate(p, lhs, est, margin, params, "dilation-impossible" if ok else "inconclusive",
                              provenance)


@dataclass
class VnReport:
    lhs_norm: float
    sup_lower: float
    sup_certified_upper: float | None
    satisfied: str
    gap: float
    substituted: dict = field(default_factory=dict)

    def to_report(self, mesh: int, runtime_ms: int = 0, params=None, **extra) -> dict:
        status = {"yes": "pass", "no": "fail"}.get(self.satisfied, "inconclusive")
        return make_report("scalar-vn", status, self.lhs_norm, self.sup_lower, self.sup_certified_upper,
                           self.gap, params or {}, mesh, runtime_ms, satisfied=self.satisfied, **extra)


def verdict(lhs: float, upper: float | None) -> str:
    if upper is None:
        return "inconclusive"
    return "yes" if lhs <= upper else "no"


def _unimodular_scalars(mats) -> dict:
    found = {}
    for i, A in enumerate(mats):
        lam = complex(np.trace(A) / A.shape[0])
        if abs(lam) >= 1 - PURE_SCALAR_TOL and operator_norm(A - lam * np.eye(A.shape[0])) <= PURE_SCALAR_TOL:
            found[i] = lam
    return found


def substitute(p: MatrixPolynomial, values: dict):
    """Fix the variables in ``values`` at the given points; returns (polynomial or None, constant)."""
    keep = [i for i in range(p.num_vars) if i not in values]
    terms: dict = {}
    for k, C in p.terms.items():
        w = np.prod([values[i] ** k[i] for i in values]) if values else 1.0
        kk = tuple(k[i] for i in keep)
        terms[kk] = terms.get(kk, 0) + w * C
    if not keep:
        return None, terms.get((), np.zeros((p.out_rows, p.out_cols)))
    return MatrixPolynomial(len(keep), p.out_rows, p.out_cols, terms), None


def check_scalar_vn(T, p: MatrixPolynomial, mesh: int = 64, refine: int = 40) -> VnReport:
    """Compare ||p(A)|| with the certified sup of p over the torus.

    Coordinates that are unimodular multiples of the identity are fixed in p
    before the sup is taken.
    """
    if not p.is_scalar:
        raise InvalidInputError("scalar von Neumann check needs a 1x1 polynomial")
    mats = getattr(T, "matrices", T)
    lhs = operator_norm(evaluate_matrix_tuple(p, mats))
    fixed = _unimodular_scalars(mats)
    if fixed:
        q, const = substitute(p, fixed)
    else:
        q, const = p, None
    if q is None:
        lower = upper = operator_norm(const)
    else:
        est = sup_norm_torus(q, mesh=mesh, refine=refine)
        lower, upper = est.lower, est.certified_upper
    sat = verdict(lhs, upper)
    gap = (upper if upper is not None else lower) - lhs
    return VnReport(lhs, lower, upper, sat, gap, {str(i): [v.real, v.imag] for i, v in fixed.items()})


class LinearReduction(NamedTuple):
    B: np.ndarray
    q: MatrixPolynomial
    identity_residual: float


def reduce_linear_to_single(T, p: MatrixPolynomial) -> LinearReduction:
    """Collapse a square-zero tuple onto a single contraction B with p(A) = q(B)."""
    if not p.is_scalar:
        raise InvalidInputError("reduction is defined for scalar polynomials")
    mats = getattr(T, "matrices", T)
    if len(mats) != p.num_vars:
        raise InvalidInputError("one matrix per variable is required")
    decompose_nilpotents(mats)
    n = p.num_vars
    a = np.array([p.coefficient(tuple(int(i == j) for i in range(n)))[0, 0] for j in range(n)])
    mass = np.abs(a).sum()
    if mass == 0:
        raise DegenerateInputError("all linear coefficients vanish; the reduction needs some a_i != 0")
    phases = np.array([ai / abs(ai) if ai != 0 else 1.0 for ai in a])
    B = sum(ai * A for ai, A in zip(a, mats)) / mass
    coeffs: dict = {}
    for k, C in p.terms.items():
        m = sum(k)
        coeffs[(m,)] = coeffs.get((m,), 0) + C[0, 0] * np.prod(np.conj(phases) ** np.array(k))
    q = MatrixPolynomial.scalar(1, coeffs)
    resid = operator_norm(evaluate_matrix_tuple(p, mats) - evaluate_matrix_tuple(q, [B]))
    return LinearReduction(B, q, resid)


def mobius_crosscheck(T, p: MatrixPolynomial, mesh: int = 512) -> tuple[float, float]:
    """Sampled sups of p and of p composed with the inverse Moebius maps of the scalar parts."""
    split = split_scalar_nilpotent(T)
    lams = [0j if flag else lam for lam, flag in zip(split.lams, split.pure_scalar_flags)]
    plain = sup_norm_torus(p, mesh=mesh, refine=0).grid_max
    composed = sample_sup_composed(p, lams, mesh=mesh).lower
    return plain, composed
