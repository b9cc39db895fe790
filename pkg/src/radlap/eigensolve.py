"""Ascending eigendecomposition of a DiscreteOperator in its weighted inner product."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as la

from .discretize import DiscreteOperator
from .errors import ContractViolation, DomainError
from .geometry import Domain, Field, _same_domain

DENSE_CAP = 4096
SYMMETRY_TOL = 1e-12
NEGATIVE_TOL = 1e-10
# |lambda| below this multiple of eps * ||A|| is round-off of an exact zero mode
ZERO_SNAP = 1000 * np.finfo(float).eps


def cluster_tolerance(lam):
    return 1e-6 * max(abs(lam), 1.0)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenpairs (lambda_k, phi_k) of A, with (phi_i, phi_j) = delta_ij.

    ``vectors`` holds phi_k as columns. ``raw_min`` is the smallest eigenvalue
    before round-off at the zero level (either sign) was snapped to zero.
    """

    domain: Domain
    operator: DiscreteOperator
    lambdas: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    raw_min: float

    @property
    def count(self):
        return len(self.lambdas)

    @property
    def complete(self):
        return self.count == self.domain.n

    @cached_property
    def radicals(self):
        return np.sqrt(self.lambdas)

    @cached_property
    def multiplicity_groups(self):
        groups, current = [], [0] if self.count else []
        for i in range(1, self.count):
            if self.lambdas[i] - self.lambdas[i - 1] <= cluster_tolerance(self.lambdas[i - 1]):
                current.append(i)
            else:
                groups.append(tuple(current))
                current = [i]
        if current:
            groups.append(tuple(current))
        return tuple(groups)

    def mode(self, k):
        """phi_k as a Field; ``k`` is 1-based."""
        if not 1 <= k <= self.count:
            raise IndexError(f"mode {k} not computed (have {self.count})")
        return Field(self.domain, self.vectors[:, k - 1])

    def cluster_projector(self, group):
        V = self.vectors[:, list(group)]
        return V @ V.T * self.domain.weights[None, :]


def _fix_signs(V, w):
    """Deterministic sign: positive weighted mean, else first significant entry positive."""
    for j in range(V.shape[1]):
        v = V[:, j]
        s = float(np.sum(w * v))
        if abs(s) <= 1e-8 * np.sum(w * np.abs(v)):
            big = np.flatnonzero(np.abs(v) > 1e-6 * np.abs(v).max())
            s = v[big[0]]
        if s < 0:
            V[:, j] = -v
    return V


def eigendecompose(op: DiscreteOperator, count: int | None = None) -> SpectralDecomposition:
    """First ``count`` eigenpairs of ``op`` in ascending order.

    The weighted problem A phi = lambda phi is made symmetric by the
    similarity S = W^{1/2} A W^{-1/2} = W^{-1/2} K W^{-1/2}; S is reduced to
    tridiagonal form and diagonalised with implicit shifts (LAPACK), then
    phi = W^{-1/2} y.
    """
    n = op.n
    count = n if count is None else int(count)
    if not 1 <= count <= n:
        raise DomainError("count", f"must lie in [1, {n}], got {count}")
    if n > DENSE_CAP:
        raise DomainError("grid", f"dense eigensolver capped at {DENSE_CAP} unknowns, got {n}")
    defect = op.symmetry_defect()
    if defect > SYMMETRY_TOL:
        raise ContractViolation(f"W*A is not symmetric (relative defect {defect:.3e})")

    w = op.weights
    r = 1.0 / np.sqrt(w)
    if op.is_tridiagonal():
        K = op.stiffness.tocsr()
        diag = K.diagonal() * r * r
        off = K.diagonal(1) * r[:-1] * r[1:]
        select = ("a", None) if count == n else ("i", (0, count - 1))
        lam, Y = la.eigh_tridiagonal(diag, off, select=select[0], select_range=select[1],
                                     lapack_driver="auto")
    else:
        S = op.stiffness.toarray()
        S *= r[:, None]
        S *= r[None, :]
        S = 0.5 * (S + S.T)
        subset = None if count == n else (0, count - 1)
        lam, Y = la.eigh(S, subset_by_index=subset, overwrite_a=True, check_finite=False)
    V = _fix_signs(Y * r[:, None], w)

    raw_min = float(lam[0])
    if raw_min < -NEGATIVE_TOL * op.norm:
        raise ContractViolation(f"operator is not positive semidefinite (lambda_min={raw_min:.3e})")
    # square roots amplify round-off near zero (sqrt(1e-10) = 1e-5), so null
    # modes are snapped to exactly zero before any radical is taken
    lam = np.where(lam <= ZERO_SNAP * op.norm, 0.0, lam)

    AV = op.matrix @ V
    R = AV - V * lam[None, :]
    residuals = np.sqrt(np.sum(w[:, None] * R * R, axis=0)) / op.norm

    for arr in (lam, V, residuals):
        arr.setflags(write=False)
    return SpectralDecomposition(op.domain, op, lam, V, residuals, raw_min)


def expand(f: Field, d: SpectralDecomposition) -> np.ndarray:
    """Coefficients alpha_j = (f, phi_j) for all computed modes."""
    _same_domain(f, d)
    return d.vectors.T @ (d.domain.weights * f.values)


def synthesize(coeffs, d: SpectralDecomposition) -> Field:
    """sum_j alpha_j phi_j."""
    coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
    if coeffs.size > d.count:
        raise ValueError(f"{coeffs.size} coefficients but only {d.count} modes")
    return Field(d.domain, d.vectors[:, :coeffs.size] @ coeffs)
