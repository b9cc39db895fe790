"""Rayleigh quotients, max-min values, domain bracketing and fundamental tones."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as la
from scipy import ndimage

from .discretize import DiscreteOperator, assemble_laplacian, dirichlet_energy, inner_product
from .eigensolve import SpectralDecomposition, eigendecompose
from .errors import DomainError, PartitionError
from .geometry import Domain, Field, _same_domain

EPS = np.finfo(float).eps


def comparison_tolerance(lam, op_norm):
    """Slack for comparing two computed eigenvalues: 1e-10 relative plus backward error."""
    return 1e-10 * max(1.0, abs(lam)) + 64 * EPS * op_norm


def rayleigh_quotient(f: Field, op: DiscreteOperator | None = None) -> float:
    """D[f, f] / (f, f)."""
    op = assemble_laplacian(f.domain) if op is None else op
    _same_domain(f, op)
    mass = inner_product(f, f)
    if mass <= 0:
        raise ValueError("Rayleigh quotient of the zero field")
    return dirichlet_energy(f, f, op) / mass


def _symmetric_form(op):
    r = 1.0 / np.sqrt(op.weights)
    S = op.stiffness.toarray() * r[:, None] * r[None, :]
    return 0.5 * (S + S.T)


def minmax_estimate(d: SpectralDecomposition, constraints: Sequence[Field] = ()) -> float:
    """min of the Rayleigh quotient over fields orthogonal to every constraint.

    Solved exactly: the operator is compressed onto the weighted orthogonal
    complement of the constraints and its smallest eigenvalue returned. With
    k-1 constraints the result never exceeds lambda_k.
    """
    op = d.operator
    for c in constraints:
        _same_domain(c, d)
    S = _symmetric_form(op)
    if not constraints:
        return float(la.eigvalsh(S, subset_by_index=(0, 0))[0])
    s = np.sqrt(op.weights)
    C = np.column_stack([s * c.values for c in constraints])
    Z = la.null_space(C.T)
    if Z.shape[1] == 0:
        raise ValueError("constraints span the whole space")
    M = Z.T @ S @ Z
    return float(la.eigvalsh(0.5 * (M + M.T), subset_by_index=(0, 0))[0])


# --------------------------------------------------------------------------
# partitions
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Partition:
    """Axis-aligned node-conforming cuts of an interval or rectangle.

    Each piece keeps the parent's outer conditions; the cut faces carry
    ``interface`` data ('dirichlet' or 'neumann').
    """

    domain: Domain
    axis: int
    cuts: tuple
    interface: str
    pieces: tuple


def _node_count(length, h, lo, hi):
    cells = int(round(length / h))
    return cells - 1 + (lo == "neumann") + (hi == "neumann")


def partition(domain: Domain, cuts, interface: str = "dirichlet", axis: int = 0) -> Partition:
    if domain.kind not in ("interval", "rectangle"):
        raise PartitionError(f"cannot partition a {domain.kind}")
    if interface not in ("dirichlet", "neumann"):
        raise PartitionError("interface must be 'dirichlet' or 'neumann'")
    lo_bc, hi_bc = domain.axis_bc(axis)
    if lo_bc == "periodic":
        raise PartitionError("cuts across a periodic axis are not supported")
    h = domain.spacing[axis]
    start = domain.origin[axis]
    end = start + domain.lengths[axis]
    cuts = tuple(sorted(float(c) for c in np.atleast_1d(cuts)))
    nodes = domain.axes[axis]
    for c in cuts:
        if not start < c < end:
            raise PartitionError(f"cut {c} lies outside ({start}, {end})")
        if np.min(np.abs(nodes - c)) > 1e-9 * h:
            raise PartitionError(f"cut {c} is not on a grid node")
    edges = (start,) + cuts + (end,)
    pieces = []
    for r in range(len(edges) - 1):
        a, b = edges[r], edges[r + 1]
        lo = lo_bc if r == 0 else interface
        hi = hi_bc if r == len(edges) - 2 else interface
        n_axis = _node_count(b - a, h, lo, hi)
        if n_axis < 3:
            raise PartitionError(f"piece ({a}, {b}) has only {n_axis} nodes along the cut axis")
        lengths, grid, origin = list(domain.lengths), list(domain.grid), list(domain.origin)
        bc = list(domain.bc)
        lengths[axis], grid[axis], origin[axis] = b - a, n_axis, a
        bc[2 * axis], bc[2 * axis + 1] = lo, hi
        pieces.append(Domain(domain.kind, tuple(lengths), tuple(grid), tuple(bc),
                             metric=domain.metric, origin=tuple(origin)))
    return Partition(domain, axis, cuts, interface, tuple(pieces))


@dataclass(frozen=True)
class BracketResult:
    lambdas: np.ndarray  # parent spectrum
    pieces: np.ndarray  # merged piece spectrum (nu for Dirichlet cuts, mu for Neumann)
    holds: tuple
    interface: str

    @property
    def nu(self):
        return self.pieces

    @property
    def mu(self):
        return self.pieces

    @property
    def ok(self):
        return all(self.holds)


def _merged_piece_spectrum(part, kmax):
    values = []
    norms = []
    for piece in part.pieces:
        op = assemble_laplacian(piece)
        norms.append(op.norm)
        values.append(eigendecompose(op, min(kmax, piece.n)).lambdas)
    merged = np.sort(np.concatenate(values))
    if merged.size < kmax:
        raise PartitionError(f"pieces yield only {merged.size} modes, {kmax} requested")
    return merged[:kmax], max(norms)


def _bracket(part, kmax, expected):
    if part.interface != expected:
        raise PartitionError(f"expected a {expected}-cut partition")
    op = assemble_laplacian(part.domain)
    if kmax > op.n:
        raise PartitionError(f"parent has only {op.n} modes")
    lam = np.asarray(eigendecompose(op, kmax).lambdas)
    pieces, piece_norm = _merged_piece_spectrum(part, kmax)
    scale = max(op.norm, piece_norm)
    if expected == "dirichlet":
        holds = tuple(bool(l <= v + comparison_tolerance(v, scale)) for l, v in zip(lam, pieces))
    else:
        holds = tuple(bool(v <= l + comparison_tolerance(l, scale)) for l, v in zip(lam, pieces))
    return BracketResult(lam, pieces, holds, expected)


def dirichlet_bracket(part: Partition, kmax: int) -> BracketResult:
    """Parent eigenvalues against pieces with Dirichlet interfaces: lambda_k <= nu_k."""
    return _bracket(part, kmax, "dirichlet")


def neumann_bracket(part: Partition, kmax: int) -> BracketResult:
    """Pieces with Neumann interfaces against the parent: mu_k <= lambda_k."""
    return _bracket(part, kmax, "neumann")


# --------------------------------------------------------------------------
# fundamental tones
# --------------------------------------------------------------------------

def subinterval(parent: Domain, a: float, b: float, bc=("dirichlet", "dirichlet")) -> Domain:
    """Interval [a, b] with spacing as close as possible to the parent's."""
    if parent.dim != 1:
        raise DomainError("kind", "subinterval needs a one dimensional parent")
    if not b > a:
        raise DomainError("lengths", "empty subinterval")
    h = parent.spacing[0]
    lo, hi = bc
    cells = max(int(round((b - a) / h)), 1)
    n = cells - 1 + (lo == "neumann") + (hi == "neumann")
    if n < 3:
        raise DomainError("grid", f"subinterval ({a}, {b}) resolves only {n} nodes")
    return Domain("interval", (b - a,), (n,), (lo, hi), metric=parent.metric, origin=(a,))


def restrict(domain: Domain, node_mask) -> list:
    """All-Dirichlet domains on the connected components of ``node_mask``.

    Components live on the parent lattice, so nested masks give nested
    (principal-submatrix) operators.
    """
    node_mask = np.asarray(node_mask, dtype=bool)
    if node_mask.shape != (domain.n,):
        raise DomainError("mask", "node mask must have one entry per active node")
    lattice = np.zeros(domain.grid, dtype=bool)
    lattice[tuple(domain.lattice_positions[node_mask].T)] = True
    out = []
    if domain.dim == 1:
        h = domain.spacing[0]
        xs = domain.axes[0]
        n = domain.grid[0]
        idx = np.flatnonzero(lattice)
        if idx.size == 0:
            return out
        runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
        if domain.bc[0] == "periodic" and len(runs) > 1 and runs[0][0] == 0 and runs[-1][-1] == n - 1:
            runs = [np.concatenate([runs[-1], runs[0] + n])] + runs[1:-1]
        elif domain.bc[0] == "periodic" and len(runs) == 1 and runs[0].size == n:
            raise DomainError("mask", "the whole circle has no Dirichlet boundary")
        for run in runs:
            if run.size < 3:
                raise DomainError("grid", f"component of {run.size} nodes is too small")
            start = xs[0] + h * (run[0] - 1)
            out.append(Domain("interval", (h * (run.size + 1),), (run.size,), "dirichlet",
                              metric=domain.metric, origin=(start,)))
        return out
    if any(domain.axis_bc(a)[0] == "periodic" for a in range(2)):
        raise DomainError("bc", "restriction of periodic 2D domains is not supported")
    labels, count = ndimage.label(lattice)
    h = domain.spacing
    origin = tuple(domain.axes[a][0] - h[a] for a in range(2))
    lengths = tuple(h[a] * (domain.grid[a] + 1) for a in range(2))
    for lab in range(1, count + 1):
        out.append(Domain("masked-grid", lengths, domain.grid, "dirichlet",
                          mask=labels == lab, origin=origin))
    return out


def fundamental_tone(sub) -> float:
    """Lowest all-Dirichlet eigenvalue; for several disjoint pieces, the minimum."""
    pieces = [sub] if isinstance(sub, Domain) else list(sub)
    if not pieces:
        raise DomainError("domain", "no pieces given")
    tones = []
    for piece in pieces:
        if any(b != "dirichlet" for b in piece.bc):
            raise DomainError("bc", "fundamental tone needs Dirichlet data on the whole boundary")
        extent = piece.grid if piece.mask is None else tuple(
            np.ptp(np.argwhere(piece.mask), axis=0) + 1)
        if min(extent) < 3:
            raise DomainError("grid", "sub-domain resolves fewer than 3 interior nodes per axis")
        tones.append(eigendecompose(assemble_laplacian(piece), 1).lambdas[0])
    return float(min(tones))
