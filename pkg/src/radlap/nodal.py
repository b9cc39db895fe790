"""Nodal domains of eigenfunctions and the theorems about their number."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigensolve import SpectralDecomposition
from .errors import NodalError
from .geometry import Domain, Field
from .variational import fundamental_tone, restrict, subinterval

ZERO = -1


class UnionFind:
    """Disjoint sets over 0..n-1 with path halving and union by size."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a):
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra


@dataclass(frozen=True, eq=False)
class NodalPartition:
    """Sign-uniform connected components of a field.

    ``labels[i]`` is the component of node i, or ZERO (-1) for nodes on the
    nodal set. Components are numbered 0..count-1 in order of first node.
    """

    field: Field
    labels: np.ndarray
    count: int
    signs: tuple

    def sizes(self):
        return np.bincount(self.labels[self.labels >= 0], minlength=self.count)

    def component(self, c):
        return self.labels == c


def _adjacent_pairs(domain: Domain):
    """Lattice neighbour pairs (i, j), i < j in node order, 1D / 4-adjacency."""
    idx = domain.index
    pos = domain.lattice_positions
    pairs = []
    for axis in range(domain.dim):
        nb = pos.copy()
        nb[:, axis] += 1
        n_ax = domain.grid[axis]
        if domain.axis_bc(axis)[0] == "periodic":
            nb[:, axis] %= n_ax
            inside = np.ones(len(nb), dtype=bool)
        else:
            inside = nb[:, axis] < n_ax
        j = np.full(domain.n, -1)
        j[inside] = idx[tuple(nb[inside].T)]
        i = np.arange(domain.n)
        ok = j >= 0
        pairs.append(np.column_stack([i[ok], j[ok]]))
    return np.concatenate(pairs)


def nodal_domains(f: Field, zero_tol: float = 1e-8) -> NodalPartition:
    """Label the nodal domains of ``f``.

    Nodes with |f_i| <= zero_tol * max|f| form the nodal set; the others are
    joined with union-find across edges whose endpoints share a sign.
    """
    if zero_tol < 0:
        raise ValueError("zero_tol must be nonnegative")
    v = f.values
    top = np.abs(v).max()
    if top == 0:
        raise NodalError("the zero field has no nodal domains")
    sign = np.where(np.abs(v) <= zero_tol * top, 0, np.sign(v)).astype(int)
    uf = UnionFind(len(v))
    for i, j in _adjacent_pairs(f.domain):
        if sign[i] != 0 and sign[i] == sign[j]:
            uf.union(int(i), int(j))
    labels = np.full(len(v), ZERO, dtype=np.int64)
    roots = {}
    signs = []
    for i in range(len(v)):
        if sign[i] == 0:
            continue
        r = uf.find(i)
        if r not in roots:
            roots[r] = len(roots)
            signs.append("+" if sign[i] > 0 else "-")
        labels[i] = roots[r]
    labels.setflags(write=False)
    return NodalPartition(f, labels, len(roots), tuple(signs))


@dataclass(frozen=True)
class CourantRow:
    k: int
    lam: float
    count: int
    ok: bool


def courant_check(d: SpectralDecomposition, kmax: int, zero_tol: float = 1e-8) -> list:
    """n_k <= k for k = 1..kmax."""
    if kmax > d.count:
        raise ValueError(f"kmax={kmax} exceeds the {d.count} computed modes")
    rows = []
    for k in range(1, kmax + 1):
        n_k = nodal_domains(d.mode(k), zero_tol).count
        rows.append(CourantRow(k, float(d.lambdas[k - 1]), n_k, n_k <= k))
    return rows


@dataclass(frozen=True)
class ToneCheck:
    tone: float
    lambda_k: float
    rel_err: float


def _zero_crossing(x0, x1, v0, v1):
    return x0 + (x1 - x0) * v0 / (v0 - v1)


def _interval_piece(d, phi, comp):
    """Sub-interval bounded by interpolated zero crossings of phi around ``comp``."""
    dom = d.domain
    x = dom.x
    n = dom.n
    v = phi.values
    idx = np.flatnonzero(comp)
    periodic = dom.bc[0] == "periodic"
    if periodic and idx[0] == 0 and idx[-1] == n - 1 and idx.size < n:
        gap = np.flatnonzero(np.diff(idx) > 1)
        first, last = idx[gap[0] + 1], idx[gap[0]] + n
    else:
        first, last = idx[0], idx[-1]

    def value(i):
        return v[i % n]

    def coord(i):
        return x[i % n] + dom.lengths[0] * (i // n) if periodic else x[i]

    bc = ["dirichlet", "dirichlet"]
    if first == 0 and not periodic:
        a = dom.origin[0]
        bc[0] = dom.bc[0]
    else:
        a = _zero_crossing(coord(first - 1), coord(first), value(first - 1), value(first))
    if last == n - 1 and not periodic:
        b = dom.origin[0] + dom.lengths[0]
        bc[1] = dom.bc[1]
    else:
        b = _zero_crossing(coord(last), coord(last + 1), value(last), value(last + 1))
    return subinterval(dom, a, b, tuple(bc))


def _tone_with_bc(piece):
    if all(b == "dirichlet" for b in piece.bc):
        return fundamental_tone(piece)
    # outer boundary keeps the parent's Neumann data
    from .discretize import assemble_laplacian
    from .eigensolve import eigendecompose
    return float(eigendecompose(assemble_laplacian(piece), 1).lambdas[0])


def nodal_tone_check(d: SpectralDecomposition, k: int, zero_tol: float = 1e-8) -> ToneCheck:
    """Fundamental tone of the largest nodal domain of phi_k against lambda_k.

    In 1D the domain is bounded by linearly interpolated zero crossings and
    discretised afresh; in 2D it is the set of lattice nodes of the component
    with Dirichlet data on its lattice boundary.
    """
    phi = d.mode(k)
    part = nodal_domains(phi, zero_tol)
    big = int(np.argmax(part.sizes()))
    comp = part.component(big)
    dom = d.domain
    try:
        if dom.dim == 1:
            tone = _tone_with_bc(_interval_piece(d, phi, comp))
        else:
            if any(b != "dirichlet" for b in dom.bc):
                raise NodalError("2D tone check requires a Dirichlet problem")
            tone = fundamental_tone(restrict(dom, comp))
    except NodalError:
        raise
    except Exception as exc:
        raise NodalError(f"nodal domain of phi_{k} is not resolvable: {exc}") from exc
    lam = float(d.lambdas[k - 1])
    return ToneCheck(tone, lam, abs(tone - lam) / lam)


@dataclass(frozen=True)
class PleijelReport:
    ks: tuple
    counts: tuple
    ratios: tuple
    max_ratio: float
    asserted: bool  # False when the hypothesis fails (1D)
    notice: str = ""


def pleijel_ratio(d: SpectralDecomposition, krange, zero_tol: float = 1e-8) -> PleijelReport:
    """n_k / k over an inclusive index range."""
    lo, hi = krange
    if not 1 <= lo <= hi <= d.count:
        raise ValueError(f"krange {krange} outside 1..{d.count}")
    ks = tuple(range(lo, hi + 1))
    counts = tuple(nodal_domains(d.mode(k), zero_tol).count for k in ks)
    ratios = tuple(c / k for c, k in zip(counts, ks))
    notice = ""
    asserted = d.domain.dim >= 2
    if not asserted:
        notice = ("one-dimensional domain: the isoperimetric hypothesis holds with equality, "
                  "ratios are reported without assertion")
    return PleijelReport(ks, counts, ratios, max(ratios), asserted, notice)
