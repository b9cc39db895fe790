"""Domains, metrics, grid functions and the coordinate differential geometry.

Supported manifolds are the interval (optionally with a metric weight g(x)),
the flat circle, the flat rectangle and a flat masked subset of a rectangular
lattice. All grids are vertex centered: Dirichlet sides exclude their boundary
node, Neumann sides include it and periodic axes wrap around.

Coordinate formulas (with g_{jk} the metric, g^{jk} its inverse):

    grad f      = sum_{k,l} g^{kl} (d_l f) d_k
    div P       = (1/sqrt g) sum_j d_j (eta^j sqrt g)
                = sum_j (d_j eta^j + sum_l eta^l Gamma^j_{lj})
    Gamma^k_ij  = 1/2 sum_l g^{kl} (d_i g_lj + d_j g_il - d_l g_ij)
    [P, Q]^k    = sum_j (eta^j d_j zeta^k - zeta^j d_j eta^k)
    (nabla_xi P)^k = sum_j xi^j (d_j eta^k + sum_l eta^l Gamma^k_lj)

In one dimension every metric quantity collapses to g and 1/g.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Mapping, Optional

import numpy as np
import scipy.sparse as sp
from scipy import ndimage

from .errors import DomainEmptyError, DomainError, DomainMismatchError

KINDS = ("interval", "circle", "rectangle", "masked-grid")
BC_KINDS = ("dirichlet", "neumann", "periodic")


# --------------------------------------------------------------------------
# metric weight
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MetricWeight:
    """The 1x1 metric tensor g(x) of a one dimensional domain.

    ``g`` and ``dg`` are vectorized callables of the absolute coordinate.
    ``dg`` may be None, in which case derivatives of g fall back to central
    differences.
    """

    g: Callable[[np.ndarray], np.ndarray]
    dg: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "custom"

    def samples(self, x):
        values = np.asarray(self.g(np.asarray(x, dtype=float)), dtype=float)
        if values.shape != np.shape(x):
            values = np.broadcast_to(values, np.shape(x)).copy()
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise DomainError("metric", "g must be finite and strictly positive")
        return values

    def sqrt_samples(self, x):
        return np.sqrt(self.samples(x))

    def derivative_samples(self, x, h):
        """dg/dx at ``x``; analytic when available, else central difference with step ``h``."""
        x = np.asarray(x, dtype=float)
        if self.dg is not None:
            return np.broadcast_to(np.asarray(self.dg(x), dtype=float), x.shape).copy()
        return (self.samples(x + h) - self.samples(x - h)) / (2.0 * h)

    def key(self):
        return ("metric", self.name, id(self) if self.name == "custom" else None)

    @classmethod
    def from_samples(cls, values, length, origin=0.0):
        """Metric given as samples on a uniform grid spanning [origin, origin+length].

        Values in between are linearly interpolated; no analytic derivative.
        """
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise DomainError("metric", "sampled metric needs at least two values")
        if np.any(values <= 0) or not np.all(np.isfinite(values)):
            raise DomainError("metric", "sampled metric must be finite and positive")
        xs = np.linspace(origin, origin + length, values.size)
        frozen = values.copy()
        frozen.setflags(write=False)
        metric = cls(g=lambda x: np.interp(x, xs, frozen), dg=None,
                     name="sampled:" + frozen.tobytes().hex()[:32])
        return metric


def _flat_g(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _flat_dg(x):
    return np.zeros_like(np.asarray(x, dtype=float))


METRICS = {
    "flat": MetricWeight(_flat_g, _flat_dg, "flat"),
    "exp2x": MetricWeight(lambda x: np.exp(2.0 * np.asarray(x, dtype=float)),
                          lambda x: 2.0 * np.exp(2.0 * np.asarray(x, dtype=float)),
                          "exp2x"),
    "one_plus_x2": MetricWeight(lambda x: 1.0 + np.asarray(x, dtype=float) ** 2,
                                lambda x: 2.0 * np.asarray(x, dtype=float),
                                "one_plus_x2"),
}


def metric_by_name(name):
    try:
        return METRICS[name]
    except KeyError:
        raise DomainError("metric", f"unknown metric {name!r}; choose from {sorted(METRICS)}") from None


# --------------------------------------------------------------------------
# domain
# --------------------------------------------------------------------------

def _axis_spacing(length, n, lo, hi):
    if lo == "periodic":
        return length / n
    included = (lo == "neumann") + (hi == "neumann")
    # nodes = interior points + included boundary points
    return length / (n + 1 - included)


@dataclass(frozen=True, eq=False)
class Domain:
    """Geometry, grid, boundary conditions and optional metric or mask.

    ``bc`` holds one condition per boundary segment: ``(left, right)`` for an
    interval and ``(x_lo, x_hi, y_lo, y_hi)`` in two dimensions. ``grid`` is
    the number of active nodes per axis (for a masked grid, the size of the
    lattice the mask lives on).
    """

    kind: str
    lengths: tuple
    grid: tuple
    bc: tuple
    metric: Optional[MetricWeight] = None
    mask: Optional[np.ndarray] = field(default=None, repr=False)
    origin: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError("kind", f"must be one of {KINDS}, got {self.kind!r}")
        dim = 1 if self.kind in ("interval", "circle") else 2
        lengths = tuple(float(v) for v in np.atleast_1d(self.lengths))
        grid = tuple(int(v) for v in np.atleast_1d(self.grid))
        if len(lengths) == 1 and dim == 2:
            lengths = lengths * 2
        if len(grid) == 1 and dim == 2:
            grid = grid * 2
        if len(lengths) != dim:
            raise DomainError("lengths", f"expected {dim} value(s), got {len(lengths)}")
        if len(grid) != dim:
            raise DomainError("grid", f"expected {dim} value(s), got {len(grid)}")
        if not all(np.isfinite(v) and v > 0 for v in lengths):
            raise DomainError("lengths", "lengths must be positive")
        if any(n < 3 for n in grid):
            raise DomainError("grid", "at least 3 nodes per axis are required")

        bc = self.bc
        if isinstance(bc, str):
            bc = (bc,) * (2 * dim)
        bc = tuple(str(b).lower() for b in bc)
        if self.kind == "circle":
            bc = ("periodic", "periodic")
        if len(bc) == dim:
            bc = tuple(b for b in bc for _ in range(2))
        if len(bc) != 2 * dim:
            raise DomainError("bc", f"expected {2 * dim} boundary segments, got {len(bc)}")
        if any(b not in BC_KINDS for b in bc):
            raise DomainError("bc", f"conditions must be among {BC_KINDS}")
        for axis in range(dim):
            lo, hi = bc[2 * axis:2 * axis + 2]
            if (lo == "periodic") != (hi == "periodic"):
                raise DomainError("bc", f"axis {axis}: periodic must apply to both sides")
        if self.kind == "masked-grid" and any(b != "dirichlet" for b in bc):
            raise DomainError("bc", "masked grids carry Dirichlet data on the mask boundary")

        if self.metric is not None and self.kind != "interval":
            raise DomainError("metric", "a metric weight is only supported on intervals")

        mask = self.mask
        if self.kind == "masked-grid":
            if mask is None:
                raise DomainError("mask", "masked-grid needs a mask")
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != grid:
                raise DomainError("mask", f"mask shape {mask.shape} does not match grid {grid}")
            if not mask.any():
                raise DomainEmptyError("mask", "active region is empty")
            _, ncomp = ndimage.label(mask)
            if ncomp != 1:
                raise DomainError("mask", "active region must be 4-connected")
            mask = mask.copy()
            mask.setflags(write=False)
        elif mask is not None:
            raise DomainError("mask", "mask only applies to kind 'masked-grid'")

        origin = self.origin
        origin = (0.0,) * dim if origin is None else tuple(float(v) for v in np.atleast_1d(origin))
        if len(origin) != dim:
            raise DomainError("origin", f"expected {dim} value(s)")

        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "bc", bc)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "origin", origin)

    # identity ----------------------------------------------------------

    def _key(self):
        mkey = None if self.mask is None else self.mask.tobytes()
        metric = None if self.metric is None else self.metric.key()
        return (self.kind, self.lengths, self.grid, self.bc, metric, mkey, self.origin)

    def __eq__(self, other):
        if not isinstance(other, Domain):
            return NotImplemented
        return self is other or self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    # layout ------------------------------------------------------------

    @property
    def dim(self):
        return len(self.grid)

    def axis_bc(self, axis):
        return self.bc[2 * axis], self.bc[2 * axis + 1]

    @cached_property
    def spacing(self):
        return tuple(_axis_spacing(L, n, *self.axis_bc(a))
                     for a, (L, n) in enumerate(zip(self.lengths, self.grid)))

    @cached_property
    def axes(self):
        """Node coordinates along each axis of the lattice."""
        out = []
        for a in range(self.dim):
            h = self.spacing[a]
            lo, _ = self.axis_bc(a)
            start = self.origin[a] + (h if lo == "dirichlet" else 0.0)
            out.append(start + h * np.arange(self.grid[a]))
        return tuple(out)

    @cached_property
    def active(self):
        """Boolean lattice of active nodes."""
        if self.mask is not None:
            return self.mask
        return np.ones(self.grid, dtype=bool)

    @cached_property
    def index(self):
        """Lattice -> active-node index map (-1 for inactive lattice sites)."""
        idx = np.full(self.grid, -1, dtype=np.int64)
        idx[self.active] = np.arange(int(self.active.sum()))
        return idx

    @cached_property
    def lattice_positions(self):
        """(n, dim) integer lattice positions of the active nodes, in node order."""
        return np.argwhere(self.active)

    @property
    def n(self):
        return int(self.active.sum())

    @cached_property
    def coords(self):
        """(n, dim) coordinates of active nodes (row-major, last axis fastest)."""
        pos = self.lattice_positions
        return np.column_stack([self.axes[a][pos[:, a]] for a in range(self.dim)])

    @property
    def x(self):
        return self.coords[:, 0]

    @property
    def y(self):
        return self.coords[:, 1]

    @cached_property
    def g(self):
        if self.metric is None:
            return np.ones(self.n)
        return self.metric.samples(self.x)

    @cached_property
    def sqrt_g(self):
        return np.sqrt(self.g)

    @cached_property
    def axis_weights(self):
        """Per-axis trapezoid weights over the lattice nodes of each axis."""
        out = []
        for a in range(self.dim):
            h = self.spacing[a]
            w = np.full(self.grid[a], h)
            lo, hi = self.axis_bc(a)
            if lo == "neumann":
                w[0] *= 0.5
            if hi == "neumann":
                w[-1] *= 0.5
            out.append(w)
        return tuple(out)

    @cached_property
    def weights(self):
        """Quadrature weights of the discrete Riemannian measure on active nodes."""
        pos = self.lattice_positions
        w = np.ones(self.n)
        for a in range(self.dim):
            w = w * self.axis_weights[a][pos[:, a]]
        return w * self.sqrt_g

    def sample(self, fn):
        """Evaluate ``fn(x)`` or ``fn(x, y)`` at the active nodes."""
        values = fn(*[self.coords[:, a] for a in range(self.dim)])
        return Field(self, np.broadcast_to(np.asarray(values, dtype=float), (self.n,)).copy())

    def field(self, values):
        return Field(self, values)

    def support_mask(self, layers=3):
        """Active nodes whose ``layers`` lattice neighbours on each side exist.

        Along every non-periodic axis a node is kept only if the next
        ``layers`` nodes in both directions are active, so a field vanishing
        off this set vanishes on the last ``layers`` nodes of each active run.
        """
        keep = self.active.copy()
        for a in range(self.dim):
            if self.axis_bc(a)[0] == "periodic":
                continue
            shape = [1] * self.dim
            shape[a] = 3
            structure = np.ones(shape, dtype=bool)
            keep &= ndimage.binary_erosion(self.active, structure=structure,
                                           iterations=layers, border_value=0)
        return keep[self.active]


# --------------------------------------------------------------------------
# grid functions
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Field:
    """A real scalar function sampled on the active nodes of a domain."""

    domain: Domain
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != self.domain.n:
            raise DomainError("values", f"expected {self.domain.n} values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise DomainError("values", "field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __add__(self, other):
        _same_domain(self, other)
        return Field(self.domain, self.values + other.values)

    def __sub__(self, other):
        _same_domain(self, other)
        return Field(self.domain, self.values - other.values)

    def __mul__(self, other):
        if isinstance(other, Field):
            _same_domain(self, other)
            return Field(self.domain, self.values * other.values)
        return Field(self.domain, self.values * float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.domain, -self.values)


@dataclass(frozen=True, eq=False)
class VecField:
    """A vector field given by its coordinate components eta^j."""

    domain: Domain
    components: tuple

    def __post_init__(self):
        comps = tuple(np.array(c, dtype=float).reshape(-1) for c in self.components)
        if len(comps) != self.domain.dim:
            raise DomainError("components", f"expected {self.domain.dim} components")
        for c in comps:
            if c.size != self.domain.n or not np.all(np.isfinite(c)):
                raise DomainError("components", "components must be finite with one value per node")
            c.setflags(write=False)
        object.__setattr__(self, "components", comps)

    @classmethod
    def constant(cls, domain, *values):
        return cls(domain, tuple(np.full(domain.n, float(v)) for v in values))

    def scaled(self, f):
        """Pointwise product f * P."""
        _same_domain(self, f)
        return VecField(self.domain, tuple(f.values * c for c in self.components))


def _same_domain(*objs):
    first = objs[0].domain
    for o in objs[1:]:
        if o.domain is not first and o.domain != first:
            raise DomainMismatchError("operands live on different domains")
    return first


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------

def build_domain(spec: Mapping) -> Domain:
    """Build a Domain from a plain mapping.

    Recognised keys: ``kind``, ``lengths``, ``grid``, ``bc``, ``metric``,
    ``mask`` and ``origin``. ``metric`` is either a whitelisted name
    (``flat``, ``exp2x``, ``one_plus_x2``) or a list of positive samples on a
    uniform grid spanning the interval. ``mask`` is a 0/1 matrix.
    """
    if not isinstance(spec, Mapping):
        raise DomainError("spec", "domain description must be a mapping")
    unknown = set(spec) - {"kind", "lengths", "grid", "bc", "metric", "mask", "origin"}
    if unknown:
        raise DomainError(sorted(unknown)[0], "unknown field")
    for key in ("kind", "lengths", "grid"):
        if key not in spec:
            raise DomainError(key, "missing required field")
    kind = spec["kind"]
    try:
        lengths = tuple(float(v) for v in np.atleast_1d(spec["lengths"]))
    except (TypeError, ValueError):
        raise DomainError("lengths", "must be numbers") from None
    try:
        grid_raw = np.atleast_1d(spec["grid"])
        grid = tuple(int(v) for v in grid_raw)
        if any(int(v) != float(v) for v in grid_raw):
            raise ValueError
    except (TypeError, ValueError):
        raise DomainError("grid", "must be integers") from None
    bc = spec.get("bc", "periodic" if kind == "circle" else "dirichlet")
    if not isinstance(bc, str):
        bc = tuple(bc)

    metric = spec.get("metric")
    if metric is not None:
        if isinstance(metric, MetricWeight):
            pass
        elif isinstance(metric, str):
            metric = metric_by_name(metric)
        else:
            origin = np.atleast_1d(spec.get("origin", 0.0))[0]
            metric = MetricWeight.from_samples(metric, lengths[0], origin)
        if metric.name == "flat":
            metric = None if kind != "interval" else metric

    mask = spec.get("mask")
    if mask is not None:
        try:
            mask = np.asarray(mask, dtype=int)
        except (TypeError, ValueError):
            raise DomainError("mask", "must be a 0/1 matrix") from None
        if mask.ndim != 2 or not np.isin(mask, (0, 1)).all():
            raise DomainError("mask", "must be a 0/1 matrix")
        mask = mask.astype(bool)
        if kind == "masked-grid" and not mask.any():
            raise DomainEmptyError("mask", "active region is empty")
    return Domain(kind=kind, lengths=lengths, grid=grid, bc=bc, metric=metric,
                  mask=mask, origin=spec.get("origin"))


def load_domain_spec(path) -> Domain:
    """Read a domain description from a JSON or YAML file."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml
        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    return build_domain(data)


def interval(length=1.0, grid=100, bc="dirichlet", metric=None, origin=0.0):
    if isinstance(metric, str):
        metric = metric_by_name(metric)
    return Domain("interval", (length,), (grid,), bc, metric=metric, origin=(origin,))


def circle(length=2 * np.pi, grid=64):
    return Domain("circle", (length,), (grid,), "periodic")


def rectangle(lx=1.0, ly=1.0, grid=(32, 32), bc="dirichlet", origin=(0.0, 0.0)):
    return Domain("rectangle", (lx, ly), grid, bc, origin=origin)


def volume(domain: Domain) -> float:
    """Integral of sqrt(g) over the domain.

    Trapezoid over the full lattice (boundary nodes included even where they
    are eliminated as unknowns); cell sum on masked grids.
    """
    if domain.kind == "masked-grid":
        return float(domain.n * np.prod(domain.spacing))
    if domain.dim == 1:
        L, h = domain.lengths[0], domain.spacing[0]
        if domain.bc[0] == "periodic":
            xs = domain.origin[0] + h * np.arange(domain.grid[0])
            s = np.ones_like(xs) if domain.metric is None else domain.metric.sqrt_samples(xs)
            return float(h * s.sum())
        m = int(round(L / h))
        xs = domain.origin[0] + np.linspace(0.0, L, m + 1)
        s = np.ones_like(xs) if domain.metric is None else domain.metric.sqrt_samples(xs)
        return float(h * (s.sum() - 0.5 * (s[0] + s[-1])))
    return float(np.prod(domain.lengths))


# --------------------------------------------------------------------------
# difference operators
# --------------------------------------------------------------------------

def derivative_matrix(domain: Domain, axis: int) -> sp.csr_array:
    """Sparse first-derivative operator along ``axis`` on the active nodes.

    Central differences where both neighbours are active, second-order
    one-sided differences at the ends of a run of active nodes, first order
    when only one neighbour exists.
    """
    return _derivative_matrix(domain, axis)


_DERIV_CACHE: dict = {}


def _derivative_matrix(domain, axis):
    key = (domain._key(), axis)
    hit = _DERIV_CACHE.get(key)
    if hit is not None:
        return hit
    h = domain.spacing[axis]
    idx = domain.index
    pos = domain.lattice_positions
    n_ax = domain.grid[axis]
    periodic = domain.axis_bc(axis)[0] == "periodic"

    def neighbour(step):
        p = pos.copy()
        p[:, axis] += step
        if periodic:
            p[:, axis] %= n_ax
            ok = np.ones(len(p), dtype=bool)
        else:
            ok = (p[:, axis] >= 0) & (p[:, axis] < n_ax)
        out = np.full(len(p), -1, dtype=np.int64)
        pp = p[ok]
        out[ok] = idx[tuple(pp.T)]
        return out

    m1, p1 = neighbour(-1), neighbour(1)
    m2, p2 = neighbour(-2), neighbour(2)
    rows, cols, vals = [], [], []
    me = np.arange(domain.n)

    def put(sel, pairs):
        for c, v in pairs:
            rows.append(me[sel])
            cols.append(c[sel])
            vals.append(np.full(int(sel.sum()), v / h))

    central = (m1 >= 0) & (p1 >= 0)
    fwd2 = ~central & (p1 >= 0) & (p2 >= 0)
    bwd2 = ~central & ~fwd2 & (m1 >= 0) & (m2 >= 0)
    fwd1 = ~central & ~fwd2 & ~bwd2 & (p1 >= 0)
    bwd1 = ~central & ~fwd2 & ~bwd2 & ~fwd1 & (m1 >= 0)
    put(central, [(p1, 0.5), (m1, -0.5)])
    put(fwd2, [(me, -1.5), (p1, 2.0), (p2, -0.5)])
    put(bwd2, [(me, 1.5), (m1, -2.0), (m2, 0.5)])
    put(fwd1, [(me, -1.0), (p1, 1.0)])
    put(bwd1, [(me, 1.0), (m1, -1.0)])
    D = sp.csr_array((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                     shape=(domain.n, domain.n))
    D.sum_duplicates()
    if len(_DERIV_CACHE) > 64:
        _DERIV_CACHE.clear()
    _DERIV_CACHE[key] = D
    return D


def partial(f: Field, axis: int) -> np.ndarray:
    return derivative_matrix(f.domain, axis) @ f.values


def gradient(f: Field) -> VecField:
    """grad f = g^{kl} d_l f d_k."""
    d = f.domain
    comps = [partial(f, a) for a in range(d.dim)]
    if d.metric is not None:
        comps[0] = comps[0] / d.g
    return VecField(d, tuple(comps))


def divergence(P: VecField) -> Field:
    """Conservative form (1/sqrt g) sum_j d_j(eta^j sqrt g)."""
    d = P.domain
    s = d.sqrt_g
    total = np.zeros(d.n)
    for a, eta in enumerate(P.components):
        total += derivative_matrix(d, a) @ (eta * s)
    return Field(d, total / s)


def christoffel_field(domain: Domain) -> np.ndarray:
    """Gamma[node, k, i, j] at every active node."""
    dim = domain.dim
    gam = np.zeros((domain.n, dim, dim, dim))
    if domain.metric is not None:
        x = domain.x
        dg = domain.metric.derivative_samples(x, domain.spacing[0])
        gam[:, 0, 0, 0] = 0.5 * dg / domain.g
    return gam


def christoffel(domain: Domain, node: int) -> np.ndarray:
    """Christoffel symbols Gamma^k_ij at one active node, shape (d, d, d)."""
    if not 0 <= node < domain.n:
        raise IndexError(f"node {node} out of range for {domain.n} active nodes")
    dim = domain.dim
    if domain.metric is None:
        return np.zeros((dim, dim, dim))
    x = domain.x[node:node + 1]
    g = domain.metric.samples(x)
    dg = domain.metric.derivative_samples(x, domain.spacing[0])
    return np.full((1, 1, 1), 0.5 * dg[0] / g[0])


def divergence_via_christoffel(P: VecField) -> Field:
    """sum_j (d_j eta^j + sum_l eta^l Gamma^j_lj)."""
    d = P.domain
    gam = christoffel_field(d)
    eta = np.column_stack(P.components)
    total = sum(partial(Field(d, P.components[a]), a) for a in range(d.dim))
    total = total + np.einsum("nl,njlj->n", eta, gam)
    return Field(d, total)


def _jacobian(P):
    """J[node, k, j] = d_j eta^k."""
    d = P.domain
    J = np.empty((d.n, d.dim, d.dim))
    for k, eta in enumerate(P.components):
        for j in range(d.dim):
            J[:, k, j] = derivative_matrix(d, j) @ eta
    return J


def lie_bracket(P: VecField, Q: VecField) -> VecField:
    d = _same_domain(P, Q)
    eta, zeta = np.column_stack(P.components), np.column_stack(Q.components)
    out = np.einsum("nj,nkj->nk", eta, _jacobian(Q)) - np.einsum("nj,nkj->nk", zeta, _jacobian(P))
    return VecField(d, tuple(out.T))


def covariant_derivative(xi: VecField, P: VecField) -> VecField:
    """nabla_xi P with components xi^j (d_j eta^k + eta^l Gamma^k_lj)."""
    d = _same_domain(xi, P)
    x, eta = np.column_stack(xi.components), np.column_stack(P.components)
    inner = _jacobian(P) + np.einsum("nl,nklj->nkj", eta, christoffel_field(d))
    out = np.einsum("nj,nkj->nk", x, inner)
    return VecField(d, tuple(out.T))


def metric_pairing(P: VecField, Q: VecField) -> Field:
    """Pointwise <P, Q> = g_jk eta^j zeta^k."""
    d = _same_domain(P, Q)
    total = sum(p * q for p, q in zip(P.components, Q.components))
    return Field(d, total * d.g if d.metric is not None else total)


def apply_vector(xi: VecField, f: Field) -> Field:
    """Directional derivative xi(f) = xi^j d_j f."""
    d = _same_domain(xi, f)
    return Field(d, sum(c * partial(f, a) for a, c in enumerate(xi.components)))


# --------------------------------------------------------------------------
# consistency checks
# --------------------------------------------------------------------------

def refine(domain: Domain) -> Domain:
    """Same domain with every grid spacing halved."""
    grid = []
    for a, n in enumerate(domain.grid):
        lo, hi = domain.axis_bc(a)
        if lo == "periodic":
            grid.append(2 * n)
            continue
        included = (lo == "neumann") + (hi == "neumann")
        cells = n + 1 - included
        grid.append(2 * cells - 1 + included)
    mask = None
    if domain.mask is not None:
        # a lattice site of the refined grid is active when its nearest coarse site is
        fine = np.zeros(tuple(grid), dtype=bool)
        for i in range(grid[0]):
            for j in range(grid[1]):
                ci, cj = (i - 1) // 2, (j - 1) // 2
                if i % 2 == 1 and j % 2 == 1:
                    fine[i, j] = domain.mask[ci, cj]
                else:
                    near = domain.mask[max(ci, 0):min(ci + 2, domain.grid[0]),
                                       max(cj, 0):min(cj + 2, domain.grid[1])]
                    fine[i, j] = bool(near.size) and near.all()
        mask = fine
    return Domain(domain.kind, domain.lengths, tuple(grid), domain.bc, metric=domain.metric,
                  mask=mask, origin=domain.origin)


def _smooth_fields(d):
    x = d.coords.copy()
    for a in range(d.dim):
        if d.axis_bc(a)[0] == "periodic":
            # periodic coordinates keep the test fields smooth across the wrap
            L = d.lengths[a]
            x[:, a] = L / (2 * np.pi) * np.sin(2 * np.pi * (x[:, a] - d.origin[a]) / L)
    s = np.sum(x, axis=1)
    P = VecField(d, tuple(1.0 + x[:, a] ** 2 + 0.3 * np.sin(s) for a in range(d.dim)))
    Q = VecField(d, tuple(np.cos(x[:, a]) + 0.5 * s for a in range(d.dim)))
    xi = VecField(d, tuple(1.0 + 0.5 * np.sin(x[:, a] + a) for a in range(d.dim)))
    f = Field(d, np.exp(0.5 * np.sin(s)))
    return P, Q, xi, f


def _max(arr):
    return float(np.max(np.abs(arr))) if np.size(arr) else 0.0


def torsion_defect(d: Domain) -> float:
    P, Q, _, _ = _smooth_fields(d)
    a, b, c = covariant_derivative(P, Q), covariant_derivative(Q, P), lie_bracket(P, Q)
    return max(_max(x - y - z) for x, y, z in zip(a.components, b.components, c.components))


def metric_compatibility_defect(d: Domain) -> float:
    P, Q, xi, _ = _smooth_fields(d)
    lhs = apply_vector(xi, metric_pairing(P, Q)).values
    rhs = (metric_pairing(covariant_derivative(xi, P), Q).values
           + metric_pairing(P, covariant_derivative(xi, Q)).values)
    return _max(lhs - rhs)


def product_rule_defect(d: Domain) -> float:
    P, _, _, f = _smooth_fields(d)
    lhs = divergence(P.scaled(f)).values
    rhs = f.values * divergence(P).values + metric_pairing(gradient(f), P).values
    return _max(lhs - rhs)


def divergence_gap(d: Domain) -> float:
    P, _, _, _ = _smooth_fields(d)
    return _max(divergence(P).values - divergence_via_christoffel(P).values)


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float
    ok: bool


def _rate_check(name, fn, d):
    coarse, fine = fn(d), fn(refine(d))
    floor = 1e-11
    if fine <= floor:
        return CheckResult(name, 4.0 if coarse <= floor else coarse / max(fine, floor), 3.5, True)
    ratio = coarse / fine
    return CheckResult(name, ratio, 3.5, ratio >= 3.5)


def diffgeo_report(d: Domain) -> list:
    """Cross-checks of the coordinate formulas on ``d``.

    Rate checks report defect(h) / defect(h/2) and pass at >= 3.5 (second
    order) or when the refined defect is already at round-off. Absolute
    gaps are held to 100 h^2, i.e. 1e-4 at h = 1e-3.
    """
    h = min(d.spacing)
    gap = divergence_gap(d)
    out = [CheckResult("divergence_forms_agree", gap, 100 * h * h, gap <= 100 * h * h)]
    if d.metric is not None:
        x = d.x
        analytic = christoffel_field(d)[:, 0, 0, 0]
        fd = 0.5 * (d.metric.samples(x + h) - d.metric.samples(x - h)) / (2 * h) / d.g
        gap = _max(analytic - fd)
        out.append(CheckResult("christoffel_analytic_vs_fd", gap, 100 * h * h, gap <= 100 * h * h))
    tors = torsion_defect(d)
    out.append(CheckResult("torsion_free_defect", tors, 1e-9, tors <= 1e-9))
    out.append(_rate_check("metric_compatibility_rate", metric_compatibility_defect, d))
    out.append(_rate_check("product_rule_rate", product_rule_defect, d))
    out.append(_rate_check("divergence_forms_rate", divergence_gap, d))
    return out
