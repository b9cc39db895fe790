"""Functional calculus of the square-root Laplacian and Weyl counting.

The radical operator is sqrt(A) = sum_k sqrt(lambda_k) E_k, with E_k the
rank-one weighted projector onto phi_k. Any scalar function acts the same
way: fn(sqrt(A)) u = sum_k fn(r_k) (u, phi_k) phi_k.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .discretize import DiscreteOperator
from .eigensolve import SpectralDecomposition, expand
from .errors import EvaluationError, FitError
from .geometry import Field, _same_domain, volume

CLOSED_FORMS = ("interval-dirichlet", "interval-neumann", "interval-mixed",
                "circle", "rectangle-dirichlet")


def unit_ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n via omega_n = (2 pi / n) omega_{n-2}."""
    n = int(n)
    if n < 1:
        raise ValueError("dimension must be at least 1")
    omega = 2.0 if n % 2 else 1.0
    for m in range(2 if n % 2 == 0 else 3, n + 1, 2):
        omega *= 2.0 * np.pi / m
    return omega


def closed_form_lambdas(tag, lengths, count=None, lambda_max=None):
    """Analytic Laplacian eigenvalues, ascending, with multiplicity.

    Interval (0, L): Dirichlet (pi k / L)^2, Neumann (pi (k-1) / L)^2, mixed
    (pi (k - 1/2) / L)^2. Circle of length L: 0 then (2 pi k / L)^2 twice.
    Dirichlet rectangle: (pi m / Lx)^2 + (pi n / Ly)^2.
    Exactly one of ``count`` and ``lambda_max`` bounds the output.
    """
    if tag not in CLOSED_FORMS:
        raise ValueError(f"unknown closed form {tag!r}")
    if (count is None) == (lambda_max is None):
        raise ValueError("give exactly one of count or lambda_max")
    lengths = tuple(float(v) for v in np.atleast_1d(lengths))
    L = lengths[0]
    if tag.startswith("interval") or tag == "circle":
        if lambda_max is not None:
            kmax = int(np.sqrt(lambda_max) * L / np.pi) + 3
        else:
            kmax = int(count) + 1
        k = np.arange(1, kmax + 1, dtype=float)
        if tag == "interval-dirichlet":
            lam = (np.pi * k / L) ** 2
        elif tag == "interval-neumann":
            lam = (np.pi * (k - 1) / L) ** 2
        elif tag == "interval-mixed":
            lam = (np.pi * (k - 0.5) / L) ** 2
        else:
            pos = (2 * np.pi * k / L) ** 2
            lam = np.concatenate([[0.0], np.repeat(pos, 2)])
    else:
        Lx, Ly = lengths if len(lengths) == 2 else (L, L)
        if lambda_max is None:
            # enough lattice points to cover `count` eigenvalues
            top = 1.0
            while True:
                lam = _rectangle_lambdas(Lx, Ly, top)
                if lam.size >= count:
                    break
                top *= 2.0
        else:
            lam = _rectangle_lambdas(Lx, Ly, lambda_max)
    lam = np.sort(lam)
    if lambda_max is not None:
        return lam[lam <= lambda_max * (1 + 1e-14)]
    return lam[:int(count)]


def _rectangle_lambdas(Lx, Ly, top):
    m = np.arange(1, int(np.sqrt(top) * Lx / np.pi) + 2)
    n = np.arange(1, int(np.sqrt(top) * Ly / np.pi) + 2)
    lam = ((np.pi * m[:, None] / Lx) ** 2 + (np.pi * n[None, :] / Ly) ** 2).ravel()
    return lam[lam <= top]


@dataclass(frozen=True, eq=False)
class RadicalSpectrum:
    """Laplacian eigenvalues together with their radicals r_k = sqrt(lambda_k)."""

    lambdas: np.ndarray
    dim: int
    volume: float
    source: Optional[SpectralDecomposition] = None
    closed_form: Optional[str] = None

    @property
    def radicals(self):
        return np.sqrt(self.lambdas)

    @classmethod
    def from_decomposition(cls, d: SpectralDecomposition):
        return cls(np.asarray(d.lambdas), d.domain.dim, volume(d.domain), source=d)

    @classmethod
    def analytic(cls, tag, lengths, count=None, lambda_max=None):
        lengths = tuple(float(v) for v in np.atleast_1d(lengths))
        lam = closed_form_lambdas(tag, lengths, count=count, lambda_max=lambda_max)
        dim = 2 if tag.startswith("rectangle") else 1
        vol = float(np.prod(lengths)) if dim == 2 and len(lengths) == 2 else (
            lengths[0] ** 2 if dim == 2 else lengths[0])
        return cls(lam, dim, vol, closed_form=tag)


# --------------------------------------------------------------------------
# functional calculus
# --------------------------------------------------------------------------

def _evaluate(fn, r):
    try:
        vals = np.asarray(fn(r), dtype=float)
        if vals.shape != r.shape:
            raise ValueError
    except (TypeError, ValueError):
        vals = np.array([float(fn(t)) for t in r])
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        k = int(bad[0]) + 1
        raise EvaluationError(f"function is not finite at mode k={k} (r_k={r[bad[0]]!r})")
    return vals


def apply_function(d: SpectralDecomposition, fn, u: Field) -> Field:
    """fn(sqrt(A)) u = sum_k fn(r_k) (u, phi_k) phi_k over the computed modes."""
    _same_domain(u, d)
    scale = _evaluate(fn, np.asarray(d.radicals))
    return Field(d.domain, d.vectors @ (scale * expand(u, d)))


def radical_apply(d: SpectralDecomposition, u: Field) -> Field:
    return apply_function(d, lambda t: t, u)


@dataclass(frozen=True, eq=False)
class PointwiseRadical:
    """sqrt(|A f|) node by node, with its distance to the spectral radical."""

    field: Field
    spectral_gap: Optional[float] = None


def pointwise_radical(f: Field, op: DiscreteOperator,
                      decomp: SpectralDecomposition | None = None) -> PointwiseRadical:
    """Node-wise sqrt(|(A f)_i|).

    This is a nonlinear diagnostic. When ``decomp`` is given, the max-norm
    distance to ``radical_apply(decomp, f)`` is attached.
    """
    _same_domain(f, op)
    values = np.sqrt(np.abs(op.apply(f.values)))
    out = Field(f.domain, values)
    gap = None
    if decomp is not None:
        gap = float(np.max(np.abs(values - radical_apply(decomp, f).values)))
    return PointwiseRadical(out, gap)


# --------------------------------------------------------------------------
# Weyl counting
# --------------------------------------------------------------------------

def weyl_count(s: RadicalSpectrum, level: float, scale: str = "lambda") -> int:
    """Number of eigenvalues (with multiplicity) at or below ``level``.

    ``scale='lambda'`` counts lambda_k <= level, ``scale='radical'`` counts
    r_k <= level.
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    if scale == "lambda":
        values = s.lambdas
    elif scale == "radical":
        values = s.radicals
    else:
        raise ValueError("scale must be 'lambda' or 'radical'")
    return int(np.searchsorted(values, level, side="right"))


@dataclass(frozen=True)
class WeylFit:
    exponent: float
    constant: float
    predicted_constant: float
    free_constant: float
    points: int


def weyl_predicted_constant(dim, vol):
    return unit_ball_volume(dim) * vol / (2 * np.pi) ** dim


def weyl_fit(s: RadicalSpectrum, window, by: str = "index") -> WeylFit:
    """Fit N(lambda) ~ C lambda^p over a window of the spectrum.

    ``window`` is an inclusive (lo, hi) pair of 1-based indices
    (``by='index'``) or of eigenvalue levels (``by='lambda'``). ``exponent``
    and ``free_constant`` come from a least-squares line through
    (log lambda_k, log N(lambda_k)); ``constant`` is the least-squares
    constant with the exponent pinned at dim/2, the quantity the Weyl law
    predicts as omega_n vol / (2 pi)^n.
    """
    lam = np.asarray(s.lambdas)
    lo, hi = window
    if by == "index":
        sel = np.arange(lam.size)
        sel = sel[(sel >= lo - 1) & (sel <= hi - 1)]
    elif by == "lambda":
        sel = np.flatnonzero((lam >= lo) & (lam <= hi))
    else:
        raise ValueError("by must be 'index' or 'lambda'")
    sel = sel[lam[sel] > 0]
    if sel.size < 10:
        raise FitError(f"window holds {sel.size} nonzero eigenvalues; need at least 10")
    x = np.log(lam[sel])
    y = np.log(np.searchsorted(lam, lam[sel], side="right").astype(float))
    if np.ptp(x) <= 1e-12 * max(1.0, np.abs(x).max()):
        raise FitError("window eigenvalues are all identical; slope undefined")
    slope, intercept = np.polyfit(x, y, 1)
    half = s.dim / 2.0
    pinned = float(np.exp(np.mean(y - half * x)))
    return WeylFit(float(slope), pinned, weyl_predicted_constant(s.dim, s.volume),
                   float(np.exp(intercept)), int(sel.size))
