"""Heat and wave evolution driven by the radical spectrum.

Both equations separate into modal ODEs:

    heat:  T' + r_k T = 0           ->  T(t) = e^{-r_k t}
    wave:  T'' + (r_k tau / rho) T = 0  ->  T(t) = cos(omega_k t),
           omega_k = sqrt(r_k tau / rho)

with r_k = sqrt(lambda_k). Evolution is exact in time; there is no
time-stepping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigensolve import SpectralDecomposition, expand
from .geometry import Domain, Field, _same_domain


@dataclass(frozen=True)
class WaveParams:
    rho: float = 1.0  # membrane density
    tau: float = 1.0  # membrane tension

    def __post_init__(self):
        if not (self.rho > 0 and self.tau > 0):
            raise ValueError("density and tension must be positive")


@dataclass(frozen=True, eq=False)
class ModalState:
    """Amplitudes A_k and phases beta_k of sum_k A_k phi_k cos(omega_k (t - beta_k))."""

    amplitudes: np.ndarray
    phases: np.ndarray
    source: SpectralDecomposition

    def __post_init__(self):
        A = np.array(self.amplitudes, dtype=float).reshape(-1)
        B = np.zeros_like(A) if self.phases is None else np.array(self.phases, dtype=float).reshape(-1)
        if A.shape != B.shape:
            raise ValueError("amplitudes and phases differ in length")
        if A.size > self.source.count:
            raise ValueError(f"{A.size} amplitudes but only {self.source.count} modes")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValueError("modal state must be finite")
        object.__setattr__(self, "amplitudes", A)
        object.__setattr__(self, "phases", B)

    @classmethod
    def from_field(cls, d: SpectralDecomposition, f: Field):
        """Released-from-rest state: A_k = (f, phi_k), beta_k = 0."""
        A = expand(f, d)
        return cls(A, np.zeros_like(A), d)


@dataclass(frozen=True, eq=False)
class KernelOperator:
    """Dense kernel acting as u -> sum_j K_ij u_j, i.e. u -> int p(x, y) u(y) dV(y).

    ``matrix`` already contains the quadrature weights of y.
    """

    domain: Domain
    matrix: np.ndarray
    time: float
    kind: str
    params: WaveParams | None = None

    def __call__(self, u: Field) -> Field:
        _same_domain(self, u)
        return Field(self.domain, self.matrix @ u.values)

    @property
    def kernel_values(self):
        """p(x_i, y_j) without the quadrature weight."""
        return self.matrix / self.domain.weights[None, :]

    def __matmul__(self, other):
        _same_domain(self, other)
        return self.matrix @ other.matrix


def wave_frequencies(d: SpectralDecomposition, p: WaveParams) -> np.ndarray:
    return np.sqrt(np.asarray(d.radicals) * p.tau / p.rho)


def _kernel(d, scale, t, kind, params=None):
    V = d.vectors
    K = (V * scale[None, :]) @ V.T
    K *= d.domain.weights[None, :]
    return KernelOperator(d.domain, K, float(t), kind, params)


def heat_kernel(d: SpectralDecomposition, t: float) -> KernelOperator:
    """p(x, y, t) = sum_j e^{-r_j t} phi_j(x) phi_j(y)."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    return _kernel(d, np.exp(-np.asarray(d.radicals) * t), t, "heat")


def wave_kernel(d: SpectralDecomposition, t: float, p: WaveParams = WaveParams()) -> KernelOperator:
    """w(x, y, t) = sum_k phi_k(x) phi_k(y) cos(omega_k t)."""
    return _kernel(d, np.cos(wave_frequencies(d, p) * t), t, "wave", p)


def heat_solve(d: SpectralDecomposition, f: Field, t: float) -> Field:
    """u(t) = sum_k e^{-r_k t} (f, phi_k) phi_k."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    _same_domain(f, d)
    alpha = expand(f, d)
    return Field(d.domain, d.vectors @ (np.exp(-np.asarray(d.radicals) * t) * alpha))


def wave_solve(d: SpectralDecomposition, f: Field, t: float, p: WaveParams = WaveParams()) -> Field:
    """Membrane released from rest in shape f: sum_k (f, phi_k) cos(omega_k t) phi_k."""
    _same_domain(f, d)
    alpha = expand(f, d)
    return Field(d.domain, d.vectors @ (np.cos(wave_frequencies(d, p) * t) * alpha))


def wave_energy(d: SpectralDecomposition, state: ModalState, t: float,
                p: WaveParams = WaveParams()) -> float:
    """E(t) = 1/2 sum_k (a_k'(t)^2 + omega_k^2 a_k(t)^2) for a_k = A_k cos(omega_k (t - beta_k))."""
    m = state.amplitudes.size
    w = wave_frequencies(d, p)[:m]
    phase = w * (t - state.phases)
    a = state.amplitudes * np.cos(phase)
    da = -state.amplitudes * w * np.sin(phase)
    return float(0.5 * np.sum(da ** 2 + w ** 2 * a ** 2))
