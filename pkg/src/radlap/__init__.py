"""Spectral geometry of the square-root Laplacian on small 1D and 2D grids."""

__version__ = "0.1.0"

from .calculus import (RadicalSpectrum, apply_function, pointwise_radical, radical_apply,
                       unit_ball_volume, weyl_count, weyl_fit)
from .discretize import (DiscreteOperator, assemble_laplacian, check_green_identities,
                         dirichlet_energy, inner_product)
from .eigensolve import SpectralDecomposition, eigendecompose, expand, synthesize
from .evolution import (KernelOperator, ModalState, WaveParams, heat_kernel, heat_solve,
                        wave_energy, wave_kernel, wave_solve)
from .geometry import (Domain, Field, MetricWeight, VecField, build_domain, christoffel,
                       circle, covariant_derivative, divergence, divergence_via_christoffel,
                       gradient, interval, lie_bracket, load_domain_spec, rectangle, volume)
from .nodal import NodalPartition, courant_check, nodal_domains, nodal_tone_check, pleijel_ratio
from .variational import (Partition, dirichlet_bracket, fundamental_tone, minmax_estimate,
                          neumann_bracket, partition, rayleigh_quotient)

__all__ = [
    "apply_function",
    "assemble_laplacian",
    "build_domain",
    "check_green_identities",
    "christoffel",
    "circle",
    "courant_check",
    "covariant_derivative",
    "dirichlet_bracket",
    "dirichlet_energy",
    "DiscreteOperator",
    "divergence",
    "divergence_via_christoffel",
    "Domain",
    "eigendecompose",
    "expand",
    "Field",
    "fundamental_tone",
    "gradient",
    "heat_kernel",
    "heat_solve",
    "inner_product",
    "interval",
    "KernelOperator",
    "lie_bracket",
    "load_domain_spec",
    "MetricWeight",
    "minmax_estimate",
    "ModalState",
    "neumann_bracket",
    "nodal_domains",
    "nodal_tone_check",
    "NodalPartition",
    "Partition",
    "partition",
    "pleijel_ratio",
    "pointwise_radical",
    "radical_apply",
    "RadicalSpectrum",
    "rayleigh_quotient",
    "rectangle",
    "SpectralDecomposition",
    "synthesize",
    "unit_ball_volume",
    "VecField",
    "volume",
    "wave_energy",
    "wave_kernel",
    "wave_solve",
    "WaveParams",
    "weyl_count",
    "weyl_fit",
]
