"""Integrated Volterra implicit (iVi) simulation of Volterra square-root
processes and Volterra Heston models, with a Riccati-Volterra Fourier
reference pricer."""

__version__ = "0.1.0"

from .errors import ConfigError, ConvergenceError, DomainError, NonnegativityError, NumericalError
from .kernels import (
    ConstantKernel,
    ExpSumKernel,
    FractionalKernel,
    InputCurve,
    KernelWeights,
    ResolventKernel,
    ShiftedFractionalKernel,
    kernel_weights,
    mittag_leffler,
    resolvent_kernel,
)
from .igdist import IGParams, ig_char, ig_moment, ig_pdf, ig_sample
from .params import ModelParams, table1_case
from .scheme import simulate, simulate_path
from .riccati import char_fn, laplace_U, riccati_solve
from .pricing import bs_call, call_price_fourier, implied_vol, put_price_fourier, smile
from .montecarlo import ExperimentConfig, MCEstimate, error_table, estimate, path_dump

