"""Preference-only Bayesian optimization with likelihood-ratio confidence sets."""

from .engine import PopBoConfig, ProtocolError, SessionState, beta1
from .kernels import Duel, KernelSpec, NumericalError, duel_kernel, duel_sigma, eval_kernel, gram
from .likelihood import DuelRecord, History, grad_log_likelihood, log_likelihood, shift
from .preference import LinkConstants, btl_prob, link_constants, sample_preference
from .solver import SolveReport, maximize_acquisition, solve_acquisition_inner, solve_mle

__all__ = [
    "PopBoConfig",
    "ProtocolError",
    "SessionState",
    "beta1",
    "Duel",
    "DuelRecord",
    "History",
    "KernelSpec",
    "LinkConstants",
    "NumericalError",
    "SolveReport",
    "btl_prob",
    "duel_kernel",
    "duel_sigma",
    "eval_kernel",
    "grad_log_likelihood",
    "gram",
    "link_constants",
    "log_likelihood",
    "maximize_acquisition",
    "sample_preference",
    "shift",
    "solve_acquisition_inner",
    "solve_mle",
]
