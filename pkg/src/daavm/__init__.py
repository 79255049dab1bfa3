"""Delayed-acceptance auxiliary-variable MCMC for models with intractable normalizing functions."""
from .core import (Beta, ExponentialFamilyModel, IntractableModel, LogNormal, Normal, PriorSpec, ProposalSpec,
                   Uniform, named_stream)
from .diagnostics import Summary, eff, ess, hpd, mcse, summarize
from .ergm import ErgmModel, Network
from .pointproc import PointProcessModel
from .potts import PottsModel
from .samplers import Trace, avm_run, da_pmcmc_run, daavm_run, daavm_s_run, mh_surrogate_run, pmcmc_run
from .sir import ObsSeries, SirParams
from .surrogate import GPEmulator, flat_surrogate, freq_surrogate, gp_fit, gp_predict, gp_surrogate

__version__ = "0.1.0"

__all__ = [
    "Beta", "ExponentialFamilyModel", "IntractableModel", "LogNormal", "Normal", "PriorSpec", "ProposalSpec",
    "Uniform", "named_stream", "Summary", "eff", "ess", "hpd", "mcse", "summarize", "ErgmModel", "Network",
    "PointProcessModel", "PottsModel", "Trace", "avm_run", "da_pmcmc_run", "daavm_run", "daavm_s_run",
    "mh_surrogate_run", "pmcmc_run", "ObsSeries", "SirParams", "GPEmulator", "flat_surrogate", "freq_surrogate",
    "gp_fit", "gp_predict", "gp_surrogate",
]
