"""Finite-depth analysis of factors of Markov measures on subshifts of finite type."""

from .conditionals import (
    ZeroProbabilityError,
    factor_cylinder_probability,
    find_bad_configuration,
    g_n,
    markov_order_probe,
    strong_lumpability,
    variation_estimate,
)
from .disintegration import (
    g_tilde,
    kappa,
    reversed_lumpability,
    tjur_probe,
)
from .factor import FactorMap, FactorSystem, fibre_window, is_fibre_mixing, verify_image_sft
from .markov import MarkovModel, parry_measure, stationary_distribution
from .sft import Alphabet, SubshiftSpec, higher_block_recode, topological_entropy
from .zoo import preset

__version__ = "0.1.0"
