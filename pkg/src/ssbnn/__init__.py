"""Structurally sparse Bayesian MLPs trained by variational inference.

Spike-and-slab node priors with Group-Lasso or Group-Horseshoe slabs, a small
numpy reverse-mode autodiff engine, closed-form KL terms, a training loop,
sparsity/FLOPs metrics and a calculator for theory-driven inclusion priors.
"""

from .network import NetworkConfig, SpikeSlabMLP
from .priors import PriorSpec
from .sampling import RelaxationConfig, SeededRng

__version__ = "0.1.0"

__all__ = ["NetworkConfig", "PriorSpec", "RelaxationConfig", "SeededRng", "SpikeSlabMLP"]
