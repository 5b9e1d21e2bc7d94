"""Discrete maximal operators, Muckenhoupt weights, Banach lattices, BMO and
complex interpolation on finite grids."""
from bmointerp.grid import Cube, GridError, GridFunction, GridSpec
from bmointerp.kernels import BACKEND
from bmointerp.lattices import (CalderonProduct, Dual, ExponentFunction, LatticeError, Lp,
                                Power, SeqGridFunction, VarLp, WeightedLp, calderon_norm,
                                dual_norm, norm)
from bmointerp.maximal import hl_maximal, maximal, sharp_maximal
from bmointerp.bmo import bmo_norm, stromberg_test
from bmointerp.muckenhoupt import Weight, a1_constant, ap_constant, rubio_majorant

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CalderonProduct", "Cube", "Dual", "ExponentFunction", "GridError", "GridFunction",
    "GridSpec", "LatticeError", "Lp", "Power", "SeqGridFunction", "VarLp", "Weight", "WeightedLp",
    "a1_constant", "ap_constant", "bmo_norm", "calderon_norm", "dual_norm", "hl_maximal",
    "maximal", "norm", "rubio_majorant", "sharp_maximal", "stromberg_test", "__version__",
]
