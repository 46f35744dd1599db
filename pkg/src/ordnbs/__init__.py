"""Ordinal category estimation cast as noisy binary search over boundaries."""

from .core import (AnchorPool, DataInsufficiencyError, EmpiricalEstimate, Item, OrdinalScale,
                   OutOfRangeError, SearchResult, categories_of, category_of)
from .metrics import accuracy, auc, kendall_tau, mae
from .nbs import NbsParams, allocate_budget, budget_fractions, inbs, nnbs
from .oracles import (BradleyTerryOracle, CoinFlipOracle, ComparatorOracle, ThresholdFlipOracle,
                      compare, estimate_probability)

__version__ = "0.1.0"
