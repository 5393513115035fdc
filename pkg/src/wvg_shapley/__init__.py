"""
Shapley values in weighted voting games with random weights.

Exact and sampled Shapley-Shubik values, Monte Carlo experiments over i.i.d.
weight models, closed-form predictors for the extreme ranks and a renewal
function toolkit used to validate them.
"""

__version__ = "1.0.0"
__author__ = "wvg-shapley contributors"
