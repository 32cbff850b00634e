"""Stabilized Regret Matching+ solvers for games.

Subpackages and modules:

 * ``core``       normalization, instantaneous regret, (P)RM+ steps
 * ``stabilized`` restarting and chopped-orthant predictive RM+, projections
 * ``fixedpoint`` conceptual and extragradient RM+, the operator F and L_F
 * ``games``      matrix/normal-form games, adversarial sequences, metrics
 * ``efg``        extensive-form trees, counterfactual operators, CFR rounds
 * ``harness``    experiment drivers, run traces, CSV, rate regression
 * ``cli``        the ``regretkit`` command-line entry point
"""

from . import core, efg, fixedpoint, games, harness, stabilized

__version__ = "0.1.0"

__all__ = [
    "core",
    "efg",
    "fixedpoint",
    "games",
    "harness",
    "stabilized",
    "__version__",
]
