"""Extensive-form games: trees, counterfactual operators, CFR rounds."""

from .builders import build_bimatrix_tree, build_kuhn, build_liars_dice
from .rounds import (
    BehavioralAverager,
    LiftedCfrState,
    PredictiveCfrState,
    clairvoyant_cfr_round,
    clairvoyant_cfr_state,
    predictive_cfr_round,
    predictive_cfr_state,
)
from .tree import (
    ChanceNode,
    DecisionNode,
    GameTree,
    Infoset,
    LeafNode,
    TreeBuilder,
    load_tree,
    save_tree,
)
from .values import (
    best_response_value,
    behavioral_distance,
    check_behavioral,
    contraction_step_size,
    counterfactual_lipschitz,
    counterfactual_regret_operator,
    counterfactual_values,
    expected_values,
    exploitability,
    leaf_excl_weights,
    lifted_lipschitz,
    lifted_normalize,
    own_reach_per_infoset,
    uniform_behavioral,
)

__all__ = [
    "BehavioralAverager",
    "ChanceNode",
    "DecisionNode",
    "GameTree",
    "Infoset",
    "LeafNode",
    "LiftedCfrState",
    "PredictiveCfrState",
    "TreeBuilder",
    "behavioral_distance",
    "best_response_value",
    "build_bimatrix_tree",
    "build_kuhn",
    "build_liars_dice",
    "check_behavioral",
    "clairvoyant_cfr_round",
    "clairvoyant_cfr_state",
    "contraction_step_size",
    "counterfactual_lipschitz",
    "counterfactual_regret_operator",
    "counterfactual_values",
    "expected_values",
    "exploitability",
    "leaf_excl_weights",
    "lifted_lipschitz",
    "lifted_normalize",
    "load_tree",
    "own_reach_per_infoset",
    "predictive_cfr_round",
    "predictive_cfr_state",
    "save_tree",
    "uniform_behavioral",
]
