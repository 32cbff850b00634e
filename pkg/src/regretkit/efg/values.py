"""Counterfactual value machinery on game trees.

Behavioral strategies are lists of simplex blocks, one per infoset (in
``tree.infosets`` order).  The counterfactual value of (player i,
infoset j, action a) is the reach-weighted expected payoff of committing
to a at j,

    G_ja(x) = sum over leaves below (j, a) of
              [ product of all chance/opponent probabilities on the path,
                and of i's own probabilities strictly below (j, a) ] * v_i,

i.e. player i's own probabilities above j are excluded.  The per-infoset
instantaneous regret is H_j = G_j - <G_j, x_j> 1, orthogonal to x_j.

All values here are in the tree's [0, 1] payoff units; ``exploitability``
converts its output back to original units via the stored affine map.
"""

from __future__ import annotations

import numpy as np

from ..core import _normalize_nonneg
from .tree import ChanceNode, GameTree, LeafNode

__all__ = [
    "uniform_behavioral",
    "check_behavioral",
    "lifted_normalize",
    "behavioral_distance",
    "counterfactual_values",
    "counterfactual_regret_operator",
    "expected_values",
    "leaf_excl_weights",
    "own_reach_per_infoset",
    "best_response_value",
    "exploitability",
    "counterfactual_lipschitz",
    "lifted_lipschitz",
    "contraction_step_size",
]


def uniform_behavioral(tree: GameTree) -> list[np.ndarray]:
    return [np.full(j.num_actions, 1.0 / j.num_actions) for j in tree.infosets]


def check_behavioral(tree: GameTree, x, tol: float = 1e-9) -> list[np.ndarray]:
    blocks = [np.asarray(b, dtype=float) for b in x]
    if len(blocks) != len(tree.infosets):
        raise ValueError("one block per infoset required")
    for block, iset in zip(blocks, tree.infosets):
        if block.shape != (iset.num_actions,):
            raise ValueError(f"infoset {iset.key!r}: block dimension mismatch")
        if np.any(block < -tol) or abs(block.sum() - 1.0) > tol:
            raise ValueError(f"infoset {iset.key!r}: block not on the simplex")
    return blocks


def lifted_normalize(z) -> list[np.ndarray]:
    """Blockwise normalization of a lifted point (per-infoset g)."""
    blocks = [np.asarray(b, dtype=float) for b in z]
    for block in blocks:
        if np.any(block < 0.0):
            raise ValueError("negative block entries")
    return [_normalize_nonneg(b) for b in blocks]


def behavioral_distance(x, y) -> float:
    """Joint Euclidean distance between two block lists."""
    return sum(float(np.sum((a - b) ** 2)) for a, b in zip(x, y)) ** 0.5


def counterfactual_values(tree: GameTree, x, validate: bool = True) -> list[np.ndarray]:
    """All counterfactual values in one bottom-up pass, O(tree size)."""
    if validate:
        x = check_behavioral(tree, x)
    n = tree.num_players
    values = [np.zeros(j.num_actions) for j in tree.infosets]

    def visit(nid: int, reach: list[float]) -> np.ndarray:
        node = tree.nodes[nid]
        if isinstance(node, LeafNode):
            return node.payoffs
        if isinstance(node, ChanceNode):
            total = np.zeros(n)
            saved = reach[n]
            for prob, child in zip(node.probs, node.children):
                reach[n] = saved * prob
                total += prob * visit(child, reach)
            reach[n] = saved
            return total
        player = node.player
        block = x[node.infoset]
        excl = 1.0
        for k in range(n + 1):
            if k != player:
                excl *= reach[k]
        total = np.zeros(n)
        accumulator = values[node.infoset]
        for action, child in enumerate(node.children):
            prob = block[action]
            saved = reach[player]
            reach[player] = saved * prob
            child_value = visit(child, reach)
            reach[player] = saved
            accumulator[action] += excl * child_value[player]
            total += prob * child_value
        return total

    visit(0, [1.0] * (n + 1))
    return values


def counterfactual_regret_operator(tree: GameTree, x,
                                   validate: bool = True) -> list[np.ndarray]:
    """H_j(x) = G_j(x) - <G_j(x), x_j> 1 for every infoset."""
    if validate:
        x = check_behavioral(tree, x)
    g = counterfactual_values(tree, x, validate=False)
    return [gj - np.dot(gj, xj) for gj, xj in zip(g, x)]


def expected_values(tree: GameTree, x, validate: bool = True) -> np.ndarray:
    """Per-player expected payoff of the joint profile, in [0, 1] units."""
    if validate:
        x = check_behavioral(tree, x)
    n = tree.num_players

    def visit(nid: int) -> np.ndarray:
        node = tree.nodes[nid]
        if isinstance(node, LeafNode):
            return node.payoffs
        if isinstance(node, ChanceNode):
            return sum((p * visit(c) for p, c in zip(node.probs, node.children)),
                       np.zeros(n))
        block = x[node.infoset]
        return sum((block[a] * visit(c) for a, c in enumerate(node.children)),
                   np.zeros(n))

    return visit(0)


def leaf_excl_weights(tree: GameTree, x, player: int) -> np.ndarray:
    """Per-node array: at each leaf, the product of chance and opponent
    probabilities on its path (player's own probabilities excluded)."""
    weights = np.zeros(len(tree.nodes))

    def visit(nid: int, w: float) -> None:
        node = tree.nodes[nid]
        if isinstance(node, LeafNode):
            weights[nid] = w
            return
        if isinstance(node, ChanceNode):
            for prob, child in zip(node.probs, node.children):
                visit(child, w * prob)
            return
        block = x[node.infoset]
        for action, child in enumerate(node.children):
            factor = 1.0 if node.player == player else block[action]
            visit(child, w * factor)

    visit(0, 1.0)
    return weights


def own_reach_per_infoset(tree: GameTree, x) -> np.ndarray:
    """Owner's own reach mass of every infoset (sum over member nodes of the
    product of the owner's probabilities above the node)."""
    mass = np.zeros(len(tree.infosets))

    def visit(nid: int, own: list[float]) -> None:
        node = tree.nodes[nid]
        if isinstance(node, LeafNode):
            return
        if isinstance(node, ChanceNode):
            for child in node.children:
                visit(child, own)
            return
        mass[node.infoset] += own[node.player]
        block = x[node.infoset]
        for action, child in enumerate(node.children):
            saved = own[node.player]
            own[node.player] = saved * block[action]
            visit(child, own)
            own[node.player] = saved

    visit(0, [1.0] * tree.num_players)
    return mass


def best_response_value(tree: GameTree, player: int, leaf_weights) -> float:
    """Value of the best response to fixed per-leaf environment weights.

    ``leaf_weights`` aggregates everything outside the player's control
    (one round's opponents/chance reach, or a cumulative sum over rounds);
    the optimum over the player's strategies is attained at a pure
    behavioral strategy, found by resolving the player's infosets in
    deepest-own-history-first order.
    """
    leaf_weights = np.asarray(leaf_weights, dtype=float)
    choice: dict[int, int] = {}

    def node_value(nid: int) -> float:
        node = tree.nodes[nid]
        if isinstance(node, LeafNode):
            return float(leaf_weights[nid] * node.payoffs[player])
        if isinstance(node, ChanceNode):
            return sum(node_value(c) for c in node.children)
        if node.player != player:
            return sum(node_value(c) for c in node.children)
        return node_value(node.children[choice[node.infoset]])

    own = sorted(tree.infosets_of(player),
                 key=lambda i: len(tree.own_sequences[i]), reverse=True)
    for iid in own:
        iset = tree.infosets[iid]
        best_action, best_value = 0, -np.inf
        for action in range(iset.num_actions):
            value = sum(node_value(tree.nodes[nid].children[action])
                        for nid in iset.nodes)
            if value > best_value:
                best_action, best_value = action, value
        choice[iid] = best_action
    return node_value(0)


def exploitability(tree: GameTree, x) -> np.ndarray:
    """Per-player best-response gain over the current profile, reported in
    the game's original payoff units."""
    x = check_behavioral(tree, x)
    current = expected_values(tree, x, validate=False)
    gaps = np.empty(tree.num_players)
    for i in range(tree.num_players):
        weights = leaf_excl_weights(tree, x, i)
        gaps[i] = best_response_value(tree, i, weights) - current[i]
    return tree.payoff_scale * gaps


def counterfactual_lipschitz(tree: GameTree) -> float:
    """sqrt(2 P): Lipschitz constant of H over behavioral profiles."""
    return (2.0 * tree.behavioral_dim) ** 0.5


def lifted_lipschitz(tree: GameTree, floor: float = 1.0) -> float:
    """Lipschitz bound of H composed with blockwise normalization on the
    floor-respecting lifted space: sqrt(2P) * max_j sqrt(n_j) / floor."""
    widest = max(j.num_actions for j in tree.infosets)
    return counterfactual_lipschitz(tree) * widest**0.5 / floor


def contraction_step_size(tree: GameTree, floor: float = 1.0) -> float:
    """The theoretically safe step size 1 / (sqrt(2) L_F) for the lifted
    counterfactual operator (usually impractically small)."""
    return 1.0 / (2.0**0.5 * lifted_lipschitz(tree, floor))
