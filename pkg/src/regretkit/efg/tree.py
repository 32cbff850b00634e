"""Extensive-form game trees with perfect recall.

A tree is a list of nodes (chance nodes with fixed distributions,
player-owned decision nodes, leaves with per-player payoffs) plus an
explicit information-set table.  Decision nodes sharing an information set
must share the owning player's own action-observation history (perfect
recall), which ``TreeBuilder.build`` verifies.

Leaf payoffs are supplied in whatever units the game is naturally stated
in; the solver-facing payoffs are affinely mapped into [0, 1] per player
(identity when the payoffs already lie there), and the map is stored so
reported exploitability can be converted back to original units.

Tree file grammar (``save_tree`` / ``load_tree``)
-------------------------------------------------
Line-oriented plain text; blank lines and ``#`` comments are ignored;
node 0 is the root and children are given by id.  Leaf payoffs are written
in original units (the [0, 1] map is re-derived on load)::

    efg <num_players>
    infoset <id> player <i> actions <k> key <token>
    ...
    node <id> chance <k> <p_1> ... <p_k> <child_1> ... <child_k>
    node <id> player <i> infoset <iid> <k> <child_1> ... <child_k>
    node <id> leaf <v_1> ... <v_num_players>

Infoset keys are opaque whitespace-free tokens (builders use them to
identify decision points); they take no part in solving.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChanceNode",
    "DecisionNode",
    "LeafNode",
    "Infoset",
    "GameTree",
    "TreeBuilder",
    "save_tree",
    "load_tree",
]


@dataclass(frozen=True)
class ChanceNode:
    probs: np.ndarray
    children: tuple[int, ...]


@dataclass(frozen=True)
class DecisionNode:
    player: int
    infoset: int
    children: tuple[int, ...]


@dataclass(frozen=True)
class LeafNode:
    payoffs: np.ndarray  # [0, 1]-mapped units


@dataclass(frozen=True)
class Infoset:
    player: int
    num_actions: int
    nodes: tuple[int, ...]
    key: str


@dataclass(frozen=True)
class GameTree:
    """Immutable tree; node 0 is the root.

    ``payoff_scale``/``payoff_offset`` recover original payoff units from
    the stored [0, 1] values: original = scale * stored + offset.
    """

    num_players: int
    nodes: tuple
    infosets: tuple[Infoset, ...]
    payoff_scale: np.ndarray
    payoff_offset: np.ndarray
    own_sequences: tuple[tuple[tuple[int, int], ...], ...]  # per infoset

    @property
    def behavioral_dim(self) -> int:
        """P = total number of (infoset, action) pairs."""
        return sum(j.num_actions for j in self.infosets)

    def infosets_of(self, player: int) -> list[int]:
        return [i for i, j in enumerate(self.infosets) if j.player == player]

    def num_leaves(self) -> int:
        return sum(1 for nd in self.nodes if isinstance(nd, LeafNode))

    def original_leaf_payoffs(self, node_id: int) -> np.ndarray:
        leaf = self.nodes[node_id]
        return self.payoff_scale * leaf.payoffs + self.payoff_offset


class TreeBuilder:
    """Bottom-up tree construction: create children first, then parents.

    ``leaf``/``decision``/``chance`` return node ids; ``build(root)``
    relabels nodes in breadth-first order from the root, groups decision
    nodes into infosets by (player, key), derives the [0, 1] payoff map and
    validates the perfect-recall property.
    """

    def __init__(self, num_players: int):
        if num_players < 1:
            raise ValueError("need at least one player")
        self.num_players = num_players
        self._nodes: list = []

    def leaf(self, payoffs) -> int:
        payoffs = np.asarray(payoffs, dtype=float)
        if payoffs.shape != (self.num_players,):
            raise ValueError("one payoff per player required")
        if not np.all(np.isfinite(payoffs)):
            raise ValueError("non-finite leaf payoff")
        self._nodes.append(("leaf", payoffs))
        return len(self._nodes) - 1

    def decision(self, player: int, key: str, children) -> int:
        if not 0 <= player < self.num_players:
            raise ValueError(f"bad player {player}")
        if not key or any(c.isspace() for c in key):
            raise ValueError("infoset keys must be nonempty and whitespace-free")
        children = tuple(int(c) for c in children)
        if not children:
            raise ValueError("decision node needs at least one action")
        self._nodes.append(("decision", player, key, children))
        return len(self._nodes) - 1

    def chance(self, probs, children) -> int:
        probs = np.asarray(probs, dtype=float)
        children = tuple(int(c) for c in children)
        if probs.shape != (len(children),):
            raise ValueError("one probability per child required")
        if np.any(probs < 0.0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("chance probabilities must be nonnegative and sum to 1")
        self._nodes.append(("chance", probs, children))
        return len(self._nodes) - 1

    def build(self, root: int) -> GameTree:
        order: list[int] = []
        seen: set[int] = set()
        queue = [root]
        while queue:
            nid = queue.pop(0)
            if nid in seen:
                raise ValueError("node referenced twice: not a tree")
            seen.add(nid)
            order.append(nid)
            raw = self._nodes[nid]
            if raw[0] == "decision":
                queue.extend(raw[3])
            elif raw[0] == "chance":
                queue.extend(raw[2])
        relabel = {old: new for new, old in enumerate(order)}

        infoset_ids: dict[tuple[int, str], int] = {}
        infoset_nodes: dict[int, list[int]] = {}
        infoset_actions: dict[int, int] = {}
        infoset_player: dict[int, int] = {}
        infoset_key: dict[int, str] = {}
        nodes: list = []
        raw_payoffs: list[np.ndarray] = []
        for new_id, old_id in enumerate(order):
            raw = self._nodes[old_id]
            if raw[0] == "leaf":
                raw_payoffs.append(raw[1])
                nodes.append(("leaf", len(raw_payoffs) - 1))
            elif raw[0] == "chance":
                nodes.append(ChanceNode(raw[1], tuple(relabel[c] for c in raw[2])))
            else:
                _, player, key, children = raw
                iid = infoset_ids.setdefault((player, key), len(infoset_ids))
                infoset_nodes.setdefault(iid, []).append(new_id)
                infoset_player[iid] = player
                infoset_key[iid] = key
                if infoset_actions.setdefault(iid, len(children)) != len(children):
                    raise ValueError(f"infoset {key!r}: inconsistent action counts")
                nodes.append(DecisionNode(player, iid,
                                          tuple(relabel[c] for c in children)))

        # per-player affine map into [0, 1]; identity when already inside
        payoff_matrix = (np.stack(raw_payoffs) if raw_payoffs
                         else np.zeros((0, self.num_players)))
        scale = np.ones(self.num_players)
        offset = np.zeros(self.num_players)
        for i in range(self.num_players):
            if payoff_matrix.shape[0] == 0:
                continue
            lo = float(payoff_matrix[:, i].min())
            hi = float(payoff_matrix[:, i].max())
            if 0.0 <= lo and hi <= 1.0:
                continue
            if hi > lo:
                scale[i], offset[i] = hi - lo, lo
            else:
                scale[i], offset[i] = 0.0, lo  # constant payoffs off [0, 1]
        mapped_nodes: list = []
        for nd in nodes:
            if isinstance(nd, tuple):
                raw_v = raw_payoffs[nd[1]]
                mapped = np.where(scale > 0.0, (raw_v - offset) / np.where(scale > 0.0, scale, 1.0), 0.5)
                mapped_nodes.append(LeafNode(mapped))
            else:
                mapped_nodes.append(nd)

        infosets = tuple(
            Infoset(infoset_player[i], infoset_actions[i],
                    tuple(infoset_nodes[i]), infoset_key[i])
            for i in range(len(infoset_ids))
        )
        own_sequences = _own_sequences(mapped_nodes, infosets)
        return GameTree(self.num_players, tuple(mapped_nodes), infosets,
                        scale, offset, own_sequences)


def _own_sequences(nodes, infosets) -> tuple[tuple[tuple[int, int], ...], ...]:
    """Per-infoset own action history; raises on perfect-recall violations."""
    history: dict[int, tuple[tuple[int, int], ...]] = {}

    def visit(nid: int, per_player: dict[int, tuple]) -> None:
        node = nodes[nid]
        if isinstance(node, LeafNode):
            return
        if isinstance(node, ChanceNode):
            for child in node.children:
                visit(child, per_player)
            return
        own = per_player.get(node.player, ())
        prior = history.setdefault(node.infoset, own)
        if prior != own:
            key = infosets[node.infoset].key
            raise ValueError(f"perfect recall violated at infoset {key!r}")
        for action, child in enumerate(node.children):
            branched = dict(per_player)
            branched[node.player] = own + ((node.infoset, action),)
            visit(child, branched)

    if nodes:
        visit(0, {})
    return tuple(history.get(i, ()) for i in range(len(infosets)))


def save_tree(tree: GameTree, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"efg {tree.num_players}\n")
        for iid, iset in enumerate(tree.infosets):
            fh.write(f"infoset {iid} player {iset.player} "
                     f"actions {iset.num_actions} key {iset.key}\n")
        for nid, node in enumerate(tree.nodes):
            if isinstance(node, ChanceNode):
                probs = " ".join(f"{p:.17g}" for p in node.probs)
                kids = " ".join(str(c) for c in node.children)
                fh.write(f"node {nid} chance {len(node.children)} {probs} {kids}\n")
            elif isinstance(node, DecisionNode):
                kids = " ".join(str(c) for c in node.children)
                fh.write(f"node {nid} player {node.player} infoset {node.infoset} "
                         f"{len(node.children)} {kids}\n")
            else:
                original = tree.original_leaf_payoffs(nid)
                fh.write("node " + str(nid) + " leaf "
                         + " ".join(f"{v:.17g}" for v in original) + "\n")


def load_tree(path) -> GameTree:
    """Parse a tree file and rebuild it (payoff map re-derived)."""
    num_players = None
    infoset_rows: dict[int, tuple[int, int, str]] = {}
    node_rows: dict[int, tuple] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split("#", 1)[0].split()
            if not parts:
                continue
            if parts[0] == "efg":
                num_players = int(parts[1])
            elif parts[0] == "infoset":
                iid = int(parts[1])
                infoset_rows[iid] = (int(parts[3]), int(parts[5]), parts[7])
            elif parts[0] == "node":
                nid = int(parts[1])
                kind = parts[2]
                if kind == "chance":
                    k = int(parts[3])
                    probs = [float(v) for v in parts[4:4 + k]]
                    kids = [int(v) for v in parts[4 + k:4 + 2 * k]]
                    if len(kids) != k:
                        raise ValueError(f"{path}: malformed chance node {nid}")
                    node_rows[nid] = ("chance", probs, kids)
                elif kind == "player":
                    player, iid, k = int(parts[3]), int(parts[5]), int(parts[6])
                    kids = [int(v) for v in parts[7:7 + k]]
                    if len(kids) != k:
                        raise ValueError(f"{path}: malformed decision node {nid}")
                    node_rows[nid] = ("decision", player, iid, kids)
                elif kind == "leaf":
                    node_rows[nid] = ("leaf", [float(v) for v in parts[3:]])
                else:
                    raise ValueError(f"{path}: unknown node kind {kind!r}")
            else:
                raise ValueError(f"{path}: unknown directive {parts[0]!r}")
    if num_players is None:
        raise ValueError(f"{path}: missing efg header")

    builder = TreeBuilder(num_players)
    built: dict[int, int] = {}

    def rebuild(nid: int) -> int:
        if nid in built:
            raise ValueError(f"{path}: node {nid} referenced twice")
        row = node_rows[nid]
        if row[0] == "leaf":
            if len(row[1]) != num_players:
                raise ValueError(f"{path}: leaf {nid} payoff arity")
            built[nid] = builder.leaf(row[1])
        elif row[0] == "chance":
            kids = [rebuild(c) for c in row[2]]
            built[nid] = builder.chance(row[1], kids)
        else:
            _, player, iid, children = row
            if iid not in infoset_rows:
                raise ValueError(f"{path}: node {nid} uses unknown infoset {iid}")
            ip, acts, key = infoset_rows[iid]
            if ip != player or acts != len(children):
                raise ValueError(f"{path}: node {nid} disagrees with infoset table")
            kids = [rebuild(c) for c in children]
            built[nid] = builder.decision(player, key, kids)
        return built[nid]

    root = rebuild(0)
    if len(built) != len(node_rows):
        raise ValueError(f"{path}: unreachable nodes present")
    return builder.build(root)
