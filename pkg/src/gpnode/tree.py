"""Capacity-bounded tree of local GP experts.

The tree starts as a single empty leaf. Incoming training pairs are routed
from the root: at each internal node the point descends left with the gate
probability, drawn from the tree's seeded generator. A leaf that reaches its
point capacity is split in two (median split on the dimension of greatest
spread) as long as the leaf budget allows; once the tree is saturated,
further points that land on a full leaf are dropped for training.

Prediction is deterministic: leaf means are blended with weights given by
the product of gate probabilities along each root-to-leaf path, which
partition unity by construction.

The generator is numpy's PCG64 seeded from ``rng_seed``; one uniform draw is
consumed per internal node descended during an insert and one per point
redistributed during a split, so a fixed seed and insert sequence reproduce
the tree bit for bit. :meth:`LocalGPTree.reset` re-seeds it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Union

import numpy as np

from .gp import Hyperparameters, LocalGP, fit

__all__ = [
    "TreeConfig",
    "InsertOutcome",
    "TreeStats",
    "Leaf",
    "SplitNode",
    "LocalGPTree",
    "gate_left",
]

MIN_OVERLAP_WIDTH = 1e-12


@dataclass(frozen=True, eq=False)
class TreeConfig:
    """Capacity limits, gating parameters, and the shared hyperparameters.

    ``max_leaves`` is the maximal number of local models ("Max. Local GP
    Quantity") and ``max_local_data`` the maximal number of points per model
    ("Max. Local Data Quantity").
    """

    max_leaves: int
    max_local_data: int
    hp: Hyperparameters
    overlap_ratio: float = 0.1
    rng_seed: int = 0

    def __post_init__(self):
        if not isinstance(self.max_leaves, int) or self.max_leaves < 1:
            raise ValueError(f"max_leaves must be an integer >= 1, got {self.max_leaves!r}")
        if not isinstance(self.max_local_data, int) or self.max_local_data < 2:
            raise ValueError(
                f"max_local_data must be an integer >= 2, got {self.max_local_data!r}"
            )
        if not (0.0 < self.overlap_ratio < 1.0):
            raise ValueError(f"overlap_ratio must be in (0, 1), got {self.overlap_ratio!r}")


@dataclass(frozen=True)
class InsertOutcome:
    stored: bool
    split_occurred: bool
    leaf_id: Optional[int]


@dataclass(frozen=True)
class TreeStats:
    leaves: int
    stored_points: int
    depth: int


class Leaf:
    __slots__ = ("model", "id")

    def __init__(self, model: LocalGP, leaf_id: int):
        self.model = model
        self.id = leaf_id


class SplitNode:
    __slots__ = ("dim", "value", "overlap_width", "left", "right")

    def __init__(self, dim: int, value: float, overlap_width: float,
                 left: "Node", right: "Node"):
        self.dim = dim
        self.value = value
        self.overlap_width = overlap_width
        self.left = left
        self.right = right


Node = Union[Leaf, SplitNode]


def gate_left(node: SplitNode, x: np.ndarray) -> float:
    """Probability of routing x to the left child: 1 deep on the left side,
    0 deep on the right, linear across the overlap band."""
    raw = 0.5 + (node.value - x[node.dim]) / node.overlap_width
    return min(max(raw, 0.0), 1.0)


class LocalGPTree:
    """Single-writer tree of local GP models; see the module docstring.

    insert/reset must be serialized and must not overlap predict; distinct
    trees are fully independent.
    """

    def __init__(self, config: TreeConfig):
        self.config = config
        self._root: Node = None  # set by reset
        self.reset()

    def reset(self) -> None:
        """Back to the initial state: one empty leaf, generator re-seeded."""
        self._rng = np.random.Generator(np.random.PCG64(self.config.rng_seed))
        self._next_leaf_id = 0
        self._root = self._new_leaf()
        self._n_leaves = 1
        self._stored = 0

    def _new_leaf(self, model: Optional[LocalGP] = None) -> Leaf:
        leaf = Leaf(model if model is not None else LocalGP(self.config.hp),
                    self._next_leaf_id)
        self._next_leaf_id += 1
        return leaf

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.config.hp.d_in,):
            raise ValueError(
                f"input vector must have shape ({self.config.hp.d_in},), got {x.shape}"
            )
        return x

    def insert(self, x, y) -> InsertOutcome:
        """Route one training pair to a leaf; may split the leaf it lands on.

        Returns whether the point was stored (a saturated tree drops points
        whose leaf is full), whether any split happened, and the target leaf.
        """
        x = self._check_x(x)
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.config.hp.d_out,):
            raise ValueError(
                f"output vector must have shape ({self.config.hp.d_out},), got {y.shape}"
            )
        cap = self.config.max_local_data
        split_occurred = False
        parent: Optional[SplitNode] = None
        went_left = False
        node = self._root
        while True:
            if isinstance(node, SplitNode):
                parent = node
                went_left = self._rng.random() < gate_left(node, x)
                node = node.left if went_left else node.right
                continue
            if node.model.n_points < cap:
                node.model.add_point(x, y)
                self._stored += 1
                return InsertOutcome(True, split_occurred, node.id)
            if self._n_leaves >= self.config.max_leaves:
                if not split_occurred:
                    return InsertOutcome(False, split_occurred, None)
                # a split just redistributed <= cap points over two leaves, so
                # the sibling of a full child always has room
                node = parent.right if went_left else parent.left
                assert isinstance(node, Leaf) and node.model.n_points < cap
                continue
            new_split = self._split_leaf(node)
            if parent is None:
                self._root = new_split
            elif went_left:
                parent.left = new_split
            else:
                parent.right = new_split
            split_occurred = True
            node = new_split

    def _split_leaf(self, leaf: Leaf) -> SplitNode:
        """Turn a full leaf into an internal node with two re-fitted children.

        Split dimension: greatest spread (ties to the lowest index); split
        value: median of that coordinate; overlap band: overlap_ratio times
        the spread, floored so degenerate leaves still gate at 0.5.
        """
        X = leaf.model.X
        Y = leaf.model.Y
        spread = X.max(axis=0) - X.min(axis=0)
        dim = int(np.argmax(spread))
        value = float(np.median(X[:, dim]))
        width = max(self.config.overlap_ratio * float(spread[dim]), MIN_OVERLAP_WIDTH)
        split = SplitNode(dim, value, width, self._new_leaf(), self._new_leaf())
        go_left = np.array(
            [self._rng.random() < gate_left(split, X[i]) for i in range(X.shape[0])]
        )
        for child, mask in ((split.left, go_left), (split.right, ~go_left)):
            if mask.any():
                child.model = fit(X[mask], Y[mask], self.config.hp)
        self._n_leaves += 1
        return split

    def predict(self, x) -> np.ndarray:
        """Weight-blended posterior mean over non-empty leaves; zero vector if
        every reachable leaf is empty. No randomness."""
        x = self._check_x(x)
        acc = np.zeros(self.config.hp.d_out)
        wsum = 0.0
        stack = [(self._root, 1.0)]
        while stack:
            node, w = stack.pop()
            if w <= 0.0:
                continue
            if isinstance(node, Leaf):
                if node.model.n_points > 0:
                    acc += w * node.model.predict_mean(x)
                    wsum += w
            else:
                p = gate_left(node, x)
                stack.append((node.left, w * p))
                stack.append((node.right, w * (1.0 - p)))
        if wsum <= 0.0:
            return np.zeros(self.config.hp.d_out)
        return acc / wsum

    def leaf_weights(self, x) -> list[tuple[Leaf, float]]:
        """(leaf, path weight) for every leaf, empty ones included; the
        weights partition unity."""
        x = self._check_x(x)
        out: list[tuple[Leaf, float]] = []
        stack = [(self._root, 1.0)]
        while stack:
            node, w = stack.pop()
            if isinstance(node, Leaf):
                out.append((node, w))
            else:
                p = gate_left(node, x)
                stack.append((node.left, w * p))
                stack.append((node.right, w * (1.0 - p)))
        return out

    def iter_leaves(self) -> Iterator[Leaf]:
        stack = [self._root]
        while stack:
            node = stack.pop()
            if isinstance(node, Leaf):
                yield node
            else:
                stack.append(node.right)
                stack.append(node.left)

    def stats(self) -> TreeStats:
        leaves = 0
        stored = 0
        depth = 0
        stack = [(self._root, 0)]
        while stack:
            node, d = stack.pop()
            if isinstance(node, Leaf):
                leaves += 1
                stored += node.model.n_points
                depth = max(depth, d)
            else:
                stack.append((node.left, d + 1))
                stack.append((node.right, d + 1))
        return TreeStats(leaves, stored, depth)
