"""Portable decision-forest models.

Trees use axis-aligned splits ``x[feature] <= threshold`` (go left) versus
``x[feature] > threshold`` (go right). A forest predicts the arithmetic mean
of its trees. Probability forests are the same object with every leaf value
in ``[0, 1]``.

Model files are JSON::

    {"format_version": 1, "task": "regression", "n_features": 3,
     "routing": "le_left",
     "trees": [{"root": 0, "nodes": [
         {"id": 0, "feature": 2, "threshold": 0.5, "left": 1, "right": 2},
         {"id": 1, "value": 1.0}, {"id": 2, "value": 3.0}]}]}
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError, InvalidModelError, ModelParseError
from .intervals import IntervalIndex

FORMAT_VERSION = 1
ROUTING = "le_left"
TASKS = ("regression", "probability")


@dataclass(frozen=True)
class TreeNode:
    """A split node (``feature``, ``threshold``, ``left``, ``right``) or a
    leaf (``value``)."""

    id: int
    feature: int | None = None
    threshold: float | None = None
    left: int | None = None
    right: int | None = None
    value: float | None = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"id": self.id, "value": self.value}
        return {"id": self.id, "feature": self.feature, "threshold": self.threshold,
                "left": self.left, "right": self.right}


class Tree:
    """Immutable binary decision tree.

    Construction validates that ``nodes`` form a single tree rooted at
    ``root``: unique ids, every child present, every non-root node with
    exactly one parent, and no cycles.
    """

    def __init__(self, nodes: Iterable[TreeNode], root: int):
        self._nodes: dict[int, TreeNode] = {}
        for nd in nodes:
            if nd.id in self._nodes:
                raise InvalidInputError(f"duplicate node id {nd.id}")
            self._nodes[nd.id] = nd
        if root not in self._nodes:
            raise InvalidInputError(f"root id {root} is not a node")
        self.root = root
        self._validate()
        self._compile()

    def _validate(self) -> None:
        parent: dict[int, int] = {}
        for nd in self._nodes.values():
            if nd.is_leaf:
                if nd.value is None or not np.isfinite(nd.value):
                    raise InvalidInputError(f"leaf {nd.id} has invalid value {nd.value!r}")
                continue
            if nd.feature < 0:
                raise InvalidInputError(f"node {nd.id} has negative feature {nd.feature}")
            if nd.threshold is None or not np.isfinite(nd.threshold):
                raise InvalidInputError(f"node {nd.id} has invalid threshold {nd.threshold!r}")
            for child in (nd.left, nd.right):
                if child not in self._nodes:
                    raise InvalidInputError(f"node {nd.id} refers to missing child {child}")
                if child == self.root or child in parent:
                    raise InvalidInputError(
                        f"node {child} has more than one parent (cycle or shared subtree)")
                parent[child] = nd.id
        # Single parent per node plus full reachability from the root rules out cycles.
        seen = set()
        stack = [self.root]
        while stack:
            i = stack.pop()
            seen.add(i)
            nd = self._nodes[i]
            if not nd.is_leaf:
                stack.extend((nd.left, nd.right))
        unreachable = sorted(set(self._nodes) - seen)
        if unreachable:
            raise InvalidInputError(f"nodes {unreachable} are not reachable from the root")

    def _compile(self) -> None:
        order: list[int] = []
        depth: dict[int, int] = {self.root: 0}
        stack = [self.root]
        while stack:
            i = stack.pop()
            order.append(i)
            nd = self._nodes[i]
            if not nd.is_leaf:
                depth[nd.left] = depth[nd.right] = depth[i] + 1
                stack.extend((nd.right, nd.left))
        pos = {i: p for p, i in enumerate(order)}
        m = len(order)
        self._order = order
        self._pos = pos
        self._depth = depth
        self._feature = np.full(m, -1, dtype=np.int64)
        self._threshold = np.zeros(m)
        self._left = np.zeros(m, dtype=np.int64)
        self._right = np.zeros(m, dtype=np.int64)
        self._value = np.zeros(m)
        for p, i in enumerate(order):
            nd = self._nodes[i]
            if nd.is_leaf:
                self._value[p] = nd.value
            else:
                self._feature[p] = nd.feature
                self._threshold[p] = nd.threshold
                self._left[p] = pos[nd.left]
                self._right[p] = pos[nd.right]
        self.max_depth = max(depth.values())

    # -- structure -----------------------------------------------------
    @property
    def nodes(self) -> list[TreeNode]:
        """Nodes in preorder (root, left subtree, right subtree)."""
        return [self._nodes[i] for i in self._order]

    def node(self, node_id: int) -> TreeNode:
        return self._nodes[node_id]

    def depth(self, node_id: int) -> int:
        return self._depth[node_id]

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self._feature < 0))

    def leaves(self, node_id: int | None = None) -> list[int]:
        """Leaf ids under ``node_id`` (default root), left to right."""
        start = self.root if node_id is None else node_id
        out = []
        stack = [start]
        while stack:
            nd = self._nodes[stack.pop()]
            if nd.is_leaf:
                out.append(nd.id)
            else:
                stack.extend((nd.right, nd.left))
        return out

    def leaf_values(self) -> dict[int, float]:
        return {i: self._nodes[i].value for i in self.leaves()}

    def levels(self) -> list[list[int]]:
        """Internal node ids grouped by depth, each level left to right."""
        out: list[list[int]] = [[] for _ in range(self.max_depth + 1)]
        for i in self._order:
            if not self._nodes[i].is_leaf:
                out[self._depth[i]].append(i)
        return [lvl for lvl in out if lvl]

    def features_used(self) -> set[int]:
        return {int(f) for f in self._feature if f >= 0}

    def thresholds(self, feature: int) -> np.ndarray:
        return np.unique(self._threshold[self._feature == feature])

    def with_leaf_values(self, values: Mapping[int, float]) -> "Tree":
        """Copy of the tree with the given leaves' values replaced."""
        nodes = []
        for nd in self.nodes:
            if nd.is_leaf and nd.id in values:
                nd = TreeNode(nd.id, value=float(values[nd.id]))
            nodes.append(nd)
        return Tree(nodes, self.root)

    # -- prediction ----------------------------------------------------
    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf id reached by every row of ``X``."""
        return np.asarray(self._order)[self._route(X)]

    def _route(self, X: np.ndarray) -> np.ndarray:
        pos = np.zeros(X.shape[0], dtype=np.int64)
        for _ in range(self.max_depth):
            f = self._feature[pos]
            idx = np.flatnonzero(f >= 0)
            if idx.size == 0:
                break
            p = pos[idx]
            go_left = X[idx, f[idx]] <= self._threshold[p]
            pos[idx] = np.where(go_left, self._left[p], self._right[p])
        return pos

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self._value[self._route(X)]

    # -- misc ----------------------------------------------------------
    def to_dict(self) -> dict:
        return {"root": self.root, "nodes": [nd.to_dict() for nd in self.nodes]}

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tree):
            return NotImplemented
        return self.root == other.root and self._nodes == other._nodes

    def __repr__(self) -> str:
        return f"Tree(nodes={len(self._nodes)}, leaves={self.n_leaves}, depth={self.max_depth})"


@dataclass
class ForestModel:
    trees: list[Tree]
    n_features: int
    task: str = "regression"

    def __post_init__(self):
        if not self.trees:
            raise InvalidInputError("a forest needs at least one tree")
        if self.task not in TASKS:
            raise InvalidInputError(f"task must be one of {TASKS}, got {self.task!r}")
        for t, tree in enumerate(self.trees):
            used = tree.features_used()
            if used and max(used) >= self.n_features:
                raise InvalidInputError(
                    f"tree {t} splits on feature {max(used)} but n_features={self.n_features}")
            if self.task == "probability":
                vals = np.array(list(tree.leaf_values().values()))
                if np.any((vals < 0) | (vals > 1)):
                    raise InvalidModelError(f"tree {t} has leaf probabilities outside [0, 1]")

    def predict(self, X) -> np.ndarray:
        """Mean of the tree predictions for every row of ``X``."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise InvalidInputError(
                f"expected an (m, {self.n_features}) array, got shape {X.shape}")
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.predict(X)
        return total / len(self.trees)

    def with_trees(self, trees: Sequence[Tree]) -> "ForestModel":
        return ForestModel(list(trees), self.n_features, self.task)

    def thresholds(self, feature: int) -> np.ndarray:
        return np.unique(np.concatenate([t.thresholds(feature) for t in self.trees]))

    def to_dict(self) -> dict:
        return {"format_version": FORMAT_VERSION, "task": self.task,
                "n_features": self.n_features, "routing": ROUTING,
                "trees": [t.to_dict() for t in self.trees]}

    def __eq__(self, other) -> bool:
        if not isinstance(other, ForestModel):
            return NotImplemented
        return (self.n_features == other.n_features and self.task == other.task
                and self.trees == other.trees)


def predict(model: ForestModel, x) -> float:
    """Forest prediction for a single feature vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) != model.n_features:
        raise InvalidInputError(f"expected a vector of length {model.n_features}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("feature vector contains non-finite entries")
    return float(model.predict(x[None, :])[0])


# -- serialization ------------------------------------------------------

def _require(obj: dict, key: str, kinds, location: str):
    if key not in obj:
        raise ModelParseError(f"missing field {key!r}", location)
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, kinds):
        raise ModelParseError(f"field {key!r} has wrong type {type(val).__name__}", location)
    return val


def _node_from_dict(obj, location: str) -> TreeNode:
    if not isinstance(obj, dict):
        raise ModelParseError("node must be an object", location)
    nid = _require(obj, "id", int, location)
    if "value" in obj:
        if "feature" in obj:
            raise ModelParseError("node has both 'value' and 'feature'", location)
        return TreeNode(nid, value=float(_require(obj, "value", (int, float), location)))
    return TreeNode(
        nid,
        feature=_require(obj, "feature", int, location),
        threshold=float(_require(obj, "threshold", (int, float), location)),
        left=_require(obj, "left", int, location),
        right=_require(obj, "right", int, location),
    )


def forest_from_dict(doc) -> ForestModel:
    if not isinstance(doc, dict):
        raise ModelParseError("top level must be an object", "$")
    version = _require(doc, "format_version", int, "$")
    if version != FORMAT_VERSION:
        raise ModelParseError(f"unsupported format_version {version}", "$")
    routing = _require(doc, "routing", str, "$")
    if routing != ROUTING:
        raise ModelParseError(
            f"routing convention {routing!r} not supported; only {ROUTING!r} (x <= t goes left)", "$")
    task = _require(doc, "task", str, "$")
    n_features = _require(doc, "n_features", int, "$")
    if n_features < 1:
        raise ModelParseError("n_features must be positive", "$")
    trees_doc = _require(doc, "trees", list, "$")
    if not trees_doc:
        raise ModelParseError("forest has no trees", "$.trees")
    trees = []
    for t, tdoc in enumerate(trees_doc):
        loc = f"trees[{t}]"
        if not isinstance(tdoc, dict):
            raise ModelParseError("tree must be an object", loc)
        nodes_doc = _require(tdoc, "nodes", list, loc)
        root = _require(tdoc, "root", int, loc)
        nodes = [_node_from_dict(nd, f"{loc}.nodes[{j}]") for j, nd in enumerate(nodes_doc)]
        try:
            trees.append(Tree(nodes, root))
        except InvalidInputError as exc:
            raise ModelParseError(str(exc), loc) from None
    try:
        return ForestModel(trees, n_features, task)
    except (InvalidInputError, InvalidModelError) as exc:
        raise ModelParseError(str(exc), "$") from None


def loads_forest(text: str) -> ForestModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    return forest_from_dict(doc)


def load_forest(path: str | os.PathLike) -> ForestModel:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ModelParseError(f"cannot read model file: {exc.strerror}", str(path)) from None
    return loads_forest(text)


def dumps_forest(model: ForestModel) -> str:
    # json writes floats via repr, the shortest string that round-trips.
    return json.dumps(model.to_dict(), indent=1, allow_nan=False)


def save_forest(model: ForestModel, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_forest(model))
        fh.write("\n")


def from_sklearn(estimator, task: str | None = None) -> ForestModel:
    """Convert a fitted scikit-learn tree or forest.

    Regressors keep their leaf means; binary classifiers become probability
    forests storing P(class 1) in each leaf. scikit-learn routes
    ``x <= threshold`` left, matching this package.
    """
    ests = getattr(estimator, "estimators_", None)
    ests = [estimator] if ests is None else list(np.ravel(ests))
    is_clf = hasattr(estimator, "classes_")
    if task is None:
        task = "probability" if is_clf else "regression"
    trees = []
    for est in ests:
        tr = est.tree_
        nodes = []
        for j in range(tr.node_count):
            left, right = int(tr.children_left[j]), int(tr.children_right[j])
            if left == -1:
                val = tr.value[j]
                if is_clf:
                    if val.shape[-1] != 2:
                        raise InvalidInputError("only binary classifiers are supported")
                    counts = val[0]
                    v = float(counts[1] / counts.sum())
                else:
                    v = float(val[0][0])
                nodes.append(TreeNode(j, value=v))
            else:
                nodes.append(TreeNode(j, feature=int(tr.feature[j]),
                                      threshold=float(tr.threshold[j]), left=left, right=right))
        trees.append(Tree(nodes, 0))
    return ForestModel(trees, int(estimator.n_features_in_), task)


# -- cell geometry --------------------------------------------------------

@dataclass
class LeafCell:
    """Axis-aligned box routed to one leaf: ``lower[j] < x[j] <= upper[j]``."""

    leaf: int
    lower: np.ndarray
    upper: np.ndarray

    @property
    def is_empty(self) -> bool:
        return bool(np.any(self.lower >= self.upper))

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all((self.lower < x) & (x <= self.upper)))


def leaf_cells(tree: Tree, n_features: int | None = None, node_id: int | None = None) -> list[LeafCell]:
    """Cells of the leaves under ``node_id`` (default root), left to right.

    Bounds are accumulated from the root, so cells of a subtree include the
    constraints of that subtree's ancestors. Features never split on keep
    ``(-inf, inf)``.
    """
    if n_features is None:
        used = tree.features_used()
        n_features = max(used) + 1 if used else 1
    lo = np.full(n_features, -np.inf)
    hi = np.full(n_features, np.inf)
    # Walk down to the starting node to pick up its ancestors' bounds.
    start = tree.root if node_id is None else node_id
    if start != tree.root:
        path = _path_to(tree, start)
        for parent, went_left in path:
            nd = tree.node(parent)
            if went_left:
                hi[nd.feature] = min(hi[nd.feature], nd.threshold)
            else:
                lo[nd.feature] = max(lo[nd.feature], nd.threshold)
    out = []
    stack = [(start, lo, hi)]
    while stack:
        i, lo_i, hi_i = stack.pop()
        nd = tree.node(i)
        if nd.is_leaf:
            out.append(LeafCell(i, lo_i, hi_i))
            continue
        f, t = nd.feature, nd.threshold
        hi_l = hi_i.copy()
        hi_l[f] = min(hi_l[f], t)
        lo_r = lo_i.copy()
        lo_r[f] = max(lo_r[f], t)
        stack.append((nd.right, lo_r, hi_i))
        stack.append((nd.left, lo_i, hi_l))
    return out


def _path_to(tree: Tree, target: int) -> list[tuple[int, bool]]:
    stack: list[tuple[int, list]] = [(tree.root, [])]
    while stack:
        i, path = stack.pop()
        if i == target:
            return path
        nd = tree.node(i)
        if not nd.is_leaf:
            stack.append((nd.left, path + [(i, True)]))
            stack.append((nd.right, path + [(i, False)]))
    raise InvalidInputError(f"node {target} not in tree")


def overlapping_pairs(left_cells: Sequence[LeafCell], right_cells: Sequence[LeafCell],
                      drop_feature: int) -> list[tuple[int, int]]:
    """Pairs ``(l, r)`` whose cells intersect once ``drop_feature`` is ignored.

    Candidates come from an interval tree over the right cells on one
    remaining feature; the other features are then checked directly. Empty
    cells are never paired.
    """
    lefts = [c for c in left_cells if not c.is_empty]
    rights = [c for c in right_cells if not c.is_empty]
    if not lefts or not rights:
        return []
    d = len(lefts[0].lower)
    others = [j for j in range(d) if j != drop_feature]
    if not others:
        return sorted((l.leaf, r.leaf) for l in lefts for r in rights)
    # Index on the most selective feature: the one with the most finite bounds.
    key = max(others, key=lambda j: sum(np.isfinite(c.lower[j]) + np.isfinite(c.upper[j])
                                        for c in rights))
    by_leaf = {c.leaf: c for c in rights}
    index = IntervalIndex((c.lower[key], c.upper[key], c.leaf) for c in rights)
    rest = [j for j in others if j != key]
    pairs = []
    for lc in lefts:
        for rid in index.overlapping(lc.lower[key], lc.upper[key]):
            rc = by_leaf[rid]
            if all(max(lc.lower[j], rc.lower[j]) < min(lc.upper[j], rc.upper[j]) for j in rest):
                pairs.append((lc.leaf, rid))
    return sorted(pairs)
