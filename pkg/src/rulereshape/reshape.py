"""Leaf-value reshaping of decision trees and forests.

Two estimators, neither of which touches tree structure:

``exact``
    For every split on a constrained variable, constrain each left-subtree
    leaf below each right-subtree leaf whose cells intersect once the split
    variable is ignored. The least-squares projection onto those pairwise
    constraints is computed by recursive minimum-cut partitioning.

``overconstrained``
    For every split on a constrained variable, force every left-subtree leaf
    below every right-subtree leaf. Each such node is a one-dimensional
    problem solved by a breakpoint sweep; nodes are processed deepest level
    first so shallower solves only clip values already ordered below them.
"""

from __future__ import annotations

import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, SolverError
from .iiso import minimize_clipped_quadratic
from .maxflow import FlowNetwork
from .shape import ShapeSpec
from .trees import ForestModel, Tree, leaf_cells, overlapping_pairs

METHODS = {"exact": "exact", "ex": "exact",
           "overconstrained": "overconstrained", "oc": "overconstrained"}


def canonical_method(method: str) -> str:
    try:
        return METHODS[method.lower()]
    except KeyError:
        raise InvalidInputError(
            f"unknown method {method!r}; choose exact or overconstrained") from None


@dataclass
class ConstraintGraph:
    """Leaf values plus directed edges ``(i, j)`` meaning value_i <= value_j."""

    vertices: dict[int, float]
    edges: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        edges = []
        for i, j in self.edges:
            if i == j:
                raise InvalidInputError(f"self-loop on vertex {i}")
            if i not in self.vertices or j not in self.vertices:
                raise InvalidInputError(f"edge ({i}, {j}) refers to an unknown vertex")
            if (i, j) not in seen:
                seen.add((i, j))
                edges.append((i, j))
        self.edges = edges

    def violations(self, values: dict[int, float] | None = None) -> int:
        vals = self.vertices if values is None else values
        return sum(vals[i] > vals[j] for i, j in self.edges)


def build_constraint_graph(tree: Tree, spec: ShapeSpec, n_features: int | None = None) -> ConstraintGraph:
    """Exact-estimator constraint set for one tree.

    Only leaves that appear in some edge become vertices.
    """
    if n_features is None:
        used = tree.features_used() | set(spec.variables)
        n_features = max(used) + 1
    edges, _ = _exact_edges(tree, spec, n_features)
    values = tree.leaf_values()
    involved = sorted({i for e in edges for i in e})
    return ConstraintGraph({i: values[i] for i in involved}, edges)


def _exact_edges(tree: Tree, spec: ShapeSpec, n_features: int) -> tuple[list[tuple[int, int]], int]:
    cells = {c.leaf: c for c in leaf_cells(tree, n_features)}
    edges: list[tuple[int, int]] = []
    n_nodes = 0
    for nd in tree.nodes:
        if nd.is_leaf or nd.feature not in spec:
            continue
        n_nodes += 1
        left = [cells[i] for i in tree.leaves(nd.left)]
        right = [cells[i] for i in tree.leaves(nd.right)]
        pairs = overlapping_pairs(left, right, nd.feature)
        if spec.sign(nd.feature) > 0:
            edges.extend(pairs)
        else:
            edges.extend((r, l) for l, r in pairs)
    return edges, n_nodes


def _topological_order(n: int, succ: list[list[int]]) -> list[int]:
    indeg = [0] * n
    for u in range(n):
        for v in succ[u]:
            indeg[v] += 1
    order = [u for u in range(n) if indeg[u] == 0]
    k = 0
    while k < len(order):
        u = order[k]
        k += 1
        for v in succ[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                order.append(v)
    if len(order) != n:
        raise InvalidInputError("constraint graph has a cycle")
    return order


def _upper_set(y: np.ndarray, S: np.ndarray, edges: list[tuple[int, int]], mean: float) -> np.ndarray:
    """Subset U of S closed under successors maximizing sum(y[U] - mean).

    Max-weight closure as a minimum s-t cut: s -> i with capacity y_i - mean
    when positive, i -> t with the negated weight otherwise, and an
    infinite arc along every constraint edge.
    """
    m = len(S)
    local = {int(g): k for k, g in enumerate(S)}
    w = y[S] - mean
    scale = float(np.max(np.abs(w))) if m else 0.0
    net = FlowNetwork(m + 2, eps=1e-13 * max(scale, 1e-300) * m)
    s, t = m, m + 1
    for k in range(m):
        if w[k] > 0:
            net.add_edge(s, k, float(w[k]))
        elif w[k] < 0:
            net.add_edge(k, t, float(-w[k]))
    for i, j in edges:
        net.add_edge(local[i], local[j], np.inf)
    net.max_flow(s, t)
    side = net.reachable(s)
    return np.array([side[k] for k in range(m)], dtype=bool)


def isotonic_dag(y: np.ndarray, edges: Sequence[tuple[int, int]]) -> np.ndarray:
    """L2 isotonic regression of ``y`` under ``x[i] <= x[j]`` for each edge.

    Vertices are ``0..len(y)-1``. Works by recursive partitioning: a set
    whose values already satisfy its internal constraints is left alone;
    otherwise the set is split at its mean into a lower and an upper part by
    a minimum cut, and each part is solved independently. A set that cannot
    be split is one block at its mean.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    succ: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        succ[i].append(j)
    order = _topological_order(n, succ)
    x = np.empty(n)

    # Components first; most leaves are in small or trivial components.
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in edges:
        parent[find(i)] = find(j)
    groups: dict[int, list[int]] = defaultdict(list)
    for i in range(n):
        groups[find(i)].append(i)
    edges_of: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for i, j in edges:
        edges_of[find(i)].append((i, j))

    work = [(np.array(g), edges_of[r]) for r, g in groups.items()]
    while work:
        S, E = work.pop()
        if all(y[i] <= y[j] for i, j in E):
            x[S] = y[S]
            continue
        mean = float(np.mean(y[S]))
        upper = _upper_set(y, S, E, mean)
        if not upper.any() or upper.all():
            x[S] = mean
            continue
        in_upper = set(S[upper].tolist())
        E_up = [(i, j) for i, j in E if i in in_upper and j in in_upper]
        E_lo = [(i, j) for i, j in E if i not in in_upper and j not in in_upper]
        work.append((S[upper], E_up))
        work.append((S[~upper], E_lo))

    # Block means of nearly equal blocks can disagree in the last bits; push
    # values up along a topological order so every edge holds exactly.
    drift = 0.0
    for u in order:
        for v in succ[u]:
            if x[v] < x[u]:
                drift = max(drift, x[u] - x[v])
                x[v] = x[u]
    scale = max(1.0, float(np.max(np.abs(y)))) if n else 1.0
    if drift > 1e-9 * scale:
        raise SolverError(f"partitioning left constraint violations of size {drift:g}")
    return x


def dag_isotonic_exact(graph: ConstraintGraph) -> dict[int, float]:
    """Least-squares projection of the graph's vertex values onto its edges."""
    ids = list(graph.vertices)
    index = {v: k for k, v in enumerate(ids)}
    y = np.array([graph.vertices[v] for v in ids], dtype=float)
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("vertex values must be finite")
    x = isotonic_dag(y, [(index[i], index[j]) for i, j in graph.edges])
    return {v: float(x[k]) for k, v in enumerate(ids)}


def solve_node_overconstrained(left, right) -> tuple[np.ndarray, np.ndarray, float]:
    """Least-squares fit with every left value below every right value.

    The optimum clips the left values from above and the right values from
    below at a common ``c``. Outputs keep the input order.
    """
    lv = np.asarray(left, dtype=float)
    rv = np.asarray(right, dtype=float)
    if len(lv) == 0 or len(rv) == 0:
        raise InvalidInputError("both sides of a split need at least one leaf")
    if not (np.all(np.isfinite(lv)) and np.all(np.isfinite(rv))):
        raise InvalidInputError("leaf values must be finite")
    lmax, rmin = float(lv.max()), float(rv.min())
    if lmax <= rmin:
        return lv.copy(), rv.copy(), 0.5 * (lmax + rmin)
    ls = np.sort(lv, kind="stable").tolist()
    rs = np.sort(rv, kind="stable").tolist()
    c = minimize_clipped_quadratic(((m, 1.0, m) for m in ls), ((m, 1.0, m) for m in rs), 0.0, 0.0)
    return np.minimum(lv, c), np.maximum(rv, c), float(c)


@dataclass
class TreeStats:
    edges: int = 0
    objective: float = 0.0
    nodes_solved: int = 0


@dataclass
class ReshapeReport:
    method: str
    edges: int
    objective: float
    nodes_solved: int
    wall_ms: float

    def to_dict(self) -> dict:
        return asdict(self)


def _reshape_exact(tree: Tree, spec: ShapeSpec, n_features: int) -> tuple[Tree, TreeStats]:
    edges, n_nodes = _exact_edges(tree, spec, n_features)
    values = tree.leaf_values()
    involved = sorted({i for e in edges for i in e})
    graph = ConstraintGraph({i: values[i] for i in involved}, edges)
    fitted = dag_isotonic_exact(graph) if graph.edges else {}
    obj = sum((fitted[i] - values[i]) ** 2 for i in fitted)
    return tree.with_leaf_values(fitted), TreeStats(len(graph.edges), float(obj), n_nodes)


def _reshape_overconstrained(tree: Tree, spec: ShapeSpec) -> tuple[Tree, TreeStats]:
    original = tree.leaf_values()
    values = dict(original)
    stats = TreeStats()
    for level in reversed(tree.levels()):
        for nid in level:
            nd = tree.node(nid)
            if nd.feature not in spec:
                continue
            lids = tree.leaves(nd.left)
            rids = tree.leaves(nd.right)
            if spec.sign(nd.feature) < 0:
                lids, rids = rids, lids
            lo, hi, _ = solve_node_overconstrained([values[i] for i in lids],
                                                   [values[i] for i in rids])
            values.update(zip(lids, lo.tolist()))
            values.update(zip(rids, hi.tolist()))
            stats.nodes_solved += 1
            stats.edges += len(lids) * len(rids)
    stats.objective = float(sum((values[i] - original[i]) ** 2 for i in original))
    return tree.with_leaf_values(values), stats


def reshape_tree_stats(tree: Tree, spec: ShapeSpec, method: str,
                       n_features: int | None = None) -> tuple[Tree, TreeStats]:
    method = canonical_method(method)
    if method == "exact":
        if n_features is None:
            n_features = max(tree.features_used() | set(spec.variables)) + 1
        return _reshape_exact(tree, spec, n_features)
    return _reshape_overconstrained(tree, spec)


def reshape_tree(tree: Tree, spec: ShapeSpec, method: str = "exact",
                 n_features: int | None = None) -> Tree:
    """Tree with the same splits and leaf values reshaped to be monotone."""
    return reshape_tree_stats(tree, spec, method, n_features)[0]


def _tree_job(args):
    tree, spec, method, d = args
    return reshape_tree_stats(tree, spec, method, d)


def run_reshape(model: ForestModel, spec: ShapeSpec, method: str = "exact",
                jobs: int = 1) -> tuple[ForestModel, ReshapeReport]:
    """Reshape every tree and summarize the run.

    ``edges`` counts pairwise constraints: graph edges for the exact method,
    left-by-right leaf pairs over all solved nodes for the over-constrained
    one. ``objective`` is the total squared change of leaf values.
    """
    method = canonical_method(method)
    spec.validate_dimension(model.n_features)
    start = time.perf_counter()
    args = [(t, spec, method, model.n_features) for t in model.trees]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_tree_job, args))
    else:
        results = [_tree_job(a) for a in args]
    wall_ms = (time.perf_counter() - start) * 1000.0
    report = ReshapeReport(
        method=method,
        edges=sum(s.edges for _, s in results),
        objective=float(sum(s.objective for _, s in results)),
        nodes_solved=sum(s.nodes_solved for _, s in results),
        wall_ms=wall_ms,
    )
    return model.with_trees([t for t, _ in results]), report


def reshape_forest(model: ForestModel, spec: ShapeSpec, method: str = "exact",
                   jobs: int = 1) -> ForestModel:
    return run_reshape(model, spec, method, jobs)[0]
