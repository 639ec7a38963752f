"""Conflict-graph construction and user/group selection.

Nodes are users (or pre-formed co-located groups); a node's weight is the
angular support of its channel spectrum, and an edge carries the overlap
of two supports.  Two selection objectives are provided:

* coverage: maximize the summed spectral mass retained after removing
  every overlap with other selected nodes (tends to serve fewer nodes
  with higher gain);
* count: maximize how many nodes keep at least an epsilon-measure
  private region (tends to serve more nodes with lower gain).

Each objective comes with a greedy algorithm and an exhaustive-search
oracle.  All tie-breaking is by lowest node index, for determinism.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import partial
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .angular import AngularSet
from .channel import ArrayGeometry, UserProfile, spectral_density_integral, spectral_support

DEFAULT_EXHAUSTIVE_CAP = 20


@dataclass(frozen=True, eq=False)
class GraphNode:
    index: int
    node_id: str
    support: AngularSet
    value: Callable[[AngularSet], float]  # spectral mass of a subset of the support


class ConflictGraph:
    """Immutable conflict graph over user supports."""

    def __init__(self, nodes: Sequence[GraphNode]):
        self.nodes = tuple(nodes)
        edges: dict[tuple[int, int], AngularSet] = {}
        for a, b in itertools.combinations(self.nodes, 2):
            overlap = a.support.intersect(b.support)
            if not overlap.is_empty:
                edges[(a.index, b.index)] = overlap
        self.edges = edges
        neighbors: dict[int, list[int]] = {n.index: [] for n in self.nodes}
        for i, j in edges:
            neighbors[i].append(j)
            neighbors[j].append(i)
        self.neighbors = {k: tuple(sorted(v)) for k, v in neighbors.items()}

    @classmethod
    def from_supports(
        cls,
        supports: Sequence[AngularSet],
        node_ids: Optional[Sequence[str]] = None,
        values: Optional[Sequence[Callable[[AngularSet], float]]] = None,
    ) -> "ConflictGraph":
        """Build directly from supports; node value defaults to plain measure."""
        ids = node_ids or [str(i + 1) for i in range(len(supports))]
        nodes = [
            GraphNode(
                index=i,
                node_id=str(ids[i]),
                support=w,
                value=values[i] if values else (lambda s: s.measure),
            )
            for i, w in enumerate(supports)
        ]
        return cls(nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def edge(self, i: int, j: int) -> AngularSet:
        return self.edges.get((min(i, j), max(i, j)), AngularSet.empty())

    def degree(self, i: int) -> int:
        return len(self.neighbors[i])

    def retained(self, i: int, active: Iterable[int]) -> AngularSet:
        """Support of node i minus its overlaps with the active nodes."""
        active = set(active)
        out = self.nodes[i].support
        for j in self.neighbors[i]:
            if j in active and j != i:
                out = out.difference(self.edge(i, j))
        return out


def build_graph(
    profiles: Sequence[UserProfile],
    geometry: ArrayGeometry,
    objective: str = "power",
) -> ConflictGraph:
    """Conflict graph of user profiles.

    ``objective`` picks the node value used by the coverage objective:
    "power" integrates each node's own spectral density, "measure" uses
    plain interval length.
    """
    if not profiles:
        raise ValueError("at least one profile is required")
    if objective not in ("power", "measure"):
        raise ValueError(f"unknown objective {objective!r}")
    nodes = []
    for i, prof in enumerate(profiles):
        if objective == "power":
            value = partial(spectral_density_integral, geometry, prof)
        else:
            value = lambda s: s.measure  # noqa: E731
        nodes.append(
            GraphNode(
                index=i,
                node_id=str(prof.user_id),
                support=spectral_support(geometry, prof),
                value=value,
            )
        )
    return ConflictGraph(nodes)


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of a selection run: indicator vector, retained sets, objective.

    ``selected`` is ascending; ``order`` preserves the insertion order of a
    greedy run (equal to ``selected`` for exhaustive search).
    """

    x: tuple[int, ...]
    selected: tuple[int, ...]
    order: tuple[int, ...]
    node_ids: tuple[str, ...]
    retained: Mapping[int, AngularSet]
    objective: float

    def __post_init__(self):
        assert all(self.x[i] == 1 for i in self.selected)


def _result(graph: ConflictGraph, order: Sequence[int], objective: float) -> SelectionResult:
    active = set(order)
    selected = tuple(sorted(active))
    x = tuple(1 if i in active else 0 for i in range(len(graph)))
    retained = {i: graph.retained(i, active) for i in selected}
    return SelectionResult(
        x=x,
        selected=selected,
        order=tuple(order),
        node_ids=tuple(graph.nodes[i].node_id for i in selected),
        retained=retained,
        objective=objective,
    )


def select_all(graph: ConflictGraph) -> SelectionResult:
    """Trivial selection keeping every node (retained sets under all-active)."""
    everyone = list(range(len(graph)))
    return _result(graph, everyone, float(len(everyone)))


def objective_q1(graph: ConflictGraph, x: Sequence[int]) -> float:
    """Total spectral mass retained by the selected nodes.

    Each selected node keeps its support minus the overlaps with all of
    its selected neighbors; unselected nodes contribute nothing.
    """
    if len(x) != len(graph):
        raise ValueError("indicator length must equal the node count")
    active = [i for i, xi in enumerate(x) if xi]
    return sum(graph.nodes[i].value(graph.retained(i, active)) for i in active)


def greedy_algorithm_1(graph: ConflictGraph) -> SelectionResult:
    """Grow the selection by the node giving the largest objective gain.

    Starts empty, adds the argmax-increment node (lowest index on ties),
    and stops as soon as no single addition strictly increases the
    coverage objective.
    """
    x = [0] * len(graph)
    current = 0.0
    selected: list[int] = []
    remaining = set(range(len(graph)))
    while remaining:
        best_idx, best_val = None, current
        for k in sorted(remaining):
            x[k] = 1
            val = objective_q1(graph, x)
            x[k] = 0
            if val > best_val:
                best_idx, best_val = k, val
        if best_idx is None:
            break
        x[best_idx] = 1
        current = best_val
        selected.append(best_idx)
        remaining.discard(best_idx)
    return _result(graph, selected, current)


def _survives(retained: AngularSet, epsilon: float) -> bool:
    # Strict-measure threshold; at epsilon = 0 a node survives iff its
    # retained set is structurally non-empty.
    if epsilon > 0:
        return retained.measure >= epsilon
    return not retained.is_empty


def feasible_set(graph: ConflictGraph, current: Iterable[int], epsilon: float) -> set[int]:
    """Nodes whose addition keeps every active retained set above epsilon."""
    current = set(current)
    out = set()
    for k in range(len(graph)):
        if k in current:
            continue
        active = current | {k}
        if all(_survives(graph.retained(m, active), epsilon) for m in active):
            out.add(k)
    return out


def greedy_algorithm_2(graph: ConflictGraph, epsilon: float) -> SelectionResult:
    """Grow the selection by the feasible node of minimum degree.

    Repeatedly adds the lowest-degree feasible node (lowest index on
    ties) until no node can join without shrinking someone's private
    region below epsilon.  The objective is the selection cardinality.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    selected: list[int] = []
    while True:
        feasible = feasible_set(graph, selected, epsilon)
        if not feasible:
            break
        k_star = min(feasible, key=lambda k: (graph.degree(k), k))
        selected.append(k_star)
    return _result(graph, selected, float(len(selected)))


def exhaustive_search(
    graph: ConflictGraph,
    objective: str = "q1",
    epsilon: float = 0.0,
    cap: int = DEFAULT_EXHAUSTIVE_CAP,
) -> SelectionResult:
    """Optimal selection by enumerating all indicator vectors.

    For "q1" returns the coverage argmax; for "q2" returns a maximum-
    cardinality selection whose every member keeps a private region of
    measure at least epsilon.  Ties go to the lexicographically smallest
    indicator vector.
    """
    k = len(graph)
    if k > cap:
        raise ValueError(f"node count {k} exceeds the exhaustive-search cap {cap}")
    if objective not in ("q1", "q2"):
        raise ValueError(f"unknown exhaustive objective {objective!r}")
    best_x: Optional[tuple[int, ...]] = None
    best_val = -1.0
    for x in itertools.product((0, 1), repeat=k):
        if objective == "q1":
            val = objective_q1(graph, x)
        else:
            active = [i for i, xi in enumerate(x) if xi]
            if not all(_survives(graph.retained(m, active), epsilon) for m in active):
                continue
            val = float(len(active))
        if val > best_val:
            best_x, best_val = x, val
    assert best_x is not None  # the all-zero vector is always evaluated
    return _result(graph, [i for i, xi in enumerate(best_x) if xi], best_val)
