"""Path decompositions: validation, construction, and the closed-neighborhood
closure used by the specification-checking DP.

Exact small-width construction goes through the vertex separation number: the
minimum over vertex orderings of the maximum boundary size equals pathwidth,
and an optimal ordering yields bags boundary(prefix) + next vertex. The search
is a subset DP, feasible to n ~ 20.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from anspec.core import ContractError, InputError, NetworkGraph

EXACT_SMALL_LIMIT = 20


@dataclass(frozen=True)
class PathDecomposition:
    """Ordered bags X_1..X_p, each a sorted node tuple (canonical for hashing)."""

    bags: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "bags", tuple(tuple(sorted(set(b))) for b in self.bags))

    @property
    def width(self) -> int:
        return max(len(b) for b in self.bags) - 1

    def node_interval(self, v: int) -> tuple[int, int]:
        idx = [i for i, b in enumerate(self.bags) if v in b]
        return (idx[0], idx[-1])


@dataclass(frozen=True)
class DecompositionViolation:
    axiom: str  # "coverage" | "edge" | "interval"
    witness: tuple

    def __bool__(self) -> bool:  # a violation is truthy; use validate() is None for "ok"
        return True


def validate(graph: NetworkGraph, decomp: PathDecomposition) -> DecompositionViolation | None:
    """Check the three path-decomposition axioms; None means ok."""
    covered = set()
    for bag in decomp.bags:
        for v in bag:
            if not 0 <= v < graph.n:
                raise InputError(f"bag node {v} outside graph")
        covered.update(bag)
    if covered != set(range(graph.n)):
        missing = sorted(set(range(graph.n)) - covered)
        return DecompositionViolation("coverage", tuple(missing))
    for u, v in sorted(graph.edges):
        if not any(u in bag and v in bag for bag in decomp.bags):
            return DecompositionViolation("edge", (u, v))
    for v in range(graph.n):
        idx = [i for i, bag in enumerate(decomp.bags) if v in bag]
        lo, hi = idx[0], idx[-1]
        for i in range(lo, hi + 1):
            if v not in decomp.bags[i]:
                return DecompositionViolation("interval", (v, lo, i, hi))
    return None


def _boundary(graph: NetworkGraph, placed: frozenset[int]) -> frozenset[int]:
    return frozenset(
        u for u in placed if any(w not in placed for w in graph.neighbors(u))
    )


def decomposition_from_ordering(graph: NetworkGraph, ordering: tuple[int, ...]) -> PathDecomposition:
    """Bags boundary(prefix_{i-1}) + v_i, one per placed vertex."""
    bags = []
    placed: frozenset[int] = frozenset()
    for v in ordering:
        bags.append(tuple(sorted(_boundary(graph, placed) | {v})))
        placed = placed | {v}
    return PathDecomposition(tuple(bags))


def exact_pathwidth_ordering(graph: NetworkGraph) -> tuple[int, tuple[int, ...]]:
    """Minimum vertex separation and a witnessing ordering (subset DP)."""
    n = graph.n
    if n > EXACT_SMALL_LIMIT:
        raise ContractError(f"exact-small limited to n <= {EXACT_SMALL_LIMIT}, got {n}")
    nbr_masks = [0] * n
    for v in range(n):
        for w in graph.neighbors(v):
            nbr_masks[v] |= 1 << w
    full = (1 << n) - 1

    def boundary_size(mask: int) -> int:
        count = 0
        rest = mask
        while rest:
            b = rest & -rest
            v = b.bit_length() - 1
            rest ^= b
            if nbr_masks[v] & ~mask & full:
                count += 1
        return count

    # cost[mask] = min over orderings of the prefix `mask` of the max boundary.
    cost = {0: 0}
    parent: dict[int, int] = {}
    for mask in range(1, full + 1):
        best = None
        best_v = -1
        bsz = boundary_size(mask)
        rest = mask
        while rest:
            b = rest & -rest
            v = b.bit_length() - 1
            rest ^= b
            prev = mask ^ (1 << v)
            if prev not in cost:
                continue
            cand = max(cost[prev], bsz)
            if best is None or cand < best:
                best, best_v = cand, v
        if best is not None:
            cost[mask] = best
            parent[mask] = best_v
    width = cost[full]
    order: list[int] = []
    mask = full
    while mask:
        v = parent[mask]
        order.append(v)
        mask ^= 1 << v
    order.reverse()
    return width, tuple(order)


def decompose(graph: NetworkGraph, strategy: str = "exact-small") -> PathDecomposition:
    """Build a valid decomposition.

    exact-small     : minimum width via the ordering DP (n <= 20).
    grid-columns    : consecutive column pairs of a k x d grid (width 2k-1);
                      the graph must be a grid built by NetworkGraph.grid.
    greedy-interval : BFS ordering fed to the boundary construction; valid,
                      no optimality promise.
    """
    if strategy == "exact-small":
        width, order = exact_pathwidth_ordering(graph)
        decomp = decomposition_from_ordering(graph, order)
        assert decomp.width == width
        return decomp
    if strategy == "grid-columns":
        return grid_columns_decomposition(graph)
    if strategy == "greedy-interval":
        order = _bfs_order(graph)
        return decomposition_from_ordering(graph, order)
    raise InputError(f"unknown strategy {strategy!r}")


def _bfs_order(graph: NetworkGraph) -> tuple[int, ...]:
    seen = [0]
    seen_set = {0}
    i = 0
    while i < len(seen):
        for w in graph.neighbors(seen[i]):
            if w not in seen_set:
                seen_set.add(w)
                seen.append(w)
        i += 1
    return tuple(seen)


def infer_grid_shape(graph: NetworkGraph) -> tuple[int, int]:
    """Recover (rows, cols) of a NetworkGraph.grid graph from its edges."""
    n = graph.n
    # In row-major numbering, node 0's neighbors are 1 (if cols>1) and cols.
    nbrs0 = graph.neighbors(0)
    if n == 1:
        return (1, 1)
    if len(nbrs0) == 1:
        # A path is read as a single row, so column bags have width 1.
        if graph.edges == NetworkGraph.grid(1, n).edges:
            return (1, n)
        raise InputError("graph is not a grid in row-major numbering")
    cols = max(nbrs0)
    if cols <= 1 or n % cols:
        raise InputError("graph is not a grid in row-major numbering")
    rows = n // cols
    if graph.edges != NetworkGraph.grid(rows, cols).edges:
        raise InputError("graph is not a grid in row-major numbering")
    return (rows, cols)


def grid_columns_decomposition(graph: NetworkGraph) -> PathDecomposition:
    rows, cols = infer_grid_shape(graph)
    if cols == 1:
        return PathDecomposition((tuple(range(rows * cols)),))
    bags = []
    for c in range(cols - 1):
        bags.append(tuple(sorted(
            [r * cols + c for r in range(rows)] + [r * cols + c + 1 for r in range(rows)]
        )))
    return PathDecomposition(tuple(bags))


def closure_decomposition(graph: NetworkGraph, decomp: PathDecomposition) -> PathDecomposition:
    """Bags Y_l = union of N[v] over v in X_l.

    The result is again a valid decomposition, and every bag that contains v
    in the input contains all of N[v] in the output, which is what lets the DP
    check a node's rule inside a single bag.
    """
    if validate(graph, decomp) is not None:
        raise InputError("closure_decomposition needs a valid input decomposition")
    bags = []
    for bag in decomp.bags:
        y = set()
        for v in bag:
            y.update(graph.closed_neighborhood(v))
        bags.append(tuple(sorted(y)))
    return PathDecomposition(tuple(bags))


def brute_force_pathwidth(graph: NetworkGraph) -> int:
    """Minimum over all vertex orderings of the max boundary (n <= 8 oracle)."""
    if graph.n > 8:
        raise ContractError("brute_force_pathwidth is an oracle for n <= 8")
    best = graph.n
    for order in itertools.permutations(range(graph.n)):
        worst = 0
        placed: frozenset[int] = frozenset()
        for v in order:
            placed = placed | {v}
            worst = max(worst, len(_boundary(graph, placed)))
            if worst >= best:
                break
        best = min(best, worst)
    return best
