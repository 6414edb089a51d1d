"""Non-deterministic freezing automata networks: representation and dynamics.

A network is a connected undirected graph plus one local rule per node. A rule
maps the states of the node's closed neighborhood N[v] (the node itself is
always included, with neighbors in ascending node order) to a non-empty set of
output states. The global map sends a configuration to the Cartesian product of
the per-node output sets. Freezing is enforced by the local condition "every
output dominates the center state" in a partial order on the alphabet, which
implies the orbit-level non-decreasing property and is checkable in table size.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

State = str
Configuration = tuple[State, ...]


class InputError(ValueError):
    """Malformed input (bad state, graph mismatch, invalid document)."""


class ContractError(ValueError):
    """An operation was called outside its contract."""


class BudgetExceeded(RuntimeError):
    """A solver refused because the instance exceeds its configured budget."""


# ---------------------------------------------------------------------------
# Alphabet
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Alphabet:
    """Finite state set with a strict partial order (the freezing order).

    `order_pairs` holds strict relations (lesser, greater); the transitive
    closure is taken at construction. Reflexive pairs are rejected, as is any
    antisymmetry violation after closure.
    """

    states: tuple[State, ...]
    order_pairs: frozenset[tuple[State, State]] = frozenset()
    _lt: frozenset[tuple[State, State]] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(set(self.states)) != len(self.states):
            raise InputError("duplicate states in alphabet")
        universe = set(self.states)
        for a, b in self.order_pairs:
            if a not in universe or b not in universe:
                raise InputError(f"order pair ({a},{b}) uses unknown state")
            if a == b:
                raise InputError(f"reflexive order pair ({a},{a})")
        closure = set(self.order_pairs)
        changed = True
        while changed:
            changed = False
            for a, b in list(closure):
                for c, d in list(closure):
                    if b == c and (a, d) not in closure:
                        closure.add((a, d))
                        changed = True
        for a, b in closure:
            if (b, a) in closure:
                raise InputError(f"order not antisymmetric: {a} <> {b}")
            if a == b:
                raise InputError(f"order has a cycle through {a}")
        object.__setattr__(self, "_lt", frozenset(closure))

    @staticmethod
    def total(states: Sequence[State]) -> "Alphabet":
        """Totally ordered alphabet, ascending in the given sequence."""
        pairs = {(states[i], states[j]) for i in range(len(states)) for j in range(i + 1, len(states))}
        return Alphabet(tuple(states), frozenset(pairs))

    def __contains__(self, q: State) -> bool:
        return q in self.states

    def less(self, a: State, b: State) -> bool:
        return (a, b) in self._lt

    def leq(self, a: State, b: State) -> bool:
        return a == b or (a, b) in self._lt

    def downset(self, q: State) -> tuple[State, ...]:
        return tuple(p for p in self.states if self.leq(p, q))

    def upset(self, q: State) -> tuple[State, ...]:
        return tuple(p for p in self.states if self.leq(q, p))

    def maximal_states(self) -> tuple[State, ...]:
        return tuple(q for q in self.states if not any(self.less(q, p) for p in self.states))

    def chain_height(self) -> int:
        """Length (number of states) of the longest chain."""
        best: dict[State, int] = {}

        def h(q: State) -> int:
            if q not in best:
                best[q] = 1 + max((h(p) for p in self.states if self.less(q, p)), default=0)
            return best[q]

        return max((h(q) for q in self.states), default=0)

    def product(self, other: "Alphabet") -> "Alphabet":
        """Product alphabet with the product order; states named "(a,b)"."""
        states = tuple(product_state(a, b) for a in self.states for b in other.states)
        pairs = set()
        for a1 in self.states:
            for b1 in other.states:
                for a2 in self.states:
                    for b2 in other.states:
                        if (a1, b1) != (a2, b2) and self.leq(a1, a2) and other.leq(b1, b2):
                            pairs.add((product_state(a1, b1), product_state(a2, b2)))
        return Alphabet(states, frozenset(pairs))


def product_state(a: State, b: State) -> State:
    return f"({a},{b})"


def split_product_state(q: State) -> tuple[State, State]:
    if not (q.startswith("(") and q.endswith(")")):
        raise InputError(f"not a product state: {q!r}")
    depth = 0
    for k, ch in enumerate(q[1:-1], start=1):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            return q[1:k], q[k + 1:-1]
    raise InputError(f"not a product state: {q!r}")


# ---------------------------------------------------------------------------
# Graph
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NetworkGraph:
    """Connected undirected graph on nodes 0..n-1, with optional self-loops.

    Self-loops do not change closed neighborhoods (rule tables always include
    the center) but are recorded for degree bookkeeping and gadget shape checks.
    """

    n: int
    edges: frozenset[tuple[int, int]]
    self_loops: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        if self.n <= 0:
            raise InputError("graph needs at least one node")
        for u, v in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n) or u == v:
                raise InputError(f"bad edge ({u},{v})")
        norm = frozenset((min(u, v), max(u, v)) for u, v in self.edges)
        object.__setattr__(self, "edges", norm)
        for v in self.self_loops:
            if not 0 <= v < self.n:
                raise InputError(f"bad self-loop {v}")
        if not self._connected():
            raise InputError("graph is not connected")

    def _connected(self) -> bool:
        if self.n == 1:
            return True
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for w in self.neighbors(u):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.n

    def neighbors(self, v: int) -> tuple[int, ...]:
        return tuple(sorted({u if w == v else w for u, w in self.edges if v in (u, w)}))

    def closed_neighborhood(self, v: int) -> tuple[int, ...]:
        return tuple(sorted(set(self.neighbors(v)) | {v}))

    def degree(self, v: int) -> int:
        return len(self.neighbors(v)) + (1 if v in self.self_loops else 0)

    def max_degree(self) -> int:
        return max(self.degree(v) for v in range(self.n))

    @staticmethod
    def path(n: int) -> "NetworkGraph":
        return NetworkGraph(n, frozenset((i, i + 1) for i in range(n - 1)))

    @staticmethod
    def cycle(n: int) -> "NetworkGraph":
        return NetworkGraph(n, frozenset({(i, (i + 1) % n) for i in range(n)}))

    @staticmethod
    def line_with_loops(n: int) -> "NetworkGraph":
        return NetworkGraph(n, frozenset((i, i + 1) for i in range(n - 1)),
                            self_loops=frozenset(range(n)))

    @staticmethod
    def grid(rows: int, cols: int) -> "NetworkGraph":
        """rows x cols grid; node index = row * cols + col."""
        edges = set()
        for r in range(rows):
            for c in range(cols):
                if c + 1 < cols:
                    edges.add((r * cols + c, r * cols + c + 1))
                if r + 1 < rows:
                    edges.add((r * cols + c, (r + 1) * cols + c))
        return NetworkGraph(rows * cols, frozenset(edges))


# ---------------------------------------------------------------------------
# Local rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TableRule:
    """Explicit table rule for one node.

    `neighborhood` is the closed neighborhood in ascending node order; keys of
    `table` are state tuples in that order. Inputs missing from the table fall
    through to `default` when one is declared; otherwise the table must be
    exhaustive.
    """

    node: int
    neighborhood: tuple[int, ...]
    table: dict[tuple[State, ...], frozenset[State]]
    default: frozenset[State] | None = None

    def __post_init__(self) -> None:
        for key, out in self.table.items():
            if len(key) != len(self.neighborhood):
                raise InputError(f"rule entry arity mismatch at node {self.node}")
            if not out:
                raise InputError(f"empty output set at node {self.node}, input {key}")
        if self.default is not None and not self.default:
            raise InputError(f"empty default output at node {self.node}")

    @property
    def center_index(self) -> int:
        return self.neighborhood.index(self.node)

    def outputs(self, states: tuple[State, ...]) -> frozenset[State]:
        out = self.table.get(states)
        if out is None:
            if self.default is None:
                raise InputError(f"rule at node {self.node} has no entry for {states}")
            return self.default
        return out

    @property
    def deterministic(self) -> bool:
        if any(len(v) != 1 for v in self.table.values()):
            return False
        return self.default is None or len(self.default) == 1

    def check_exhaustive(self, alphabet: Alphabet) -> None:
        if self.default is not None:
            return
        want = len(alphabet.states) ** len(self.neighborhood)
        if len(self.table) != want:
            raise InputError(
                f"rule at node {self.node} covers {len(self.table)} of {want} inputs"
            )

    def freezing_violations(self, alphabet: Alphabet) -> list[tuple[int, tuple[State, ...], State]]:
        bad = []
        ci = self.center_index
        for key, out in self.table.items():
            for q in out:
                if not alphabet.leq(key[ci], q):
                    bad.append((self.node, key, q))
        if self.default is not None:
            # A default fires for unknown centers, so it must dominate them all.
            for c in alphabet.states:
                for q in self.default:
                    if not alphabet.leq(c, q):
                        bad.append((self.node, ("*default*", c), q))
                        break
        return bad


@dataclass(frozen=True)
class FunctionRule:
    """Function-backed rule for nets whose tables would be astronomically wide.

    The callable receives neighborhood states in ascending node order and
    returns the output set. Freezing cannot be established by entry
    enumeration, so the provider supplies `freezing_validator`, returning a
    list of violations (see the gadget modules' transition-row ledgers).
    """

    node: int
    neighborhood: tuple[int, ...]
    fn: Callable[[tuple[State, ...]], frozenset[State]]
    deterministic: bool
    freezing_validator: Callable[[Alphabet], list] | None = None

    @property
    def center_index(self) -> int:
        return self.neighborhood.index(self.node)

    def outputs(self, states: tuple[State, ...]) -> frozenset[State]:
        return self.fn(states)


Rule = TableRule | FunctionRule


# ---------------------------------------------------------------------------
# Automata network
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AutomataNetwork:
    graph: NetworkGraph
    alphabet: Alphabet
    rules: tuple[Rule, ...]

    def __post_init__(self) -> None:
        if len(self.rules) != self.graph.n:
            raise InputError("need exactly one rule per node")
        for v, rule in enumerate(self.rules):
            if rule.node != v:
                raise InputError(f"rule {v} is for node {rule.node}")
            if rule.neighborhood != self.graph.closed_neighborhood(v):
                raise InputError(f"rule {v} neighborhood mismatch")
            if isinstance(rule, TableRule):
                rule.check_exhaustive(self.alphabet)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def deterministic(self) -> bool:
        return all(r.deterministic for r in self.rules)

    def check_configuration(self, x: Configuration) -> None:
        if len(x) != self.n:
            raise InputError(f"configuration has {len(x)} states, network has {self.n} nodes")
        for q in x:
            if q not in self.alphabet:
                raise InputError(f"state {q!r} outside alphabet")

    def node_options(self, x: Configuration, v: int) -> frozenset[State]:
        rule = self.rules[v]
        return rule.outputs(tuple(x[u] for u in rule.neighborhood))

    def option_sets(self, x: Configuration) -> list[frozenset[State]]:
        return [self.node_options(x, v) for v in range(self.n)]

    def successors(self, x: Configuration) -> Iterator[Configuration]:
        """All global successors, lazily: the product of per-node option sets."""
        self.check_configuration(x)
        opts = [sorted(s) for s in self.option_sets(x)]
        return (tuple(choice) for choice in itertools.product(*opts))

    def successor(self, x: Configuration) -> Configuration:
        """The unique successor of a deterministic network."""
        if not self.deterministic:
            raise ContractError("network is not deterministic")
        self.check_configuration(x)
        return tuple(next(iter(s)) for s in self.option_sets(x))

    def is_valid_step(self, x: Configuration, y: Configuration) -> bool:
        """y in F(x), checked per node without enumerating the product."""
        self.check_configuration(x)
        self.check_configuration(y)
        return all(y[v] in self.node_options(x, v) for v in range(self.n))

    def is_fixed_point(self, x: Configuration) -> bool:
        """x in F(x): the "can stay" reading for non-deterministic networks."""
        return self.is_valid_step(x, x)


@dataclass(frozen=True)
class Orbit:
    """A sequence of configurations x_0..x_t with x_s in F(x_{s-1})."""

    configurations: tuple[Configuration, ...]
    reached_fixed_point: bool = False

    def __len__(self) -> int:
        return len(self.configurations)

    @property
    def steps(self) -> int:
        return len(self.configurations) - 1

    def trace(self, v: int) -> tuple[State, ...]:
        return tuple(x[v] for x in self.configurations)

    def replays(self, net: AutomataNetwork) -> bool:
        return all(
            net.is_valid_step(a, b)
            for a, b in zip(self.configurations, self.configurations[1:])
        )


def simulate_deterministic(net: AutomataNetwork, x0: Configuration, tmax: int) -> Orbit:
    """Run a deterministic net from x0 for at most tmax steps.

    Stops early at the first fixed point; the flag records whether one was hit.
    """
    if not net.deterministic:
        raise ContractError("simulate_deterministic needs a deterministic network")
    if tmax < 0:
        raise InputError("tmax must be >= 0")
    configs = [tuple(x0)]
    fixed = net.is_fixed_point(configs[-1])
    while not fixed and len(configs) <= tmax:
        nxt = net.successor(configs[-1])
        if nxt == configs[-1]:
            fixed = True
            break
        configs.append(nxt)
        fixed = net.is_fixed_point(nxt)
    return Orbit(tuple(configs), reached_fixed_point=fixed)


def validate_freezing(net: AutomataNetwork, order: Alphabet | None = None) -> list:
    """Check the local freezing condition; empty list means ok.

    For table rules every entry's outputs must dominate the entry's center
    state. Function rules delegate to their provider's validator (the gadget
    modules validate their declared transition rows).
    """
    alphabet = order if order is not None else net.alphabet
    violations: list = []
    for rule in net.rules:
        if isinstance(rule, TableRule):
            violations.extend(rule.freezing_violations(alphabet))
        else:
            if rule.freezing_validator is None:
                raise ContractError(
                    f"function rule at node {rule.node} has no freezing validator"
                )
            violations.extend(rule.freezing_validator(alphabet))
    return violations


def fixed_point_bound(net: AutomataNetwork) -> int:
    """n*(h-1): a freezing orbit changes state at most this many times."""
    return net.n * (net.alphabet.chain_height() - 1)


# ---------------------------------------------------------------------------
# Convenience rule builders
# ---------------------------------------------------------------------------

def rule_from_function(net_graph: NetworkGraph, alphabet: Alphabet, v: int,
                       fn: Callable[[tuple[State, ...]], Iterable[State]]) -> TableRule:
    """Tabulate fn over the full closed-neighborhood domain (small nets only)."""
    nbhd = net_graph.closed_neighborhood(v)
    table = {}
    for key in itertools.product(alphabet.states, repeat=len(nbhd)):
        table[key] = frozenset(fn(key))
    return TableRule(v, nbhd, table)


def identity_network(graph: NetworkGraph, alphabet: Alphabet) -> AutomataNetwork:
    rules = []
    for v in range(graph.n):
        nbhd = graph.closed_neighborhood(v)
        ci = nbhd.index(v)
        rules.append(rule_from_function(graph, alphabet, v, lambda key, ci=ci: {key[ci]}))
    return AutomataNetwork(graph, alphabet, tuple(rules))


def or_network(graph: NetworkGraph) -> AutomataNetwork:
    """Boolean OR of the closed neighborhood; the canonical freezing example."""
    alphabet = Alphabet.total(("0", "1"))
    rules = []
    for v in range(graph.n):
        rules.append(rule_from_function(
            graph, alphabet, v, lambda key: {"1" if "1" in key else "0"}))
    return AutomataNetwork(graph, alphabet, tuple(rules))
