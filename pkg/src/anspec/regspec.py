"""Specification-checking solvers and nilpotency.

An instance asks whether some orbit of length T has, at every node, a trace
(length T+1) inside that node's regular language. Two independent routes are
kept: a brute-force orbit enumeration with prefix pruning (the oracle) and the
path-decomposition dynamic program (the algorithmic contribution). The DP
sweeps the closed-neighborhood closure of a path decomposition left to right,
assigning each node a compact freezing trace; a node's rule is checked at the
first bag whose closure contains its whole closed neighborhood, and only at
the merged change times of the node and its neighbors (freezing makes the
neighborhood constant in between).

Nilpotency comes in the same two flavors: directly on the configuration
digraph, and through the NONIL reduction on the product network with the
regular expression .*(q,q')+ at a single node.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from anspec.core import (
    Alphabet,
    AutomataNetwork,
    BudgetExceeded,
    Configuration,
    InputError,
    NetworkGraph,
    Orbit,
    State,
    TableRule,
    fixed_point_bound,
    product_state,
    validate_freezing,
)
from anspec.pathdecomp import PathDecomposition, closure_decomposition, validate
from anspec.traceregex import (
    CompactTrace,
    RAny,
    RCat,
    RPlus,
    RStar,
    RSym,
    TraceNFA,
    compile_regex,
    enumerate_compact_traces,
    trace_matches,
)


@dataclass(frozen=True)
class RegularSpecification:
    """Map node -> regular expression (concrete syntax or AST)."""

    expressions: tuple

    def expression(self, v: int):
        return self.expressions[v]

    @staticmethod
    def uniform(n: int, expr) -> "RegularSpecification":
        return RegularSpecification(tuple(expr for _ in range(n)))


@dataclass(frozen=True)
class RegSpecInstance:
    net: AutomataNetwork
    horizon: int  # orbit length in steps; traces have horizon+1 symbols
    spec: RegularSpecification

    def __post_init__(self) -> None:
        if self.horizon < 0:
            raise InputError("horizon must be >= 0")
        if len(self.spec.expressions) != self.net.n:
            raise InputError("specification must cover every node")

    def compiled(self) -> list[TraceNFA]:
        return [compile_regex(self.spec.expression(v), self.net.alphabet)
                for v in range(self.net.n)]


@dataclass(frozen=True)
class SolverResult:
    satisfiable: bool
    witness: Orbit | None = None


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

def solve_bruteforce(inst: RegSpecInstance, budget: int = 2_000_000) -> SolverResult:
    """Enumerate orbits depth-first with per-node NFA prefix pruning.

    The budget counts visited (time, configuration) pairs; exceeding it raises
    rather than answering wrong.
    """
    net = inst.net
    nfas = inst.compiled()
    T = inst.horizon
    visited = 0

    def masks_after(masks: list[int], x: Configuration) -> list[int] | None:
        out = []
        for v, q in enumerate(x):
            m = nfas[v].step(masks[v], q)
            if not m:
                return None
            out.append(m)
        return out

    def accepted(masks: list[int]) -> bool:
        return all(m & nfas[v].accepting for v, m in enumerate(masks))

    def dfs(x: Configuration, masks: list[int], t: int,
            prefix: list[Configuration]) -> Orbit | None:
        nonlocal visited
        visited += 1
        if visited > budget:
            raise BudgetExceeded(f"brute-force budget {budget} exceeded")
        if t == T:
            return Orbit(tuple(prefix)) if accepted(masks) else None
        for y in net.successors(x):
            m2 = masks_after(masks, y)
            if m2 is None:
                continue
            prefix.append(y)
            found = dfs(y, m2, t + 1, prefix)
            if found is not None:
                return found
            prefix.pop()
        return None

    init = [nfa.initial for nfa in nfas]
    for x0 in itertools.product(net.alphabet.states, repeat=net.n):
        m0 = masks_after(init, x0)
        if m0 is None:
            continue
        found = dfs(x0, m0, 0, [x0])
        if found is not None:
            return SolverResult(True, found)
    return SolverResult(False)


# ---------------------------------------------------------------------------
# Path-decomposition DP
# ---------------------------------------------------------------------------

@dataclass
class _DPNode:
    assignment: tuple[tuple[int, "_Cand"], ...]  # sorted by node
    parent: "_DPNode | None" = field(default=None, repr=False)


@dataclass(frozen=True)
class _Cand:
    """A candidate trace with its expansion and change times precomputed.

    `uid` is the trace's index in the per-(alphabet, length) pool, so memo
    keys and frontier carries are small integer tuples.
    """

    trace: CompactTrace
    word: tuple[State, ...]
    changes: tuple[int, ...]
    uid: int


class RuleCheckCache:
    """Memo for rule-consistency verdicts, shareable across instances on the
    same network (the verdict does not depend on the specification)."""

    def __init__(self) -> None:
        self.memo: dict[tuple, bool] = {}


_TRACE_POOL: dict[tuple[Alphabet, int], tuple[_Cand, ...]] = {}
_CANDIDATE_POOL: dict[tuple, tuple[_Cand, ...]] = {}


def _all_trace_cands(alphabet: Alphabet, length: int) -> tuple[_Cand, ...]:
    key = (alphabet, length)
    found = _TRACE_POOL.get(key)
    if found is None:
        traces = sorted(enumerate_compact_traces(alphabet, length),
                        key=lambda tr: tr.expand())
        found = tuple(
            _Cand(tr, tr.expand(), tr.change_times(), uid)
            for uid, tr in enumerate(traces)
        )
        _TRACE_POOL[key] = found
    return found


def _language_candidates(expr, alphabet: Alphabet, length: int) -> tuple[_Cand, ...]:
    try:
        key = (expr, alphabet, length)
        hash(key)
    except TypeError:
        key = None
    if key is not None and key in _CANDIDATE_POOL:
        return _CANDIDATE_POOL[key]
    nfa = compile_regex(expr, alphabet)
    cand = tuple(c for c in _all_trace_cands(alphabet, length)
                 if trace_matches(nfa, c.trace))
    if key is not None:
        _CANDIDATE_POOL[key] = cand
    return cand


def _rule_consistent(net: AutomataNetwork, v: int, traces: dict[int, _Cand],
                     T: int, cache: RuleCheckCache) -> bool:
    """Does v's trace obey F_v given its neighbors' traces, at every step?

    Only the merged change times need checking: between events every argument
    of the check is constant. A check at time s validates the step s -> s+1,
    so the verdict can change only at s in events or s+1 in events.
    """
    rule = net.rules[v]
    nbhd = rule.neighborhood
    key = (v, T) + tuple(traces[u].uid for u in nbhd)
    hit = cache.memo.get(key)
    if hit is not None:
        return hit
    words = [traces[u].word for u in nbhd]
    if T <= 8:
        check_at: "range | set" = range(T)
    else:
        events = {0}
        for u in nbhd:
            events.update(traces[u].changes)
        check_at = set()
        for e in events:
            if e < T:
                check_at.add(e)
            if 0 <= e - 1 < T:
                check_at.add(e - 1)
    ok = True
    vw = traces[v].word
    table = rule.table if isinstance(rule, TableRule) else None
    for s in check_at:
        args = tuple(w[s] for w in words)
        out = table.get(args) if table is not None else None
        if out is None:
            out = rule.outputs(args)
        if vw[s + 1] not in out:
            ok = False
            break
    cache.memo[key] = ok
    return ok


def solve_dp(inst: RegSpecInstance, decomposition: PathDecomposition,
             frontier_budget: int = 500_000,
             cache: RuleCheckCache | None = None) -> SolverResult:
    """Left-to-right DP over the closure decomposition.

    Frontier states assign a compact trace to every node of the current
    closure bag; candidate traces are pre-filtered by each node's language, so
    an unsatisfiable local language answers UNSAT without exploring. Within a
    bag, new nodes are assigned one at a time and a node's rule check fires as
    soon as its whole closed neighborhood is assigned, which is no later than
    the first input bag containing it. Candidates are tried in lexicographic
    order of their expanded words, so the reported witness is reproducible.
    """
    net = inst.net
    if validate(net.graph, decomposition) is not None:
        raise InputError("invalid decomposition for the network's graph")
    T = inst.horizon
    if cache is None:
        cache = RuleCheckCache()

    candidates: list[tuple[_Cand, ...]] = []
    for v in range(net.n):
        cand = _language_candidates(inst.spec.expression(v), net.alphabet, T + 1)
        if not cand:
            return SolverResult(False)
        candidates.append(cand)

    closure = closure_decomposition(net.graph, decomposition)
    bags = closure.bags
    nbhds = [set(net.graph.closed_neighborhood(v)) for v in range(net.n)]

    def extend(assigned: dict[int, _Cand], new_nodes: list[int],
               ready_at: list[list[int]], k: int,
               out: list[dict[int, _Cand]]) -> None:
        if k == len(new_nodes):
            out.append(dict(assigned))
            return
        v = new_nodes[k]
        fires = ready_at[k]
        for cand in candidates[v]:
            assigned[v] = cand
            ok = True
            for u in fires:
                if not _rule_consistent(net, u, assigned, T, cache):
                    ok = False
                    break
            if ok:
                extend(assigned, new_nodes, ready_at, k + 1, out)
        del assigned[v]

    frontier: list[_DPNode] = [_DPNode(assignment=())]
    checked_global: set[int] = set()
    for l, bag in enumerate(bags):
        prev_nodes = {v for v, _ in frontier[0].assignment}
        new_nodes = [v for v in bag if v not in prev_nodes]
        # Static check schedule: node u's rule fires when the last member of
        # N[u] is assigned, identical across frontier states of this bag.
        ready_at: list[list[int]] = []
        seen = set(prev_nodes)
        pending = [u for u in range(net.n) if u not in checked_global]
        for v in new_nodes:
            seen.add(v)
            fires = [u for u in pending if v in nbhds[u] and nbhds[u] <= seen]
            pending = [u for u in pending if u not in fires]
            ready_at.append(fires)
        carry_nodes = ([v for v in bag if v in bags[l + 1]]
                       if l + 1 < len(bags) else list(bag))
        new_frontier: dict[tuple, _DPNode] = {}
        for node_state in frontier:
            assigned = dict(node_state.assignment)
            completions: list[dict[int, _Cand]] = []
            extend(assigned, new_nodes, ready_at, 0, completions)
            for traces in completions:
                carry = tuple(traces[v].uid for v in carry_nodes)
                if carry not in new_frontier:
                    keep = tuple(sorted((v, traces[v]) for v in bag))
                    new_frontier[carry] = _DPNode(keep, node_state)
                if len(new_frontier) > frontier_budget:
                    raise BudgetExceeded(f"DP frontier budget {frontier_budget} exceeded")
        checked_global.update(u for fires in ready_at for u in fires)
        if not new_frontier:
            return SolverResult(False)
        frontier = list(new_frontier.values())
    assert checked_global == set(range(net.n)), "a node escaped its rule check"
    # Any surviving state is a witness skeleton; glue traces through parents.
    final = frontier[0]
    words: dict[int, tuple[State, ...]] = {}
    node: _DPNode | None = final
    while node is not None:
        for v, cand in node.assignment:
            words.setdefault(v, cand.word)
        node = node.parent
    assert len(words) == net.n
    configs = tuple(
        tuple(words[v][s] for v in range(net.n)) for s in range(T + 1)
    )
    return SolverResult(True, Orbit(configs))


# ---------------------------------------------------------------------------
# Product networks
# ---------------------------------------------------------------------------

def product_network(a: AutomataNetwork, b: AutomataNetwork) -> AutomataNetwork:
    """Componentwise product over alphabet Q_a x Q_b on a shared graph."""
    if a.graph != b.graph:
        raise InputError("product needs identical graphs")
    alphabet = a.alphabet.product(b.alphabet)
    rules = []
    for v in range(a.n):
        ra, rb = a.rules[v], b.rules[v]
        if not isinstance(ra, TableRule) or not isinstance(rb, TableRule):
            raise InputError("product_network needs table rules")
        nbhd = ra.neighborhood
        table: dict[tuple[State, ...], frozenset[State]] = {}
        keys_a = itertools.product(a.alphabet.states, repeat=len(nbhd))
        for ka in keys_a:
            for kb in itertools.product(b.alphabet.states, repeat=len(nbhd)):
                key = tuple(product_state(x, y) for x, y in zip(ka, kb))
                out = frozenset(
                    product_state(x, y)
                    for x in ra.outputs(ka) for y in rb.outputs(kb)
                )
                table[key] = out
        rules.append(TableRule(v, nbhd, table))
    return AutomataNetwork(a.graph, alphabet, tuple(rules))


# ---------------------------------------------------------------------------
# Nilpotency
# ---------------------------------------------------------------------------

def nilpotency_bruteforce(net: AutomataNetwork, budget: int = 200_000) -> bool:
    """Build the full configuration digraph and decide nilpotency on it.

    For freezing nets every infinite orbit is eventually constant at a trap
    (a configuration x with x in F(x)), so nilpotency holds iff there is
    exactly one trap and it is reachable as the only stabilization point.
    The digraph is still built so the answer follows the definition: a unique
    trap x*, and every configuration reaches x*.
    """
    size = len(net.alphabet.states) ** net.n
    if size > budget:
        raise BudgetExceeded(f"{size} configurations exceed budget {budget}")
    configs = list(itertools.product(net.alphabet.states, repeat=net.n))
    index = {x: i for i, x in enumerate(configs)}
    succ: list[list[int]] = [
        sorted(index[y] for y in net.successors(x)) for x in configs
    ]
    traps = [i for i in range(size) if i in succ[i]]
    if len(traps) != 1:
        return False
    target = traps[0]
    # Every configuration must be unable to stabilize anywhere else; with a
    # single trap, freezing guarantees every orbit ends there, but check
    # reachability anyway to honor the definition.
    reach_target = {target}
    changed = True
    while changed:
        changed = False
        for i in range(size):
            if i not in reach_target and any(j in reach_target for j in succ[i]):
                reach_target.add(i)
                changed = True
    return len(reach_target) == size


def nonil_instance(net: AutomataNetwork, v: int, q: State, qp: State,
                   horizon: int, prod: AutomataNetwork | None = None) -> RegSpecInstance:
    """The REGSPEC instance on F x F whose trace at v must end in (q,q')+."""
    if prod is None:
        prod = product_network(net, net)
    target = RSym(product_state(q, qp))
    exprs = []
    for u in range(net.n):
        if u == v:
            exprs.append(RCat((RStar(RAny()), RPlus(target))))
        else:
            exprs.append(RStar(RAny()))
    return RegSpecInstance(prod, horizon, RegularSpecification(tuple(exprs)))


def nilpotency_via_nonil(net: AutomataNetwork, horizon: int | None = None,
                         solver=None, decomposition: PathDecomposition | None = None) -> bool:
    """Nilpotent iff no NONIL(q,q',v) instance is satisfiable.

    The horizon defaults to n*(h-1)+1, large enough that every freezing orbit
    has stabilized, so the final trace symbols are exactly the reached fixed
    point's states.
    """
    if horizon is None:
        horizon = fixed_point_bound(net) + 1
    if horizon < fixed_point_bound(net) + 1:
        raise InputError("horizon below the stabilization bound")
    if validate_freezing(net):
        raise InputError("nilpotency_via_nonil needs a freezing network")
    if decomposition is None:
        from anspec.pathdecomp import decompose
        decomposition = decompose(net.graph, "exact-small" if net.n <= 12 else "greedy-interval")
    prod = product_network(net, net)
    cache = RuleCheckCache()
    for v in range(net.n):
        for q in net.alphabet.states:
            for qp in net.alphabet.states:
                if q == qp:
                    continue
                inst = nonil_instance(net, v, q, qp, horizon, prod=prod)
                result = (solver(inst) if solver
                          else solve_dp(inst, decomposition, cache=cache))
                if result.satisfiable:
                    return False
    return True


def check_witness(inst: RegSpecInstance, orbit: Orbit) -> bool:
    """Replay a SAT witness: every step legal, every trace in its language."""
    if orbit.steps != inst.horizon:
        return False
    if not orbit.replays(inst.net):
        return False
    nfas = inst.compiled()
    for v in range(inst.net.n):
        tr = CompactTrace.from_word(orbit.trace(v))
        if not trace_matches(nfas[v], tr):
            return False
    return True
