"""First-order logic over configurations with =, one-step reachability ->,
and multi-step reachability ->+ (at least one step), plus the preimage
predicates Pk and the fixed hardness formula phi.

Evaluation is naive quantifier enumeration over an explicitly built
configuration graph with memoized edge/reachability/in-degree tables: the
correctness-first oracle. Large gadget instances go through the specialized
evaluator in the line-gadget module instead.

Grammar (docs/formats.md):
    formula := quantified | implication
    quantified := ("exists" | "exists!" | "forall") var "." formula
    implication := disjunction ("=>" implication)?
    disjunction := conjunction ("or" conjunction)*
    conjunction := unary ("and" unary)*
    unary := "not" unary | atom
    atom := "(" formula ")" | "P" k "(" var ")"
          | var ("=" | "!=" | "->" | "->+") var
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

from anspec.core import (
    AutomataNetwork,
    BudgetExceeded,
    Configuration,
    ContractError,
    InputError,
    NetworkGraph,
    validate_freezing,
)


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Atom:
    kind: str  # "eq" | "step" | "reach"
    left: Var
    right: Var


@dataclass(frozen=True)
class Not:
    inner: object


@dataclass(frozen=True)
class And:
    parts: tuple


@dataclass(frozen=True)
class Or:
    parts: tuple


@dataclass(frozen=True)
class Implies:
    left: object
    right: object


@dataclass(frozen=True)
class Quant:
    kind: str  # "exists" | "forall"
    var: Var
    body: object


@dataclass(frozen=True)
class Preimages:
    """P_k(x): x has at least k preimages; kept as a node so evaluation can
    short-circuit through the in-degree table instead of expanding the
    pairwise-distinct existential block."""

    k: int
    var: Var


class FormulaParseError(InputError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<op>->\+|->|!=|=>|=|\(|\)|\.)|(?P<word>[A-Za-z_][A-Za-z_0-9]*!?)|(?P<bad>\S))"
)

_KEYWORDS = {"exists", "exists!", "forall", "not", "and", "or"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.group("bad"):
            raise FormulaParseError(f"unexpected character {text[pos:pos + 1]!r}",
                                    m.start("bad") if m else pos)
        if m.group("op"):
            tokens.append(("op", m.group("op"), m.start("op")))
        else:
            tokens.append(("word", m.group("word"), m.start("word")))
        pos = m.end()
    return tokens


def parse_formula(text: str):
    """Parse the concrete syntax; errors carry a character position."""
    tokens = _tokenize(text)
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def take(expect: str | None = None):
        nonlocal pos
        tok = peek()
        if tok is None:
            raise FormulaParseError("unexpected end of formula", len(text))
        if expect is not None and tok[1] != expect:
            raise FormulaParseError(f"expected {expect!r}, found {tok[1]!r}", tok[2])
        pos += 1
        return tok

    def parse_f():
        tok = peek()
        if tok and tok[0] == "word" and tok[1] in ("exists", "forall", "exists!"):
            take()
            kind = tok[1]
            var_tok = take()
            if var_tok[0] != "word" or var_tok[1] in _KEYWORDS:
                raise FormulaParseError("expected a variable name", var_tok[2])
            take(".")
            body = parse_f()
            v = Var(var_tok[1])
            if kind == "exists!":
                # exactly one: exists x. body and forall y. body[y/x] => y = x
                fresh = Var(var_tok[1] + "__other")
                renamed = _substitute(body, v, fresh)
                return Quant("exists", v, And((
                    body,
                    Quant("forall", fresh, Implies(renamed, Atom("eq", fresh, v))),
                )))
            return Quant(kind, v, body)
        return parse_impl()

    def parse_impl():
        left = parse_or()
        if peek() and peek()[1] == "=>":
            take()
            right = parse_f()
            return Implies(left, right)
        return left

    def parse_or():
        parts = [parse_and()]
        while peek() and peek()[1] == "or":
            take()
            parts.append(parse_and())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def parse_and():
        parts = [parse_unary()]
        while peek() and peek()[1] == "and":
            take()
            parts.append(parse_unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def parse_unary():
        tok = peek()
        if tok and tok[1] == "not":
            take()
            return Not(parse_unary())
        return parse_atom()

    def parse_atom():
        tok = take()
        if tok[1] == "(":
            inner = parse_f()
            take(")")
            return inner
        if tok[0] == "word":
            m = re.fullmatch(r"P(\d+)", tok[1])
            if m:
                take("(")
                var_tok = take()
                take(")")
                return Preimages(int(m.group(1)), Var(var_tok[1]))
            if tok[1] in _KEYWORDS:
                # A quantifier in atom position (after "not" or "=>").
                pos_back = tok[2]
                raise FormulaParseError("quantifier needs parentheses here", pos_back)
            left = Var(tok[1])
            op_tok = take()
            if op_tok[1] not in ("=", "!=", "->", "->+"):
                raise FormulaParseError(f"expected a relation, found {op_tok[1]!r}", op_tok[2])
            right_tok = take()
            if right_tok[0] != "word":
                raise FormulaParseError("expected a variable name", right_tok[2])
            right = Var(right_tok[1])
            kind = {"=": "eq", "->": "step", "->+": "reach"}.get(op_tok[1])
            if kind is None:
                return Not(Atom("eq", left, right))
            return Atom(kind, left, right)
        raise FormulaParseError(f"unexpected token {tok[1]!r}", tok[2])

    node = parse_f()
    if pos != len(tokens):
        raise FormulaParseError(f"trailing input {tokens[pos][1]!r}", tokens[pos][2])
    return node


def _substitute(node, old: Var, new: Var):
    if isinstance(node, Var):
        return new if node == old else node
    if isinstance(node, Atom):
        return Atom(node.kind, _substitute(node.left, old, new),
                    _substitute(node.right, old, new))
    if isinstance(node, Preimages):
        return Preimages(node.k, _substitute(node.var, old, new))
    if isinstance(node, Not):
        return Not(_substitute(node.inner, old, new))
    if isinstance(node, And):
        return And(tuple(_substitute(p, old, new) for p in node.parts))
    if isinstance(node, Or):
        return Or(tuple(_substitute(p, old, new) for p in node.parts))
    if isinstance(node, Implies):
        return Implies(_substitute(node.left, old, new), _substitute(node.right, old, new))
    if isinstance(node, Quant):
        if node.var == old:
            return node
        return Quant(node.kind, node.var, _substitute(node.body, old, new))
    raise InputError(f"unknown node {node!r}")


def pretty(node) -> str:
    if isinstance(node, Atom):
        op = {"eq": "=", "step": "->", "reach": "->+"}[node.kind]
        return f"{node.left.name} {op} {node.right.name}"
    if isinstance(node, Preimages):
        return f"P{node.k}({node.var.name})"
    if isinstance(node, Not):
        return f"not {pretty_paren(node.inner)}"
    if isinstance(node, And):
        return " and ".join(pretty_paren(p) for p in node.parts)
    if isinstance(node, Or):
        return " or ".join(pretty_paren(p) for p in node.parts)
    if isinstance(node, Implies):
        return f"{pretty_paren(node.left)} => {pretty_paren(node.right)}"
    if isinstance(node, Quant):
        return f"{node.kind} {node.var.name}. {pretty(node.body)}"
    raise InputError(f"unknown node {node!r}")


def pretty_paren(node) -> str:
    if isinstance(node, (Atom, Preimages, Not)):
        return pretty(node)
    return f"({pretty(node)})"


def expand_preimages(node):
    """Replace P_k(x) by its definition with k pairwise-distinct witnesses."""
    if isinstance(node, Preimages):
        x = node.var
        ws = [Var(f"{x.name}__w{i}") for i in range(1, node.k + 1)]
        parts: list = [Atom("step", w, x) for w in ws]
        for a, b in itertools.combinations(ws, 2):
            parts.append(Not(Atom("eq", a, b)))
        body = parts[0] if len(parts) == 1 else And(tuple(parts))
        for w in reversed(ws):
            body = Quant("exists", w, body)
        return body
    if isinstance(node, Not):
        return Not(expand_preimages(node.inner))
    if isinstance(node, And):
        return And(tuple(expand_preimages(p) for p in node.parts))
    if isinstance(node, Or):
        return Or(tuple(expand_preimages(p) for p in node.parts))
    if isinstance(node, Implies):
        return Implies(expand_preimages(node.left), expand_preimages(node.right))
    if isinstance(node, Quant):
        return Quant(node.kind, node.var, expand_preimages(node.body))
    return node


def free_variables(node, bound: frozenset[str] = frozenset()) -> set[str]:
    if isinstance(node, Atom):
        return {v.name for v in (node.left, node.right) if v.name not in bound}
    if isinstance(node, Preimages):
        return {node.var.name} - bound
    if isinstance(node, Not):
        return free_variables(node.inner, bound)
    if isinstance(node, (And, Or)):
        out: set[str] = set()
        for p in node.parts:
            out |= free_variables(p, bound)
        return out
    if isinstance(node, Implies):
        return free_variables(node.left, bound) | free_variables(node.right, bound)
    if isinstance(node, Quant):
        return free_variables(node.body, bound | {node.var.name})
    raise InputError(f"unknown node {node!r}")


# ---------------------------------------------------------------------------
# Configuration graph
# ---------------------------------------------------------------------------

class ConfigGraph:
    """The digraph on Q^n with x -> y iff y in F(x), plus its transitive
    closure and in-degree table."""

    def __init__(self, configs: list[Configuration], succ: list[list[int]]):
        self.configs = configs
        self.index = {x: i for i, x in enumerate(configs)}
        self.succ = succ
        self.edge_set = {(i, j) for i, out in enumerate(succ) for j in out}
        indeg = [0] * len(configs)
        for _, j in self.edge_set:
            indeg[j] += 1
        self.indegree = indeg
        self._reach: list[set[int]] | None = None

    @property
    def size(self) -> int:
        return len(self.configs)

    def reach(self) -> list[set[int]]:
        """reach()[i] = configurations reachable from i in >= 1 steps."""
        if self._reach is None:
            out = []
            for i in range(self.size):
                seen: set[int] = set()
                stack = list(self.succ[i])
                while stack:
                    j = stack.pop()
                    if j not in seen:
                        seen.add(j)
                        stack.extend(self.succ[j])
                out.append(seen)
            self._reach = out
        return self._reach

    def preimages(self, j: int) -> list[int]:
        return [i for i in range(self.size) if (i, j) in self.edge_set]


def build_config_graph(net: AutomataNetwork, budget: int = 200_000) -> ConfigGraph:
    size = len(net.alphabet.states) ** net.n
    if size > budget:
        raise BudgetExceeded(f"{size} configurations exceed budget {budget}")
    configs = [tuple(x) for x in itertools.product(net.alphabet.states, repeat=net.n)]
    index = {x: i for i, x in enumerate(configs)}
    succ = [sorted(index[y] for y in net.successors(x)) for x in configs]
    return ConfigGraph(configs, succ)


def eval_formula(node, graph: ConfigGraph) -> bool:
    """Standard semantics; quantifiers range over all configurations."""
    missing = free_variables(node)
    if missing:
        raise InputError(f"formula has free variables: {sorted(missing)}")
    reach = None

    def ev(n, env: dict[str, int]) -> bool:
        nonlocal reach
        if isinstance(n, Atom):
            a, b = env[n.left.name], env[n.right.name]
            if n.kind == "eq":
                return a == b
            if n.kind == "step":
                return (a, b) in graph.edge_set
            if reach is None:
                reach = graph.reach()
            return b in reach[a]
        if isinstance(n, Preimages):
            return graph.indegree[env[n.var.name]] >= n.k
        if isinstance(n, Not):
            return not ev(n.inner, env)
        if isinstance(n, And):
            return all(ev(p, env) for p in n.parts)
        if isinstance(n, Or):
            return any(ev(p, env) for p in n.parts)
        if isinstance(n, Implies):
            return (not ev(n.left, env)) or ev(n.right, env)
        if isinstance(n, Quant):
            name = n.var.name
            old = env.get(name)
            try:
                if n.kind == "exists":
                    for i in range(graph.size):
                        env[name] = i
                        if ev(n.body, env):
                            return True
                    return False
                for i in range(graph.size):
                    env[name] = i
                    if not ev(n.body, env):
                        return False
                return True
            finally:
                if old is None:
                    env.pop(name, None)
                else:
                    env[name] = old
        raise InputError(f"unknown node {n!r}")

    return ev(node, {})


NILPOTENCY_FORMULA = "exists x. forall z. (z ->+ z) => z = x"
NILPOTENCY_DETERMINISTIC_FORMULA = "exists x. forall y. y ->+ x"

PHI_TEXT = (
    "exists x. (x -> x) and (forall y. forall y1. forall z. "
    "(not P1(y) and not P2(y1) and y -> y1 and y1 ->+ z and z -> x and not (z = x))"
    " => not P2(z))"
)


def phi_formula():
    return parse_formula(PHI_TEXT)


def nilpotency_formula():
    return parse_formula(NILPOTENCY_FORMULA)


def eval_phi(net: AutomataNetwork | None = None,
             graph: ConfigGraph | None = None,
             artifact=None) -> bool:
    """Evaluate phi: generic path over a configuration graph, or specialized
    path over a generated line-gadget artifact (reduction module)."""
    if graph is not None:
        return eval_formula(phi_formula(), graph)
    if artifact is not None:
        from anspec.fogadget import eval_phi_specialized
        return eval_phi_specialized(artifact)
    if net is not None:
        return eval_formula(phi_formula(), build_config_graph(net))
    raise ContractError("eval_phi needs a graph, a network, or an artifact")


# ---------------------------------------------------------------------------
# Transfer-relation preimage counting on a line
# ---------------------------------------------------------------------------

def count_preimages_line(net: AutomataNetwork, z: Configuration,
                         candidate_hints=None) -> int:
    """Exact |{x : F(x) = z}| for deterministic nets on a line (with optional
    self-loops), by dynamic programming over adjacent state pairs.

    Never enumerates Q^N: layer p holds pairs (x_p, x_{p+1}) with path counts,
    and the transition to layer p+1 demands f_{p+1}(x_p, x_{p+1}, x_{p+2}) =
    z_{p+1}. `candidate_hints(p, z_p)` may supply a superset of the feasible
    values at position p (0-based); the default is the freezing down-set of
    z_p, which is complete because outputs dominate centers.
    """
    if not net.deterministic:
        raise ContractError("count_preimages_line needs a deterministic network")
    path_edges = NetworkGraph.path(net.n).edges if net.n > 1 else frozenset()
    if net.graph.edges != path_edges:
        raise ContractError("count_preimages_line needs a line graph")
    net.check_configuration(z)
    n = net.n

    def f(v: int, window: tuple) -> str:
        return next(iter(net.rules[v].outputs(window)))

    if candidate_hints is None:
        if not validate_freezing(net):
            def candidate_hints(p: int, zq: str):
                return net.alphabet.downset(zq)
        else:
            # Non-freezing nets get no down-set pruning.
            def candidate_hints(p: int, zq: str):
                return net.alphabet.states

    cands = [tuple(candidate_hints(p, z[p])) for p in range(n)]
    if n == 1:
        return sum(1 for a in cands[0] if f(0, (a,)) == z[0])

    # layer at position p: dict (x_p, x_{p+1}) -> count of consistent prefixes
    layer: dict[tuple[str, str], int] = {}
    for a in cands[0]:
        for b in cands[1]:
            if f(0, (a, b)) == z[0]:
                layer[(a, b)] = layer.get((a, b), 0) + 1
    for p in range(1, n - 1):
        nxt: dict[tuple[str, str], int] = {}
        for (a, b), cnt in layer.items():
            for c in cands[p + 1]:
                if f(p, (a, b, c)) == z[p]:
                    key = (b, c)
                    nxt[key] = nxt.get(key, 0) + cnt
        layer = nxt
        if not layer:
            return 0
    return sum(cnt for (a, b), cnt in layer.items() if f(n - 1, (a, b)) == z[n - 1])
