"""Compact freezing traces and regular-expression matching over them.

A freezing trace is run-length encoded as (state, duration) segments whose
states strictly increase in the freezing order, so the segment count is at
most the alphabet's chain height. Matching never expands the word: for each
segment the NFA's one-symbol relation is raised to the duration by binary
exponentiation over boolean matrices (bitmask rows).

Concrete regex syntax (documented in docs/formats.md):
    symbols     bare alphanumeric character, or 'quoted token' for longer names
    operators   juxtaposition (concatenation), | (union), * (star), + (plus)
    .           any alphabet symbol
    ( )         grouping
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

from anspec.core import Alphabet, InputError, State


# ---------------------------------------------------------------------------
# Compact traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompactTrace:
    """Run-length encoded state history: ((state, duration), ...), durations >= 1."""

    segments: tuple[tuple[State, int], ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise InputError("empty trace")
        for q, d in self.segments:
            if d < 1:
                raise InputError(f"segment ({q},{d}) has duration < 1")
        for (a, _), (b, _) in zip(self.segments, self.segments[1:]):
            if a == b:
                raise InputError("consecutive segments with equal state")

    @property
    def total_length(self) -> int:
        return sum(d for _, d in self.segments)

    @property
    def final_state(self) -> State:
        return self.segments[-1][0]

    def expand(self) -> tuple[State, ...]:
        out: list[State] = []
        for q, d in self.segments:
            out.extend([q] * d)
        return tuple(out)

    def state_at(self, t: int) -> State:
        if t < 0:
            raise InputError("negative time")
        acc = 0
        for q, d in self.segments:
            acc += d
            if t < acc:
                return q
        raise InputError(f"time {t} beyond trace length {self.total_length}")

    def change_times(self) -> tuple[int, ...]:
        """Times t >= 1 at which the state differs from time t-1."""
        times = []
        acc = 0
        for q, d in self.segments[:-1]:
            acc += d
            times.append(acc)
        return tuple(times)

    @staticmethod
    def from_word(word: Sequence[State]) -> "CompactTrace":
        if not word:
            raise InputError("empty trace")
        segs: list[tuple[State, int]] = []
        for q in word:
            if segs and segs[-1][0] == q:
                segs[-1] = (q, segs[-1][1] + 1)
            else:
                segs.append((q, 1))
        return CompactTrace(tuple(segs))

    def is_freezing(self, alphabet: Alphabet) -> bool:
        return all(alphabet.less(a, b) for (a, _), (b, _) in zip(self.segments, self.segments[1:]))


def enumerate_compact_traces(alphabet: Alphabet, length: int,
                             start_state: State | None = None) -> Iterator[CompactTrace]:
    """All freezing traces of the given total length, as compact traces.

    A trace is a strictly increasing chain q_1 < ... < q_k together with a
    composition of `length` into k positive durations, so the count is
    sum over chains of C(length-1, k-1).
    """
    if length < 1:
        raise InputError("length must be >= 1")

    def chains(prefix: list[State]) -> Iterator[tuple[State, ...]]:
        yield tuple(prefix)
        last = prefix[-1]
        for q in alphabet.states:
            if alphabet.less(last, q):
                prefix.append(q)
                yield from chains(prefix)
                prefix.pop()

    starts = [start_state] if start_state is not None else list(alphabet.states)
    for q0 in starts:
        if q0 not in alphabet:
            raise InputError(f"unknown state {q0!r}")
        for chain in chains([q0]):
            k = len(chain)
            if k > length:
                continue
            for cuts in itertools.combinations(range(1, length), k - 1):
                bounds = (0,) + cuts + (length,)
                segs = tuple(
                    (chain[i], bounds[i + 1] - bounds[i]) for i in range(k)
                )
                yield CompactTrace(segs)


def count_freezing_traces(alphabet: Alphabet, length: int) -> int:
    """Closed form: sum over chains of C(length-1, |chain|-1)."""
    from math import comb

    total = 0

    def walk(last: State | None, size: int) -> None:
        nonlocal total
        if last is not None and size <= length:
            total += comb(length - 1, size - 1)
        for q in alphabet.states:
            if last is None or alphabet.less(last, q):
                walk(q, size + 1)

    walk(None, 0)
    return total


# ---------------------------------------------------------------------------
# Regex parsing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RSym:
    symbol: State


@dataclass(frozen=True)
class RAny:
    pass


@dataclass(frozen=True)
class RCat:
    parts: tuple


@dataclass(frozen=True)
class RAlt:
    parts: tuple


@dataclass(frozen=True)
class RStar:
    inner: object


@dataclass(frozen=True)
class RPlus:
    inner: object


@dataclass(frozen=True)
class REmpty:
    """Matches the empty word only (empty concatenation)."""


class RegexParseError(InputError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()|*+.":
            tokens.append((ch, ch, i))
            i += 1
        elif ch == "'":
            j = text.find("'", i + 1)
            if j < 0:
                raise RegexParseError("unterminated quoted symbol", i)
            tokens.append(("sym", text[i + 1:j], i))
            i = j + 1
        elif ch.isalnum() or ch == "_":
            tokens.append(("sym", ch, i))
            i += 1
        else:
            raise RegexParseError(f"unexpected character {ch!r}", i)
    return tokens


def parse_regex(text: str):
    """Parse the concrete syntax into an AST; errors carry the position."""
    tokens = _tokenize(text)
    pos = 0

    def peek() -> tuple[str, str, int] | None:
        return tokens[pos] if pos < len(tokens) else None

    def parse_alt():
        nonlocal pos
        parts = [parse_cat()]
        while peek() and peek()[0] == "|":
            pos += 1
            parts.append(parse_cat())
        return parts[0] if len(parts) == 1 else RAlt(tuple(parts))

    def parse_cat():
        nonlocal pos
        parts = []
        while peek() and peek()[0] in ("sym", ".", "("):
            parts.append(parse_rep())
        if not parts:
            return REmpty()
        return parts[0] if len(parts) == 1 else RCat(tuple(parts))

    def parse_rep():
        nonlocal pos
        node = parse_atom()
        while peek() and peek()[0] in ("*", "+"):
            node = RStar(node) if peek()[0] == "*" else RPlus(node)
            pos += 1
        return node

    def parse_atom():
        nonlocal pos
        tok = peek()
        if tok is None:
            raise RegexParseError("unexpected end of expression", len(text))
        kind, value, at = tok
        if kind == "sym":
            pos += 1
            return RSym(value)
        if kind == ".":
            pos += 1
            return RAny()
        if kind == "(":
            pos += 1
            node = parse_alt()
            if not (peek() and peek()[0] == ")"):
                raise RegexParseError("missing )", tokens[pos - 1][2])
            pos += 1
            return node
        raise RegexParseError(f"unexpected token {value!r}", at)

    node = parse_alt()
    if pos != len(tokens):
        raise RegexParseError(f"trailing input {tokens[pos][1]!r}", tokens[pos][2])
    return node


def regex_symbols(node) -> set[State]:
    if isinstance(node, RSym):
        return {node.symbol}
    if isinstance(node, (RAny, REmpty)):
        return set()
    if isinstance(node, (RCat, RAlt)):
        out: set[State] = set()
        for p in node.parts:
            out |= regex_symbols(p)
        return out
    return regex_symbols(node.inner)


# ---------------------------------------------------------------------------
# NFA
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceNFA:
    """Epsilon-free NFA over alphabet symbols, transitions as bitmask rows.

    delta[q][i] is the bitmask of states reachable from state i on symbol q.
    """

    alphabet: tuple[State, ...]
    size: int
    initial: int  # bitmask
    accepting: int  # bitmask
    delta: dict[State, tuple[int, ...]]

    def accepts_empty(self) -> bool:
        return bool(self.initial & self.accepting)

    def step(self, mask: int, symbol: State) -> int:
        if symbol not in self.delta:
            raise InputError(f"symbol {symbol!r} outside NFA alphabet")
        rows = self.delta[symbol]
        out = 0
        rest = mask
        while rest:
            b = rest & -rest
            out |= rows[b.bit_length() - 1]
            rest ^= b
        return out

    def accepts_word(self, word: Sequence[State]) -> bool:
        mask = self.initial
        for q in word:
            mask = self.step(mask, q)
            if not mask:
                return False
        return bool(mask & self.accepting)


def compile_regex(expr, alphabet: Alphabet) -> TraceNFA:
    """Thompson construction followed by epsilon elimination.

    `expr` is either concrete syntax or a pre-parsed AST. Symbols must belong
    to the alphabet; "." expands to any alphabet symbol.
    """
    node = parse_regex(expr) if isinstance(expr, str) else expr
    unknown = regex_symbols(node) - set(alphabet.states)
    if unknown:
        raise InputError(f"regex symbols outside alphabet: {sorted(unknown)}")

    # Thompson fragments over (start, accept) with eps and symbol edges.
    eps: list[set[int]] = []
    sym_edges: list[dict[State, set[int]]] = []

    def new_state() -> int:
        eps.append(set())
        sym_edges.append({})
        return len(eps) - 1

    def build(n) -> tuple[int, int]:
        if isinstance(n, REmpty):
            s = new_state()
            return s, s
        if isinstance(n, RSym):
            s, t = new_state(), new_state()
            sym_edges[s].setdefault(n.symbol, set()).add(t)
            return s, t
        if isinstance(n, RAny):
            s, t = new_state(), new_state()
            for q in alphabet.states:
                sym_edges[s].setdefault(q, set()).add(t)
            return s, t
        if isinstance(n, RCat):
            first, last = None, None
            for p in n.parts:
                s, t = build(p)
                if first is None:
                    first = s
                else:
                    eps[last].add(s)
                last = t
            return first, last
        if isinstance(n, RAlt):
            s, t = new_state(), new_state()
            for p in n.parts:
                ps, pt = build(p)
                eps[s].add(ps)
                eps[pt].add(t)
            return s, t
        if isinstance(n, RStar):
            s, t = new_state(), new_state()
            ps, pt = build(n.inner)
            eps[s].update((ps, t))
            eps[pt].update((ps, t))
            return s, t
        if isinstance(n, RPlus):
            ps, pt = build(n.inner)
            t = new_state()
            eps[pt].update((ps, t))
            return ps, t
        raise InputError(f"unknown regex node {n!r}")

    start, accept = build(node)

    def closure(i: int) -> set[int]:
        seen = {i}
        stack = [i]
        while stack:
            u = stack.pop()
            for w in eps[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return seen

    closures = [closure(i) for i in range(len(eps))]
    size = len(eps)
    delta: dict[State, list[int]] = {q: [0] * size for q in alphabet.states}
    for i in range(size):
        for j in closures[i]:
            for q, targets in sym_edges[j].items():
                row = 0
                for t in targets:
                    for u in closures[t]:
                        row |= 1 << u
                delta[q][i] |= row
    initial = 0
    for u in closures[start]:
        initial |= 1 << u
    accepting = 1 << accept
    return TraceNFA(
        alphabet=tuple(alphabet.states),
        size=size,
        initial=initial,
        accepting=accepting,
        delta={q: tuple(rows) for q, rows in delta.items()},
    )


# ---------------------------------------------------------------------------
# Run-length matching
# ---------------------------------------------------------------------------

def _mat_mul(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    out = []
    for row in a:
        acc = 0
        rest = row
        while rest:
            bit = rest & -rest
            acc |= b[bit.bit_length() - 1]
            rest ^= bit
        out.append(acc)
    return tuple(out)


@lru_cache(maxsize=4096)
def _mat_pow(mat: tuple[int, ...], d: int) -> tuple[int, ...]:
    if d == 1:
        return mat
    half = _mat_pow(mat, d // 2)
    sq = _mat_mul(half, half)
    return _mat_mul(sq, mat) if d % 2 else sq


def _apply(mask: int, mat: tuple[int, ...]) -> int:
    out = 0
    rest = mask
    while rest:
        bit = rest & -rest
        out |= mat[bit.bit_length() - 1]
        rest ^= bit
    return out


def trace_matches(nfa: TraceNFA, trace: CompactTrace) -> bool:
    """Does the expanded word of the trace belong to the NFA's language?

    Computed segment by segment through relation powers R_q^d; durations may be
    astronomically large without expanding anything.
    """
    mask = nfa.initial
    if trace.total_length == 0:
        return nfa.accepts_empty()
    for q, d in trace.segments:
        if q not in nfa.delta:
            raise InputError(f"symbol {q!r} outside NFA alphabet")
        mask = _apply(mask, _mat_pow(nfa.delta[q], d))
        if not mask:
            return False
    return bool(mask & nfa.accepting)


def naive_match(expr, alphabet: Alphabet, word: Sequence[State]) -> bool:
    """Backtracking matcher used as an independent oracle in tests."""
    node = parse_regex(expr) if isinstance(expr, str) else expr

    def match(n, w: tuple[State, ...]) -> set[int]:
        """Set of prefix lengths of w consumed by n."""
        if isinstance(n, REmpty):
            return {0}
        if isinstance(n, RSym):
            return {1} if w and w[0] == n.symbol else set()
        if isinstance(n, RAny):
            return {1} if w and w[0] in alphabet.states else set()
        if isinstance(n, RCat):
            lens = {0}
            for p in n.parts:
                nxt = set()
                for k in lens:
                    for d in match(p, w[k:]):
                        nxt.add(k + d)
                lens = nxt
                if not lens:
                    break
            return lens
        if isinstance(n, RAlt):
            out: set[int] = set()
            for p in n.parts:
                out |= match(p, w)
            return out
        if isinstance(n, RStar):
            lens = {0}
            frontier = {0}
            while frontier:
                nxt = set()
                for k in frontier:
                    for d in match(n.inner, w[k:]):
                        if d and k + d not in lens:
                            nxt.add(k + d)
                lens |= nxt
                frontier = nxt
            return lens
        if isinstance(n, RPlus):
            return match(RCat((n.inner, RStar(n.inner))), w)
        raise InputError(f"unknown regex node {n!r}")

    return len(word) in match(node, tuple(word))


def any_symbol_regex() -> RAny:
    return RAny()


def pinned_then_regex(first: State, final: State) -> RCat:
    """Language first . any* . final+ (used by the gadget specifications)."""
    return RCat((RSym(first), RStar(RAny()), RPlus(RSym(final))))
