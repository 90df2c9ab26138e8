"""Boolean aggregation rules over n ordered binary test outcomes.

A rule is a truth table over the 2**n joint outcomes, stored as an int.
Outcome vector (y_1, ..., y_n) maps to index j = sum_i y_i * 2**(n - i):
test 1 is the most significant bit, j = 0 is all-negative and
j = 2**n - 1 is all-positive.  Bit j of ``table`` is the aggregate call
for outcome j (1 means positive).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .core import ArityError, DiagAggError

MAX_TESTS = 6


class RuleSyntaxError(DiagAggError, ValueError):
    """Malformed rule expression; ``position`` is a 0-based character offset."""

    def __init__(self, message: str, text: str = "", position: int = 0):
        self.text = text
        self.position = position
        if text:
            message = f"{message} at position {position}\n  {text}\n  {' ' * position}^"
        super().__init__(message)


@dataclass(frozen=True, order=True)
class AggregationRule:
    n: int
    table: int

    def __post_init__(self):
        if not 1 <= self.n <= MAX_TESTS:
            raise ValueError(f"rules cover 1..{MAX_TESTS} tests, got n={self.n}")
        if not 0 <= self.table < (1 << (1 << self.n)):
            raise ValueError(f"table 0x{self.table:x} does not fit 2**{self.n} outcomes")

    @property
    def size(self) -> int:
        """Number of joint outcomes, 2**n."""
        return 1 << self.n

    def bits(self) -> tuple:
        return tuple((self.table >> j) & 1 for j in range(self.size))

    def positive_indices(self) -> list:
        return [j for j in range(self.size) if (self.table >> j) & 1]

    def __str__(self) -> str:
        return format_rule(self)


def full_mask(n: int) -> int:
    return (1 << (1 << n)) - 1


def outcome_index(outcomes: Sequence) -> int:
    j = 0
    for y in outcomes:
        j = (j << 1) | (1 if y else 0)
    return j


def index_outcomes(j: int, n: int) -> tuple:
    """Outcome vector (y_1, ..., y_n) for permutation index j."""
    return tuple((j >> (n - 1 - i)) & 1 for i in range(n))


def from_bits(bits: Sequence) -> AggregationRule:
    size = len(bits)
    n = size.bit_length() - 1
    if size < 2 or 1 << n != size:
        raise ValueError(f"truth table length must be a power of two >= 2, got {size}")
    return AggregationRule(n, sum(1 << j for j, b in enumerate(bits) if b))


def from_predicate(n: int, pred) -> AggregationRule:
    table = 0
    for j in range(1 << n):
        if pred(index_outcomes(j, n)):
            table |= 1 << j
    return AggregationRule(n, table)


NAMED_KINDS = ("and", "or", "majority", "kofn", "single", "all_pos", "all_neg")


def named_rule(kind: str, n: int, param: int | None = None) -> AggregationRule:
    """Build a standard rule.

    ``kind`` is one of and, or, majority, kofn, single, all_pos, all_neg.
    ``param`` is k for kofn and the 1-based test index for single.
    """
    kind = kind.lower()
    if kind not in NAMED_KINDS:
        raise ValueError(f"unknown rule kind {kind!r}; expected one of {NAMED_KINDS}")
    if not 1 <= n <= MAX_TESTS:
        raise ValueError(f"n must be in 1..{MAX_TESTS}, got {n}")
    if kind == "and":
        return from_predicate(n, all)
    if kind == "or":
        return from_predicate(n, any)
    if kind == "majority":
        if n % 2 == 0:
            raise ValueError(f"majority is defined for odd n only, got n={n}")
        return from_predicate(n, lambda y: 2 * sum(y) >= n + 1)
    if kind == "kofn":
        if param is None or not 1 <= param <= n:
            raise ValueError(f"kofn needs 1 <= k <= {n}, got k={param}")
        return from_predicate(n, lambda y: sum(y) >= param)
    if kind == "single":
        if param is None or not 1 <= param <= n:
            raise ValueError(f"single needs a test index in 1..{n}, got {param}")
        return from_predicate(n, lambda y: y[param - 1] == 1)
    if kind == "all_pos":
        return AggregationRule(n, full_mask(n))
    return AggregationRule(n, 0)


def evaluate_rule(rule: AggregationRule, outcomes: Sequence) -> bool:
    if len(outcomes) != rule.n:
        raise ArityError(f"rule takes {rule.n} outcomes, got {len(outcomes)}")
    return bool((rule.table >> outcome_index(outcomes)) & 1)


def complement_rule(rule: AggregationRule) -> AggregationRule:
    return AggregationRule(rule.n, rule.table ^ full_mask(rule.n))


def _var_mask(n: int, i: int) -> int:
    """Bitmask over outcome indices where test i (0-based) is negative."""
    w = 1 << (n - 1 - i)
    return sum(1 << j for j in range(1 << n) if not j & w)


def is_monotone(rule: AggregationRule) -> bool:
    """True iff flipping any test from - to + never turns the call from + to -."""
    n, t = rule.n, rule.table
    for i in range(n):
        w = 1 << (n - 1 - i)
        # bit j with y_i = 0 set, while bit j + w (same outcome, y_i = 1) clear
        if t & _var_mask(n, i) & ~(t >> w):
            return False
    return True


# ---------------------------------------------------------------- parsing

_ALIASES = {"∧": "&", "∨": "|", "¬": "!", "&&": "&", "||": "|"}


class _Parser:
    # expr := term ('|' term)* ; term := factor ('&' factor)*
    # factor := '!'? atom ; atom := 'Y' integer | '(' expr ')'

    def __init__(self, text: str, n: int):
        self.text = text
        self.n = n
        self.pos = 0

    def error(self, msg, pos=None):
        raise RuleSyntaxError(msg, self.text, self.pos if pos is None else pos)

    def peek(self) -> str:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def accept(self, ch) -> bool:
        if self.peek() == ch:
            self.pos += 1
            return True
        return False

    def parse(self) -> int:
        if not self.text.strip():
            self.error("empty expression")
        value = self.expr()
        if self.peek():
            self.error(f"unexpected {self.peek()!r}")
        return value

    def expr(self) -> int:
        value = self.term()
        while self.accept("|"):
            value |= self.term()
        return value

    def term(self) -> int:
        value = self.factor()
        while self.accept("&"):
            value &= self.factor()
        return value

    def factor(self) -> int:
        if self.accept("!"):
            return self.atom() ^ full_mask(self.n)
        return self.atom()

    def atom(self) -> int:
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            value = self.expr()
            if not self.accept(")"):
                self.error("expected ')'")
            return value
        if ch in ("Y", "y"):
            start = self.pos
            self.pos += 1
            digits_at = self.pos
            while self.pos < len(self.text) and self.text[self.pos].isdigit():
                self.pos += 1
            if self.pos == digits_at:
                self.error("expected a test index after 'Y'")
            i = int(self.text[digits_at:self.pos])
            if not 1 <= i <= self.n:
                raise ArityError(
                    f"test index {i} at position {start} is out of range 1..{self.n}"
                )
            return named_rule("single", self.n, i).table
        if not ch:
            self.error("unexpected end of expression")
        self.error(f"unexpected {ch!r}")


def parse_rule(expr: str, n: int) -> AggregationRule:
    """Parse a Boolean expression such as ``"(Y1&Y2)|Y3"`` into a rule over n tests.

    Precedence is ``!`` over ``&`` over ``|``; the Unicode operators
    ∧, ∨ and ¬ are accepted as aliases.
    """
    if not 1 <= n <= MAX_TESTS:
        raise ValueError(f"n must be in 1..{MAX_TESTS}, got {n}")
    for k, v in _ALIASES.items():
        expr = expr.replace(k, v)
    return AggregationRule(n, _Parser(expr, n).parse())


# ------------------------------------------------------- serialization

def rule_from_spec(spec: str, n: int) -> AggregationRule:
    """Resolve a rule spec: a keyword, ``table:0x..``, or an expression.

    Keywords: and, or, majority, kofn:K, single:I, all_pos, all_neg.
    """
    s = spec.strip()
    low = s.lower()
    if low.startswith("table:"):
        try:
            table = int(s[6:], 0)
        except ValueError:
            raise RuleSyntaxError("bad truth-table literal", s, 6) from None
        try:
            return AggregationRule(n, table)
        except ValueError as e:
            raise ArityError(str(e)) from None
    head, _, arg = low.partition(":")
    if head in NAMED_KINDS:
        param = None
        if arg:
            try:
                param = int(arg)
            except ValueError:
                raise RuleSyntaxError("expected an integer parameter", s, len(head) + 1) from None
        elif head in ("kofn", "single"):
            raise RuleSyntaxError(f"{head} needs a parameter, e.g. {head}:1", s, len(s))
        try:
            return named_rule(head, n, param)
        except ValueError as e:
            raise ArityError(str(e)) from None
    return parse_rule(s, n)


def minimal_true_points(rule: AggregationRule) -> list:
    """Minimal positive outcomes of a monotone rule, as index bitmasks."""
    pos = rule.positive_indices()
    return [j for j in pos if not any(k != j and k & j == k for k in pos)]


def format_rule(rule: AggregationRule) -> str:
    """Readable spec that round-trips through ``rule_from_spec``.

    Monotone rules print as their unique irredundant OR-of-ANDs over
    positive literals (e.g. ``(Y1&Y2)|Y3``); other rules print as a
    ``table:`` literal.
    """
    n = rule.n
    if rule.table == 0:
        return "all_neg"
    if rule.table == full_mask(n):
        return "all_pos"
    if not is_monotone(rule):
        width = max(1, (1 << n) // 4)
        return f"table:0x{rule.table:0{width}x}"
    terms = sorted(
        [i + 1 for i, y in enumerate(index_outcomes(j, n)) if y]
        for j in minimal_true_points(rule)
    )
    parts = []
    for idx in terms:
        body = "&".join(f"Y{i}" for i in idx)
        parts.append(f"({body})" if len(idx) > 1 and len(terms) > 1 else body)
    return "|".join(parts)
