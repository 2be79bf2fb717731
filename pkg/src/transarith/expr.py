"""Exact expression trees over Q, i, e, pi with exp/log/sqrt and powers.

Principal-branch semantics throughout: z^w = exp(w * Log z) and
Log z = ln|z| + i*Arg z with Arg z in (-pi, pi].  Canonicalization folds
rational arithmetic and a small set of branch-safe rewrites; it never
evaluates transcendental functions (e^(pi*i) stays symbolic).

The grammar accepts free identifiers (``alpha``, ``z``, ...) as opaque
symbols so that proof scripts can talk about abstract numbers; symbols
have no numeric value and are rejected by the evaluator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Union

from .errors import ParseError, SourceSpan

__all__ = [
    "Expr", "Rational", "ConstE", "ConstPi", "ConstI", "Symbol",
    "Add", "Sub", "Mul", "Div", "Pow", "Exp", "Log", "Sqrt",
    "E", "PI", "I", "rat",
    "parse", "canonicalize", "render", "rational_value",
    "depth", "node_count", "free_symbols", "substitute", "sort_key",
]


# ---------------------------------------------------------------------------
# Node types
# ---------------------------------------------------------------------------

class Expr:
    """Base class; all nodes are immutable and hashable."""

    __slots__ = ()


@dataclass(frozen=True)
class Rational(Expr):
    """Exact rational literal, always lowest terms with positive denominator."""

    num: int
    den: int = 1

    def __post_init__(self):
        if self.den == 0:
            raise ValueError("zero denominator")
        g = math.gcd(self.num, self.den)
        num, den = self.num // g, self.den // g
        if den < 0:
            num, den = -num, -den
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def value(self) -> Fraction:
        return Fraction(self.num, self.den)


@dataclass(frozen=True)
class ConstE(Expr):
    pass


@dataclass(frozen=True)
class ConstPi(Expr):
    pass


@dataclass(frozen=True)
class ConstI(Expr):
    pass


@dataclass(frozen=True)
class Symbol(Expr):
    """Free named constant; used by proof scripts, not evaluable."""

    name: str


@dataclass(frozen=True)
class Add(Expr):
    terms: tuple


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    factors: tuple


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Expr


@dataclass(frozen=True)
class Exp(Expr):
    arg: Expr


@dataclass(frozen=True)
class Log(Expr):
    arg: Expr


@dataclass(frozen=True)
class Sqrt(Expr):
    arg: Expr


E = ConstE()
PI = ConstPi()
I = ConstI()

RatLike = Union[int, Fraction, Rational]


def rat(x: RatLike, den: Optional[int] = None) -> Rational:
    """Build a rational literal from an int, Fraction, or num/den pair."""
    if den is not None:
        return Rational(int(x), den)
    if isinstance(x, Rational):
        return x
    if isinstance(x, Fraction):
        return Rational(x.numerator, x.denominator)
    return Rational(int(x))


def add(*terms: Expr) -> Expr:
    return Add(tuple(terms)) if len(terms) != 1 else terms[0]


def mul(*factors: Expr) -> Expr:
    return Mul(tuple(factors)) if len(factors) != 1 else factors[0]


# ---------------------------------------------------------------------------
# Introspection helpers
# ---------------------------------------------------------------------------

def children(e: Expr) -> tuple:
    if isinstance(e, Add):
        return e.terms
    if isinstance(e, Mul):
        return e.factors
    if isinstance(e, (Sub, Div)):
        return (e.left, e.right)
    if isinstance(e, Pow):
        return (e.base, e.exponent)
    if isinstance(e, (Exp, Log, Sqrt)):
        return (e.arg,)
    return ()


def walk(e: Expr) -> Iterator[Expr]:
    yield e
    for c in children(e):
        yield from walk(c)


def depth(e: Expr) -> int:
    kids = children(e)
    return 1 + (max(depth(c) for c in kids) if kids else 0)


def node_count(e: Expr) -> int:
    return 1 + sum(node_count(c) for c in children(e))


def free_symbols(e: Expr) -> frozenset:
    return frozenset(n.name for n in walk(e) if isinstance(n, Symbol))


def substitute(e: Expr, target: Expr, replacement: Expr) -> Expr:
    """Replace every subtree structurally equal to ``target``."""
    if e == target:
        return replacement
    if isinstance(e, Add):
        return Add(tuple(substitute(t, target, replacement) for t in e.terms))
    if isinstance(e, Mul):
        return Mul(tuple(substitute(f, target, replacement) for f in e.factors))
    if isinstance(e, Sub):
        return Sub(substitute(e.left, target, replacement),
                   substitute(e.right, target, replacement))
    if isinstance(e, Div):
        return Div(substitute(e.left, target, replacement),
                   substitute(e.right, target, replacement))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, target, replacement),
                   substitute(e.exponent, target, replacement))
    if isinstance(e, Exp):
        return Exp(substitute(e.arg, target, replacement))
    if isinstance(e, Log):
        return Log(substitute(e.arg, target, replacement))
    if isinstance(e, Sqrt):
        return Sqrt(substitute(e.arg, target, replacement))
    return e


_RANK = {
    Rational: 0, ConstE: 1, ConstPi: 2, ConstI: 3, Symbol: 4,
    Sqrt: 5, Log: 6, Exp: 7, Pow: 8, Mul: 9, Add: 10, Sub: 11, Div: 12,
}


def sort_key(e: Expr):
    """Total deterministic order on expression trees."""
    r = _RANK[type(e)]
    if isinstance(e, Rational):
        return (r, e.num, e.den)
    if isinstance(e, Symbol):
        return (r, e.name)
    return (r,) + tuple(sort_key(c) for c in children(e))


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_FUNCTIONS = {"exp": Exp, "log": Log, "sqrt": Sqrt}
_CONSTANTS = {"e": E, "pi": PI, "i": I}


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens = []
        self._scan()
        self.idx = 0

    def _scan(self):
        text, n = self.text, len(self.text)
        pos = 0
        while pos < n:
            ch = text[pos]
            if ch.isspace():
                pos += 1
                continue
            if ch.isdigit():
                start = pos
                while pos < n and text[pos].isdigit():
                    pos += 1
                self.tokens.append(("INT", text[start:pos], SourceSpan(start, pos)))
                continue
            if ch.isalpha() or ch == "_":
                start = pos
                while pos < n and (text[pos].isalnum() or text[pos] == "_"):
                    pos += 1
                self.tokens.append(("NAME", text[start:pos], SourceSpan(start, pos)))
                continue
            if ch in "+-*/^()":
                self.tokens.append((ch, ch, SourceSpan(pos, pos + 1)))
                pos += 1
                continue
            raise ParseError(f"unexpected character {ch!r}", SourceSpan(pos, pos + 1))

    def peek(self):
        if self.idx < len(self.tokens):
            return self.tokens[self.idx]
        end = len(self.text)
        return ("EOF", "", SourceSpan(end, end))

    def next(self):
        tok = self.peek()
        if tok[0] != "EOF":
            self.idx += 1
        return tok


class _Parser:
    """Recursive descent over the grammar:

    expr   := term (("+"|"-") term)*
    term   := unary (("*"|"/") unary)*
    unary  := "-" unary | factor
    factor := atom ("^" unary)?          # right-associative power
    atom   := INT ("/" INT)? | "e" | "pi" | "i"
            | "exp(" expr ")" | "log(" expr ")" | "sqrt(" expr ")"
            | NAME | "(" expr ")"
    """

    def __init__(self, text: str):
        self.toks = _Tokenizer(text)

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.toks.peek()
        if tok[0] != "EOF":
            raise ParseError(f"trailing input {tok[1]!r}", tok[2])
        return e

    def expr(self) -> Expr:
        node = self.term()
        while self.toks.peek()[0] in ("+", "-"):
            op = self.toks.next()[0]
            rhs = self.term()
            node = Add((node, rhs)) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.toks.peek()[0] in ("*", "/"):
            op = self.toks.next()[0]
            rhs = self.unary()
            node = Mul((node, rhs)) if op == "*" else Div(node, rhs)
        return node

    def unary(self) -> Expr:
        if self.toks.peek()[0] == "-":
            self.toks.next()
            return Mul((Rational(-1), self.unary()))
        return self.factor()

    def factor(self) -> Expr:
        base = self.atom()
        if self.toks.peek()[0] == "^":
            self.toks.next()
            exponent = self.unary()
            return Pow(base, exponent)
        return base

    def atom(self) -> Expr:
        tok = self.toks.next()
        kind, text, span = tok
        if kind == "INT":
            num = int(text)
            # INT "/" INT is a rational literal when it fits; a zero
            # denominator falls back to division so the error surfaces
            # at evaluation, not parse time.
            save = self.toks.idx
            if self.toks.peek()[0] == "/":
                self.toks.next()
                tok2 = self.toks.peek()
                if tok2[0] == "INT":
                    self.toks.next()
                    den = int(tok2[1])
                    if den == 0:
                        return Div(Rational(num), Rational(0))
                    return Rational(num, den)
                self.toks.idx = save
            return Rational(num)
        if kind == "NAME":
            if text in _CONSTANTS:
                return _CONSTANTS[text]
            if text in _FUNCTIONS:
                opener = self.toks.next()
                if opener[0] != "(":
                    raise ParseError(f"{text} requires parentheses", opener[2])
                inner = self.expr()
                closer = self.toks.next()
                if closer[0] != ")":
                    raise ParseError("expected ')'", closer[2])
                return _FUNCTIONS[text](inner)
            return Symbol(text)
        if kind == "(":
            inner = self.expr()
            closer = self.toks.next()
            if closer[0] != ")":
                raise ParseError("expected ')'", closer[2])
            return inner
        raise ParseError(f"unexpected token {text!r}" if text else "unexpected end of input", span)


def parse(text: str) -> Expr:
    """Parse an expression string; raises ParseError with a SourceSpan."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Canonicalization
# ---------------------------------------------------------------------------
#
# Only branch-safe rewrites are applied:
#   * rational arithmetic, including integer powers and half-integer
#     powers of rationals routed through sqrt (q^(k/2) = q^m * sqrt(q)^r)
#   * z^a * z^b -> z^(a+b)       (same Log z on both sides)
#   * (z^a)^n -> z^(a*n) and Exp(y)^n -> Exp(n*y) for integer n only
#   * Pow(e, x) -> Exp(x), Exp(Log y) -> y, Exp(w * Log y) -> y^w
#     (the last two are the definition of the principal power)
#   * sqrt(q) for rational q normalized to c * sqrt(m), m squarefree
# The branch-unsafe (z^a)^b -> z^(ab) for non-integer b is never applied.

_FOLD_POW_LIMIT = 4096
_FACTOR_LIMIT = 10 ** 12


def _sqrt_int_decompose(n: int) -> tuple:
    """n > 0 -> (s, m) with n = s^2 * m, m squarefree (best effort for huge n)."""
    s, m = 1, 1
    p = 2
    rem = n
    while p * p <= rem and p < 10 ** 4:
        if rem % p == 0:
            k = 0
            while rem % p == 0:
                rem //= p
                k += 1
            s *= p ** (k // 2)
            if k % 2:
                m *= p
        p += 1 if p == 2 else 2
    if rem > 1:
        r = math.isqrt(rem)
        if r * r == rem:
            s *= r
        else:
            m *= rem
    return s, m


def maybe_singular(e: Expr) -> bool:
    """Conservative: could evaluation of e hit a domain error somewhere?"""
    for n in walk(e):
        if isinstance(n, (Log, Div)):
            return True
        if isinstance(n, Pow):
            x = n.exponent
            if not (isinstance(x, Rational) and x.den == 1 and x.num > 0):
                return True
    return False


def _known_nonzero(e: Expr) -> bool:
    if isinstance(e, Rational):
        return e.num != 0
    return isinstance(e, (ConstE, ConstPi, ConstI))


def canonicalize(e: Expr) -> Expr:
    """Idempotent, value-preserving normal form (see module docstring)."""
    if isinstance(e, (Rational, ConstE, ConstPi, ConstI, Symbol)):
        return e
    if isinstance(e, Add):
        return _add_collect([canonicalize(t) for t in e.terms])
    if isinstance(e, Sub):
        return _add_collect([canonicalize(e.left),
                             _mul_collect([Rational(-1), canonicalize(e.right)])])
    if isinstance(e, Mul):
        return _mul_collect([canonicalize(f) for f in e.factors])
    if isinstance(e, Div):
        return _mul_collect([canonicalize(e.left),
                             _pow_canonical(canonicalize(e.right), Rational(-1))])
    if isinstance(e, Pow):
        return _pow_canonical(canonicalize(e.base), canonicalize(e.exponent))
    if isinstance(e, Exp):
        return _exp_canonical(canonicalize(e.arg))
    if isinstance(e, Log):
        return _log_canonical(canonicalize(e.arg))
    if isinstance(e, Sqrt):
        return _sqrt_canonical(canonicalize(e.arg))
    raise TypeError(f"not an Expr: {e!r}")


def _sqrt_canonical(q: Expr) -> Expr:
    if isinstance(q, Rational):
        v = q.value
        if v == 0:
            return Rational(0)
        if v < 0:
            inner = _sqrt_canonical(rat(-v))
            return _mul_collect([I, inner])
        n = v.numerator * v.denominator
        if n <= _FACTOR_LIMIT ** 2:
            s, m = _sqrt_int_decompose(n)
            coeff = Fraction(s, v.denominator)
            if m == 1:
                return rat(coeff)
            return _mul_collect([rat(coeff), Sqrt(Rational(m))])
    return Sqrt(q)


def _log_canonical(x: Expr) -> Expr:
    if x == Rational(1):
        return Rational(0)
    if isinstance(x, ConstE):
        return Rational(1)
    return Log(x)


def _exp_canonical(x: Expr) -> Expr:
    if x == Rational(0):
        return Rational(1)
    if x == Rational(1):
        return E
    if isinstance(x, Log) and x.arg != Rational(0):
        return x.arg
    if isinstance(x, Mul):
        logs = [f for f in x.factors if isinstance(f, Log) and f.arg != Rational(0)]
        if logs:
            chosen = min(logs, key=sort_key)
            rest = list(x.factors)
            rest.remove(chosen)
            return _pow_canonical(chosen.arg, _mul_collect(rest))
    return Exp(x)


def _pow_canonical(b: Expr, x: Expr) -> Expr:
    if x == Rational(1):
        return b
    if isinstance(b, ConstE):
        return _exp_canonical(x)
    if isinstance(x, Rational):
        n = x.value
        if n == 0:
            if _known_nonzero(b):
                return Rational(1)
            return Pow(b, x)
        if isinstance(b, Rational):
            v = b.value
            if n.denominator == 1 and abs(n.numerator) <= _FOLD_POW_LIMIT:
                if v == 0:
                    return Rational(0) if n > 0 else Pow(b, x)
                return rat(v ** n.numerator)
            if n.denominator == 2:
                if v == 0:
                    return Rational(0) if n > 0 else Pow(b, x)
                k = n.numerator
                m_int = k // 2
                if abs(m_int) <= _FOLD_POW_LIMIT:
                    whole = rat(v ** m_int)
                    return _mul_collect([whole, _sqrt_canonical(b)])
        if n.denominator == 1:
            k = n.numerator
            if isinstance(b, ConstI):
                r = k % 4
                return (Rational(1), I, Rational(-1),
                        Mul((Rational(-1), I)))[r] if r != 1 else I
            if isinstance(b, Sqrt) and isinstance(b.arg, Rational):
                m = b.arg.value
                whole = rat(m ** (k // 2))
                if k % 2 == 0:
                    return whole
                return _mul_collect([whole, b])
            if isinstance(b, Pow) and isinstance(b.exponent, Rational):
                return _pow_canonical(b.base, rat(b.exponent.value * n))
            if isinstance(b, Exp):
                return _exp_canonical(_mul_collect([x, b.arg]))
            if isinstance(b, Mul):
                return _mul_collect([_pow_canonical(f, x) for f in b.factors])
    return Pow(b, x)


def _split_coeff(term: Expr) -> tuple:
    """term -> (Fraction coefficient, monomial Expr or None for pure constant)."""
    if isinstance(term, Rational):
        return term.value, None
    if isinstance(term, Mul):
        fs = term.factors
        if fs and isinstance(fs[0], Rational):
            rest = fs[1:]
            mono = rest[0] if len(rest) == 1 else Mul(rest)
            return fs[0].value, mono
    return Fraction(1), term


def _add_collect(terms: list) -> Expr:
    flat = []
    for t in terms:
        if isinstance(t, Add):
            flat.extend(t.terms)
        else:
            flat.append(t)
    const = Fraction(0)
    buckets = {}   # monomial -> Fraction
    order = []
    for t in flat:
        c, mono = _split_coeff(t)
        if mono is None:
            const += c
            continue
        if mono not in buckets:
            buckets[mono] = Fraction(0)
            order.append(mono)
        buckets[mono] += c
    out = []
    for mono in sorted(order, key=sort_key):
        c = buckets[mono]
        if c == 0:
            if maybe_singular(mono):
                out.append(Mul((Rational(0), mono)))
            continue
        if c == 1:
            out.append(mono)
        else:
            out.append(_attach_coeff(c, mono))
    if const != 0 or not out:
        out.insert(0, rat(const))
    if len(out) == 1:
        return out[0]
    return Add(tuple(out))


def _attach_coeff(c: Fraction, mono: Expr) -> Expr:
    if isinstance(mono, Mul):
        return Mul((rat(c),) + mono.factors)
    return Mul((rat(c), mono))


def _mul_collect(factors: list) -> Expr:
    flat = []
    for f in factors:
        if isinstance(f, Mul):
            flat.extend(f.factors)
        else:
            flat.append(f)
    coeff = Fraction(1)
    i_pow = 0
    sqrt_pows = {}   # squarefree int -> integer exponent
    bases = {}       # base Expr -> list of exponent Exprs
    order = []
    singular_atoms = []

    def add_base(bb: Expr, xx: Expr):
        if bb not in bases:
            bases[bb] = []
            order.append(bb)
        bases[bb].append(xx)

    for f in flat:
        if isinstance(f, Rational):
            coeff *= f.value
            continue
        if isinstance(f, ConstI):
            i_pow += 1
            continue
        if isinstance(f, Sqrt) and isinstance(f.arg, Rational):
            sqrt_pows[f.arg.num] = sqrt_pows.get(f.arg.num, 0) + 1
            continue
        if isinstance(f, Pow):
            bb, xx = f.base, f.exponent
            if isinstance(bb, ConstI) and isinstance(xx, Rational) and xx.den == 1:
                i_pow += xx.num
                continue
            if (isinstance(bb, Sqrt) and isinstance(bb.arg, Rational)
                    and isinstance(xx, Rational) and xx.den == 1):
                sqrt_pows[bb.arg.num] = sqrt_pows.get(bb.arg.num, 0) + xx.num
                continue
            add_base(bb, xx)
            continue
        add_base(f, Rational(1))

    # fold i^k
    i_pow %= 4
    if i_pow == 2:
        coeff = -coeff
        i_pow = 0
    elif i_pow == 3:
        coeff = -coeff
        i_pow = 1

    # fold sqrt exponents, then merge distinct surviving square roots
    pending = []
    for m, k in sorted(sqrt_pows.items()):
        coeff *= Fraction(m) ** (k // 2)
        if k % 2:
            pending.append(m)
    radicand = 1
    for m in pending:
        g = math.gcd(radicand, m)
        coeff *= g
        radicand = (radicand // g) * (m // g)

    parts = []
    for bb in order:
        exps = bases[bb]
        total = exps[0] if len(exps) == 1 else _add_collect(list(exps))
        piece = _pow_canonical(bb, total)
        if isinstance(piece, Rational):
            coeff *= piece.value
        elif piece == I:
            i_pow += 1
        else:
            parts.append(piece)
            if maybe_singular(piece):
                singular_atoms.append(piece)
    if i_pow % 4 in (2, 3):
        coeff = -coeff
    if i_pow % 4 in (1, 3):
        parts.append(I)
    if radicand != 1:
        parts.append(Sqrt(Rational(radicand)))

    if coeff == 0:
        if singular_atoms:
            parts_sorted = tuple(sorted(parts, key=sort_key))
            return Mul((Rational(0),) + parts_sorted)
        return Rational(0)

    parts.sort(key=sort_key)
    if not parts:
        return rat(coeff)
    if coeff != 1:
        return Mul((rat(coeff),) + tuple(parts))
    if len(parts) == 1:
        return parts[0]
    return Mul(tuple(parts))


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def _needs_parens_in_product(e: Expr) -> bool:
    return isinstance(e, (Add, Sub))


def _render_pow_operand(e: Expr) -> str:
    # atoms that re-parse unambiguously next to '^'
    if isinstance(e, Rational) and e.den == 1 and e.num >= 0:
        return str(e.num)
    if isinstance(e, (ConstE, ConstPi, ConstI, Symbol, Exp, Log, Sqrt)):
        return render(e)
    return "(" + render(e) + ")"


def render(e: Expr) -> str:
    """Text form; parse(render(e)) canonicalizes back to canonicalize(e)."""
    if isinstance(e, Rational):
        if e.den == 1:
            return str(e.num) if e.num >= 0 else f"-{-e.num}"
        s = f"{abs(e.num)}/{e.den}"
        return s if e.num >= 0 else "-" + s
    if isinstance(e, ConstE):
        return "e"
    if isinstance(e, ConstPi):
        return "pi"
    if isinstance(e, ConstI):
        return "i"
    if isinstance(e, Symbol):
        return e.name
    if isinstance(e, Exp):
        return f"exp({render(e.arg)})"
    if isinstance(e, Log):
        return f"log({render(e.arg)})"
    if isinstance(e, Sqrt):
        return f"sqrt({render(e.arg)})"
    if isinstance(e, Pow):
        return f"{_render_pow_operand(e.base)}^{_render_pow_operand(e.exponent)}"
    if isinstance(e, Mul):
        parts = []
        for f in e.factors:
            s = render(f)
            if _needs_parens_in_product(f) or (parts and s.startswith("-")):
                s = "(" + s + ")"
            parts.append(s)
        return "*".join(parts)
    if isinstance(e, Div):
        ls = render(e.left)
        rs = render(e.right)
        if _needs_parens_in_product(e.left) or ls.startswith("-"):
            ls = "(" + ls + ")"
        # parenthesize the divisor unless it is a bare positive integer,
        # and even then guard INT/INT re-tokenizing as a rational literal
        if not (isinstance(e.right, (ConstE, ConstPi, ConstI, Symbol, Exp, Log, Sqrt))):
            rs = "(" + rs + ")"
        if isinstance(e.left, Rational) and e.left.den == 1:
            ls = "(" + ls + ")"
        return f"{ls}/{rs}"
    if isinstance(e, Add):
        out = render(e.terms[0])
        for t in e.terms[1:]:
            c, _ = _split_coeff(t)
            s = render(t)
            if s.startswith("-"):
                out += " - " + render(_attach_coeff(-c, _split_coeff(t)[1])
                                      if _split_coeff(t)[1] is not None else rat(-c))
            else:
                out += " + " + s
        return out
    if isinstance(e, Sub):
        rs = render(e.right)
        if isinstance(e.right, (Add, Sub)) or rs.startswith("-"):
            rs = "(" + rs + ")"
        return f"{render(e.left)} - {rs}"
    raise TypeError(f"not an Expr: {e!r}")


def rational_value(e: Expr) -> Optional[Fraction]:
    """Exact rational value when canonicalization reaches a literal; never guesses."""
    c = canonicalize(e)
    if isinstance(c, Rational):
        return c.value
    return None
