"""Families of maps and their text format.

Grammar (whitespace-insensitive, ``#`` starts a comment)::

    family := "dim" INT mapdef*
    mapdef := "map" IDENT "=" "[" expr (";" expr)* "]"
    expr   := term ("+" term)*
    term   := COEFF "*" factor | factor | "0"
    factor := VAR | "max(" expr ("," expr)+ ")" | "min(" expr ("," expr)+ ")"
            | "geo(" COEFF ":" expr ("," COEFF ":" expr)+ ")" | "(" expr ")"
    VAR    := "x" INT          (1-based)
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property

from .errors import ParseError, SemanticError
from .expr import (
    GEO_WEIGHT_TOL,
    Atom,
    Geo,
    MapDef,
    Max,
    Min,
    Sum,
    Zero,
    atom,
    classify,
    make_sum,
    normalize_weights,
    scale,
)


@dataclass(frozen=True)
class Family:
    n: int
    maps: tuple

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be positive")
        if not self.maps:
            raise ValueError("a family needs at least one map")
        names = [f.name for f in self.maps]
        if len(set(names)) != len(names):
            raise ValueError("map names must be unique")
        for f in self.maps:
            if f.n != self.n:
                raise ValueError(f"map {f.name!r} has {f.n} coordinates, expected {self.n}")

    def __len__(self) -> int:
        return len(self.maps)

    @property
    def names(self) -> list:
        return [f.name for f in self.maps]

    def index(self, name: str) -> int:
        for k, f in enumerate(self.maps):
            if f.name == name:
                return k
        raise KeyError(name)

    def scaled(self, c: float) -> "Family":
        return Family(self.n, tuple(f.scaled(c) for f in self.maps))

    def subfamily(self, names) -> "Family":
        return Family(self.n, tuple(self.maps[self.index(nm)] for nm in names))

    @property
    def subadditive_certified(self) -> bool:
        return all(classify(f).subadditive_certified for f in self.maps)

    @cached_property
    def program(self):
        from .kernels import compile_family

        return compile_family(self)

    def word_names(self, word) -> str:
        return " ".join(self.maps[k].name for k in word)


# -- lexer --------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<num>-?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[\[\];=+*(),:])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list:
    toks = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(line, pos - line_start + 1, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind == "nl":
            line, line_start = line + 1, m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


_VAR_RE = re.compile(r"x(\d+)\Z")


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.n = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.tok
        if t.text != text or t.kind not in ("punct", "ident"):
            raise ParseError(t.line, t.col, f"expected {text!r}, found {t.text or 'end of input'!r}")
        return self.advance()

    def family(self) -> Family:
        t = self.expect("dim")
        nt = self.advance()
        if nt.kind != "num" or not nt.text.isdigit():
            raise ParseError(nt.line, nt.col, "expected a positive integer dimension")
        self.n = int(nt.text)
        if self.n < 1:
            raise SemanticError(nt.line, nt.col, "dimension must be positive")
        maps, seen = [], set()
        while self.tok.kind != "eof":
            mt = self.tok
            f = self.mapdef()
            if f.name in seen:
                raise SemanticError(mt.line, mt.col, f"duplicate map name {f.name!r}")
            seen.add(f.name)
            maps.append(f)
        if not maps:
            raise SemanticError(t.line, t.col, "empty family: no maps defined")
        return Family(self.n, tuple(maps))

    def mapdef(self) -> MapDef:
        self.expect("map")
        nt = self.advance()
        if nt.kind != "ident":
            raise ParseError(nt.line, nt.col, "expected a map name")
        self.expect("=")
        open_tok = self.expect("[")
        coords = [self.expr()]
        while self.tok.text == ";":
            self.advance()
            coords.append(self.expr())
        self.expect("]")
        if len(coords) != self.n:
            raise SemanticError(
                open_tok.line, open_tok.col,
                f"map {nt.text!r} has {len(coords)} coordinates, expected {self.n}",
            )
        return MapDef(nt.text, tuple(coords))

    def expr(self):
        terms = [self.term()]
        while self.tok.text == "+":
            self.advance()
            terms.append(self.term())
        return terms[0] if len(terms) == 1 else make_sum(terms)

    def coefficient(self) -> float:
        t = self.advance()
        if t.kind != "num":
            raise ParseError(t.line, t.col, f"expected a number, found {t.text!r}")
        value = float(t.text)
        if value < 0:
            raise SemanticError(t.line, t.col, f"negative coefficient {t.text}")
        if not math.isfinite(value):
            raise SemanticError(t.line, t.col, f"coefficient {t.text} is not finite")
        return value

    def term(self):
        t = self.tok
        if t.kind == "num":
            value = self.coefficient()
            if self.tok.text == "*":
                self.advance()
                return scale(self.factor(), value)
            if value != 0:
                raise SemanticError(t.line, t.col, f"standalone nonzero constant {t.text} breaks homogeneity")
            return Zero()
        return self.factor()

    def factor(self):
        t = self.tok
        if t.kind == "ident":
            m = _VAR_RE.match(t.text)
            if m:
                self.advance()
                k = int(m.group(1))
                if not 1 <= k <= self.n:
                    raise SemanticError(t.line, t.col, f"variable {t.text} out of range 1..{self.n}")
                return atom(1.0, k - 1)
            if t.text in ("max", "min"):
                self.advance()
                self.expect("(")
                args = [self.expr()]
                while self.tok.text == ",":
                    self.advance()
                    args.append(self.expr())
                self.expect(")")
                if len(args) < 2:
                    raise ParseError(t.line, t.col, f"{t.text} needs at least two arguments")
                return (Max if t.text == "max" else Min)(tuple(args))
            if t.text == "geo":
                return self.geo()
            raise ParseError(t.line, t.col, f"unexpected identifier {t.text!r}")
        if t.text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(t.line, t.col, f"unexpected {t.text or 'end of input'!r}")

    def geo(self):
        t = self.advance()
        self.expect("(")
        weights, args = [], []
        while True:
            wt = self.tok
            w = self.coefficient()
            if w == 0:
                raise SemanticError(wt.line, wt.col, "geo weights must be positive")
            self.expect(":")
            weights.append(w)
            args.append(self.expr())
            if self.tok.text != ",":
                break
            self.advance()
        self.expect(")")
        if len(args) < 2:
            raise ParseError(t.line, t.col, "geo needs at least two weighted arguments")
        if abs(math.fsum(weights) - 1.0) > GEO_WEIGHT_TOL:
            raise SemanticError(t.line, t.col, f"geo weights sum to {math.fsum(weights)!r}, not 1")
        return Geo(normalize_weights(weights), tuple(args))


def parse_family(text: str) -> Family:
    """Parse the family text format; raises ParseError or SemanticError."""
    return _Parser(text).family()


def _num(c: float) -> str:
    s = repr(float(c))
    return s[:-2] if s.endswith(".0") else s


def format_expr(e, nested_sum: bool = False) -> str:
    if isinstance(e, Zero):
        return "0"
    if isinstance(e, Atom):
        var = f"x{e.var + 1}"
        return var if e.coef == 1.0 else f"{_num(e.coef)}*{var}"
    if isinstance(e, Sum):
        body = " + ".join(format_expr(a, nested_sum=True) for a in e.args)
        return f"({body})" if nested_sum else body
    if isinstance(e, (Max, Min)):
        kw = "max" if isinstance(e, Max) else "min"
        return f"{kw}(" + ", ".join(format_expr(a) for a in e.args) + ")"
    inner = ", ".join(f"{_num(w)}: {format_expr(a)}" for w, a in zip(e.weights, e.args))
    return f"geo({inner})"


def format_family(family: Family) -> str:
    lines = [f"dim {family.n}"]
    for f in family.maps:
        body = " ; ".join(format_expr(e) for e in f.coords)
        lines.append(f"map {f.name} = [ {body} ]")
    return "\n".join(lines) + "\n"


def load_family(path) -> Family:
    with open(path, encoding="utf-8") as fh:
        return parse_family(fh.read())
