"""
Model-formula mini-language.

::

    spec    := ident "~" term ("+" term)*
    term    := symbol "(" ident ("," ident)* ("," option)* ")"
             | "factor" "(" ident ")"
             | ident                                 # linear covariate
    option  := ("numknots" | "space") "=" value
    value   := number | string | "c" "(" value ("," value)* ")"

Whitespace is ignored.  Errors carry the 0-based character position.
"""

import re
from dataclasses import dataclass, field

from .exceptions import InvalidInputError
from .ordinal import ORDINAL_SHAPES
from .splines import SMOOTH_SHAPES

__all__ = [
    "SYMBOLS",
    "WPS_SYMBOLS",
    "FormulaError",
    "Term",
    "ModelSpec",
    "parse_model_spec",
]

SYMBOLS = ORDINAL_SHAPES + SMOOTH_SHAPES
WPS_SYMBOLS = ("dd", "ii", "di")
OPTIONS = ("numknots", "space")

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?(?![A-Za-z_.]))
  | (?P<ident>[A-Za-z_.][A-Za-z0-9_.]*)
  | (?P<string>"[^"]*"|'[^']*')
  | (?P<op>[~+(),=])
""", re.VERBOSE)


class FormulaError(InvalidInputError):
    """Syntax or semantic error in a model formula."""

    def __init__(self, message, position=None):
        self.position = position
        where = "" if position is None else f" at position {position}"
        super().__init__(f"{message}{where}")


@dataclass(frozen=True)
class Term:
    """
    One formula term.

    `kind` is ``"shape"`` (one of the 19 symbols), ``"wps"``, ``"factor"``
    or ``"linear"``.  Options hold ``numknots`` (int, or pair for wps) and
    ``space`` (``"E"``/``"Q"``, or pair for wps) when given.
    """

    kind: str
    predictors: tuple
    symbol: str = None
    options: tuple = ()

    @property
    def option_dict(self):
        return dict(self.options)

    @property
    def constrained(self):
        return self.kind in ("shape", "wps")

    def to_text(self):
        if self.kind == "linear":
            return self.predictors[0]
        if self.kind == "factor":
            return f"factor({self.predictors[0]})"
        parts = list(self.predictors)
        for key, val in self.options:
            parts.append(f"{key} = {_value_text(val)}")
        return f"{self.symbol}({', '.join(parts)})"

    def to_dict(self):
        return {"kind": self.kind, "predictors": list(self.predictors),
                "symbol": self.symbol,
                "options": {k: list(v) if isinstance(v, tuple) else v
                            for k, v in self.options}}

    @classmethod
    def from_dict(cls, d):
        opts = tuple((k, tuple(v) if isinstance(v, list) else v)
                     for k, v in d.get("options", {}).items())
        return cls(d["kind"], tuple(d["predictors"]), d.get("symbol"), opts)


def _value_text(v):
    if isinstance(v, tuple):
        return "c(" + ", ".join(_value_text(u) for u in v) + ")"
    if isinstance(v, str):
        return f'"{v}"'
    return repr(v)


@dataclass(frozen=True)
class ModelSpec:
    """Parsed model: response, terms and the engine they imply."""

    response: str
    terms: tuple = field(default_factory=tuple)

    @property
    def engine(self):
        return "wps" if any(t.kind == "wps" for t in self.terms) else "cgam"

    @property
    def constrained_terms(self):
        return tuple(t for t in self.terms if t.constrained)

    @property
    def covariate_terms(self):
        return tuple(t for t in self.terms if not t.constrained)

    def to_formula(self):
        return f"{self.response} ~ " + " + ".join(t.to_text() for t in self.terms)

    def to_dict(self):
        return {"response": self.response, "engine": self.engine,
                "terms": [t.to_dict() for t in self.terms]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["response"], tuple(Term.from_dict(t) for t in d["terms"]))


def _tokenize(text):
    tokens, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise FormulaError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            val = m.group()
            if kind == "string":
                val = val[1:-1]
            elif kind == "op":
                kind = val
            tokens.append((kind, val, pos))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind, what):
        tok = self.tokens[self.i]
        if tok[0] != kind:
            found = "end of input" if tok[0] == "eof" else repr(tok[1])
            raise FormulaError(f"expected {what}, found {found}", tok[2])
        self.i += 1
        return tok

    def spec(self):
        response = self.take("ident", "response name")[1]
        self.take("~", "'~'")
        terms = [self.term()]
        while self.peek()[0] == "+":
            self.i += 1
            terms.append(self.term())
        self.take("eof", "'+' or end of input")
        return response, terms

    def term(self):
        name, pos = self.take("ident", "a term")[1:]
        if self.peek()[0] != "(":
            return Term("linear", (name,)), pos
        self.i += 1
        if name == "factor":
            pred = self.take("ident", "predictor name")[1]
            self.take(")", "')'")
            return Term("factor", (pred,)), pos
        if name not in SYMBOLS and name not in WPS_SYMBOLS:
            valid = ", ".join(SYMBOLS + WPS_SYMBOLS + ("factor",))
            raise FormulaError(f"unknown symbol {name!r}; valid symbols: {valid}", pos)
        preds = [self.take("ident", "predictor name")[1]]
        options = []
        while self.peek()[0] == ",":
            self.i += 1
            _, ident, ipos = self.take("ident", "predictor name or option")
            if self.peek()[0] == "=":
                self.i += 1
                if ident not in OPTIONS:
                    raise FormulaError(
                        f"unknown option {ident!r}; valid options: {', '.join(OPTIONS)}", ipos)
                if any(opt[0] == ident for opt in options):
                    raise FormulaError(f"option {ident!r} given twice", ipos)
                options.append((ident, self.value(), ipos))
            else:
                if options:
                    raise FormulaError("predictor names must come before options", ipos)
                preds.append(ident)
        self.take(")", "',' or ')'")
        kind = "wps" if name in WPS_SYMBOLS else "shape"
        return _check_term(kind, name, preds, options, pos), pos

    def value(self):
        kind, val, pos = self.peek()
        if kind == "number":
            self.i += 1
            f = float(val)
            return int(f) if f.is_integer() and re.fullmatch(r"\d+", val) else f
        if kind == "string":
            self.i += 1
            return val
        if kind == "ident" and val == "c":
            self.i += 1
            self.take("(", "'('")
            vals = [self.value()]
            while self.peek()[0] == ",":
                self.i += 1
                vals.append(self.value())
            self.take(")", "',' or ')'")
            if any(isinstance(v, tuple) for v in vals):
                raise FormulaError("nested c() is not allowed", pos)
            return tuple(vals)
        found = "end of input" if kind == "eof" else repr(val)
        raise FormulaError(f"expected a number, string or c(...), found {found}", pos)


def _check_option(key, val, pos, least=3):
    if key == "numknots":
        if not isinstance(val, int) or val < least:
            raise FormulaError(f"numknots must be an integer >= {least}", pos)
    elif val not in ("E", "Q"):
        raise FormulaError('space must be "E" or "Q"', pos)


def _check_term(kind, symbol, preds, options, pos):
    if kind == "wps":
        if len(preds) != 2:
            raise FormulaError(f"{symbol}() takes exactly two predictors", pos)
    elif len(preds) != 1:
        raise FormulaError(f"{symbol}() takes exactly one predictor", pos)
    out = []
    least = 2 if kind == "wps" else 3
    for key, val, opos in options:
        if kind == "shape" and symbol in ORDINAL_SHAPES:
            raise FormulaError(f"{symbol}() takes no options", opos)
        if isinstance(val, tuple):
            if kind != "wps" or len(val) != 2:
                raise FormulaError(f"{key} = c(...) needs exactly two values for a "
                                   "two-predictor term", opos)
            for v in val:
                _check_option(key, v, opos, least)
        else:
            _check_option(key, val, opos, least)
        out.append((key, val))
    return Term(kind, tuple(preds), symbol, tuple(out))


def parse_model_spec(text):
    """
    Parse a model formula.

    Parameters
    ----------
    text : str
        For example ``"y ~ s.incr.conv(x1) + s(x2, numknots = 5) + z"``.

    Returns
    -------
    ModelSpec

    Raises
    ------
    FormulaError
        On syntax errors, unknown symbols, a predictor used in two terms,
        or a two-predictor surface combined with other constrained terms.

    Examples
    --------
    >>> parse_model_spec("y ~ dd(x1, x2, numknots = c(10, 10))").engine
    'wps'
    """
    if not isinstance(text, str):
        raise FormulaError("formula must be a string")
    response, terms = _Parser(text).spec()
    seen = {response: None}
    for term, pos in terms:
        for p in term.predictors:
            if p in seen:
                what = "the response" if p == response else "more than one term"
                raise FormulaError(f"predictor {p!r} appears in {what}", pos)
            seen[p] = pos
    constrained = [t for t, _ in terms if t.constrained]
    if any(t.kind == "wps" for t in constrained) and len(constrained) > 1:
        pos = next(p for t, p in terms if t.constrained and t is not constrained[0])
        raise FormulaError(
            "a dd/ii/di surface cannot be combined with other constrained terms", pos)
    return ModelSpec(response, tuple(t for t, _ in terms))
