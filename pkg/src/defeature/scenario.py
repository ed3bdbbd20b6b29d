"""Scenario files, the data-expression language and the built-in experiments.

A scenario is a small line-oriented text file::

    scenario two_holes_circular
    version 1

    [domain]
    polygon = 0 0  1 0  1 1  0 1
    sides = D N N D

    [feature 1]
    negative = circle 0.0011 0.0011 0.001

    [problem]
    kind = poisson

    [data]
    f = -128*exp(-8*(x+y))

Sections are ``domain``, ``feature <id>``, ``problem``, ``data``, ``mesh``,
``adaptive`` and ``output``.  Blank lines and ``#`` comments are ignored.
"""
from __future__ import annotations

import dataclasses
import math
import re
from pathlib import Path

import numpy as np
import shapely

from .errors import ExpressionError, ParseError, SchemaError
from .fem import BoundaryData, ProblemKind
from .geometry import (
    ExtensionPolicy,
    Feature,
    OuterDomain,
    build_model,
    circle_polygon,
    make_extension,
    square_polygon,
)
from .mesh import Sizing

SCHEMA_VERSION = 1

# ---------------------------------------------------------------- expressions

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|<=|>=|==|!=|[-+*/^(),<>]))"
)

_FUNCS = {
    "exp": (1, np.exp), "log": (1, np.log), "sin": (1, np.sin), "cos": (1, np.cos), "tan": (1, np.tan),
    "sqrt": (1, np.sqrt), "abs": (1, np.abs), "tanh": (1, np.tanh), "atan2": (2, np.arctan2),
    "min": (2, np.minimum), "max": (2, np.maximum), "if": (3, None),
}
_CONSTS = {"pi": math.pi, "e": math.e}
_CMP = {"<": np.less, "<=": np.less_equal, ">": np.greater, ">=": np.greater_equal,
        "==": np.equal, "!=": np.not_equal}


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise ExpressionError(f"unexpected character {text[pos:].lstrip()[0]!r}", pos, text)
            kind = m.lastgroup
            start = m.start(kind)
            self.tokens.append((kind, m.group(kind), start))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None, len(self.text))

    def take(self, value=None):
        tok = self.peek()
        if tok[0] is None:
            raise ExpressionError("unexpected end of expression", len(self.text), self.text)
        if value is not None and tok[1] != value:
            raise ExpressionError(f"expected {value!r}, found {tok[1]!r}", tok[2], self.text)
        self.i += 1
        return tok

    def parse(self):
        node = self.comparison()
        if self.peek()[0] is not None:
            _, val, pos = self.peek()
            raise ExpressionError(f"unexpected token {val!r}", pos, self.text)
        return node

    def comparison(self):
        left = self.additive()
        _, val, _ = self.peek()
        if val in _CMP:
            self.take()
            return ("cmp", val, left, self.additive())
        return left

    def additive(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = (op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] in ("-", "+"):
            op = self.take()[1]
            operand = self.unary()
            return ("neg", operand) if op == "-" else operand
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] in ("^", "**"):
            self.take()
            return ("^", base, self.unary())  # right associative
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return ("num", float(val))
        if kind == "name":
            if val in ("x", "y"):
                return ("var", val)
            if val in _FUNCS:
                arity = _FUNCS[val][0]
                self.take("(")
                args = [self.comparison()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.comparison())
                self.take(")")
                if len(args) != arity:
                    raise ExpressionError(f"{val} takes {arity} argument(s), got {len(args)}", pos, self.text)
                return ("call", val, args)
            if val in _CONSTS:
                return ("num", _CONSTS[val])
            raise ExpressionError(f"unknown name {val!r}", pos, self.text)
        if val == "(":
            node = self.comparison()
            self.take(")")
            return node
        raise ExpressionError(f"unexpected token {val!r}", pos, self.text)


def _eval(node, x, y):
    tag = node[0]
    if tag == "num":
        return np.full_like(x, node[1])
    if tag == "var":
        return x if node[1] == "x" else y
    if tag == "neg":
        return -_eval(node[1], x, y)
    if tag == "cmp":
        return _CMP[node[1]](_eval(node[2], x, y), _eval(node[3], x, y)).astype(float)
    if tag == "call":
        name, args = node[1], [_eval(a, x, y) for a in node[2]]
        if name == "if":
            return np.where(args[0] != 0, args[1], args[2])
        return _FUNCS[name][1](*args)
    a, b = _eval(node[1], x, y), _eval(node[2], x, y)
    if tag == "+":
        return a + b
    if tag == "-":
        return a - b
    if tag == "*":
        return a * b
    if tag == "/":
        return a / b
    return a ** b


@dataclasses.dataclass(frozen=True)
class Expression:
    """A scalar or 2-vector expression in ``x`` and ``y``; vectors are written ``(a, b)``."""

    source: str

    def __post_init__(self):
        object.__setattr__(self, "_nodes", self._compile(self.source))

    @staticmethod
    def _compile(text):
        stripped = text.strip()
        if not stripped:
            raise ExpressionError("empty expression", 0, text)
        if stripped.startswith("(") and _top_level_comma(stripped):
            inner = stripped[1:-1] if stripped.endswith(")") else None
            if inner is None:
                raise ExpressionError("unterminated vector", len(text), text)
            offset = text.index("(") + 1
            parts, start, depth = [], 0, 0
            for i, ch in enumerate(inner):
                depth += ch == "("
                depth -= ch == ")"
                if ch == "," and depth == 0:
                    parts.append((inner[start:i], start))
                    start = i + 1
            parts.append((inner[start:], start))
            if len(parts) != 2:
                raise ExpressionError("vector expressions need exactly two components", offset, text)
            nodes = []
            for part, at in parts:
                try:
                    nodes.append(_Parser(part).parse())
                except ExpressionError as exc:
                    raise ExpressionError(str(exc.args[0]), offset + at + exc.position, text) from None
            return tuple(nodes)
        return (_Parser(text).parse(),)

    @property
    def is_vector(self) -> bool:
        return len(self._nodes) == 2

    def __call__(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        x, y = pts[:, 0], pts[:, 1]
        with np.errstate(all="ignore"):
            vals = [_eval(n, x, y) for n in self._nodes]
        return vals[0] if len(vals) == 1 else np.column_stack(vals)

    def check(self, components: int):
        if components == 2 and not self.is_vector and self.source.strip() != "0":
            raise SchemaError(f"vector expression required, got {self.source!r}")
        if components == 1 and self.is_vector:
            raise SchemaError(f"scalar expression required, got {self.source!r}")
        sample = np.array([[0.25, 0.5], [0.75, 0.125]])
        if not np.all(np.isfinite(self(sample))):
            raise ExpressionError("expression is not finite at sample points", 0, self.source)

    def function(self, components: int):
        if components == 2 and not self.is_vector:
            return lambda p: np.repeat(np.asarray(self(p))[:, None], 2, axis=1)
        return self


def _top_level_comma(text: str) -> bool:
    depth = 0
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 1:
            return True
    return False


def parse_expression(text: str) -> Expression:
    return Expression(text)


# ---------------------------------------------------------------- scenario model

@dataclasses.dataclass(frozen=True)
class ShapeSpec:
    kind: str  # circle | rect | square | polygon
    values: tuple

    def polygon(self, segments: int):
        v = self.values
        if self.kind == "circle":
            return circle_polygon((v[0], v[1]), v[2], segments)
        if self.kind == "square":
            return square_polygon((v[0], v[1]), v[2])
        if self.kind == "rect":
            return shapely.box(*v)
        return shapely.Polygon(np.asarray(v, dtype=float).reshape(-1, 2))

    def text(self) -> str:
        return " ".join([self.kind] + [_fmt(x) for x in self.values])


_SHAPE_ARITY = {"circle": 3, "square": 3, "rect": 4}


@dataclasses.dataclass(frozen=True)
class FeatureSpec:
    id: int
    negative: ShapeSpec | None = None
    positive: ShapeSpec | None = None
    extension: str = "bbox"


@dataclasses.dataclass(frozen=True)
class Scenario:
    name: str
    polygon: tuple
    sides: tuple
    features: tuple = ()
    problem: str = "poisson"
    mu: float = 1.0
    lam: float = 0.0
    prefactor: float = 1.0
    data: tuple = ()  # sorted (key, Expression) pairs
    h_defeatured: float = 1.0 / 64
    h_reference: float | None = None
    reference_refinement: float = 8.0
    min_angle: float = 22.0
    circle_segments: int = 64
    adaptive: tuple | None = None  # (theta, tol, max_iter)
    vtk: bool = False

    # -- construction helpers
    def outer(self) -> OuterDomain:
        return OuterDomain(np.asarray(self.polygon, dtype=float).reshape(-1, 2), tuple(self.sides))

    def problem_kind(self) -> ProblemKind:
        if self.problem == "poisson":
            return ProblemKind.poisson()
        if self.problem == "elasticity":
            return ProblemKind.elasticity(self.lam, self.mu)
        return ProblemKind.stokes(self.mu)

    def build_features(self) -> list:
        outer = self.outer().polygon
        out = []
        for fs in self.features:
            neg = fs.negative.polygon(self.circle_segments) if fs.negative else shapely.Polygon()
            pos = fs.positive.polygon(self.circle_segments) if fs.positive else shapely.Polygon()
            f = Feature(fs.id, neg, pos)
            if fs.positive is not None:
                policy = ExtensionPolicy.IDENTITY if fs.extension == "identity" else ExtensionPolicy.BOUNDING_BOX
                f = make_extension(f, policy, outer)
            out.append(f)
        return out

    def model(self):
        return build_model(self.outer(), self.build_features())

    def expression(self, key: str) -> Expression | None:
        return dict(self.data).get(key)

    def boundary_data(self) -> BoundaryData:
        comps = self.problem_kind().components
        fn = {}
        for key in ("f", "gD", "g", "g_feature", "g0", "gtilde", "fc"):
            expr = self.expression(key)
            fn[key] = None if expr is None else expr.function(1 if key == "fc" else comps)
        return BoundaryData.standard(
            g_dirichlet=fn["gD"], g_neumann=fn["g"], source=fn["f"], g_feature=fn["g_feature"],
            g_zero=fn["g0"], g_tilde=fn["gtilde"], source_div=fn["fc"],
        )

    def sizing(self, reference: bool = False) -> Sizing:
        if reference:
            return Sizing(self.h_reference or self.h_defeatured, near_factor=self.reference_refinement,
                          min_angle_deg=self.min_angle)
        return Sizing(self.h_defeatured, min_angle_deg=self.min_angle)

    # -- serialization
    def to_text(self) -> str:
        lines = [f"scenario {self.name}", f"version {SCHEMA_VERSION}", "", "[domain]",
                 "polygon = " + "  ".join(f"{_fmt(a)} {_fmt(b)}" for a, b in np.asarray(self.polygon).reshape(-1, 2)),
                 "sides = " + " ".join(self.sides)]
        for fs in self.features:
            lines += ["", f"[feature {fs.id}]"]
            if fs.negative:
                lines.append(f"negative = {fs.negative.text()}")
            if fs.positive:
                lines.append(f"positive = {fs.positive.text()}")
                lines.append(f"extension = {fs.extension}")
        lines += ["", "[problem]", f"kind = {self.problem}"]
        if self.problem != "poisson":
            lines.append(f"mu = {_fmt(self.mu)}")
        if self.problem == "elasticity":
            lines.append(f"lambda = {_fmt(self.lam)}")
        lines.append(f"prefactor = {_fmt(self.prefactor)}")
        if self.data:
            lines += ["", "[data]"] + [f"{k} = {e.source}" for k, e in self.data]
        lines += ["", "[mesh]", f"h_defeatured = {_fmt(self.h_defeatured)}"]
        if self.h_reference is not None:
            lines.append(f"h_reference = {_fmt(self.h_reference)}")
        lines += [f"reference_refinement = {_fmt(self.reference_refinement)}",
                  f"min_angle = {_fmt(self.min_angle)}", f"circle_segments = {self.circle_segments}"]
        if self.adaptive is not None:
            theta, tol, max_iter = self.adaptive
            lines += ["", "[adaptive]", f"theta = {_fmt(theta)}", f"tol = {_fmt(tol)}", f"max_iter = {max_iter}"]
        lines += ["", "[output]", f"vtk = {'true' if self.vtk else 'false'}"]
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    return repr(float(v)) if not float(v).is_integer() or abs(v) >= 1e16 else str(int(v))


# ---------------------------------------------------------------- parsing

_SECTION_KEYS = {
    "domain": {"polygon", "sides"},
    "feature": {"negative", "positive", "extension"},
    "problem": {"kind", "mu", "lambda", "prefactor"},
    "data": {"f", "gD", "g", "g_feature", "g0", "gtilde", "fc"},
    "mesh": {"h_defeatured", "h_reference", "reference_refinement", "min_angle", "circle_segments"},
    "adaptive": {"theta", "tol", "max_iter"},
    "output": {"vtk"},
}


def _number(text, line, what):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"{what}: expected a number, got {text!r}", line) from None
    if not math.isfinite(v):
        raise SchemaError(f"line {line}: {what} must be finite")
    return v


def _shape(text, line) -> ShapeSpec:
    parts = text.split()
    if not parts:
        raise ParseError("empty shape", line)
    kind = parts[0]
    vals = tuple(_number(p, line, kind) for p in parts[1:])
    if kind in _SHAPE_ARITY:
        if len(vals) != _SHAPE_ARITY[kind]:
            raise SchemaError(f"line {line}: {kind} takes {_SHAPE_ARITY[kind]} numbers")
    elif kind == "polygon":
        if len(vals) < 6 or len(vals) % 2:
            raise SchemaError(f"line {line}: polygon needs at least three x y pairs")
    else:
        raise SchemaError(f"line {line}: unknown shape {kind!r}")
    return ShapeSpec(kind, vals)


def parse_scenario(text: str) -> Scenario:
    """Parse and validate scenario text."""
    name = None
    version = None
    section = None
    feature_id = None
    raw: dict = {}
    features: dict = {}
    seen_sections = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ParseError("unterminated section header", lineno)
            head = stripped[1:-1].split()
            if not head or head[0] not in _SECTION_KEYS:
                raise SchemaError(f"line {lineno}: unknown section {stripped!r}")
            section = head[0]
            if section == "feature":
                if len(head) != 2 or not head[1].isdigit() or int(head[1]) < 1:
                    raise SchemaError(f"line {lineno}: feature sections need a positive integer id")
                feature_id = int(head[1])
                if feature_id in features:
                    raise SchemaError(f"line {lineno}: duplicate feature {feature_id}")
                features[feature_id] = {}
            elif len(head) != 1:
                raise ParseError("unexpected tokens in section header", lineno)
            elif section in seen_sections:
                raise SchemaError(f"line {lineno}: duplicate section [{section}]")
            seen_sections.add(section)
            continue
        if section is None:
            key, _, rest = stripped.partition(" ")
            if key == "scenario" and rest.strip():
                name = rest.strip()
            elif key == "version":
                version = int(_number(rest.strip(), lineno, "version"))
            else:
                raise ParseError(f"unexpected line before the first section: {stripped!r}", lineno)
            continue
        key, eq, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if not eq or not key:
            raise ParseError("expected 'key = value'", lineno)
        if key not in _SECTION_KEYS[section]:
            raise SchemaError(f"line {lineno}: unknown key {key!r} in [{section}]")
        target = features[feature_id] if section == "feature" else raw.setdefault(section, {})
        if key in target:
            raise SchemaError(f"line {lineno}: duplicate key {key!r}")
        target[key] = (value, lineno)

    if name is None:
        raise SchemaError("missing 'scenario <name>' header")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema version {version!r}")
    dom = raw.get("domain")
    if not dom or "polygon" not in dom or "sides" not in dom:
        raise SchemaError("[domain] needs polygon and sides")
    poly_txt, ln = dom["polygon"]
    poly = tuple(_number(p, ln, "polygon") for p in poly_txt.split())
    if len(poly) < 6 or len(poly) % 2:
        raise SchemaError(f"line {ln}: polygon needs at least three x y pairs")
    sides_txt, ln = dom["sides"]
    sides = tuple(sides_txt.split())
    if len(sides) != len(poly) // 2 or any(s not in ("D", "N") for s in sides):
        raise SchemaError(f"line {ln}: sides needs one D or N per polygon side")

    specs = []
    for fid in sorted(features):
        entry = features[fid]
        neg = _shape(*entry["negative"]) if "negative" in entry else None
        pos = _shape(*entry["positive"]) if "positive" in entry else None
        if neg is None and pos is None:
            raise SchemaError(f"feature {fid} needs a negative or a positive part")
        ext = entry.get("extension", ("bbox", 0))[0]
        if ext not in ("bbox", "identity"):
            raise SchemaError(f"feature {fid}: extension must be bbox or identity")
        specs.append(FeatureSpec(fid, neg, pos, ext))

    prob = raw.get("problem", {})
    kind = prob.get("kind", ("poisson", 0))[0]
    if kind not in ("poisson", "elasticity", "stokes"):
        raise SchemaError(f"unknown problem kind {kind!r}")
    num = lambda sec, key, default: _number(*raw[sec][key], key) if key in raw.get(sec, {}) else default  # noqa: E731
    mu = num("problem", "mu", 1.0)
    lam = num("problem", "lambda", 0.0)
    try:
        ProblemKind(kind, mu=mu, lam=lam)
    except ValueError as exc:
        raise SchemaError(str(exc)) from None
    comps = 1 if kind == "poisson" else 2
    data = []
    for key, (value, ln) in sorted(raw.get("data", {}).items()):
        try:
            expr = Expression(value)
            expr.check(1 if key == "fc" else comps)
        except ExpressionError as exc:
            raise ExpressionError(f"line {ln}: {exc.args[0]}", exc.position, value) from None
        data.append((key, expr))

    adaptive = None
    if "adaptive" in raw:
        theta = num("adaptive", "theta", 0.95)
        tol = num("adaptive", "tol", 0.0)
        max_iter = int(num("adaptive", "max_iter", 100))
        if not 0 < theta <= 1 or tol < 0 or max_iter < 1:
            raise SchemaError("[adaptive] needs 0 < theta <= 1, tol >= 0, max_iter >= 1")
        adaptive = (theta, tol, max_iter)
    vtk_txt = raw.get("output", {}).get("vtk", ("false", 0))[0]
    if vtk_txt not in ("true", "false"):
        raise SchemaError("vtk must be true or false")
    h_def = num("mesh", "h_defeatured", 1.0 / 64)
    h_ref = num("mesh", "h_reference", None)
    refine = num("mesh", "reference_refinement", 8.0)
    if h_def <= 0 or (h_ref is not None and h_ref <= 0) or refine < 1:
        raise SchemaError("mesh sizes must be positive and reference_refinement >= 1")
    return Scenario(
        name=name, polygon=poly, sides=sides, features=tuple(specs), problem=kind, mu=mu, lam=lam,
        prefactor=num("problem", "prefactor", 1.0), data=tuple(data), h_defeatured=h_def, h_reference=h_ref,
        reference_refinement=refine, min_angle=num("mesh", "min_angle", 22.0),
        circle_segments=int(num("mesh", "circle_segments", 64)), adaptive=adaptive, vtk=vtk_txt == "true",
    )


def load_scenario(path) -> Scenario:
    """Load a scenario from a file path or a built-in name."""
    builtins = builtin_texts()
    if str(path) in builtins:
        return parse_scenario(builtins[str(path)])
    p = Path(path)
    if not p.is_file():
        raise SchemaError(f"no such scenario file or built-in: {path}")
    return parse_scenario(p.read_text())


# ---------------------------------------------------------------- built-ins

_UNIT_SQUARE = "polygon = 0 0  1 0  1 1  0 1"

_TWO_HOLES = """scenario {name}
version 1

[domain]
{square}
sides = D N N D

[feature 1]
negative = {f1}

[feature 2]
negative = {f2}

[problem]
kind = poisson

[data]
f = -128*exp(-8*(x+y))
gD = exp(-8*(x+y))
g = -8*exp(-8*(x+y))
g_feature = 0

[mesh]
h_defeatured = 0.015625
reference_refinement = 8
"""

_DELTA = """scenario {name}
version 1

[domain]
{square}
sides = D N N N
{features}
[problem]
kind = poisson

[data]
f = 0
gD = 40*cos(pi*x) + 10*cos(5*pi*x)
g = 0
g_feature = 0
g0 = 0

[mesh]
h_defeatured = 0.015625
reference_refinement = 8
"""

# radius, centre x, centre y of the 27 holes
RANDOM_27 = (
    (8.13, 0.98, 0.93), (6.64, 2.84, 1.24), (3.89, 5.46, 0.57), (7.40, 7.16, 0.93), (8.18, 8.99, 1.04),
    (6.00, 0.67, 3.40), (0.85, 3.12, 3.03), (9.22, 4.95, 3.08), (0.54, 7.06, 2.48), (5.27, 8.86, 2.90),
    (1.19, 0.67, 5.35), (3.80, 3.28, 4.46), (8.13, 5.01, 5.09), (2.44, 7.44, 4.88), (8.84, 8.93, 5.07),
    (7.13, 1.10, 6.93), (3.78, 2.44, 6.78), (2.49, 5.45, 7.73), (2.53, 7.27, 7.33), (6.67, 9.21, 6.96),
    (0.50, 0.22, 8.24), (6.85, 3.26, 9.15), (6.20, 5.01, 9.10), (7.47, 7.06, 8.78), (8.77, 8.99, 8.98),
    (2.00, 4.00, 7.00), (1.00, 1.00, 9.00),
)


def _random27_text() -> str:
    feats = "".join(
        f"\n[feature {i}]\nnegative = circle {_fmt(round(cx * 1e-1, 6))} {_fmt(round(cy * 1e-1, 6))} "
        f"{_fmt(round(r * 1e-2, 6))}\n"
        for i, (r, cx, cy) in enumerate(RANDOM_27, start=1)
    )
    return f"""scenario random_27
version 1

[domain]
{_UNIT_SQUARE}
sides = D N N D
{feats}
[problem]
kind = poisson

[data]
f = -18*exp(-3*(x+y))
gD = exp(-3*(x+y))
g = -3*exp(-3*(x+y))
g_feature = 0

[mesh]
h_defeatured = 0.015625
reference_refinement = 4

[adaptive]
theta = 0.95
tol = 0
max_iter = 100
"""


DELTAS = (0.2, 2e-4, 0.0, -1e-3, -9.9e-2)


def _delta_text(delta: float) -> str:
    pos = f"rect {_fmt(0.4 - delta / 2)} 1 {_fmt(0.5 - delta / 2)} 1.1"
    neg = f"rect {_fmt(0.5 + delta / 2)} 0.9 {_fmt(0.6 + delta / 2)} 1"
    if delta > 0:
        feats = (f"\n[feature 1]\npositive = {pos}\nextension = identity\n"
                 f"\n[feature 2]\nnegative = {neg}\n")
    else:
        feats = f"\n[feature 1]\nnegative = {neg}\npositive = {pos}\nextension = identity\n"
    return _DELTA.format(name=f"distance_delta_{delta:g}", square=_UNIT_SQUARE, features=feats)


_BUMP = "exp(4*((x-0.5)^2+(y-0.5)^2))"

_STOKES_SHAPES = f"""scenario stokes_shapes
version 1

[domain]
{_UNIT_SQUARE}
sides = D D D D

[feature 1]
negative = circle 0.375 0.5 0.0125

[feature 2]
negative = square 0.5 0.375 0.025

[feature 3]
negative = polygon 0.625 0.5125  0.6125 0.4875  0.625 0.5  0.6375 0.4875

[problem]
kind = stokes
mu = 1
prefactor = 3

[data]
f = ({_BUMP}, {_BUMP})
gD = (0, 0)
g_feature = (0, 0)
fc = 0

[mesh]
h_defeatured = 0.015625
reference_refinement = 8
"""

_LID = f"""scenario lid_cavity
version 1

[domain]
{_UNIT_SQUARE}
sides = D D D D

[feature 1]
negative = circle 0.011 0.989 0.01

[feature 2]
negative = circle 0.5 0.75 0.01

[feature 3]
negative = circle 0.011 0.011 0.01

[problem]
kind = stokes
mu = 1
prefactor = 3

[data]
f = (0, 0)
gD = (if(y >= 1, if(x > 0, if(x < 1, 1, 0), 0), 0), 0)
g_feature = (0, 0)
fc = 0

[mesh]
h_defeatured = 0.015625
reference_refinement = 8
"""


def builtin_texts() -> dict:
    texts = {
        "two_holes_circular": _TWO_HOLES.format(
            name="two_holes_circular", square=_UNIT_SQUARE,
            f1="circle 0.0011 0.0011 0.001", f2="circle 0.89 0.89 0.1"),
        "two_holes_square": _TWO_HOLES.format(
            name="two_holes_square", square=_UNIT_SQUARE,
            f1="square 0.0011 0.0011 0.002", f2="square 0.89 0.89 0.2"),
    }
    for d in DELTAS:
        texts[f"distance_delta_{d:g}"] = _delta_text(d)
    texts["random_27"] = _random27_text()
    texts["stokes_shapes"] = _STOKES_SHAPES
    texts["lid_cavity"] = _LID
    return texts


BUILTIN_GROUPS = {"distance_delta": tuple(f"distance_delta_{d:g}" for d in DELTAS)}


def builtin_scenarios() -> list:
    return [parse_scenario(t) for t in builtin_texts().values()]


def expand(name: str) -> list:
    """A built-in group name expands to its members; anything else to itself."""
    return list(BUILTIN_GROUPS.get(name, (name,)))
