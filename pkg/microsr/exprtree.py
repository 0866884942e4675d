"""
Expression trees over relative-abundance features.

A tree is built from three immutable node kinds: :py:class:`Constant`, :py:class:`Feature` (a column reference) and
:py:class:`Call` (a primitive applied to its children). Trees evaluate row by row with :py:func:`eval_row` (the
reference scalar semantics) or column-wise over a whole matrix with :py:func:`evaluate`, which gives the same values
element by element.
"""

import math
import re

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, DimensionError, EvaluationError, ParseError, StructuralError

__all__ = [
    'MAX_PARSE_DEPTH',
    'PRIMITIVES',
    'SR',
    'SRF',
    'Call',
    'Constant',
    'ExprNode',
    'Feature',
    'FunctionSet',
    'Primitive',
    'apply_primitive',
    'depth',
    'eval_row',
    'evaluate',
    'feature_indices',
    'parse_sexpr',
    'predict_label',
    'predict_proba',
    'preorder',
    'replace_subtree',
    'sigmoid',
    'size',
    'to_dot',
    'to_sexpr',
]

PROTECTION_THRESHOLD = 1e-3


ARITIES = {
    'add': 2,
    'sub': 2,
    'mul': 2,
    'div': 2,
    'log': 1,
    'sqrt': 1,
    'abs': 1,
    'neg': 1,
    'presence': 1,
    'absence': 1,
    'presence_both': 2,
    'absence_both': 2,
    'ifelse': 2,
    'min': 2,
    'max': 2,
}


@dataclass(frozen=True)
class Primitive:
    name: str
    arity: int

    def __post_init__(self):
        if self.name not in ARITIES:
            raise StructuralError(f'unknown primitive: {self.name}', primitive=self.name)
        if self.arity != ARITIES[self.name]:
            raise StructuralError(f'{self.name} has arity {ARITIES[self.name]}, not {self.arity}',
                                  primitive=self.name, arity=self.arity)

    def __str__(self):
        return self.name


PRIMITIVES = {name: Primitive(name, arity) for name, arity in ARITIES.items()}


class ExprNode:
    """Common base of the three node kinds; provides the cached structural metrics."""

    children = ()

    @cached_property
    def size(self):
        return 1 + sum(c.size for c in self.children)

    @cached_property
    def depth(self):
        if not self.children:
            return 0
        return 1 + max(c.depth for c in self.children)

    def __str__(self):
        return to_sexpr(self)


@dataclass(frozen=True)
class Constant(ExprNode):
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise StructuralError('constant must be finite', value=repr(self.value))
        object.__setattr__(self, 'value', float(self.value))


@dataclass(frozen=True)
class Feature(ExprNode):
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise StructuralError('feature index must be non-negative', index=self.index)
        object.__setattr__(self, 'index', int(self.index))


@dataclass(frozen=True)
class Call(ExprNode):
    primitive: Primitive
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, 'children', tuple(self.children))
        if len(self.children) != self.primitive.arity:
            raise StructuralError(
                f'{self.primitive.name} takes {self.primitive.arity} argument(s), got {len(self.children)}',
                primitive=self.primitive.name)

    @classmethod
    def of(cls, name, *children):
        """Shorthand: ``Call.of('presence', Feature(0))``."""
        try:
            primitive = PRIMITIVES[name]
        except KeyError:
            raise StructuralError(f'unknown primitive: {name}', primitive=name)
        return cls(primitive, children)


# Scalar semantics

def _div(a, b):
    return 1.0 if abs(b) < PROTECTION_THRESHOLD else a / b


def _log(x):
    return 0.0 if abs(x) < PROTECTION_THRESHOLD else math.log(abs(x))


_SCALAR = {
    'add': lambda a, b: a + b,
    'sub': lambda a, b: a - b,
    'mul': lambda a, b: a * b,
    'div': _div,
    'log': _log,
    'sqrt': lambda x: math.sqrt(abs(x)),
    'abs': abs,
    'neg': lambda x: -x,
    'presence': lambda x: 1.0 if x > 0 else 0.0,
    'absence': lambda x: 0.0 if x > 0 else 1.0,
    'presence_both': lambda a, b: 1.0 if a > 0 and b > 0 else 0.0,
    'absence_both': lambda a, b: 1.0 if a <= 0 and b <= 0 else 0.0,
    'ifelse': lambda a, b: a if a > b else b,
    'min': min,
    'max': max,
}


def apply_primitive(p, args):
    """
    Apply primitive `p` to a list of finite reals and return a finite real.

    Division and logarithm are protected: both fall back (to 1.0 and 0.0 respectively) when the magnitude of their
    critical argument is below 1e-3. ``sqrt`` takes the square root of the absolute value.
    """

    if len(args) != p.arity:
        raise StructuralError(f'{p.name} takes {p.arity} argument(s), got {len(args)}', primitive=p.name)
    for a in args:
        if not math.isfinite(a):
            raise EvaluationError(f'non-finite input to {p.name}', primitive=p.name)
    result = float(_SCALAR[p.name](*args))
    if not math.isfinite(result):
        raise EvaluationError(f'{p.name} overflowed', primitive=p.name)
    return result


def eval_row(expr, row):
    """Evaluate `expr` on a single row of feature values."""

    if isinstance(expr, Constant):
        return expr.value
    if isinstance(expr, Feature):
        if expr.index >= len(row):
            raise EvaluationError(f'feature index X{expr.index} out of range for {len(row)} features',
                                  index=expr.index)
        value = float(row[expr.index])
        if not math.isfinite(value):
            raise EvaluationError(f'non-finite value in feature X{expr.index}', index=expr.index)
        return value
    return apply_primitive(expr.primitive, [eval_row(c, row) for c in expr.children])


# Column-wise semantics, element-wise identical to _SCALAR

def _vdiv(a, b):
    with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
        return np.where(np.abs(b) < PROTECTION_THRESHOLD, 1.0, a / b)


def _vlog(x):
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(np.abs(x) < PROTECTION_THRESHOLD, 0.0, np.log(np.abs(x)))


_VECTOR = {
    'add': np.add,
    'sub': np.subtract,
    'mul': np.multiply,
    'div': _vdiv,
    'log': _vlog,
    'sqrt': lambda x: np.sqrt(np.abs(x)),
    'abs': np.abs,
    'neg': np.negative,
    'presence': lambda x: np.where(x > 0, 1.0, 0.0),
    'absence': lambda x: np.where(x > 0, 0.0, 1.0),
    'presence_both': lambda a, b: np.where((a > 0) & (b > 0), 1.0, 0.0),
    'absence_both': lambda a, b: np.where((a <= 0) & (b <= 0), 1.0, 0.0),
    'ifelse': lambda a, b: np.where(a > b, a, b),
    'min': np.minimum,
    'max': np.maximum,
}


def _as_matrix(table):
    values = getattr(table, 'values', table)
    matrix = np.asarray(values, dtype=float)
    if matrix.ndim != 2:
        raise DimensionError('expected a two-dimensional table', ndim=matrix.ndim)
    return matrix


def _evaluate(expr, X):
    if isinstance(expr, Constant):
        return np.full(X.shape[0], expr.value)
    if isinstance(expr, Feature):
        if expr.index >= X.shape[1]:
            raise EvaluationError(f'feature index X{expr.index} out of range for {X.shape[1]} features',
                                  index=expr.index)
        return X[:, expr.index]
    args = [_evaluate(c, X) for c in expr.children]
    with np.errstate(over='ignore', invalid='ignore'):
        out = _VECTOR[expr.primitive.name](*args)
    if not np.isfinite(out).all():
        raise EvaluationError(f'{expr.primitive.name} produced a non-finite value', primitive=expr.primitive.name)
    return out


def evaluate(expr, table):
    """Evaluate `expr` on every row of `table` (an AbundanceTable or a 2-d array); returns a float vector."""

    X = _as_matrix(table)
    if not np.isfinite(X).all():
        raise EvaluationError('table contains non-finite values')
    return np.asarray(_evaluate(expr, X), dtype=float)


def sigmoid(z):
    with np.errstate(over='ignore'):
        return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=float)))


def predict_proba(expr, table):
    return sigmoid(evaluate(expr, table))


def predict_label(expr, table, threshold=0.5):
    """Label 1 iff the sigmoid of the expression output is at least `threshold`."""

    if not 0.0 < threshold < 1.0:
        raise ConfigurationError('threshold must lie in (0, 1)', threshold=threshold)
    return (predict_proba(expr, table) >= threshold).astype(int)


# Structure

def size(expr):
    return expr.size


def depth(expr):
    return expr.depth


def preorder(expr):
    """All nodes of `expr` in preorder; index 0 is the root."""

    nodes = []
    stack = [expr]
    while stack:
        node = stack.pop()
        nodes.append(node)
        stack.extend(reversed(node.children))
    return nodes


def feature_indices(expr):
    """Feature indices referenced by `expr`, one entry per occurrence, in preorder."""
    return [n.index for n in preorder(expr) if isinstance(n, Feature)]


def replace_subtree(expr, index, replacement):
    """Return a copy of `expr` with the subtree rooted at preorder `index` replaced by `replacement`."""

    def walk(node, offset):
        if offset == index:
            return replacement
        if not isinstance(node, Call):
            return node
        children = []
        pos = offset + 1
        for child in node.children:
            if pos <= index < pos + child.size:
                children.append(walk(child, pos))
            else:
                children.append(child)
            pos += child.size
        return Call(node.primitive, children)

    if not 0 <= index < expr.size:
        raise DimensionError(f'node index {index} out of range for tree of size {expr.size}', index=index)
    return walk(expr, 0)


class FunctionSet:
    """
    The primitives the evolutionary search may place in a tree.

    Two presets exist: :py:data:`SR` (arithmetic, log/sqrt/abs/neg and min/max) and :py:data:`SRF`, which adds the
    presence/absence family and ifelse. Any other subset can be built from primitive names.
    """

    def __init__(self, names, label=None):
        names = list(dict.fromkeys(names))
        unknown = [n for n in names if n not in PRIMITIVES]
        if unknown:
            raise StructuralError(f'unknown primitive(s): {", ".join(unknown)}', primitives=unknown)
        if not names:
            raise StructuralError('function set is empty')
        self.names = tuple(n for n in PRIMITIVES if n in names)
        self.label = label

    @classmethod
    def from_spec(cls, spec):
        """Build from ``sr``, ``srf`` or a comma separated list of primitive names."""

        if isinstance(spec, FunctionSet):
            return spec
        if isinstance(spec, str):
            key = spec.strip().lower()
            if key in PRESETS:
                return PRESETS[key]
            spec = [s.strip() for s in spec.split(',') if s.strip()]
        return cls(spec)

    @property
    def primitives(self):
        return [PRIMITIVES[n] for n in self.names]

    def by_arity(self, arity):
        return [p for p in self.primitives if p.arity == arity]

    def __contains__(self, name):
        return name in self.names

    def __len__(self):
        return len(self.names)

    def __eq__(self, other):
        return isinstance(other, FunctionSet) and self.names == other.names

    def __hash__(self):
        return hash(self.names)

    def __repr__(self):
        return f'FunctionSet({self.label or ",".join(self.names)})'

    def __str__(self):
        return self.label or ','.join(self.names)


SR = FunctionSet(['add', 'sub', 'mul', 'div', 'log', 'sqrt', 'abs', 'neg', 'min', 'max'], label='sr')
SRF = FunctionSet(list(SR.names) + ['presence', 'absence', 'presence_both', 'absence_both', 'ifelse'], label='srf')
PRESETS = {'sr': SR, 'srf': SRF}


# Text form

def _format_constant(value, digits=17):
    return '%.*g' % (digits, value)


def to_sexpr(expr):
    """Render `expr` in its canonical S-expression form, e.g. ``(ifelse (presence X0) 0.5)``."""

    if isinstance(expr, Constant):
        return _format_constant(expr.value)
    if isinstance(expr, Feature):
        return f'X{expr.index}'
    return '(%s %s)' % (expr.primitive.name, ' '.join(to_sexpr(c) for c in expr.children))


_TOKEN_RE = re.compile(r'\(|\)|[^\s()]+')
_FEATURE_RE = re.compile(r'X(\d+)$')
_NUMBER_RE = re.compile(r'[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$')
MAX_PARSE_DEPTH = 100


def parse_sexpr(text):
    """
    Parse the S-expression grammar::

        expr    := constant | feature | "(" name expr+ ")"
        feature := "X" digits

    Errors report the 1-based position of the offending token and the class of token that was expected. Constants
    must be finite and calls may nest at most ``MAX_PARSE_DEPTH`` levels.
    """

    tokens = _TOKEN_RE.findall(text)
    pos = 0

    def fail(reason, expected):
        raise ParseError(reason, position=pos + 1, expected=expected)

    def parse(level=0):
        nonlocal pos
        if pos >= len(tokens):
            fail('unexpected end of input', 'expression')
        tok = tokens[pos]
        if tok == ')':
            fail('unexpected ")"', 'expression')
        if tok != '(':
            pos += 1
            m = _FEATURE_RE.match(tok)
            if m:
                return Feature(int(m.group(1)))
            if _NUMBER_RE.match(tok):
                value = float(tok)
                if math.isfinite(value):
                    return Constant(value)
                pos -= 1
                fail(f'constant out of range: {tok}', 'finite constant')
            pos -= 1
            fail(f'invalid atom: {tok}', 'constant or feature')
        if level >= MAX_PARSE_DEPTH:
            fail(f'nesting deeper than {MAX_PARSE_DEPTH} levels', 'constant or feature')
        pos += 1
        if pos >= len(tokens):
            fail('unexpected end of input', 'primitive name')
        name = tokens[pos]
        if name in ('(', ')') or name not in PRIMITIVES:
            fail(f'unknown primitive: {name}', 'primitive name')
        primitive = PRIMITIVES[name]
        pos += 1
        children = []
        while pos < len(tokens) and tokens[pos] != ')':
            children.append(parse(level + 1))
        if pos >= len(tokens):
            fail('unbalanced parentheses', '")"')
        if not children:
            fail(f'{name} has no arguments', 'expression')
        if len(children) != primitive.arity:
            fail(f'{name} takes {primitive.arity} argument(s), got {len(children)}', '")"')
        pos += 1
        return Call(primitive, children)

    expr = parse()
    if pos != len(tokens):
        fail(f'trailing input: {tokens[pos]}', 'end of input')
    return expr


# Graphviz

def _dot_escape(text):
    return text.replace('\\', '\\\\').replace('"', '\\"')


def to_dot(expr, feature_names):
    """
    Graphviz script for `expr`. Node ids are preorder indices, so the same tree always renders to the same bytes.
    Primitives are labeled by name, constants by value and features by their name in `feature_names`.
    """

    nodes = preorder(expr)
    lines = ['digraph expression {', 'node [style=filled] ;']
    for i, node in enumerate(nodes):
        if isinstance(node, Call):
            label, fill = node.primitive.name, '#136ed4'
        elif isinstance(node, Feature):
            if node.index >= len(feature_names):
                raise DimensionError(f'no feature name for X{node.index}', index=node.index)
            label, fill = feature_names[node.index], '#60a6f6'
        else:
            label, fill = _format_constant(node.value, 6), '#cecece'
        lines.append('%d [label="%s", fillcolor="%s"] ;' % (i, _dot_escape(str(label)), fill))

    # subtrees may be shared between parents, so edges are numbered by position rather than identity
    edges = []

    def walk(node, index):
        child_index = index + 1
        for child in node.children:
            edges.append('%d -> %d ;' % (index, child_index))
            walk(child, child_index)
            child_index += child.size

    walk(expr, 0)
    lines.extend(edges)
    lines.append('}')
    return '\n'.join(lines) + '\n'
