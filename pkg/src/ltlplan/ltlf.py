"""Finite-trace linear temporal logic over named propositions.

Provides the formula AST, a text parser with a canonical printer, a boolean
model checker over binary traces, and a smooth quantitative evaluator over
real-valued assignment matrices together with its analytic gradient.

Conventions used throughout:

* a binary trace is a boolean matrix of shape ``(|P|, T+1)``; entry (p, t)
  is the truth of proposition p at step t;
* an assignment matrix is a float matrix of the same shape whose entries are
  signed margins, positive meaning the proposition holds;
* quantitative evaluation returns a positive value iff (up to smoothing) the
  thresholded trace satisfies the formula.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PropSet",
    "Formula",
    "Truth",
    "Falsehood",
    "Atom",
    "Not",
    "And",
    "Or",
    "Next",
    "Until",
    "Always",
    "Eventually",
    "SoftConfig",
    "ParseError",
    "UnknownPropositionError",
    "NextAtFinalStepError",
    "parse",
    "format_formula",
    "satisfies",
    "satisfies_batch",
    "threshold_assignments",
    "evaluate_soft",
    "evaluate_soft_batch",
    "soft_gradient",
    "soft_gradient_batch",
    "softmin",
    "softmax_soft",
    "expand_derived",
    "formula_atoms",
    "formula_depth",
]

RESERVED_WORDS = frozenset({"true", "false", "U", "X", "F", "G"})


class PropSet:
    """Ordered, unique set of proposition names with index lookup."""

    def __init__(self, names):
        names = tuple(names)
        if not names:
            raise ValueError("proposition set must be non-empty")
        if any(not isinstance(n, str) or not n for n in names):
            raise ValueError("proposition names must be non-empty strings")
        if len(set(names)) != len(names):
            raise ValueError("proposition names must be unique")
        self.names = names
        self._index = {name: i for i, name in enumerate(names)}

    def index(self, name: str) -> int:
        return self._index[name]

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, PropSet) and self.names == other.names

    def __repr__(self) -> str:
        return f"PropSet({list(self.names)!r})"


# ------------------------- formula AST -------------------------


@dataclass(frozen=True)
class Formula:
    """Base class for LTL_f formula nodes."""

    def __str__(self) -> str:  # canonical fully parenthesized form
        return format_formula(self)


@dataclass(frozen=True)
class Truth(Formula):
    pass


@dataclass(frozen=True)
class Falsehood(Formula):
    pass


@dataclass(frozen=True)
class Atom(Formula):
    index: int
    # Display name only; equality and hashing are by index.
    name: str | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Not(Formula):
    child: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    child: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Always(Formula):
    child: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    child: Formula


_UNARY = (Not, Next, Always, Eventually)
_BINARY = (And, Or, Until)


def formula_atoms(formula: Formula) -> set[int]:
    """Set of proposition indices appearing in the formula."""
    if isinstance(formula, Atom):
        return {formula.index}
    if isinstance(formula, _UNARY):
        return formula_atoms(formula.child)
    if isinstance(formula, _BINARY):
        return formula_atoms(formula.left) | formula_atoms(formula.right)
    return set()


def formula_depth(formula: Formula) -> int:
    if isinstance(formula, _UNARY):
        return 1 + formula_depth(formula.child)
    if isinstance(formula, _BINARY):
        return 1 + max(formula_depth(formula.left), formula_depth(formula.right))
    return 1


def expand_derived(formula: Formula) -> Formula:
    """Rewrite Or/Always/Eventually into the primitive operators.

    Uses the standard equivalences a|b = !(!a & !b), F a = true U a and
    G a = !F !a.
    """
    if isinstance(formula, Or):
        return Not(And(Not(expand_derived(formula.left)), Not(expand_derived(formula.right))))
    if isinstance(formula, Eventually):
        return Until(Truth(), expand_derived(formula.child))
    if isinstance(formula, Always):
        return Not(Until(Truth(), Not(expand_derived(formula.child))))
    if isinstance(formula, Not):
        return Not(expand_derived(formula.child))
    if isinstance(formula, Next):
        return Next(expand_derived(formula.child))
    if isinstance(formula, And):
        return And(expand_derived(formula.left), expand_derived(formula.right))
    if isinstance(formula, Until):
        return Until(expand_derived(formula.left), expand_derived(formula.right))
    return formula


# ------------------------- parser / printer -------------------------


class ParseError(ValueError):
    """Formula text is not well formed; ``position`` is the offending offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownPropositionError(ParseError):
    pass


_TOKEN_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|[!&|()]|\S")


def _tokenize(text: str):
    tokens = []
    for m in _TOKEN_RE.finditer(text):
        tok = m.group(0)
        if tok not in "!&|()" and not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok):
            raise ParseError(f"unexpected character {tok!r}", m.start())
        tokens.append((tok, m.start()))
    tokens.append((None, len(text)))
    return tokens


class _Parser:
    """Recursive descent parser for the surface grammar.

    Precedence, tightest first: unary (! X F G) > U > & > |, with U
    right-associative and & and | left-associative.
    """

    def __init__(self, text: str, props: PropSet):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.props = props

    def peek(self):
        return self.tokens[self.pos][0]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, tok: str):
        got, at = self.advance()
        if got != tok:
            raise ParseError(f"expected {tok!r}, got {got!r}", at)

    def parse(self) -> Formula:
        formula = self.parse_or()
        tok, at = self.tokens[self.pos]
        if tok is not None:
            raise ParseError(f"unexpected trailing token {tok!r}", at)
        return formula

    def parse_or(self) -> Formula:
        node = self.parse_and()
        while self.peek() == "|":
            self.advance()
            node = Or(node, self.parse_and())
        return node

    def parse_and(self) -> Formula:
        node = self.parse_until()
        while self.peek() == "&":
            self.advance()
            node = And(node, self.parse_until())
        return node

    def parse_until(self) -> Formula:
        node = self.parse_unary()
        if self.peek() == "U":
            self.advance()
            node = Until(node, self.parse_until())
        return node

    def parse_unary(self) -> Formula:
        tok, at = self.tokens[self.pos]
        if tok == "!":
            self.advance()
            return Not(self.parse_unary())
        if tok == "X":
            self.advance()
            return Next(self.parse_unary())
        if tok == "F":
            self.advance()
            return Eventually(self.parse_unary())
        if tok == "G":
            self.advance()
            return Always(self.parse_unary())
        return self.parse_primary()

    def parse_primary(self) -> Formula:
        tok, at = self.advance()
        if tok == "(":
            node = self.parse_or()
            self.expect(")")
            return node
        if tok == "true":
            return Truth()
        if tok == "false":
            return Falsehood()
        if tok is None:
            raise ParseError("unexpected end of input", at)
        if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok) and tok not in RESERVED_WORDS:
            if tok not in self.props:
                raise UnknownPropositionError(f"unknown proposition {tok!r}", at)
            return Atom(self.props.index(tok), tok)
        raise ParseError(f"unexpected token {tok!r}", at)


def parse(text: str, props: PropSet) -> Formula:
    """Parse formula text over the given proposition set into an AST."""
    return _Parser(text, props).parse()


def format_formula(formula: Formula, props: PropSet | None = None) -> str:
    """Canonical fully parenthesized rendering; inverse of :func:`parse`."""

    def name(atom: Atom) -> str:
        if props is not None:
            return props.names[atom.index]
        if atom.name is not None:
            return atom.name
        return f"p{atom.index}"

    def rec(f: Formula) -> str:
        if isinstance(f, Truth):
            return "true"
        if isinstance(f, Falsehood):
            return "false"
        if isinstance(f, Atom):
            return name(f)
        if isinstance(f, Not):
            return f"(! {rec(f.child)})"
        if isinstance(f, Next):
            return f"(X {rec(f.child)})"
        if isinstance(f, Eventually):
            return f"(F {rec(f.child)})"
        if isinstance(f, Always):
            return f"(G {rec(f.child)})"
        if isinstance(f, And):
            return f"({rec(f.left)} & {rec(f.right)})"
        if isinstance(f, Or):
            return f"({rec(f.left)} | {rec(f.right)})"
        if isinstance(f, Until):
            return f"({rec(f.left)} U {rec(f.right)})"
        raise TypeError(f"not a formula node: {f!r}")

    return rec(formula)


# ------------------------- boolean semantics -------------------------


def threshold_assignments(sigma: np.ndarray) -> np.ndarray:
    """Binary trace from signed margins; strictly positive counts as true."""
    return np.asarray(sigma) > 0


def _bool_eval(formula: Formula, values: np.ndarray, cache: dict) -> np.ndarray:
    # values: (B, P, L) bool; returns (B, L) bool of per-step satisfaction.
    hit = cache.get(formula)
    if hit is not None:
        return hit
    if isinstance(formula, Truth):
        out = np.ones(values.shape[::2], dtype=bool)
    elif isinstance(formula, Falsehood):
        out = np.zeros(values.shape[::2], dtype=bool)
    elif isinstance(formula, Atom):
        out = values[:, formula.index, :]
    elif isinstance(formula, Not):
        out = ~_bool_eval(formula.child, values, cache)
    elif isinstance(formula, And):
        out = _bool_eval(formula.left, values, cache) & _bool_eval(formula.right, values, cache)
    elif isinstance(formula, Or):
        out = _bool_eval(formula.left, values, cache) | _bool_eval(formula.right, values, cache)
    elif isinstance(formula, Next):
        # Strong next: unsatisfiable at the final step of a finite trace.
        child = _bool_eval(formula.child, values, cache)
        out = np.concatenate([child[:, 1:], np.zeros((child.shape[0], 1), bool)], axis=1)
    elif isinstance(formula, Always):
        child = _bool_eval(formula.child, values, cache)
        out = np.flip(np.logical_and.accumulate(np.flip(child, axis=1), axis=1), axis=1)
    elif isinstance(formula, Eventually):
        child = _bool_eval(formula.child, values, cache)
        out = np.flip(np.logical_or.accumulate(np.flip(child, axis=1), axis=1), axis=1)
    elif isinstance(formula, Until):
        left = _bool_eval(formula.left, values, cache)
        right = _bool_eval(formula.right, values, cache)
        out = right.copy()
        for t in range(right.shape[1] - 2, -1, -1):
            out[:, t] |= left[:, t] & out[:, t + 1]
    else:
        raise TypeError(f"not a formula node: {formula!r}")
    cache[formula] = out
    return out


def _as_bool_trace(trace: np.ndarray) -> np.ndarray:
    arr = np.asarray(trace)
    if arr.dtype != bool:
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("binary trace entries must be 0/1 or bool")
        arr = arr.astype(bool)
    if arr.ndim != 2:
        raise ValueError("binary trace must have shape (|P|, T+1)")
    return arr


def satisfies(trace: np.ndarray, formula: Formula, t: int = 0) -> bool:
    """Boolean finite-trace satisfaction of ``formula`` at step ``t``.

    ``trace`` has shape (|P|, T+1) with 0/1 or boolean entries.
    """
    arr = _as_bool_trace(trace)
    if not 0 <= t < arr.shape[1]:
        raise ValueError(f"step {t} outside trace of length {arr.shape[1]}")
    return bool(_bool_eval(formula, arr[None], {})[0, t])


def satisfies_batch(
    traces: np.ndarray, formula: Formula, t: int = 0, cache: dict | None = None
) -> np.ndarray:
    """Vectorized :func:`satisfies` over a batch of traces (B, |P|, T+1).

    ``cache`` memoizes per-subformula results by structural equality; pass
    the same dict across calls that share the trace batch to avoid
    re-evaluating common subformulas.
    """
    arr = np.asarray(traces)
    if arr.ndim != 3:
        raise ValueError("batched traces must have shape (B, |P|, T+1)")
    if arr.dtype != bool:
        arr = arr.astype(bool)
    if not 0 <= t < arr.shape[2]:
        raise ValueError(f"step {t} outside trace of length {arr.shape[2]}")
    return _bool_eval(formula, arr, {} if cache is None else cache)[:, t]


# ------------------------- smooth quantitative semantics -------------------------


@dataclass(frozen=True)
class SoftConfig:
    """Temperature and clamping for the smooth evaluator.

    ``gamma`` is the smooth min/max temperature in assignment units;
    ``infinity_clamp`` substitutes for the +/- infinity of true/false and must
    dominate any attainable labeling magnitude.
    """

    gamma: float = 0.01
    infinity_clamp: float = 1e6

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.infinity_clamp > 0:
            raise ValueError("infinity_clamp must be positive")


class NextAtFinalStepError(ValueError):
    """Smooth evaluation of X at the last step of a finite trace is undefined."""


def softmin(xs, gamma: float) -> float:
    """Smooth minimum, -gamma * log(sum(exp(-x/gamma))).

    Lies within gamma*log(n) of the hard minimum and converges to it as
    gamma -> 0.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        raise ValueError("softmin of an empty vector is undefined")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    m = xs.min()
    return float(m - gamma * np.log(np.exp(-(xs - m) / gamma).sum()))


def softmax_soft(xs, gamma: float) -> float:
    """Smooth maximum, the exact dual -softmin(-xs, gamma)."""
    xs = np.asarray(xs, dtype=float)
    return -softmin(-xs, gamma)


def _masked_softmin(values: np.ndarray, mask: np.ndarray, gamma: float):
    """Row-wise softmin over masked entries.

    Returns (softmin (B,), weights (B, L)). Rows with an empty mask yield nan.
    Shifting by the row-wise masked minimum keeps the exponentials in [0, 1],
    so arbitrarily large clamp magnitudes stay finite. Entries outside the
    mask may be nan; they are replaced by +inf before exponentiation.
    """
    safe = np.where(mask, values, np.inf)
    m = safe.min(axis=1)
    empty = ~mask.any(axis=1)
    m = np.where(empty, 0.0, m)
    e = np.exp(-(safe - m[:, None]) / gamma)
    s = e.sum(axis=1)
    out = np.where(empty, np.nan, m - gamma * np.log(np.where(s > 0, s, 1.0)))
    w = e / np.where(s > 0, s, 1.0)[:, None]
    return out, w


def _masked_softmax(values: np.ndarray, mask: np.ndarray, gamma: float):
    out, w = _masked_softmin(-values, mask, gamma)
    return -out, w


class _SoftNode:
    """Per-node forward results of the smooth evaluator.

    ``values`` is (B, L) with entry (b, t) = f_t(formula, sigma_b); ``valid``
    marks the steps where the recursion is defined (X at the final step and
    anything that must look past it are undefined).
    """

    __slots__ = ("formula", "values", "valid", "children", "k_index")

    def __init__(self, formula, values, valid, children=(), k_index=None):
        self.formula = formula
        self.values = values
        self.valid = valid
        self.children = children
        self.k_index = k_index


def _suffix_all(valid: np.ndarray) -> np.ndarray:
    return np.flip(np.logical_and.accumulate(np.flip(valid, axis=1), axis=1), axis=1)


def _soft_forward(formula: Formula, sigma: np.ndarray, cfg: SoftConfig, cache: dict) -> _SoftNode:
    hit = cache.get(formula)
    if hit is not None:
        return hit
    batch, _, length = sigma.shape
    gamma = cfg.gamma
    all_valid = np.ones((batch, length), dtype=bool)

    if isinstance(formula, Truth):
        node = _SoftNode(formula, np.full((batch, length), cfg.infinity_clamp), all_valid)
    elif isinstance(formula, Falsehood):
        node = _SoftNode(formula, np.full((batch, length), -cfg.infinity_clamp), all_valid)
    elif isinstance(formula, Atom):
        node = _SoftNode(formula, sigma[:, formula.index, :].astype(float), all_valid)
    elif isinstance(formula, Not):
        child = _soft_forward(formula.child, sigma, cfg, cache)
        node = _SoftNode(formula, -child.values, child.valid, (child,))
    elif isinstance(formula, (And, Or)):
        left = _soft_forward(formula.left, sigma, cfg, cache)
        right = _soft_forward(formula.right, sigma, cfg, cache)
        stacked = np.stack([left.values, right.values], axis=2)  # (B, L, 2)
        flat = stacked.reshape(batch * length, 2)
        ones = np.ones_like(flat, dtype=bool)
        if isinstance(formula, And):
            vals, _ = _masked_softmin(flat, ones, gamma)
        else:
            vals, _ = _masked_softmax(flat, ones, gamma)
        node = _SoftNode(
            formula,
            vals.reshape(batch, length),
            left.valid & right.valid,
            (left, right),
        )
    elif isinstance(formula, Next):
        child = _soft_forward(formula.child, sigma, cfg, cache)
        values = np.concatenate([child.values[:, 1:], np.full((batch, 1), np.nan)], axis=1)
        valid = np.concatenate([child.valid[:, 1:], np.zeros((batch, 1), bool)], axis=1)
        node = _SoftNode(formula, values, valid, (child,))
    elif isinstance(formula, (Always, Eventually)):
        child = _soft_forward(formula.child, sigma, cfg, cache)
        values = np.empty((batch, length))
        arange = np.arange(length)
        for t in range(length):
            mask = np.broadcast_to(arange >= t, (batch, length))
            if isinstance(formula, Always):
                values[:, t], _ = _masked_softmin(child.values, mask, gamma)
            else:
                values[:, t], _ = _masked_softmax(child.values, mask, gamma)
        node = _SoftNode(formula, values, _suffix_all(child.valid), (child,))
    elif isinstance(formula, Until):
        left = _soft_forward(formula.left, sigma, cfg, cache)
        right = _soft_forward(formula.right, sigma, cfg, cache)
        values = np.empty((batch, length))
        valid = np.empty((batch, length), dtype=bool)
        k_index = np.empty((batch, length), dtype=np.int64)
        arange = np.arange(length)
        right_valid_suffix = _suffix_all(right.valid)
        positive = right.values > 0
        for t in range(length):
            tail = positive[:, t:]
            exists = tail.any(axis=1)
            k = t + tail.argmax(axis=1)
            # Without a satisfying step for the right side, the left span
            # runs through the end of the trace and the (non-positive)
            # eventually term dominates the min.
            k_end = np.where(exists, k, length)
            k_index[:, t] = np.where(exists, k, -1)
            suffix = np.broadcast_to(arange >= t, (batch, length))
            ev, _ = _masked_softmax(right.values, suffix, gamma)
            span = suffix & (arange[None, :] < k_end[:, None])
            combined = np.concatenate([left.values, ev[:, None]], axis=1)
            comb_mask = np.concatenate([span, np.ones((batch, 1), bool)], axis=1)
            values[:, t], _ = _masked_softmin(combined, comb_mask, gamma)
            # Left operand must be defined on [t, k); k = t needs nothing.
            span_ok = (left.valid | ~span).all(axis=1)
            valid[:, t] = right_valid_suffix[:, t] & span_ok
        node = _SoftNode(formula, values, valid, (left, right), k_index)
    else:
        raise TypeError(f"not a formula node: {formula!r}")

    cache[formula] = node
    return node


def _soft_backward(node: _SoftNode, upstream: np.ndarray, grads: dict, cfg: SoftConfig):
    # upstream: (B, L) gradient of the root value w.r.t. node.values. Steps
    # where the node is undefined carry no gradient; zeroing them here (and
    # flushing nan weights below) keeps nan from leaking out of positions the
    # root value never consumed.
    upstream = np.where(node.valid, upstream, 0.0)
    gamma = cfg.gamma
    formula = node.formula
    if isinstance(formula, (Truth, Falsehood)):
        return
    if isinstance(formula, Atom):
        acc = grads.setdefault(node, np.zeros_like(upstream))
        acc += upstream
        return
    if isinstance(formula, Not):
        _soft_backward(node.children[0], -upstream, grads, cfg)
        return
    if isinstance(formula, (And, Or)):
        left, right = node.children
        batch, length = upstream.shape
        stacked = np.stack([left.values, right.values], axis=2).reshape(batch * length, 2)
        ones = np.ones_like(stacked, dtype=bool)
        if isinstance(formula, And):
            _, w = _masked_softmin(stacked, ones, gamma)
        else:
            _, w = _masked_softmax(stacked, ones, gamma)
        w = np.nan_to_num(w.reshape(batch, length, 2))
        _soft_backward(left, upstream * w[:, :, 0], grads, cfg)
        _soft_backward(right, upstream * w[:, :, 1], grads, cfg)
        return
    if isinstance(formula, Next):
        batch = upstream.shape[0]
        shifted = np.concatenate([np.zeros((batch, 1)), upstream[:, :-1]], axis=1)
        _soft_backward(node.children[0], shifted, grads, cfg)
        return
    if isinstance(formula, (Always, Eventually)):
        child = node.children[0]
        batch, length = upstream.shape
        child_up = np.zeros((batch, length))
        arange = np.arange(length)
        for t in np.nonzero((upstream != 0).any(axis=0))[0]:
            mask = np.broadcast_to(arange >= t, (batch, length))
            if isinstance(formula, Always):
                _, w = _masked_softmin(child.values, mask, gamma)
            else:
                _, w = _masked_softmax(child.values, mask, gamma)
            child_up += upstream[:, t : t + 1] * np.nan_to_num(w)
        _soft_backward(child, child_up, grads, cfg)
        return
    if isinstance(formula, Until):
        left, right = node.children
        batch, length = upstream.shape
        left_up = np.zeros((batch, length))
        right_up = np.zeros((batch, length))
        arange = np.arange(length)
        for t in np.nonzero((upstream != 0).any(axis=0))[0]:
            suffix = np.broadcast_to(arange >= t, (batch, length))
            ev, ev_w = _masked_softmax(right.values, suffix, gamma)
            k = node.k_index[:, t]
            k_end = np.where(k >= 0, k, length)
            span = suffix & (arange[None, :] < k_end[:, None])
            combined = np.concatenate([left.values, ev[:, None]], axis=1)
            comb_mask = np.concatenate([span, np.ones((batch, 1), bool)], axis=1)
            _, w = _masked_softmin(combined, comb_mask, gamma)
            w = np.nan_to_num(w)
            g = upstream[:, t : t + 1]
            left_up += g * w[:, :length]
            right_up += g * w[:, length : length + 1] * np.nan_to_num(ev_w)
        _soft_backward(left, left_up, grads, cfg)
        _soft_backward(right, right_up, grads, cfg)
        return
    raise TypeError(f"not a formula node: {formula!r}")


def _check_sigma(sigma: np.ndarray, batched: bool) -> np.ndarray:
    arr = np.asarray(sigma, dtype=float)
    want = 3 if batched else 2
    if arr.ndim != want:
        raise ValueError(f"assignment matrix must have {want} dimensions, got {arr.ndim}")
    if not np.isfinite(arr).all():
        raise ValueError("assignment matrix entries must be finite")
    return arr if batched else arr[None]


def evaluate_soft_batch(
    formula: Formula,
    sigmas: np.ndarray,
    t: int = 0,
    cfg: SoftConfig = SoftConfig(),
    cache: dict | None = None,
):
    """Smooth evaluation over a batch of assignment matrices (B, |P|, T+1).

    Returns ``(values, valid)``, both of shape (B,). Entries with
    ``valid == False`` correspond to X hitting the final step and hold nan.
    ``cache`` memoizes per-subformula results; reuse it only across calls
    with identical ``sigmas`` and ``cfg``.
    """
    arr = _check_sigma(sigmas, batched=True)
    if not 0 <= t < arr.shape[2]:
        raise ValueError(f"step {t} outside trace of length {arr.shape[2]}")
    node = _soft_forward(formula, arr, cfg, {} if cache is None else cache)
    return node.values[:, t].copy(), node.valid[:, t].copy()


def evaluate_soft(
    formula: Formula, sigma: np.ndarray, t: int = 0, cfg: SoftConfig = SoftConfig()
) -> float:
    """Smooth quantitative evaluation f_t(formula, sigma).

    Positive values indicate satisfaction of the thresholded trace (exactly
    so in the gamma -> 0 limit when no subexpression evaluates to zero).
    Raises :class:`NextAtFinalStepError` where the recursion would step past
    the end of the trace.
    """
    arr = _check_sigma(sigma, batched=False)
    if not 0 <= t < arr.shape[2]:
        raise ValueError(f"step {t} outside trace of length {arr.shape[2]}")
    node = _soft_forward(formula, arr, cfg, {})
    if not node.valid[0, t]:
        raise NextAtFinalStepError(
            f"evaluation of {formula} at step {t} requires a step past the final one"
        )
    return float(node.values[0, t])


def soft_gradient_batch(
    formula: Formula, sigmas: np.ndarray, cfg: SoftConfig = SoftConfig()
):
    """Batched gradient of f_0 w.r.t. each assignment matrix.

    Returns (B, |P|, T+1); rows where f_0 is undefined are nan.
    """
    arr = _check_sigma(sigmas, batched=True)
    batch, n_props, length = arr.shape
    cache: dict = {}
    node = _soft_forward(formula, arr, cfg, cache)
    seed = np.zeros((batch, length))
    seed[:, 0] = 1.0
    grads: dict = {}
    _soft_backward(node, seed, grads, cfg)
    out = np.zeros((batch, n_props, length))
    for leaf, grad in grads.items():
        out[:, leaf.formula.index, :] += grad
    out[~node.valid[:, 0]] = np.nan
    return out


def soft_gradient(
    formula: Formula, sigma: np.ndarray, cfg: SoftConfig = SoftConfig()
) -> np.ndarray:
    """Gradient of f_0(formula, sigma) w.r.t. sigma, shape (|P|, T+1).

    The Until switch index k is treated as locally constant, matching the
    subgradient of the hard semantics away from switching boundaries.
    """
    arr = _check_sigma(sigma, batched=False)
    node = _soft_forward(formula, arr, cfg, {})
    if not node.valid[0, 0]:
        raise NextAtFinalStepError(
            f"gradient of {formula} at step 0 requires a step past the final one"
        )
    return soft_gradient_batch(formula, arr, cfg)[0]
