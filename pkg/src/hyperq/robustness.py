"""Quantitative and Boolean semantics of temporal bodies over finite traces.

The quantitative evaluator assigns a bounded real robustness value to a
bundled (zipped) trace: Boolean atoms saturate at +/-rho_max, numeric
predicates contribute their clamped margin, negation flips sign, conjunction
and disjunction take min and max, and the temporal operators fold min/max
over trace positions.  Evaluating past the end of a window yields rho_min.

A separate Boolean evaluator implements the positional satisfaction relation
directly (with explicit quantifier enumeration over a finite trace set) and
serves as an independent oracle: for formulas whose atoms are all Boolean,
robustness equals rho_max exactly when the Boolean relation holds.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .formula import (
    EXISTS,
    And,
    Always,
    BoolProp,
    Eventually,
    FalseNode,
    Formula,
    Implies,
    LtlNode,
    Next,
    Not,
    Or,
    Predicate,
    TrueNode,
    Until,
)


class LengthMismatchError(ValueError):
    pass


class EmptyInputError(ValueError):
    pass


class DuplicateIndexError(ValueError):
    pass


class WindowOutOfRangeError(ValueError):
    pass


class UnknownValuationError(KeyError):
    pass


# ---------------------------------------------------------------------------
# Labels and traces

@dataclass
class Label:
    """Observation of one trace position: propositions plus numeric valuations."""

    props: frozenset = frozenset()
    valuations: dict = field(default_factory=dict)

    def value(self, name: str) -> float:
        try:
            return self.valuations[name]
        except KeyError:
            raise UnknownValuationError(name) from None


def _format_value(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


@dataclass
class Trace:
    """A finite sequence of labels; the empty trace is permitted."""

    labels: tuple = ()

    def __post_init__(self):
        self.labels = tuple(self.labels)

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Trace(self.labels[i])
        return self.labels[i]

    def __iter__(self):
        return iter(self.labels)

    def prefix(self, length: int) -> "Trace":
        return Trace(self.labels[:length])

    def to_text(self) -> str:
        """One position per line: `props | key=value,...`."""
        lines = []
        for lab in self.labels:
            props = " ".join(sorted(lab.props))
            vals = ",".join(f"{k}={_format_value(v)}" for k, v in sorted(lab.valuations.items()))
            lines.append(f"{props} | {vals}".strip())
        return "\n".join(lines)

    @staticmethod
    def from_text(text: str) -> "Trace":
        labels = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            props_part, _, vals_part = line.partition("|")
            props = frozenset(props_part.split())
            vals = {}
            for item in vals_part.strip().split(","):
                if item:
                    k, _, v = item.partition("=")
                    vals[k.strip()] = float(v)
            labels.append(Label(props, vals))
        return Trace(tuple(labels))


@dataclass
class ZippedTrace:
    """Point-wise bundle of equally long traces: one tuple of labels per position."""

    columns: tuple
    arity: int

    def __len__(self):
        return len(self.columns)


def zip_traces(traces) -> ZippedTrace:
    """Bundle traces position-wise; they must be nonempty and equally long."""
    traces = list(traces)
    if not traces or any(len(t) == 0 for t in traces):
        raise EmptyInputError("zip requires at least one nonempty trace per slot")
    lengths = {len(t) for t in traces}
    if len(lengths) != 1:
        raise LengthMismatchError(f"traces have differing lengths {sorted(lengths)}")
    columns = tuple(tuple(t[i] for t in traces) for i in range(lengths.pop()))
    return ZippedTrace(columns, arity=len(traces))


def ordered_union(exist_traces: dict, univ_traces: dict) -> list:
    """Merge index->trace maps back into quantifier-prefix order."""
    merged = {}
    for src in (exist_traces, univ_traces):
        for idx, t in src.items():
            if idx in merged:
                raise DuplicateIndexError(f"quantifier index {idx} assigned twice")
            merged[idx] = t
    return [merged[i] for i in sorted(merged)]


# ---------------------------------------------------------------------------
# Robustness configuration and verdicts

@dataclass(frozen=True)
class RobustnessConfig:
    rho_max: float = 100.0

    def __post_init__(self):
        if self.rho_max <= 0:
            raise ValueError("rho_max must be positive")

    @property
    def rho_min(self) -> float:
        return -self.rho_max


class Verdict(enum.Enum):
    SATISFIED = "satisfied"
    VIOLATED = "violated"
    BORDERLINE = "borderline"


def sat_verdict(rho: float, cfg: RobustnessConfig) -> Verdict:
    """Sign-based verdict.

    For purely Boolean bodies robustness is exactly +/-rho_max, so a positive
    value coincides with reaching absolute robustness; for numeric predicates
    the sign of the margin decides.
    """
    if rho > 0:
        return Verdict.SATISFIED
    if rho < 0:
        return Verdict.VIOLATED
    return Verdict.BORDERLINE


# ---------------------------------------------------------------------------
# Quantitative evaluation

def _slot_of(target, arity: int) -> int:
    idx = target.index
    if not 1 <= idx <= arity:
        raise WindowOutOfRangeError(f"atom target index {idx} outside bundle of arity {arity}")
    return idx - 1


def _atom_values(atom, z: ZippedTrace, lo: int, hi: int, cfg: RobustnessConfig) -> list:
    """Per-position robustness of one atom over columns [lo, hi)."""
    rmax, rmin = cfg.rho_max, cfg.rho_min
    out = []
    if isinstance(atom, BoolProp):
        slot = _slot_of(atom.trace, z.arity)
        for i in range(lo, hi):
            out.append(rmax if atom.prop in z.columns[i][slot].props else rmin)
        return out
    slots = [_slot_of(a, z.arity) for a in atom.args]
    for i in range(lo, hi):
        col = z.columns[i]
        if atom.abs_diff:
            v = abs(col[slots[0]].value(atom.valuation) - col[slots[1]].value(atom.valuation))
        else:
            v = col[slots[0]].value(atom.valuation)
        if atom.comparator == "=":
            out.append(rmax if v == atom.constant else rmin)
        else:
            margin = atom.constant - v if atom.comparator == "<" else v - atom.constant
            out.append(min(rmax, max(rmin, margin)))
    return out


def _node_values(node: LtlNode, z: ZippedTrace, lo: int, hi: int, cfg: RobustnessConfig,
                 memo: dict) -> list:
    """Dynamic program: robustness of `node` at every position in [lo, hi).

    Temporal operators are suffix recursions over the shared window end, so
    each node costs O(window) once its children are tabulated.
    """
    key = id(node)
    cached = memo.get(key)
    if cached is not None:
        return cached
    rmax, rmin = cfg.rho_max, cfg.rho_min
    n = hi - lo
    if isinstance(node, TrueNode):
        vals = [rmax] * n
    elif isinstance(node, FalseNode):
        vals = [rmin] * n
    elif isinstance(node, (BoolProp, Predicate)):
        vals = _atom_values(node, z, lo, hi, cfg)
    elif isinstance(node, Not):
        vals = [-v for v in _node_values(node.child, z, lo, hi, cfg, memo)]
    elif isinstance(node, And):
        lvals = _node_values(node.left, z, lo, hi, cfg, memo)
        rvals = _node_values(node.right, z, lo, hi, cfg, memo)
        vals = [a if a < b else b for a, b in zip(lvals, rvals)]
    elif isinstance(node, Or):
        lvals = _node_values(node.left, z, lo, hi, cfg, memo)
        rvals = _node_values(node.right, z, lo, hi, cfg, memo)
        vals = [a if a > b else b for a, b in zip(lvals, rvals)]
    elif isinstance(node, Implies):
        lvals = _node_values(node.left, z, lo, hi, cfg, memo)
        rvals = _node_values(node.right, z, lo, hi, cfg, memo)
        vals = [b if -a < b else -a for a, b in zip(lvals, rvals)]
    elif isinstance(node, Next):
        cvals = _node_values(node.child, z, lo, hi, cfg, memo)
        vals = cvals[1:] + [rmin]
    elif isinstance(node, Always):
        cvals = _node_values(node.child, z, lo, hi, cfg, memo)
        vals = [0.0] * n
        acc = rmax
        for i in range(n - 1, -1, -1):
            c = cvals[i]
            acc = c if c < acc else acc
            vals[i] = acc
    elif isinstance(node, Eventually):
        cvals = _node_values(node.child, z, lo, hi, cfg, memo)
        vals = [0.0] * n
        acc = rmin
        for i in range(n - 1, -1, -1):
            c = cvals[i]
            acc = c if c > acc else acc
            vals[i] = acc
    elif isinstance(node, Until):
        lvals = _node_values(node.left, z, lo, hi, cfg, memo)
        rvals = _node_values(node.right, z, lo, hi, cfg, memo)
        vals = [0.0] * n
        acc = rmin  # no witness position yet
        for i in range(n - 1, -1, -1):
            carry = lvals[i] if lvals[i] < acc else acc
            acc = rvals[i] if rvals[i] > carry else carry
            vals[i] = acc
    else:
        raise TypeError(f"cannot evaluate node {node!r}")
    memo[key] = vals
    return vals


def eval_ltl(z: ZippedTrace, window, body: LtlNode, cfg: RobustnessConfig) -> float:
    """Robustness of `body` on positions [lo, hi) of a zipped trace.

    An empty window evaluates to rho_min.
    """
    lo, hi = window
    if not (0 <= lo <= hi <= len(z)):
        raise WindowOutOfRangeError(f"window {window} outside trace of length {len(z)}")
    if lo >= hi:
        return cfg.rho_min
    return _node_values(body, z, lo, hi, cfg, {})[0]


def eval_hyper(assignment, sk, cfg: RobustnessConfig) -> float:
    """Robustness of a skolemized body for one trace per quantifier slot.

    `assignment` lists traces in quantifier-prefix order; witness-tagged atoms
    read the slot of their original prefix position.
    """
    traces = list(assignment)
    if len(traces) != sk.arity:
        raise LengthMismatchError(f"expected {sk.arity} traces, got {len(traces)}")
    z = zip_traces(traces)
    return eval_ltl(z, (0, len(z)), sk.body, cfg)


# ---------------------------------------------------------------------------
# Boolean oracle

def boolean_holds(assignment, body: LtlNode, at: int = 0) -> bool:
    """Positional satisfaction of a quantifier-free body under a fixed assignment.

    `assignment` lists one trace per quantifier slot.  Temporal operators are
    bounded by the shortest assigned trace; a next without a following
    position is false, and atoms read past a trace's end are false.
    """
    traces = list(assignment)
    horizon = min((len(t) for t in traces), default=0)

    def atom_holds(node, i: int) -> bool:
        if isinstance(node, BoolProp):
            t = traces[node.trace.index - 1]
            return i < len(t) and node.prop in t[i].props
        slots = [a.index - 1 for a in node.args]
        if any(i >= len(traces[s]) for s in slots):
            return False
        if node.abs_diff:
            v = abs(traces[slots[0]][i].value(node.valuation)
                    - traces[slots[1]][i].value(node.valuation))
        else:
            v = traces[slots[0]][i].value(node.valuation)
        if node.comparator == "<":
            return v < node.constant
        if node.comparator == ">":
            return v > node.constant
        return v == node.constant

    def sat(node, i: int) -> bool:
        if isinstance(node, TrueNode):
            return True
        if isinstance(node, FalseNode):
            return False
        if isinstance(node, (BoolProp, Predicate)):
            return atom_holds(node, i)
        if isinstance(node, Not):
            return not sat(node.child, i)
        if isinstance(node, And):
            return sat(node.left, i) and sat(node.right, i)
        if isinstance(node, Or):
            return sat(node.left, i) or sat(node.right, i)
        if isinstance(node, Implies):
            return (not sat(node.left, i)) or sat(node.right, i)
        if isinstance(node, Next):
            return i + 1 < horizon and sat(node.child, i + 1)
        if isinstance(node, Eventually):
            return any(sat(node.child, j) for j in range(i, horizon))
        if isinstance(node, Always):
            return all(sat(node.child, j) for j in range(i, horizon))
        if isinstance(node, Until):
            for j in range(i, horizon):
                if sat(node.right, j) and all(sat(node.left, k) for k in range(i, j)):
                    return True
            return False
        raise TypeError(f"cannot evaluate node {node!r}")

    if at >= horizon:
        return False
    return sat(body, at)


def boolean_sat(trace_set, f: Formula) -> bool:
    """Satisfaction of a closed quantified formula by a finite trace set.

    Enumerates trace assignments explicitly (existential: some trace in the
    set; universal: every trace), so it is only meant for small inputs and
    cross-validation.
    """
    traces = list(trace_set)

    def go(level: int, chosen: list) -> bool:
        if level == len(f.prefix):
            return boolean_holds(chosen, f.body)
        kind = f.prefix[level].kind
        results = (go(level + 1, chosen + [t]) for t in traces)
        return any(results) if kind == EXISTS else all(results)

    return go(0, [])
