"""Shared data model: sparse rows, linear programs, MILPs, cuts and reports.

Everything here is minimization-canonical and immutable after construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

LE, GE, EQ = "<=", ">=", "="
SENSES = (LE, GE, EQ)

EPS_TIGHT = 1e-6
EPS_VIOL = 1e-6
EPS_INT = 1e-6

ORIGINS = ("subtour", "capacity", "connectivity")


class StructuralError(ValueError):
    """Raised when indices, dimensions or senses are inconsistent."""


class ParseError(ValueError):
    """Malformed instance text; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True)
class SparseRow:
    """Sorted (index, coefficient) pairs with duplicates merged."""

    idx: tuple[int, ...]
    val: tuple[float, ...]

    def __post_init__(self):
        if len(self.idx) != len(self.val):
            raise StructuralError("index/value length mismatch")
        if any(b <= a for a, b in zip(self.idx, self.idx[1:])):
            raise StructuralError("indices must be strictly increasing; use SparseRow.make")

    @classmethod
    def make(cls, terms: Mapping[int, float] | Iterable[tuple[int, float]]) -> "SparseRow":
        pairs = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[int, float] = {}
        for j, a in pairs:
            j = int(j)
            if j < 0:
                raise StructuralError(f"negative column index {j}")
            acc[j] = acc.get(j, 0.0) + float(a)
        keys = sorted(j for j, a in acc.items() if a != 0.0)
        return cls(tuple(keys), tuple(acc[j] for j in keys))

    def __len__(self):
        return len(self.idx)

    def items(self):
        return zip(self.idx, self.val)

    def max_index(self) -> int:
        return self.idx[-1] if self.idx else -1

    def remap(self, mapping: Mapping[int, int] | Sequence[int]) -> "SparseRow":
        return SparseRow.make((mapping[j], a) for j, a in self.items())


def evaluate_row(row: SparseRow, point) -> float:
    """Dot product of the row with a dense point."""
    point = np.asarray(point, dtype=float)
    if row.idx and row.idx[-1] >= point.shape[0]:
        raise StructuralError(
            f"row references column {row.idx[-1]} but point has length {point.shape[0]}")
    if not row.idx:
        return 0.0
    return float(np.dot(point[list(row.idx)], row.val))


@dataclass(frozen=True)
class LinearProgram:
    """min c.x  s.t.  rows (sense) rhs,  lower <= x <= upper."""

    num_vars: int
    objective: tuple[float, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    rows: tuple[SparseRow, ...] = ()
    senses: tuple[str, ...] = ()
    rhs: tuple[float, ...] = ()

    def __post_init__(self):
        n = self.num_vars
        if len(self.objective) != n or len(self.lower) != n or len(self.upper) != n:
            raise StructuralError("objective/bounds length must equal num_vars")
        if not (len(self.rows) == len(self.senses) == len(self.rhs)):
            raise StructuralError("rows, senses and rhs must have equal length")
        for lo, up in zip(self.lower, self.upper):
            if lo > up:
                raise StructuralError(f"lower bound {lo} exceeds upper bound {up}")
        for r, s in zip(self.rows, self.senses):
            if s not in SENSES:
                raise StructuralError(f"unknown sense {s!r}")
            if r.max_index() >= n:
                raise StructuralError(f"row column {r.max_index()} out of range for {n} variables")

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def with_rows(self, rows: Sequence[SparseRow], senses: Sequence[str], rhs: Sequence[float]):
        return LinearProgram(self.num_vars, self.objective, self.lower, self.upper,
                             self.rows + tuple(rows), self.senses + tuple(senses),
                             self.rhs + tuple(float(b) for b in rhs))

    def with_bounds(self, lower, upper):
        return LinearProgram(self.num_vars, self.objective,
                             tuple(float(v) for v in lower), tuple(float(v) for v in upper),
                             self.rows, self.senses, self.rhs)


@dataclass(frozen=True)
class ScenarioSet:
    probabilities: tuple[float, ...]
    payload: tuple[Any, ...]

    def __post_init__(self):
        if len(self.probabilities) != len(self.payload):
            raise StructuralError("one payload per probability required")
        if not self.probabilities:
            raise StructuralError("empty scenario set")
        if any(not (p > 0.0) for p in self.probabilities):
            raise StructuralError("scenario probabilities must be strictly positive")
        if abs(math.fsum(self.probabilities) - 1.0) > 1e-12:
            raise StructuralError(f"probabilities sum to {math.fsum(self.probabilities)!r}, not 1")

    def __len__(self):
        return len(self.probabilities)


@dataclass(frozen=True)
class Cut:
    """A single inequality produced by a separator.

    ``scenario`` is the stage index of the variables the cut lives on:
    0 for first stage, s >= 1 for (original) scenario s.
    """

    row: SparseRow
    sense: str
    rhs: float
    origin: str
    scenario: int = 0
    aux: Any = None

    def __post_init__(self):
        if not len(self.row):
            raise StructuralError("a cut needs at least one nonzero coefficient")
        if self.sense not in (LE, GE):
            raise StructuralError(f"cut sense must be <= or >=, got {self.sense!r}")

    def key(self):
        return (self.row.idx, self.row.val, self.sense, float(self.rhs))


def cut_slack(cut: Cut, point) -> float:
    lhs = evaluate_row(cut.row, point)
    return lhs - cut.rhs if cut.sense == GE else cut.rhs - lhs


def cut_violation(cut: Cut, point) -> float:
    return -cut_slack(cut, point)


# A separator takes (model, point, point_is_integral) and returns violated cuts.
Separator = Callable[["MilpModel", np.ndarray, bool], list]


@dataclass(frozen=True)
class MilpModel:
    """LP + integrality + per-variable metadata + separators.

    ``var_meta[j]`` is ``(stage, key)`` where stage 0 is first stage and
    stage s >= 1 refers to original scenario s (1-based).  ``key`` is a
    hashable problem-specific role, e.g. ``("x", i, j)``.
    """

    lp: LinearProgram
    integral: tuple[bool, ...]
    var_meta: tuple[tuple[int, Any], ...]
    separators: tuple[Separator, ...] = ()
    scenarios: tuple[int, ...] = ()
    name: str = ""

    def __post_init__(self):
        n = self.lp.num_vars
        if len(self.integral) != n:
            raise StructuralError("integrality mask length must equal num_vars")
        if self.var_meta and len(self.var_meta) != n:
            raise StructuralError("var_meta length must equal num_vars")
        valid = set(self.scenarios)
        for stage, _ in self.var_meta:
            if stage != 0 and stage not in valid:
                raise StructuralError(f"variable references scenario {stage} not in model")

    @property
    def num_vars(self) -> int:
        return self.lp.num_vars

    def index_of(self) -> dict:
        return {m: j for j, m in enumerate(self.var_meta)}

    def stage_columns(self, stage: int) -> list[int]:
        return [j for j, (s, _) in enumerate(self.var_meta) if s == stage]


@dataclass
class SolveReport:
    status: str
    objective: float
    bound: float
    gap: float
    nodes: int = 0
    cuts_added: dict = field(default_factory=dict)
    cuts_transferred: int = 0
    tight_ratio: float | None = None
    wall_time: dict = field(default_factory=dict)
    point: np.ndarray | None = None
    pool_size: int = 0
    root_pool_size: int = 0      # cuts found by the reduced root loop (pipeline runs only)

    @property
    def total_time(self) -> float:
        return float(sum(self.wall_time.values()))


def relative_gap(objective: float, bound: float, eps: float = 1e-10) -> float:
    if not (math.isfinite(objective) and math.isfinite(bound)):
        return math.inf
    return (objective - bound) / max(abs(objective), eps)


# -- plain-text dump ---------------------------------------------------------
#
# Grammar (one directive per line, '#' starts a comment, tokens split on
# whitespace, floats written with repr so that parsing is lossless):
#
#   vars <n>
#   obj <c_0> ... <c_{n-1}>
#   bound <j> <lower> <upper>      # 'inf' / '-inf' allowed
#   int <j> [<j> ...]
#   row <sense> <rhs> <j>:<coef> [<j>:<coef> ...]    # sense in <=, >=, =
#
# Bounds default to [0, inf); every variable not listed by 'int' is continuous.

def _fmt(v: float) -> str:
    return repr(float(v))


def dump_lp(model: MilpModel | LinearProgram) -> str:
    lp = model.lp if isinstance(model, MilpModel) else model
    integral = model.integral if isinstance(model, MilpModel) else (False,) * lp.num_vars
    out = [f"vars {lp.num_vars}", "obj " + " ".join(_fmt(c) for c in lp.objective)]
    for j, (lo, up) in enumerate(zip(lp.lower, lp.upper)):
        if lo != 0.0 or up != math.inf:
            out.append(f"bound {j} {_fmt(lo)} {_fmt(up)}")
    ints = [str(j) for j, f in enumerate(integral) if f]
    if ints:
        out.append("int " + " ".join(ints))
    for row, s, b in zip(lp.rows, lp.senses, lp.rhs):
        terms = " ".join(f"{j}:{_fmt(a)}" for j, a in row.items())
        out.append(f"row {s} {_fmt(b)} {terms}".rstrip())
    return "\n".join(out) + "\n"


def parse_lp(text: str) -> MilpModel:
    n = None
    obj = None
    bounds: dict[int, tuple[float, float]] = {}
    ints: set[int] = set()
    rows, senses, rhs = [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "vars":
                n = int(tok[1])
            elif tok[0] == "obj":
                obj = [float(t) for t in tok[1:]]
            elif tok[0] == "bound":
                bounds[int(tok[1])] = (float(tok[2]), float(tok[3]))
            elif tok[0] == "int":
                ints.update(int(t) for t in tok[1:])
            elif tok[0] == "row":
                if tok[1] not in SENSES:
                    raise ValueError(f"bad sense {tok[1]!r}")
                terms = []
                for t in tok[3:]:
                    j, a = t.split(":")
                    terms.append((int(j), float(a)))
                rows.append(SparseRow.make(terms))
                senses.append(tok[1])
                rhs.append(float(tok[2]))
            else:
                raise ValueError(f"unknown directive {tok[0]!r}")
        except (IndexError, ValueError) as exc:
            raise StructuralError(f"line {lineno}: {exc}") from None
    if n is None:
        raise StructuralError("missing 'vars' line")
    obj = obj if obj is not None else [0.0] * n
    lower = [bounds.get(j, (0.0, math.inf))[0] for j in range(n)]
    upper = [bounds.get(j, (0.0, math.inf))[1] for j in range(n)]
    lp = LinearProgram(n, tuple(obj), tuple(lower), tuple(upper),
                       tuple(rows), tuple(senses), tuple(rhs))
    return MilpModel(lp, tuple(j in ints for j in range(n)), ())


class ModelBuilder:
    """Incremental construction of a MilpModel."""

    def __init__(self):
        self.cost, self.lower, self.upper, self.integral, self.meta = [], [], [], [], []
        self.rows, self.senses, self.rhs = [], [], []

    def add_var(self, meta, cost=0.0, lower=0.0, upper=1.0, integral=True) -> int:
        self.cost.append(float(cost))
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.integral.append(bool(integral))
        self.meta.append(meta)
        return len(self.cost) - 1

    def add_row(self, terms, sense, rhs):
        row = SparseRow.make(terms)
        if len(row):
            self.rows.append(row)
            self.senses.append(sense)
            self.rhs.append(float(rhs))

    def build(self, separators=(), scenarios=(), name="") -> MilpModel:
        lp = LinearProgram(len(self.cost), tuple(self.cost), tuple(self.lower), tuple(self.upper),
                           tuple(self.rows), tuple(self.senses), tuple(self.rhs))
        return MilpModel(lp, tuple(self.integral), tuple(self.meta), tuple(separators),
                         tuple(scenarios), name)
