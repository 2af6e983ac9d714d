"""Group-algebra arithmetic and certified two-sided reduced-C*-norm bounds.

Lower bounds come from trace moments of a*a: both the 2m-th root of the
m-th moment and the ratio of consecutive moments are certified lower
bounds of the norm (power-mean growth and log-convexity of spectral
moments).  On free groups, moments of elements whose support words form
a verified free basis are counted exactly by the tree-walk recursion in
`walks`; everything else falls back to capped sparse convolution.

Upper bounds: the l1 norm of powers (C*-norm <= l1), and for elements
supported on a verified free set, the Leinert bound 2 ||a||_2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import ResourceError, UsageError
from .freeness import FreeSetRegistry
from .groups import Element, FreeGroup, Group
from .measures import SparseMeasure
from .walks import tree_moment_sequence


@dataclass(frozen=True)
class CoeffPolicy:
    """Coefficient floor (absolute value) and support cap for algebra ops."""

    floor: float = 1e-15
    support_cap: int = 200_000


DEFAULT_COEFF_POLICY = CoeffPolicy()
EXACT_COEFF_POLICY = CoeffPolicy(floor=0.0)


class AlgebraElement:
    """Finitely supported coefficient function on a group: an element of the
    group algebra inside the reduced C*-algebra.

    `dropped_l1` is an upper bound on the l1 mass of coefficients removed
    by truncation anywhere in this value's history; certified norm bounds
    account for it.
    """

    __slots__ = ("group", "coeffs", "dropped_l1")

    def __init__(self, group: Group, coeffs: Dict[Element, complex], dropped_l1: float = 0.0):
        clean: Dict[Element, complex] = {}
        for el, c in coeffs.items():
            if c != 0:
                clean[el] = c
        self.group = group
        self.coeffs = clean
        self.dropped_l1 = dropped_l1

    def items_sorted(self) -> List[Tuple[Element, complex]]:
        return sorted(self.coeffs.items(), key=lambda kv: kv[0].sort_key())

    def support(self) -> List[Element]:
        return sorted(self.coeffs, key=lambda el: el.sort_key())

    def coefficient(self, el: Element) -> complex:
        return self.coeffs.get(el, 0)

    def is_real(self, tol: float = 0.0) -> bool:
        return all(abs(complex(c).imag) <= tol for c in self.coeffs.values())

    def __len__(self):
        return len(self.coeffs)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(-1, other))

    def __mul__(self, other):
        if isinstance(other, AlgebraElement):
            return multiply_elements(self, other)
        return NotImplemented

    def __rmul__(self, scalar):
        return scale(scalar, self)

    def __repr__(self):
        parts = ", ".join(f"{el}:{c:.4g}" for el, c in self.items_sorted()[:6])
        more = "..." if len(self.coeffs) > 6 else ""
        return f"AlgebraElement({parts}{more})"


def algebra_unit(g: Element) -> AlgebraElement:
    """The canonical unitary attached to a group element."""
    return AlgebraElement(g.group, {g: 1.0})


def algebra_zero(group: Group) -> AlgebraElement:
    return AlgebraElement(group, {})


def algebra_element(group: Group, coeffs: Dict[Element, complex]) -> AlgebraElement:
    return AlgebraElement(group, dict(coeffs))


def _require_same_group(a: AlgebraElement, b: AlgebraElement) -> Group:
    if a.group is not b.group:
        raise UsageError("algebra elements live on different groups")
    return a.group


def add(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    group = _require_same_group(a, b)
    out = dict(a.coeffs)
    for el, c in b.coeffs.items():
        out[el] = out.get(el, 0) + c
    return AlgebraElement(group, out, a.dropped_l1 + b.dropped_l1)


def scale(scalar: complex, a: AlgebraElement) -> AlgebraElement:
    return AlgebraElement(
        a.group,
        {el: scalar * c for el, c in a.coeffs.items()},
        abs(scalar) * a.dropped_l1,
    )


def adjoint(a: AlgebraElement) -> AlgebraElement:
    out = {}
    for el, c in a.coeffs.items():
        out[el.inverse()] = complex(c).conjugate() if isinstance(c, complex) else c
    return AlgebraElement(a.group, out, a.dropped_l1)


def multiply_elements(
    a: AlgebraElement, b: AlgebraElement, policy: CoeffPolicy = EXACT_COEFF_POLICY
) -> AlgebraElement:
    """Coefficient convolution; the unitaries multiply as the group does."""
    group = _require_same_group(a, b)
    mul = group.mul_key
    acc: Dict = {}
    b_items = [(el.key, c) for el, c in b.items_sorted()]
    for el_a, ca in a.items_sorted():
        ka = el_a.key
        for kb, cb in b_items:
            prod = mul(ka, kb)
            acc[prod] = acc.get(prod, 0) + ca * cb
        if len(acc) > policy.support_cap:
            raise ResourceError(
                f"algebra product support exceeded cap {policy.support_cap}"
            )
    pruned = 0.0
    if policy.floor > 0:
        doomed = [k for k, c in acc.items() if abs(c) < policy.floor]
        for k in doomed:
            pruned += abs(acc.pop(k))
    dropped = (
        a.dropped_l1 * (l1_norm(b) + b.dropped_l1)
        + l1_norm(a) * b.dropped_l1
        + pruned
    )
    return AlgebraElement(group, {Element(group, k): c for k, c in acc.items()}, dropped)


def trace(a: AlgebraElement) -> complex:
    """The canonical trace: the coefficient of the identity."""
    return a.coeffs.get(a.group.identity(), 0)


def kernel_projection(a: AlgebraElement) -> AlgebraElement:
    """a minus its trace component; lands in the kernel of the trace."""
    t = trace(a)
    if t == 0:
        return a
    out = dict(a.coeffs)
    e = a.group.identity()
    out[e] = out.get(e, 0) - t
    return AlgebraElement(a.group, out, a.dropped_l1)


def conjugate_action(a: AlgebraElement, g: Element) -> AlgebraElement:
    """a^g: coefficients pushed along x -> g^-1 x g."""
    if g.group is not a.group:
        raise UsageError("conjugator from a different group")
    group = a.group
    gi = g.inverse()
    out = {}
    for el, c in a.coeffs.items():
        key = group.mul_key(group.mul_key(gi.key, el.key), g.key)
        tgt = Element(group, key)
        out[tgt] = out.get(tgt, 0) + c
    return AlgebraElement(group, out, a.dropped_l1)


def averaged_conjugation(a: AlgebraElement, nu: SparseMeasure) -> AlgebraElement:
    """a^nu = sum_g nu(g) a^g.  Linear in a, trace preserving, maps the
    trace kernel to itself, and contracts every certified norm bound."""
    if nu.group is not a.group:
        raise UsageError("averaging measure on a different group")
    group = a.group
    mul = group.mul_key
    out: Dict[Element, complex] = {}
    for g, w in nu.items_sorted():
        gi = group.inv_key(g.key)
        for el, c in a.items_sorted():
            key = mul(mul(gi, el.key), g.key)
            tgt = Element(group, key)
            out[tgt] = out.get(tgt, 0) + w * c
    dropped = a.dropped_l1 * (nu.total + nu.dropped_mass) + l1_norm(a) * nu.dropped_mass
    return AlgebraElement(group, out, dropped)


def l1_norm(a: AlgebraElement) -> float:
    return math.fsum(abs(c) for c in a.coeffs.values())


def l2_norm(a: AlgebraElement) -> float:
    return math.sqrt(math.fsum(abs(c) ** 2 for c in a.coeffs.values()))


# ---------------------------------------------------------------------------
# Trace moments of a*a


_registry = FreeSetRegistry()


def _letter_model_tables(a: AlgebraElement, fold_budget: int):
    """Map the supports of a* and a onto letters of a free basis, if the
    distinct non-identity support words form one.  Returns None otherwise."""
    if not isinstance(a.group, FreeGroup):
        return None
    if not a.is_real(tol=0.0):
        return None
    group = a.group
    a_star = adjoint(a)
    reps: Dict[Tuple, int] = {}
    orientation: Dict[Tuple, int] = {}
    for source in (a_star, a):
        for el in source.coeffs:
            w = el.key
            if not w:
                continue
            wi = group.inv_key(w)
            rep = min(w, wi, key=lambda t: (len(t), t))
            if rep not in reps:
                reps[rep] = len(reps) + 1
            orientation[w] = reps[rep] if w == rep else -reps[rep]
    words = list(reps)
    if words and not _registry.check(words, fold_budget):
        return None
    tables = []
    for source in (a_star, a):
        table: Dict[int, float] = {}
        for el, c in source.coeffs.items():
            letter = orientation[el.key] if el.key else 0
            table[letter] = table.get(letter, 0.0) + float(complex(c).real)
        tables.append(table)
    return tables[0], tables[1]


@dataclass(frozen=True)
class NormBudget:
    """Budget for certified norm estimation."""

    moment_depth: int = 40
    support_cap: int = 200_000
    fold_edge_budget: int = 3_000_000
    power_depth: int = 3


DEFAULT_NORM_BUDGET = NormBudget()


def trace_moments(
    a: AlgebraElement, depth: int, budget: NormBudget = DEFAULT_NORM_BUDGET
) -> Tuple[List[float], str]:
    """[c_0..c_depth] with c_m = trace((a*a)^m), and the engine used.

    Moments are exact.  The free-basis walk engine runs whenever the
    support words of a and a* form a verified free basis; otherwise capped
    sparse convolution is used and a ResourceError carrying the partial
    sequence is raised on blow-up.
    """
    if depth < 0:
        raise UsageError("moment depth must be >= 0")
    tables = _letter_model_tables(a, budget.fold_edge_budget)
    if tables is not None:
        moments = tree_moment_sequence(tables[0], tables[1], depth)
        return [max(0.0, c) for c in moments], "free-walk"
    b = multiply_elements(
        adjoint(a), a, CoeffPolicy(floor=0.0, support_cap=budget.support_cap)
    )
    moments = [1.0]
    power = algebra_unit(a.group.identity())
    for _ in range(depth):
        try:
            power = multiply_elements(
                power, b, CoeffPolicy(floor=0.0, support_cap=budget.support_cap)
            )
        except ResourceError as exc:
            raise ResourceError(
                f"moment engine support blow-up at depth {len(moments)}: {exc}",
                partial=(moments, "dense"),
            )
        t = trace(power)
        if abs(complex(t).imag) > 1e-9 * max(1.0, abs(t)):
            raise UsageError(f"moment trace unexpectedly non-real: {t}")
        moments.append(max(0.0, float(complex(t).real)))
    return moments, "dense"


def _lower_sequence_from_moments(moments: Sequence[float]) -> List[float]:
    """Certified nondecreasing lower bounds from [c_0..c_D]: at index m the
    larger of c_m^(1/2m) and sqrt(c_{m+1}/c_m) (when available)."""
    out = []
    depth = len(moments) - 1
    for m in range(1, depth + 1):
        c_m = moments[m]
        best = 0.0
        if c_m > 0.0:
            best = c_m ** (1.0 / (2 * m))
            if m + 1 <= depth and moments[m + 1] > 0.0:
                best = max(best, math.sqrt(moments[m + 1] / c_m))
        out.append(best)
    return out


def norm_lower_bound(
    a: AlgebraElement, depth: int, budget: NormBudget = DEFAULT_NORM_BUDGET
) -> List[float]:
    """Nondecreasing certified lower bounds [t_1..t_depth] for the reduced
    C*-norm of a, from trace moments of a*a.

    Raises ResourceError (carrying the partial sequence) if the moment
    engine runs out of support budget before reaching the requested depth.
    """
    if depth < 1:
        raise UsageError("depth must be >= 1")
    if not a.coeffs:
        return [0.0] * depth
    s = l1_norm(a)
    unit = scale(1.0 / s, a)
    try:
        moments, _ = trace_moments(unit, depth + 1, budget)
    except ResourceError as exc:
        partial_moments = exc.partial[0] if exc.partial else [1.0]
        seq = [s * t for t in _lower_sequence_from_moments(partial_moments)]
        raise ResourceError(str(exc), partial=seq[:depth])
    return [s * t for t in _lower_sequence_from_moments(moments)][:depth]


def norm_upper_bound(
    a: AlgebraElement, depth: int, budget: NormBudget = DEFAULT_NORM_BUDGET
) -> float:
    """min over computed m <= depth of (l1((a*a)^m))^(1/2m), each a certified
    upper bound for the norm of self-adjoint powers."""
    if depth < 1:
        raise UsageError("depth must be >= 1")
    policy = CoeffPolicy(floor=0.0, support_cap=budget.support_cap)
    b = multiply_elements(adjoint(a), a, policy)
    best = math.inf
    power = None
    for m in range(1, depth + 1):
        try:
            power = b if power is None else multiply_elements(power, b, policy)
        except ResourceError:
            break
        best = min(best, l1_norm(power) ** (1.0 / (2 * m)))
    if best is math.inf:
        raise ResourceError("no l1-power bound computable within budget")
    return best


@dataclass
class NormEstimate:
    """Two-sided certified norm estimate with method notes."""

    lower: float
    upper: float
    lower_sequence: List[float] = field(default_factory=list)
    methods: Dict[str, float] = field(default_factory=dict)
    flag: Optional[str] = None

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def certification(self, threshold: float) -> str:
        if self.upper < threshold:
            return "certified-below"
        if self.lower > threshold:
            return "certified-above"
        return "undecided"


def estimate_norm(
    a: AlgebraElement,
    budget: NormBudget = DEFAULT_NORM_BUDGET,
    threshold: Optional[float] = None,
    extra_upper: Optional[float] = None,
) -> NormEstimate:
    """Best certified lower/upper bounds under the budget.

    `extra_upper` lets callers inject a theorem-backed bound they already
    hold for this element (e.g. contraction under averaging).  An
    undecided outcome is valid; nothing here raises on budget exhaustion.
    """
    methods: Dict[str, float] = {}
    lower_seq: List[float] = []
    lower = 0.0
    if a.coeffs:
        lower = l2_norm(a)
        methods["l2"] = lower
        try:
            lower_seq = norm_lower_bound(a, budget.moment_depth, budget)
        except ResourceError as exc:
            lower_seq = list(exc.partial or [])
        if lower_seq:
            methods["moments"] = max(lower_seq)
            lower = max(lower, max(lower_seq))

    upper = l1_norm(a)
    methods["l1"] = upper
    e = a.group.identity()
    diag = abs(a.coeffs.get(e, 0))
    rest_words = [el.key for el in a.coeffs if not el.is_identity()]
    if (
        isinstance(a.group, FreeGroup)
        and rest_words
        and sum(len(w) for w in rest_words) <= budget.fold_edge_budget
        and _registry.check(rest_words, budget.fold_edge_budget)
    ):
        rest_l2 = math.sqrt(
            math.fsum(abs(c) ** 2 for el, c in a.coeffs.items() if not el.is_identity())
        )
        free_bound = diag + 2.0 * rest_l2
        methods["free-support"] = free_bound
        upper = min(upper, free_bound)
    try:
        power_bound = norm_upper_bound(a, budget.power_depth, budget)
        methods["l1-powers"] = power_bound
        upper = min(upper, power_bound)
    except ResourceError:
        pass
    if extra_upper is not None:
        methods["propagated"] = extra_upper
        upper = min(upper, extra_upper)

    # Truncation ledger widens both ends.
    lower = max(0.0, lower - a.dropped_l1)
    upper = upper + a.dropped_l1
    estimate = NormEstimate(lower, upper, lower_seq, methods)
    if threshold is not None:
        estimate.flag = estimate.certification(threshold)
    return estimate


# ---------------------------------------------------------------------------
# Text serialization: one coefficient per line, "element-word re im".


def algebra_to_table(a: AlgebraElement) -> str:
    lines = []
    if a.dropped_l1 > 0:
        lines.append(f"# dropped_l1 {a.dropped_l1:.17g}")
    for el, c in a.items_sorted():
        z = complex(c)
        lines.append(f"{el} {z.real:.17g} {z.imag:.17g}")
    return "\n".join(lines) + "\n"


def algebra_from_table(group: Group, text: str) -> AlgebraElement:
    coeffs: Dict[Element, complex] = {}
    dropped = 0.0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts[:1] == ["dropped_l1"]:
                dropped = float(parts[1])
            continue
        try:
            word, re_part, im_part = line.rsplit(None, 2)
            el = group.parse(word)
            c = complex(float(re_part), float(im_part))
        except (ValueError, UsageError) as exc:
            raise UsageError(f"bad algebra table line {lineno}: {raw!r} ({exc})")
        coeffs[el] = coeffs.get(el, 0) + c
    out = AlgebraElement(group, coeffs, dropped)
    return out
