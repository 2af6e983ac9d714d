"""Sparse probability-measure algebra with a certified truncation ledger.

A SparseMeasure stores finitely many strictly positive atom weights plus
`dropped_mass`, the total mass removed by truncation anywhere in the
value's history.  Every operation propagates the ledger so that reported
total-variation numbers come with honest two-sided error bars.
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

from .errors import ResourceError, UsageError
from .groups import Element, Group


@dataclass(frozen=True)
class TruncationPolicy:
    """Per-step weight floor and a hard cap on the support size."""

    floor: float = 1e-15
    support_cap: int = 5_000_000

    def __post_init__(self):
        if self.floor < 0:
            raise UsageError(f"floor must be >= 0, got {self.floor}")
        if self.support_cap < 1:
            raise UsageError(f"support cap must be >= 1, got {self.support_cap}")


DEFAULT_POLICY = TruncationPolicy()
EXACT_POLICY = TruncationPolicy(floor=0.0)


class SparseMeasure:
    """Finitely supported nonnegative measure with a dropped-mass ledger."""

    __slots__ = ("group", "weights", "dropped_mass", "_total")

    def __init__(self, group: Group, weights: Dict[Element, float], dropped_mass: float = 0.0):
        clean: Dict[Element, float] = {}
        for el, w in weights.items():
            if w < 0:
                raise UsageError(f"negative weight {w} at {el}")
            if w > 0:
                clean[el] = w
        if dropped_mass < 0:
            raise UsageError(f"negative dropped mass {dropped_mass}")
        self.group = group
        self.weights = clean
        self.dropped_mass = dropped_mass
        self._total = math.fsum(clean.values())

    @property
    def total(self) -> float:
        return self._total

    def mass_of(self, el: Element) -> float:
        return self.weights.get(el, 0.0)

    def support(self) -> List[Element]:
        return sorted(self.weights, key=lambda el: el.sort_key())

    def items_sorted(self) -> List[Tuple[Element, float]]:
        return sorted(self.weights.items(), key=lambda kv: kv[0].sort_key())

    def is_probability(self, tol: float = 1e-9) -> bool:
        return abs(self.total + self.dropped_mass - 1.0) <= tol

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        for el, w in self.weights.items():
            if abs(self.weights.get(el.inverse(), 0.0) - w) > tol:
                return False
        return True

    def __len__(self):
        return len(self.weights)

    def __repr__(self):
        atoms = ", ".join(f"{el}:{w:.4g}" for el, w in self.items_sorted()[:6])
        more = "..." if len(self.weights) > 6 else ""
        return f"SparseMeasure({atoms}{more}; dropped={self.dropped_mass:.3g})"


def dirac(g: Element) -> SparseMeasure:
    return SparseMeasure(g.group, {g: 1.0})


def uniform_on(F: Iterable[Element]) -> SparseMeasure:
    F = list(F)
    if not F:
        raise UsageError("uniform measure needs a nonempty set")
    group = F[0].group
    w = 1.0 / len(F)
    weights: Dict[Element, float] = {}
    for el in F:
        if el.group is not group:
            raise UsageError("uniform set mixes groups")
        if el in weights:
            raise UsageError(f"repeated element {el} in uniform set")
        weights[el] = w
    return SparseMeasure(group, weights)


def measure_from_atoms(
    group: Group, atoms: Iterable[Tuple[Element, float]], dropped_mass: float = 0.0
) -> SparseMeasure:
    weights: Dict[Element, float] = {}
    for el, w in atoms:
        weights[el] = weights.get(el, 0.0) + w
    return SparseMeasure(group, weights, dropped_mass)


def _require_same_group(mu: SparseMeasure, nu: SparseMeasure) -> Group:
    if mu.group is not nu.group:
        raise UsageError(
            f"measures live on different groups: {mu.group.name} vs {nu.group.name}"
        )
    return mu.group


def _apply_floor(weights: Dict, floor: float) -> float:
    if floor <= 0:
        return 0.0
    doomed = [k for k, w in weights.items() if w < floor]
    pruned = 0.0
    for k in doomed:
        pruned += weights.pop(k)
    return pruned


def convolve(
    mu: SparseMeasure, nu: SparseMeasure, policy: TruncationPolicy = DEFAULT_POLICY
) -> SparseMeasure:
    """(mu * nu)(g) = sum_h mu(h) nu(h^-1 g), with floor truncation ledgered.

    Accumulation runs in sorted atom order, so results are bitwise
    deterministic.
    """
    group = _require_same_group(mu, nu)
    mul = group.mul_key
    acc: Dict = {}
    nu_items = [(el.key, w) for el, w in nu.items_sorted()]
    for el_mu, w_mu in mu.items_sorted():
        key_mu = el_mu.key
        for key_nu, w_nu in nu_items:
            prod = mul(key_mu, key_nu)
            acc[prod] = acc.get(prod, 0.0) + w_mu * w_nu
        if len(acc) > policy.support_cap:
            raise ResourceError(
                f"convolution support exceeded cap: {len(acc)} atoms "
                f"(cap {policy.support_cap})"
            )
    _apply_floor(acc, policy.floor)
    weights = {Element(group, k): w for k, w in acc.items()}
    stored = math.fsum(weights.values())
    # Ledger by exact complement: whatever mass the full product would carry
    # (inputs' stored + dropped) and the stored result does not.
    target_total = (mu.total + mu.dropped_mass) * (nu.total + nu.dropped_mass)
    dropped = max(0.0, target_total - stored)
    return SparseMeasure(group, weights, dropped)


def convolution_power(
    nu: SparseMeasure, n: int, policy: TruncationPolicy = DEFAULT_POLICY
) -> SparseMeasure:
    """n-fold convolution power; n = 0 gives the point mass at the identity.

    Uses square-and-multiply when that keeps intermediate supports smaller,
    with a fixed deterministic evaluation order.
    """
    if n < 0:
        raise UsageError(f"convolution power needs n >= 0, got {n}")
    group = nu.group
    result = dirac(group.identity())
    base = nu
    remaining = n
    while remaining > 0:
        if remaining & 1:
            result = convolve(result, base, policy)
        remaining >>= 1
        if remaining:
            base = convolve(base, base, policy)
    return result


def translate_left(s: Element, mu: SparseMeasure) -> SparseMeasure:
    """Pushforward under g -> s g; preserves total mass and the ledger."""
    if s.group is not mu.group:
        raise UsageError("translation element from a different group")
    group = mu.group
    weights = {Element(group, group.mul_key(s.key, el.key)): w for el, w in mu.weights.items()}
    return SparseMeasure(group, weights, mu.dropped_mass)


def invert(mu: SparseMeasure) -> SparseMeasure:
    """Pushforward under g -> g^-1."""
    weights = {el.inverse(): w for el, w in mu.weights.items()}
    return SparseMeasure(mu.group, weights, mu.dropped_mass)


def conjugate_measure(mu: SparseMeasure, q: Element) -> SparseMeasure:
    """Pushforward under g -> q^-1 g q."""
    if q.group is not mu.group:
        raise UsageError("conjugator from a different group")
    group = mu.group
    qi = q.inverse()
    weights = {
        Element(group, group.mul_key(group.mul_key(qi.key, el.key), q.key)): w
        for el, w in mu.weights.items()
    }
    return SparseMeasure(group, weights, mu.dropped_mass)


@dataclass(frozen=True)
class TVResult:
    """A total-variation value with a certified two-sided error bar."""

    value: float
    error: float

    @property
    def lower(self) -> float:
        return max(0.0, self.value - self.error)

    @property
    def upper(self) -> float:
        return min(2.0, self.value + self.error)

    def certified_below(self, threshold: float) -> bool:
        return self.upper < threshold

    def certified_above(self, threshold: float) -> bool:
        return self.lower > threshold


def tv_distance(mu: SparseMeasure, nu: SparseMeasure) -> TVResult:
    """sum_g |mu(g) - nu(g)| over the union of supports, in [0, 2].

    The true distance between the untruncated measures lies within
    `error = mu.dropped_mass + nu.dropped_mass` of the reported value.
    """
    _require_same_group(mu, nu)
    terms = []
    for el, w in mu.weights.items():
        terms.append(abs(w - nu.weights.get(el, 0.0)))
    for el, w in nu.weights.items():
        if el not in mu.weights:
            terms.append(w)
    return TVResult(math.fsum(terms), mu.dropped_mass + nu.dropped_mass)


def convex_combine(
    weights: Sequence[float], measures: Sequence[SparseMeasure]
) -> SparseMeasure:
    """Pointwise weighted sum; weights must be nonnegative and sum to 1."""
    if len(weights) != len(measures):
        raise UsageError("weights and measures must have matching lengths")
    if not measures:
        raise UsageError("convex combination of nothing")
    if any(w < 0 for w in weights):
        raise UsageError("convex weights must be nonnegative")
    if abs(math.fsum(weights) - 1.0) > 1e-12:
        raise UsageError(f"convex weights sum to {math.fsum(weights)!r}, not 1")
    group = measures[0].group
    acc: Dict[Element, float] = {}
    dropped = 0.0
    for w, m in zip(weights, measures):
        if m.group is not group:
            raise UsageError("convex combination mixes groups")
        if w == 0.0:
            continue
        dropped += w * m.dropped_mass
        for el, wt in m.items_sorted():
            acc[el] = acc.get(el, 0.0) + w * wt
    return SparseMeasure(group, acc, dropped)


class MeasureSampler:
    """Deterministic inverse-CDF sampler over a measure's sorted atoms."""

    def __init__(self, mu: SparseMeasure, seed: int):
        if not mu.is_probability() or mu.dropped_mass >= 1e-9:
            raise UsageError(
                "sampling requires a probability measure with dropped mass < 1e-9"
            )
        items = mu.items_sorted()
        self.elements = [el for el, _ in items]
        self.cumulative = []
        acc = 0.0
        for _, w in items:
            acc += w
            self.cumulative.append(acc)
        self.rng = random.Random(seed)

    def draw(self) -> Element:
        r = self.rng.random() * self.cumulative[-1]
        idx = bisect.bisect_right(self.cumulative, r)
        if idx == len(self.elements):
            idx -= 1
        return self.elements[idx]


def sample(mu: SparseMeasure, rng_seed: int) -> Element:
    """One draw from mu; deterministic given the seed."""
    return MeasureSampler(mu, rng_seed).draw()


# ---------------------------------------------------------------------------
# Text serialization: one atom per line, "element-word weight".


def measure_to_table(mu: SparseMeasure) -> str:
    lines = []
    if mu.dropped_mass > 0:
        lines.append(f"# dropped_mass {mu.dropped_mass:.17g}")
    for el, w in mu.items_sorted():
        lines.append(f"{el} {w:.17g}")
    return "\n".join(lines) + "\n"


def measure_from_table(group: Group, text: str) -> SparseMeasure:
    weights: Dict[Element, float] = {}
    dropped = 0.0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts[:1] == ["dropped_mass"]:
                dropped = float(parts[1])
            continue
        try:
            word, weight = line.rsplit(None, 1)
            el = group.parse(word)
            w = float(weight)
        except (ValueError, UsageError) as exc:
            raise UsageError(f"bad measure table line {lineno}: {raw!r} ({exc})")
        weights[el] = weights.get(el, 0.0) + w
    return SparseMeasure(group, weights, dropped)
