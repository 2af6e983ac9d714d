"""Constructive pipelines: probability vectors with power-law tails, the
finitary decomposition of a base measure, the visible-set non-free measure
construction, and the Hartman-Kalantar measure built by Powers-style
conjugation averaging.

Infinite constructions are realized to a finite depth; whatever vector
mass lies beyond the realized depth lands in the output measure's
dropped-mass ledger, never silently renormalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .algebra import (
    AlgebraElement,
    NormBudget,
    algebra_unit,
    averaged_conjugation,
    conjugate_action,
    estimate_norm,
    l2_norm,
    scale,
    trace,
)
from .errors import ResourceError, UsageError
from .groups import (
    AmenableWitness,
    Element,
    FreeGroup,
    Group,
    conjugate_element,
    enumerate_elements,
    folner_invariance_check,
    folner_set,
    word_ball,
)
from .measures import (
    EXACT_POLICY,
    SparseMeasure,
    TruncationPolicy,
    convex_combine,
    convolve,
    dirac,
    invert,
    measure_from_atoms,
    uniform_on,
)


# ---------------------------------------------------------------------------
# Probability vectors


@dataclass(frozen=True)
class ProbabilityVector:
    """A finite realization of the stage-weight sequence: explicit entries
    that sum to 1, with the power-law exponent recorded when the entries
    carry a heavy tail."""

    entries: Tuple[float, ...]
    alpha: Optional[float] = None

    def __post_init__(self):
        if not self.entries:
            raise UsageError("probability vector needs at least one entry")
        if any(e < 0 for e in self.entries):
            raise UsageError("probability vector entries must be nonnegative")
        total = math.fsum(self.entries)
        if abs(total - 1.0) > 1e-12:
            raise UsageError(f"probability vector sums to {total!r}, not 1")

    def __len__(self):
        return len(self.entries)

    def entry(self, i: int) -> float:
        return self.entries[i] if 0 <= i < len(self.entries) else 0.0

    def tail_mass(self, start: int) -> float:
        return math.fsum(self.entries[start:]) if start < len(self.entries) else 0.0


def power_law_vector(
    alpha: float, head: Sequence[float], tail_mass: float, tail_len: int
) -> ProbabilityVector:
    """Entries = head ++ (tail_mass * j^-alpha / H)_{j=1..tail_len} with H the
    normalizing partial sum, so the whole vector sums to 1."""
    head = list(head)
    if any(h < 0 for h in head):
        raise UsageError("head weights must be nonnegative")
    if tail_mass < 0 or tail_len < 0:
        raise UsageError("tail mass and length must be nonnegative")
    if abs(math.fsum(head) + tail_mass - 1.0) > 1e-12:
        raise UsageError("head weights plus tail mass must sum to 1")
    if tail_mass > 0 and tail_len > 0:
        if not 1.0 < alpha < 2.0:
            raise UsageError(f"power-law exponent must lie in (1, 2), got {alpha}")
        norm = math.fsum(j ** -alpha for j in range(1, tail_len + 1))
        tail = [tail_mass * j ** -alpha / norm for j in range(1, tail_len + 1)]
    else:
        tail = []
    return ProbabilityVector(tuple(head) + tuple(tail), alpha if tail else None)


# ---------------------------------------------------------------------------
# Finitary decomposition


def finitary_decompose(
    nu_prime: SparseMeasure, weights: Sequence[float]
) -> List[SparseMeasure]:
    """Finitely supported probability measures nu_i with
    sum_i weights[i] * nu_i = nu_prime (weights must be positive and sum
    to 1).  Water-filling over the sorted atom list, so each piece has
    contiguous support."""
    weights = list(weights)
    if not weights or any(w <= 0 for w in weights):
        raise UsageError("finitary decomposition needs strictly positive weights")
    if abs(math.fsum(weights) - 1.0) > 1e-12:
        raise UsageError("decomposition weights must sum to 1")
    if not nu_prime.is_probability(tol=1e-12) or nu_prime.dropped_mass > 1e-12:
        raise UsageError("finitary decomposition needs an exact probability measure")
    atoms = nu_prime.items_sorted()
    pieces: List[SparseMeasure] = []
    atom_idx = 0
    atom_left = atoms[0][1] if atoms else 0.0
    for w in weights:
        need = w
        piece: Dict[Element, float] = {}
        while need > 1e-18 and atom_idx < len(atoms):
            el = atoms[atom_idx][0]
            take = min(need, atom_left)
            piece[el] = piece.get(el, 0.0) + take
            need -= take
            atom_left -= take
            if atom_left <= 1e-18:
                atom_idx += 1
                atom_left = atoms[atom_idx][1] if atom_idx < len(atoms) else 0.0
        total = math.fsum(piece.values())
        if total <= 0:
            # numerical crumbs at the very end: reuse the last atom
            piece = {atoms[-1][0]: 1.0}
            total = 1.0
        pieces.append(
            SparseMeasure(nu_prime.group, {el: v / total for el, v in piece.items()})
        )
    return pieces


# ---------------------------------------------------------------------------
# Conjugated intersection and visibility certificates


@dataclass
class ConjugationCertificate:
    """The set {s^q} meeting the witness subgroup, plus a per-conjugator
    record of whether some s lands inside it."""

    landed: List[Element]
    per_conjugator: List[Tuple[Element, bool]]

    @property
    def all_visible(self) -> bool:
        return all(ok for _, ok in self.per_conjugator)

    def violations(self) -> List[Element]:
        return [q for q, ok in self.per_conjugator if not ok]


def conjugated_intersection(
    S: Sequence[Element], Q: Sequence[Element], witness: AmenableWitness
) -> ConjugationCertificate:
    landed: Dict[Element, None] = {}
    per_q = []
    for q in Q:
        hit = False
        for s in S:
            c = conjugate_element(s, q)
            if witness.contains(c):
                landed[c] = None
                hit = True
        per_q.append((q, hit))
    out = sorted(landed, key=lambda el: el.sort_key())
    return ConjugationCertificate(out, per_q)


# ---------------------------------------------------------------------------
# Non-free measure construction


@dataclass
class NonFreeRecipe:
    group: Group
    visible_set: List[Element]
    witness: AmenableWitness
    vector: ProbabilityVector
    base_measure: SparseMeasure
    theta: float
    depth: int
    conj_ball_radius: Optional[Callable[[int], int]] = None
    visibility_radius: int = 4
    ball_cap: int = 200_000

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise UsageError(f"theta must lie in the open interval (0,1), got {self.theta}")
        if not self.visible_set:
            raise UsageError("visible set must be nonempty")
        if self.depth < 1:
            raise UsageError("construction depth must be >= 1")
        if self.vector.entry(0) != 0.0:
            raise UsageError(
                "non-free construction uses stage weights from index 1; entry 0 must be 0"
            )
        if len(self.vector) < self.depth + 1:
            raise UsageError(
                f"vector realizes {len(self.vector) - 1} stages, need depth {self.depth}"
            )
        if not self.base_measure.is_probability(tol=1e-12):
            raise UsageError("base measure must be a probability measure")


@dataclass
class NonFreeStage:
    index: int
    center: Element
    conjugator_ball_size: int
    landed_set: List[Element]
    folner_set: List[Element]
    defect: float
    eps: float
    weight: float

    def to_report(self) -> dict:
        return {
            "stage": self.index,
            "center": str(self.center),
            "conjugator_ball_size": self.conjugator_ball_size,
            "landed_set": [str(el) for el in self.landed_set],
            "folner_size": len(self.folner_set),
            "defect": self.defect,
            "eps": self.eps,
            "weight": self.weight,
        }


@dataclass
class NonFreeBuildResult:
    measure: SparseMeasure
    stages: List[NonFreeStage]
    recipe: NonFreeRecipe
    base_pieces: List[SparseMeasure]

    def to_report(self) -> dict:
        return {
            "group": self.recipe.group.to_config(),
            "theta": self.recipe.theta,
            "depth": self.recipe.depth,
            "visible_set": [str(s) for s in self.recipe.visible_set],
            "support_size": len(self.measure),
            "dropped_mass": self.measure.dropped_mass,
            "stages": [st.to_report() for st in self.stages],
        }


def build_nonfree_measure(recipe: NonFreeRecipe) -> NonFreeBuildResult:
    """Realize the visible-set construction to finite depth.

    Stage i draws the enumeration element c_i and a symmetric Folner set
    F_i of the witness subgroup that is (1/i)-invariant under the
    conjugates of the visible set landing in the subgroup; the output is
    theta * nu'' + (1-theta) * nu' with nu'' the stage mixture
    sum_i (w_i/3)(delta_{c_i} + delta_{c_i^-1} + uniform(F_i)).
    """
    group = recipe.group
    S = list(recipe.visible_set)
    witness = recipe.witness

    ball = word_ball(
        group.generators(), recipe.visibility_radius, group=group, cap=recipe.ball_cap
    )
    precheck = conjugated_intersection(S, ball, witness)
    if not precheck.all_visible:
        bad = precheck.violations()[0]
        raise UsageError(
            f"visible set is not witnessed on the radius-{recipe.visibility_radius} "
            f"ball: no conjugate lands in {witness.name} for q = {bad}"
        )

    stage_weights = list(recipe.vector.entries[1:])
    pieces = finitary_decompose(
        recipe.base_measure, [w / math.fsum(stage_weights) for w in stage_weights]
    ) if len(stage_weights) > 0 else []
    # stage weights already sum to 1 (entry 0 is zero), so the rescale above
    # is a numerical no-op guarding against fp drift in the vector
    centers = enumerate_elements(group, recipe.depth)

    radius_of = recipe.conj_ball_radius or (lambda i: i)
    A: List[Element] = []
    stages: List[NonFreeStage] = []
    atoms: List[Tuple[Element, float]] = []
    for i in range(1, recipe.depth + 1):
        Q = word_ball(A, radius_of(i), group=group, cap=recipe.ball_cap)
        cert = conjugated_intersection(S, Q, witness)
        if not cert.all_visible:
            bad = cert.violations()[0]
            raise UsageError(
                f"stage {i}: no conjugate of the visible set lands in "
                f"{witness.name} for q = {bad}"
            )
        eps = 1.0 / i
        F = folner_set(witness, cert.landed, eps)
        defect = folner_invariance_check(F, cert.landed, eps).defect
        c = centers[i - 1]
        w = recipe.vector.entry(i)
        stages.append(
            NonFreeStage(i, c, len(Q), cert.landed, F, defect, eps, w)
        )
        third = w / 3.0
        atoms.append((c, third))
        atoms.append((c.inverse(), third))
        for el in F:
            atoms.append((el, third / len(F)))
        piece = pieces[i - 1]
        seen = {el.key for el in A}
        for extra in [c, c.inverse()] + piece.support():
            for cand in (extra, extra.inverse()):
                if cand.key not in seen:
                    seen.add(cand.key)
                    A.append(cand)

    residual = recipe.vector.tail_mass(recipe.depth + 1)
    nu_second = measure_from_atoms(group, atoms, dropped_mass=residual)
    nu = convex_combine(
        [recipe.theta, 1.0 - recipe.theta], [nu_second, recipe.base_measure]
    )
    return NonFreeBuildResult(nu, stages, recipe, pieces)


# ---------------------------------------------------------------------------
# Dense sequences in the trace kernel


def default_dense_kernel_sequence(group: Group, count: int) -> List[AlgebraElement]:
    """The shipped initial segment of a dense family in the unit ball of the
    trace kernel: singleton unitaries over the enumeration (one per
    inverse pair), interleaved with normalized differences of earlier
    singletons."""
    if count < 1:
        raise UsageError("dense sequence needs count >= 1")
    used = set()
    singles: List[AlgebraElement] = []
    out: List[AlgebraElement] = []
    for el in enumerate_elements(group, 4 * count + 8)[1:]:
        if el in used or el.inverse() in used:
            continue
        used.add(el)
        d = algebra_unit(el)
        singles.append(d)
        out.append(d)
        for earlier in singles[:-1]:
            if len(out) >= count:
                break
            out.append(scale(0.5, earlier - d))
        if len(out) >= count:
            return out[:count]
    raise ResourceError(f"dense sequence enumeration exhausted before {count} items")


# ---------------------------------------------------------------------------
# Powers-style conjugation averaging


@dataclass(frozen=True)
class PowersOptions:
    m_start: int = 4
    m_budget: int = 4096
    support_cap: int = 2_000_000
    candidate_depth: int = 2
    norm_budget: NormBudget = field(
        default_factory=lambda: NormBudget(moment_depth=24, support_cap=60_000)
    )


@dataclass
class TargetCertificate:
    index: int
    description: str
    bound: float
    method: str

    def to_report(self) -> dict:
        return {
            "target": self.index,
            "description": self.description,
            "bound": self.bound,
            "method": self.method,
        }


@dataclass
class PowersSearchResult:
    measure: SparseMeasure
    stages: List[SparseMeasure]
    certificates: List[TargetCertificate]
    eps: float

    @property
    def achieved(self) -> float:
        return max((c.bound for c in self.certificates), default=0.0)

    @property
    def certified(self) -> bool:
        return all(c.bound < self.eps for c in self.certificates)


def _conjugator_candidates(group: FreeGroup, depth: int) -> List[Element]:
    """Primitive conjugator bases to try, shortest first."""
    out = [group.gen(i) for i in range(group.rank)]
    if depth >= 2:
        for i in range(group.rank):
            for j in range(group.rank):
                for sj in (1, -1):
                    w = (i + 1, sj * (j + 1))
                    if w[0] != -w[1] and abs(w[0]) != abs(w[1]):
                        out.append(group.element(w))
    return out


def _certified_upper(x: AlgebraElement, budget: NormBudget) -> Tuple[float, str]:
    est = estimate_norm(x, budget)
    best_method = min(
        (v, k) for k, v in est.methods.items() if k in ("l1", "free-support", "l1-powers", "propagated")
    )
    return est.upper, best_method[1]


def powers_search(
    group: FreeGroup,
    targets: Sequence[AlgebraElement],
    eps: float,
    options: PowersOptions = PowersOptions(),
) -> PowersSearchResult:
    """A finitely supported symmetric probability measure whose conjugation
    average certifiably shrinks every target below eps.

    Targets are killed one at a time: a target still above eps gets a new
    conjugator stage, a uniform measure on powers of a primitive element
    whose conjugates of the target's support form a verified free family
    (so the averaged element obeys the 2*l2 free-support bound).  Earlier
    targets only improve, by norm-1 contraction of averaging.  The final
    measure is the stage convolution times its reflection, evaluated
    inside-out to keep intermediate supports small.
    """
    if not isinstance(group, FreeGroup):
        raise UsageError("conjugation-averaging search requires a free group")
    if eps <= 0:
        raise UsageError("eps must be positive")
    for t in targets:
        if t.group is not group:
            raise UsageError("target on a different group")
        if abs(complex(trace(t))) > 1e-12:
            raise UsageError(f"target has nonzero trace: {trace(t)!r}")

    kappas: List[SparseMeasure] = []
    certificates: List[TargetCertificate] = []
    policy = TruncationPolicy(floor=0.0, support_cap=options.support_cap)

    for idx, target in enumerate(targets):
        y = target
        for kappa in kappas:
            y = averaged_conjugation(y, kappa)
        bound, method = _certified_upper(y, options.norm_budget)
        if bound < eps:
            certificates.append(
                TargetCertificate(idx, _describe(target), bound, method)
            )
            continue
        killed = False
        best = bound
        for h in _conjugator_candidates(group, options.candidate_depth):
            m = max(options.m_start, int(math.ceil((2.0 * l2_norm(y) / eps) ** 2)))
            while m <= options.m_budget:
                kappa = uniform_on([group.element(h.key * k) for k in range(1, m + 1)])
                z = averaged_conjugation(y, kappa)
                bound, method = _certified_upper(z, options.norm_budget)
                if bound < eps:
                    kappas.append(kappa)
                    certificates.append(
                        TargetCertificate(idx, _describe(target), bound, method)
                    )
                    killed = True
                    break
                best = min(best, bound)
                m *= 2
            if killed:
                break
        if not killed:
            raise ResourceError(
                f"conjugation averaging could not certify target {idx} below "
                f"{eps} within budget (best {best:.6g})",
                partial=best,
            )

    measure = dirac(group.identity())
    for kappa in reversed(kappas):
        measure = convolve(kappa, convolve(measure, invert(kappa), policy), policy)
    return PowersSearchResult(measure, kappas, certificates, eps)


def _describe(x: AlgebraElement) -> str:
    items = x.items_sorted()
    head = ", ".join(f"{el}:{complex(c).real:.3g}" for el, c in items[:3])
    return head + ("..." if len(items) > 3 else "")


# ---------------------------------------------------------------------------
# Hartman-Kalantar measure construction


@dataclass
class HKRecipe:
    group: FreeGroup
    base_measure: SparseMeasure
    delta: float
    vector: ProbabilityVector
    depth: int
    stage_eps: float = 0.25
    coverage_slack: int = 3
    anchor_weight: float = 1e-3
    ball_cap: int = 100_000
    dense_count: Optional[int] = None
    powers_options: PowersOptions = field(default_factory=PowersOptions)

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise UsageError(f"delta must lie in (0,1), got {self.delta}")
        if self.depth < 1:
            raise UsageError("depth must be >= 1")
        if abs(self.vector.entry(0) - (1.0 - self.delta)) > 1e-12:
            raise UsageError("vector entry 0 must equal 1 - delta")
        if len(self.vector) < self.depth + 1:
            raise UsageError(
                f"vector realizes {len(self.vector) - 1} stages, need {self.depth}"
            )
        if not self.base_measure.is_probability(tol=1e-12):
            raise UsageError("base measure must be a probability measure")
        if not isinstance(self.group, FreeGroup):
            raise UsageError("the HK construction ships for free groups")


@dataclass
class HKStage:
    index: int
    weight: float
    measure: SparseMeasure
    covered: List[Element]
    kill_through: int  # targets d_j with j < kill_through are certified
    stage_bound: Optional[float]
    certificates: List[TargetCertificate]
    anchored: bool

    def to_report(self) -> dict:
        return {
            "stage": self.index,
            "weight": self.weight,
            "support_size": len(self.measure),
            "covered_size": len(self.covered),
            "kill_through": self.kill_through,
            "stage_bound": self.stage_bound,
            "anchored": self.anchored,
            "targets": [c.to_report() for c in self.certificates],
        }


@dataclass
class HKBuildResult:
    measure: SparseMeasure
    stages: List[HKStage]
    dense_elements: List[AlgebraElement]
    recipe: HKRecipe

    def to_report(self) -> dict:
        return {
            "group": self.recipe.group.to_config(),
            "delta": self.recipe.delta,
            "depth": self.recipe.depth,
            "support_size": len(self.measure),
            "dropped_mass": self.measure.dropped_mass,
            "stages": [st.to_report() for st in self.stages],
        }


def build_hk_measure(recipe: HKRecipe) -> HKBuildResult:
    """Iterative conjugation-averaging construction.

    Stage i builds a symmetric measure certifiably shrinking the dense
    elements d_j (j < i) conjugated over a ball of already-used atoms,
    anchors mass on the i-th enumeration element, and contributes weight
    vector[i] to the final mixture.  The stage records carry everything
    the norm-decay checker needs to certify decay of the mixture without
    re-expanding its convolution powers.
    """
    group = recipe.group
    dense_count = recipe.dense_count if recipe.dense_count is not None else recipe.depth
    dense = default_dense_kernel_sequence(group, max(1, dense_count))
    centers = enumerate_elements(group, recipe.depth)

    stages: List[HKStage] = [
        HKStage(0, recipe.vector.entry(0), recipe.base_measure, [], 0, None, [], False)
    ]
    A: List[Element] = recipe.base_measure.support()
    for i in range(1, recipe.depth + 1):
        covered = word_ball(
            A, i + recipe.coverage_slack, group=group, cap=recipe.ball_cap
        )
        kill_through = min(i, len(dense))
        targets: List[AlgebraElement] = []
        seen_signatures = set()
        for j in range(kill_through):
            for g in covered:
                t = conjugate_action(dense[j], g)
                sig = tuple(sorted((el.key, complex(c)) for el, c in t.coeffs.items()))
                if sig not in seen_signatures:
                    seen_signatures.add(sig)
                    targets.append(t)
        eps_stage = recipe.stage_eps - 2.0 * recipe.anchor_weight
        search = powers_search(group, targets, eps_stage, recipe.powers_options)
        mu = search.measure
        c = centers[i - 1]
        anchored = False
        if (
            mu.mass_of(c) < recipe.anchor_weight
            or mu.mass_of(c.inverse()) < recipe.anchor_weight
        ):
            anchor = (
                dirac(c)
                if c.is_identity()
                else convex_combine([0.5, 0.5], [dirac(c), dirac(c.inverse())])
            )
            w = 2.0 * recipe.anchor_weight
            mu = convex_combine([1.0 - w, w], [mu, anchor])
            anchored = True
        raw_bound = max((cert.bound for cert in search.certificates), default=0.0)
        stage_bound = (
            (1.0 - 2.0 * recipe.anchor_weight) * raw_bound + 2.0 * recipe.anchor_weight
            if anchored
            else raw_bound
        ) if targets else None
        stages.append(
            HKStage(
                i,
                recipe.vector.entry(i),
                mu,
                covered,
                kill_through,
                stage_bound,
                search.certificates,
                anchored,
            )
        )
        seen = {el.key for el in A}
        for el in mu.support():
            if el.key not in seen:
                seen.add(el.key)
                A.append(el)

    residual = recipe.vector.tail_mass(recipe.depth + 1)
    mix_weights = [st.weight for st in stages]
    mix_weights_total = math.fsum(mix_weights) + residual
    if abs(mix_weights_total - 1.0) > 1e-9:
        raise UsageError("stage weights plus residual do not form a probability")
    acc: Dict[Element, float] = {}
    dropped = residual
    for st in stages:
        if st.weight == 0.0:
            continue
        dropped += st.weight * st.measure.dropped_mass
        for el, w in st.measure.items_sorted():
            acc[el] = acc.get(el, 0.0) + st.weight * w
    nu = SparseMeasure(group, acc, dropped_mass=dropped)
    return HKBuildResult(nu, stages, dense, recipe)
