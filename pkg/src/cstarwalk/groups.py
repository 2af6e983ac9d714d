"""Canonical-form arithmetic and amenability infrastructure for a fixed
catalog of countable groups.

Catalog: Z, Z^2, Z/m, free groups F_k, F_k x Z/m, and the lamplighter
(Z/2 wr Z).  Elements are immutable wrappers around a per-group canonical
key; two elements are equal iff their groups and keys agree.  All
operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

from .errors import ResourceError, UsageError

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


class Element:
    """A group element in canonical form. Hashable, immutable."""

    __slots__ = ("group", "key", "_hash")

    def __init__(self, group: "Group", key):
        self.group = group
        self.key = key
        self._hash = hash(key)

    def __eq__(self, other):
        if not isinstance(other, Element):
            return NotImplemented
        return self.group is other.group and self.key == other.key

    def __hash__(self):
        return self._hash

    def __mul__(self, other: "Element") -> "Element":
        return multiply(self, other)

    def inverse(self) -> "Element":
        return Element(self.group, self.group.inv_key(self.key))

    def conjugate_by(self, q: "Element") -> "Element":
        return conjugate_element(self, q)

    def is_identity(self) -> bool:
        return self.key == self.group.identity_key()

    def sort_key(self):
        return self.group.sort_key(self.key)

    def __repr__(self):
        return f"<{self.group.name}:{self.group.format_key(self.key)}>"

    def __str__(self):
        return self.group.format_key(self.key)


class Group:
    """Base class: key-level arithmetic plus formatting and a generator list."""

    name: str = "group"

    def identity_key(self):
        raise NotImplementedError

    def mul_key(self, a, b):
        raise NotImplementedError

    def inv_key(self, a):
        raise NotImplementedError

    def generator_keys(self) -> Sequence:
        """Ordered, finite, symmetric generating set."""
        raise NotImplementedError

    def sort_key(self, a):
        raise NotImplementedError

    def format_key(self, a) -> str:
        raise NotImplementedError

    def parse_key(self, text: str):
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError

    # Element-level conveniences -------------------------------------

    def identity(self) -> Element:
        return Element(self, self.identity_key())

    def element(self, key) -> Element:
        return Element(self, key)

    def generators(self) -> List[Element]:
        return [Element(self, k) for k in self.generator_keys()]

    def parse(self, text: str) -> Element:
        return Element(self, self.parse_key(text))

    def __repr__(self):
        return f"<Group {self.name}>"


class IntLattice(Group):
    """Z (dim=1, keys are ints) or Z^2 (dim=2, keys are int pairs)."""

    def __init__(self, dim: int = 1):
        if dim not in (1, 2):
            raise UsageError(f"int lattice dimension must be 1 or 2, got {dim}")
        self.dim = dim
        self.name = "Z" if dim == 1 else "Z^2"

    def identity_key(self):
        return 0 if self.dim == 1 else (0, 0)

    def mul_key(self, a, b):
        if self.dim == 1:
            return a + b
        return (a[0] + b[0], a[1] + b[1])

    def inv_key(self, a):
        if self.dim == 1:
            return -a
        return (-a[0], -a[1])

    def generator_keys(self):
        if self.dim == 1:
            return [1, -1]
        return [(1, 0), (-1, 0), (0, 1), (0, -1)]

    def sort_key(self, a):
        return a if self.dim == 2 else (a,)

    def format_key(self, a):
        if self.dim == 1:
            return str(a)
        return f"{a[0]},{a[1]}"

    def parse_key(self, text):
        parts = text.strip().split(",")
        if self.dim == 1:
            if len(parts) != 1:
                raise UsageError(f"expected a single integer, got {text!r}")
            return int(parts[0])
        if len(parts) != 2:
            raise UsageError(f"expected 'x,y', got {text!r}")
        return (int(parts[0]), int(parts[1]))

    def to_config(self):
        return {"kind": "int_lattice", "dim": self.dim}


class CyclicGroup(Group):
    """Z/m with additive keys 0..m-1."""

    def __init__(self, modulus: int):
        if modulus < 2:
            raise UsageError(f"cyclic modulus must be >= 2, got {modulus}")
        self.modulus = modulus
        self.name = f"Z/{modulus}"

    def identity_key(self):
        return 0

    def mul_key(self, a, b):
        return (a + b) % self.modulus

    def inv_key(self, a):
        return (-a) % self.modulus

    def generator_keys(self):
        gens = [1 % self.modulus, (-1) % self.modulus]
        return gens if gens[0] != gens[1] else gens[:1]

    def sort_key(self, a):
        return (a,)

    def format_key(self, a):
        return str(a)

    def parse_key(self, text):
        return int(text.strip()) % self.modulus

    def elements(self) -> List[Element]:
        return [Element(self, k) for k in range(self.modulus)]

    def to_config(self):
        return {"kind": "cyclic", "modulus": self.modulus}


def reduce_word(letters: Iterable[int]) -> Tuple[int, ...]:
    """Freely reduce a sequence of nonzero signed letters."""
    out: List[int] = []
    for x in letters:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def _mul_words(a: Tuple[int, ...], b: Tuple[int, ...]) -> Tuple[int, ...]:
    i = len(a)
    j = 0
    nb = len(b)
    while i > 0 and j < nb and a[i - 1] == -b[j]:
        i -= 1
        j += 1
    return a[:i] + b[j:]


class FreeGroup(Group):
    """F_k on letters a, b, c, ...; keys are reduced words of signed ints
    (letter i+1 for generator i, negative for its inverse)."""

    def __init__(self, rank: int = 2):
        if not 2 <= rank <= 26:
            raise UsageError(f"free rank must be in [2, 26], got {rank}")
        self.rank = rank
        self.name = f"F{rank}"

    def identity_key(self):
        return ()

    def mul_key(self, a, b):
        return _mul_words(a, b)

    def inv_key(self, a):
        return tuple(-x for x in reversed(a))

    def generator_keys(self):
        keys = []
        for i in range(1, self.rank + 1):
            keys.append((i,))
            keys.append((-i,))
        return keys

    def sort_key(self, a):
        return (len(a), a)

    def format_key(self, a):
        if not a:
            return "e"
        return "".join(
            _LETTERS[x - 1] if x > 0 else _LETTERS[-x - 1].upper() for x in a
        )

    def parse_key(self, text):
        text = text.strip().replace(" ", "")
        if text in ("", "e"):
            return ()
        letters = []
        for ch in text:
            low = ch.lower()
            idx = _LETTERS.find(low)
            if idx < 0 or idx >= self.rank:
                raise UsageError(f"unknown generator letter {ch!r} for {self.name}")
            letters.append(-(idx + 1) if ch.isupper() else idx + 1)
        return reduce_word(letters)

    def gen(self, i: int) -> Element:
        """The i-th positive generator (0-based)."""
        return Element(self, (i + 1,))

    def to_config(self):
        return {"kind": "free", "rank": self.rank}


class FreeTimesCyclic(Group):
    """F_k x Z/m; keys are (reduced word, residue)."""

    def __init__(self, rank: int = 2, modulus: int = 2):
        self.free = FreeGroup(rank)
        self.cyclic = CyclicGroup(modulus)
        self.rank = rank
        self.modulus = modulus
        self.name = f"F{rank}xZ/{modulus}"

    def identity_key(self):
        return ((), 0)

    def mul_key(self, a, b):
        return (_mul_words(a[0], b[0]), (a[1] + b[1]) % self.modulus)

    def inv_key(self, a):
        return (self.free.inv_key(a[0]), (-a[1]) % self.modulus)

    def generator_keys(self):
        keys = [(w, 0) for w in self.free.generator_keys()]
        for t in self.cyclic.generator_keys():
            keys.append(((), t))
        return keys

    def sort_key(self, a):
        return (len(a[0]), a[0], a[1])

    def format_key(self, a):
        return f"{self.free.format_key(a[0])}|{a[1]}"

    def parse_key(self, text):
        parts = text.strip().split("|")
        if len(parts) != 2:
            raise UsageError(f"expected 'word|residue', got {text!r}")
        return (self.free.parse_key(parts[0]), int(parts[1]) % self.modulus)

    def central_element(self, t: int = 1) -> Element:
        return Element(self, ((), t % self.modulus))

    def gen(self, i: int) -> Element:
        return Element(self, ((i + 1,), 0))

    def to_config(self):
        return {"kind": "free_times_cyclic", "rank": self.rank, "modulus": self.modulus}


def _shift_lamps(lamps: Tuple[int, ...], offset: int) -> Tuple[int, ...]:
    return tuple(s + offset for s in lamps)


def _xor_lamps(a: Tuple[int, ...], b: Tuple[int, ...]) -> Tuple[int, ...]:
    return tuple(sorted(set(a) ^ set(b)))


class Lamplighter(Group):
    """Z/2 wr Z; keys are (sorted tuple of lit sites, position)."""

    name = "lamplighter"

    def identity_key(self):
        return ((), 0)

    def mul_key(self, a, b):
        lamps_a, pos_a = a
        lamps_b, pos_b = b
        return (_xor_lamps(lamps_a, _shift_lamps(lamps_b, pos_a)), pos_a + pos_b)

    def inv_key(self, a):
        lamps, pos = a
        return (_shift_lamps(lamps, -pos), -pos)

    def generator_keys(self):
        return [((), 1), ((), -1), ((0,), 0)]

    def sort_key(self, a):
        lamps, pos = a
        return (len(lamps), lamps, pos)

    def format_key(self, a):
        lamps, pos = a
        return "{" + ",".join(str(s) for s in lamps) + "}|" + str(pos)

    def parse_key(self, text):
        text = text.strip()
        if "|" not in text or not text.startswith("{"):
            raise UsageError(f"expected '{{sites}}|pos', got {text!r}")
        lamp_part, pos_part = text.split("|")
        inner = lamp_part.strip()[1:-1].strip()
        lamps = tuple(sorted(int(s) for s in inner.split(",") if s.strip() != ""))
        if len(set(lamps)) != len(lamps):
            raise UsageError(f"repeated lamp site in {text!r}")
        return (lamps, int(pos_part))

    def lamp_flip(self, site: int = 0) -> Element:
        return Element(self, ((site,), 0))

    def shift(self, k: int = 1) -> Element:
        return Element(self, ((), k))

    def to_config(self):
        return {"kind": "lamplighter"}


def group_from_config(cfg: dict) -> Group:
    """Build a catalog group from its config dict (see Group.to_config)."""
    kind = cfg.get("kind")
    if kind == "int_lattice":
        return IntLattice(int(cfg.get("dim", 1)))
    if kind == "cyclic":
        return CyclicGroup(int(cfg["modulus"]))
    if kind == "free":
        return FreeGroup(int(cfg.get("rank", 2)))
    if kind == "free_times_cyclic":
        return FreeTimesCyclic(int(cfg.get("rank", 2)), int(cfg.get("modulus", 2)))
    if kind == "lamplighter":
        return Lamplighter()
    raise UsageError(f"unknown group kind {kind!r}")


# ---------------------------------------------------------------------------
# Element-level operations


def _require_same_group(*elements: Element) -> Group:
    group = elements[0].group
    for el in elements[1:]:
        if el.group is not group:
            raise UsageError(
                f"mixed-group operands: {group.name} vs {el.group.name}"
            )
    return group


def multiply(x: Element, y: Element) -> Element:
    group = _require_same_group(x, y)
    return Element(group, group.mul_key(x.key, y.key))


def conjugate_element(s: Element, q: Element) -> Element:
    """q^{-1} s q."""
    group = _require_same_group(s, q)
    qi = group.inv_key(q.key)
    return Element(group, group.mul_key(group.mul_key(qi, s.key), q.key))


def enumerate_elements(group: Group, n: int) -> List[Element]:
    """First n elements in shortlex-BFS order over the generating set.

    Deterministic and prefix-stable; the identity always comes first.
    """
    if n < 1:
        raise UsageError(f"enumeration count must be >= 1, got {n}")
    gens = group.generator_keys()
    ident = group.identity_key()
    seen = {ident}
    order = [ident]
    frontier = [ident]
    while len(order) < n and frontier:
        next_frontier = []
        for key in frontier:
            for g in gens:
                prod = group.mul_key(key, g)
                if prod not in seen:
                    seen.add(prod)
                    order.append(prod)
                    next_frontier.append(prod)
        frontier = next_frontier
    return [Element(group, k) for k in order[:n]]


def word_ball(
    elements: Iterable[Element],
    m: int,
    group: Optional[Group] = None,
    cap: int = 1_000_000,
) -> List[Element]:
    """All products of fewer than m factors from the given set (including the
    empty product).  Sorted canonical order.

    Raises ResourceError with the partial count if the ball exceeds `cap`.
    """
    elements = list(elements)
    if group is None:
        if not elements:
            raise UsageError("word_ball over an empty set needs an explicit group")
        group = _require_same_group(*elements)
    if m < 1:
        raise UsageError(f"word ball length bound must be >= 1, got {m}")
    seen = {group.identity_key()}
    frontier = [group.identity_key()]
    keys = [el.key for el in elements]
    for _ in range(m - 1):
        next_frontier = []
        for key in frontier:
            for g in keys:
                prod = group.mul_key(key, g)
                if prod not in seen:
                    seen.add(prod)
                    next_frontier.append(prod)
                    if len(seen) > cap:
                        raise ResourceError(
                            f"word ball exceeded cap {cap} (partial size {len(seen)})",
                            partial=len(seen),
                        )
        frontier = next_frontier
        if not frontier:
            break
    out = [Element(group, k) for k in seen]
    out.sort(key=lambda el: el.sort_key())
    return out


@dataclass(frozen=True)
class FolnerCheck:
    ok: bool
    defect: float


def folner_invariance_check(
    F: Iterable[Element], R: Iterable[Element], eps: float
) -> FolnerCheck:
    """Whether |RF \\ F| < eps |F|, together with the defect ratio."""
    F = list(F)
    R = list(R)
    if not F:
        raise UsageError("Folner check needs a nonempty candidate set")
    if eps <= 0:
        raise UsageError(f"eps must be positive, got {eps}")
    if R:
        _require_same_group(*(F + R))
    fset = {el.key for el in F}
    group = F[0].group
    escaped = set()
    for r in R:
        for f in F:
            prod = group.mul_key(r.key, f.key)
            if prod not in fset:
                escaped.add(prod)
    defect = len(escaped) / len(F)
    return FolnerCheck(defect < eps, defect)


# ---------------------------------------------------------------------------
# Amenable witnesses


class AmenableWitness:
    """An amenable subgroup H given by a membership test and a Folner oracle.

    The oracle, given a finite R subset of H and eps > 0, must produce a
    finite symmetric subset F of H containing the identity with
    |RF \\ F| < eps |F|, or raise ResourceError.  `folner_set` below wraps
    the oracle and re-checks all of that; oracles never silently return a
    non-invariant set.
    """

    def __init__(
        self,
        group: Group,
        contains: Callable[[Element], bool],
        oracle: Callable[[List[Element], float], List[Element]],
        finite_listing: Optional[List[Element]] = None,
        name: str = "witness",
    ):
        self.group = group
        self.contains = contains
        self._oracle = oracle
        self.finite_listing = finite_listing
        self.name = name


def folner_set(
    witness: AmenableWitness, R: Iterable[Element], eps: float
) -> List[Element]:
    """A finite symmetric (R, eps)-invariant subset of the witness subgroup.

    R must already lie inside H (intersect before calling).  The returned
    set always passes `folner_invariance_check`; for finite H the whole
    subgroup is returned.
    """
    R = list(R)
    if eps <= 0:
        raise UsageError(f"eps must be positive, got {eps}")
    for r in R:
        if not witness.contains(r):
            raise UsageError(
                f"Folner request element {r} lies outside the witness subgroup "
                f"{witness.name}"
            )
    if witness.finite_listing is not None:
        F = list(witness.finite_listing)
    else:
        F = witness._oracle(R, eps)
    check = folner_invariance_check(F, R, eps) if F else FolnerCheck(False, 1.0)
    if not check.ok:
        raise ResourceError(
            f"witness {witness.name} produced a set failing the (R, {eps}) "
            f"invariance check (defect {check.defect:.6g})",
            partial=F,
        )
    fset = {el.key for el in F}
    group = witness.group
    for el in F:
        if group.inv_key(el.key) not in fset:
            raise ResourceError(f"witness {witness.name} returned a non-symmetric set")
        if not witness.contains(el):
            raise ResourceError(
                f"witness {witness.name} returned an element outside its subgroup"
            )
    if group.identity_key() not in fset:
        raise ResourceError(f"witness {witness.name} returned a set without identity")
    F.sort(key=lambda el: el.sort_key())
    return F


def _grow_until_invariant(candidates, R, eps, budget, name):
    """Try candidate sets in order until one passes the defect check."""
    tried = 0
    for F in candidates:
        tried += 1
        if folner_invariance_check(F, R, eps).ok:
            return F
        if tried >= budget:
            break
    raise ResourceError(
        f"Folner oracle {name} exhausted its budget ({budget} candidates) "
        f"without reaching eps={eps}"
    )


def whole_group_witness(group: Group, budget: int = 4096) -> AmenableWitness:
    """H = G for the amenable catalog members (Z, Z^2, Z/m, lamplighter)."""
    if isinstance(group, CyclicGroup):
        return AmenableWitness(
            group,
            contains=lambda el: True,
            oracle=None,
            finite_listing=group.elements(),
            name=f"whole({group.name})",
        )
    if isinstance(group, IntLattice) and group.dim == 1:

        def oracle(R, eps):
            def candidates():
                n = 1
                while True:
                    yield [Element(group, k) for k in range(-n, n + 1)]
                    n += 1

            return _grow_until_invariant(candidates(), R, eps, budget, group.name)

        return AmenableWitness(group, lambda el: True, oracle, None, f"whole({group.name})")
    if isinstance(group, IntLattice) and group.dim == 2:

        def oracle(R, eps):
            def candidates():
                n = 1
                while True:
                    yield [
                        Element(group, (x, y))
                        for x in range(-n, n + 1)
                        for y in range(-n, n + 1)
                    ]
                    n += 1

            return _grow_until_invariant(candidates(), R, eps, budget, group.name)

        return AmenableWitness(group, lambda el: True, oracle, None, f"whole({group.name})")
    if isinstance(group, Lamplighter):

        def oracle(R, eps):
            max_site = 0
            for r in R:
                lamps, pos = r.key
                sites = [abs(s) for s in lamps] + [abs(pos)]
                max_site = max([max_site] + sites)

            def box(n):
                window = n + max_site
                sites = list(range(-window, window + 1))
                if len(sites) > 15:
                    raise ResourceError(
                        f"lamplighter box window {window} too large to enumerate"
                    )
                keys = set()
                for p in range(-n, n + 1):
                    for mask in range(1 << len(sites)):
                        lamps = tuple(
                            s for b, s in enumerate(sites) if mask >> b & 1
                        )
                        keys.add((lamps, p))
                        keys.add(group.inv_key((lamps, p)))
                return [Element(group, k) for k in keys]

            def candidates():
                n = 1
                while True:
                    yield box(n)
                    n += 1

            return _grow_until_invariant(candidates(), R, eps, 4, group.name)

        return AmenableWitness(group, lambda el: True, oracle, None, "whole(lamplighter)")
    raise UsageError(f"group {group.name} is not in the amenable catalog")


def lamp_subgroup_witness(group: Lamplighter, max_window: int = 12) -> AmenableWitness:
    """H = the lamp subgroup (finite configurations at position 0).

    Locally finite, so Folner sets are just the finite subgroups: all
    configurations over a window of sites.
    """
    if not isinstance(group, Lamplighter):
        raise UsageError("lamp subgroup witness requires the lamplighter group")

    def contains(el: Element) -> bool:
        return el.key[1] == 0

    def oracle(R, eps):
        window = 0
        for r in R:
            lamps, _ = r.key
            if lamps:
                window = max(window, max(abs(s) for s in lamps))
        if window > max_window:
            raise ResourceError(
                f"lamp subgroup oracle window {window} exceeds budget {max_window}"
            )
        sites = list(range(-window, window + 1))
        out = []
        for mask in range(1 << len(sites)):
            lamps = tuple(s for b, s in enumerate(sites) if mask >> b & 1)
            out.append(Element(group, (lamps, 0)))
        return out

    return AmenableWitness(group, contains, oracle, None, "lamp-subgroup")


def central_cyclic_witness(group: FreeTimesCyclic) -> AmenableWitness:
    """H = the central Z/m factor of F_k x Z/m, as a finite listing."""
    if not isinstance(group, FreeTimesCyclic):
        raise UsageError("central cyclic witness requires a free-times-cyclic group")
    listing = [Element(group, ((), t)) for t in range(group.modulus)]
    return AmenableWitness(
        group,
        contains=lambda el: el.key[0] == (),
        oracle=None,
        finite_listing=listing,
        name="central-cyclic",
    )


def trivial_witness(group: Group) -> AmenableWitness:
    """H = {e}; witnesses visibility only of sets containing the identity."""
    return AmenableWitness(
        group,
        contains=lambda el: el.is_identity(),
        oracle=None,
        finite_listing=[group.identity()],
        name="trivial",
    )


def witness_from_config(group: Group, cfg) -> AmenableWitness:
    """Build a witness from its config spec (a string or {'kind': ...})."""
    kind = cfg if isinstance(cfg, str) else cfg.get("kind")
    if kind == "whole_group":
        return whole_group_witness(group)
    if kind == "central_cyclic":
        return central_cyclic_witness(group)
    if kind == "lamp_subgroup":
        return lamp_subgroup_witness(group)
    if kind == "trivial":
        return trivial_witness(group)
    raise UsageError(f"unknown witness kind {kind!r}")
