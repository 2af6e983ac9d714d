"""Exact closed-walk weight counting on Cayley trees of free groups.

`tree_moment_sequence` computes, for alternating step-weight tables, the
total weight of closed walks from the base vertex.  Walks on a tree
decompose uniquely into first-passage excursions, which gives a
polynomial-time recursion; letters with identical weight signatures are
collapsed into classes, so homogeneous inputs (uniform conjugate
families, simple random walks) run in near-linear time in the depth.

Letters are nonzero signed integers (+-1..+-r); 0 denotes an identity
step.  Table `steps_odd` weights steps at even absolute positions
(0-based: steps 0, 2, 4, ...), `steps_even` the others; the names follow
the factor order of alternating products x1 y1 x2 y2 ... .
"""

from __future__ import annotations

from typing import Dict, List, Sequence, Tuple


def _letter_classes(steps_a: Dict[int, float], steps_b: Dict[int, float]):
    letters = set()
    for table in (steps_a, steps_b):
        for z in table:
            if z != 0:
                letters.add(z)
                letters.add(-z)
    letters = sorted(letters)
    signatures = {}
    for z in letters:
        signatures[z] = (
            steps_a.get(z, 0.0),
            steps_b.get(z, 0.0),
            steps_a.get(-z, 0.0),
            steps_b.get(-z, 0.0),
        )
    reps: List[int] = []
    class_of: Dict[int, int] = {}
    sig_to_class: Dict[Tuple, int] = {}
    counts: List[int] = []
    for z in letters:
        sig = signatures[z]
        if sig not in sig_to_class:
            sig_to_class[sig] = len(reps)
            reps.append(z)
            counts.append(0)
        class_of[z] = sig_to_class[sig]
        counts[class_of[z]] += 1
    return letters, reps, counts, class_of


def tree_moment_sequence(
    steps_odd: Dict[int, float], steps_even: Dict[int, float], half_steps: int
) -> List[float]:
    """[c_0, ..., c_{half_steps}] where c_j is the total weight of closed
    2j-step walks whose steps alternate between the two tables."""
    tables = (steps_odd, steps_even)
    letters, reps, counts, class_of = _letter_classes(steps_odd, steps_even)
    nclasses = len(reps)
    total_steps = 2 * half_steps
    lazy = (steps_odd.get(0, 0.0), steps_even.get(0, 0.0))

    if nclasses == 0:
        out = [1.0]
        acc = 1.0
        for j in range(1, half_steps + 1):
            acc *= lazy[0] * lazy[1]
            out.append(acc)
        return out

    weight = [[tables[p].get(reps[c], 0.0) for c in range(nclasses)] for p in (0, 1)]
    neg_class = [class_of[-reps[c]] for c in range(nclasses)]

    # fp[p][l][c]: weight of l-step first-passage walks to the parent vertex,
    # starting at time parity p, with parent edge of letter class c.
    fp = [[[0.0] * nclasses for _ in range(total_steps + 1)] for _ in (0, 1)]
    # h[p][l]: sum over all letters z of W_p(z) * fp[p^1][l][class(z)].
    h = [[0.0] * (total_steps + 1) for _ in (0, 1)]

    for length in range(1, total_steps + 1):
        for p in (0, 1):
            q = 1 - p
            row = fp[p][length]
            for c in range(nclasses):
                nc = neg_class[c]
                value = 0.0
                if length == 1:
                    value += tables[p].get(reps[nc], 0.0)
                if lazy[p] and length >= 2:
                    value += lazy[p] * fp[q][length - 1][c]
                acc = 0.0
                for l1 in range(1, length - 1):
                    rest = fp[(p + 1 + l1) & 1][length - 1 - l1][c]
                    if rest == 0.0:
                        continue
                    descend = h[p][l1] - tables[p].get(reps[nc], 0.0) * fp[q][l1][nc]
                    acc += descend * rest
                row[c] = value + acc
        for p in (0, 1):
            q = 1 - p
            total = 0.0
            for c in range(nclasses):
                w = weight[p][c]
                if w:
                    total += counts[c] * w * fp[q][length][c]
            h[p][length] = total

    ret = [[0.0] * (total_steps + 1) for _ in (0, 1)]
    ret[0][0] = ret[1][0] = 1.0
    for length in range(1, total_steps + 1):
        for p in (0, 1):
            q = 1 - p
            value = lazy[p] * ret[q][length - 1] if lazy[p] else 0.0
            # descend (1 step) + excursion (l1 steps) + rest (length-1-l1 steps)
            for l1 in range(1, length):
                if h[p][l1] == 0.0:
                    continue
                value += h[p][l1] * ret[(p + 1 + l1) & 1][length - 1 - l1]
            ret[p][length] = value

    return [ret[0][2 * j] for j in range(half_steps + 1)]


def simple_walk_moments(step_weights: Dict[int, float], half_steps: int) -> List[float]:
    """Moments for a single (non-alternating) table applied at every step."""
    return tree_moment_sequence(step_weights, step_weights, half_steps)
