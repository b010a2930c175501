"""Task formulas: the nested-Until random sampler and fixed templates.

The sampler builds avoid-until-reach chains, depth 1 giving
``!p_i U p_j`` and each extra level nesting another chain under a
conjunction, e.g. ``!p3 U (p5 & (!p2 U p0))``. Every generated task set also
contains four fixed navigation templates: region avoidance, unordered
visitation, ordered visitation, and avoid-until-visited.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..labeling import LabelingConfig, label
from ..ltlf import (
    Always,
    And,
    Atom,
    Eventually,
    Formula,
    Not,
    PropSet,
    Until,
    satisfies_batch,
    threshold_assignments,
)

__all__ = ["sample_until_formula", "base_templates", "FormulaTaskSet", "build_task_set", "mark_feasibility"]


def sample_until_formula(
    props: PropSet, depth: int, rng: np.random.Generator, guard_negate_p: float = 1.0
) -> Formula:
    """Random depth-bounded avoid-until-reach formula over distinct atoms."""
    if len(props) < 2:
        raise ValueError("need at least two propositions")
    if depth < 1:
        raise ValueError("depth must be at least 1")

    def rec(d: int, used: set[int]) -> Formula:
        remaining = [i for i in range(len(props)) if i not in used]
        if len(remaining) < 2:
            remaining = list(range(len(props)))
            used.clear()
        guard_i, target_i = rng.choice(remaining, size=2, replace=False)
        used |= {int(guard_i), int(target_i)}
        guard: Formula = Atom(int(guard_i))
        if rng.random() < guard_negate_p:
            guard = Not(guard)
        if d == 1:
            return Until(guard, Atom(int(target_i)))
        return Until(guard, And(Atom(int(target_i)), rec(d - 1, used)))

    return rec(depth, set())


def base_templates(props: PropSet) -> list[Formula]:
    """The four fixed navigation templates over the first two propositions."""
    if len(props) < 2:
        raise ValueError("templates need at least two propositions")
    return [
        Always(Not(Atom(0))),
        And(Eventually(Atom(0)), Eventually(Atom(1))),
        Eventually(And(Atom(0), Eventually(Atom(1)))),
        Until(Not(Atom(1)), Atom(0)),
    ]


@dataclass
class FormulaTaskSet:
    formulas: list[Formula]
    train_idx: np.ndarray
    test_idx: np.ndarray
    feasible: np.ndarray | None = None  # filled by mark_feasibility

    def split_of(self, idx: int) -> str:
        return "train" if idx in set(self.train_idx.tolist()) else "test"


def build_task_set(
    props: PropSet,
    count: int,
    seed: int,
    depth_range: tuple[int, int] = (1, 2),
    train_fraction: float = 0.8,
    guard_negate_p: float = 1.0,
) -> FormulaTaskSet:
    """Templates plus deduplicated sampled formulas, split 80/20."""
    rng = np.random.default_rng(seed)
    formulas: list[Formula] = []
    seen = set()
    for f in base_templates(props):
        if f not in seen:
            seen.add(f)
            formulas.append(f)
    attempts = 0
    while len(formulas) < count and attempts < 100 * count:
        attempts += 1
        depth = int(rng.integers(depth_range[0], depth_range[1] + 1))
        f = sample_until_formula(props, depth, rng, guard_negate_p)
        if f not in seen:
            seen.add(f)
            formulas.append(f)
    if len(formulas) < count:
        raise RuntimeError(f"could not sample {count} distinct formulas")
    order = rng.permutation(len(formulas))
    cut = max(1, int(round(train_fraction * len(formulas))))
    return FormulaTaskSet(
        formulas=formulas,
        train_idx=np.sort(order[:cut]),
        test_idx=np.sort(order[cut:]),
    )


def mark_feasibility(
    task_set: FormulaTaskSet, windows: np.ndarray, labeling: LabelingConfig
) -> FormulaTaskSet:
    """A formula is feasible when at least one dataset window satisfies it."""
    traces = threshold_assignments(label(windows, labeling))
    feasible = np.array(
        [bool(satisfies_batch(traces, f, 0).any()) for f in task_set.formulas]
    )
    task_set.feasible = feasible
    return task_set
