"""Side-by-side analytical versus simulated residence times."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from ..solver.lqn import SolverResult
from .simulate import SimResult

COMPARE_COLUMNS = ("entity", "class", "analytical", "simulated", "ci-half-width", "abs-diff", "rel-diff")


class EntityMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class ComparisonRow:
    entity: str
    cls: str
    analytical: float
    simulated: float
    half_width: float
    abs_diff: float
    rel_diff: float


@dataclass
class ComparisonTable:
    rows: list

    def row(self, entity: str, cls=None) -> ComparisonRow:
        for r in self.rows:
            if r.entity == entity and (cls is None or r.cls == cls):
                return r
        raise KeyError(entity)

    @property
    def max_rel_diff(self) -> float:
        return max((r.rel_diff for r in self.rows), default=0.0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COMPARE_COLUMNS)
        for r in self.rows:
            w.writerow([r.entity, r.cls, repr(r.analytical), repr(r.simulated), repr(r.half_width),
                        repr(r.abs_diff), repr(r.rel_diff)])
        return buf.getvalue()


def compare_residence(analytical: SolverResult, sim: SimResult, kinds=("entry", "task")) -> ComparisonTable:
    """Pair residence times entity by entity.

    Rows of ``analytical`` whose kind is in ``kinds`` must all appear in
    ``sim``. The relative difference is taken against the simulated mean;
    two zero residences compare as equal.

    Raises
    ------
    EntityMismatchError
        If an analytical entity has no simulated counterpart.
    """
    simulated = {(r.entity, r.cls): r for r in sim.rows}
    missing = [(e.entity, e.cls) for e in analytical.entities
               if e.kind in kinds and (e.entity, e.cls) not in simulated]
    if missing:
        raise EntityMismatchError(f"entities missing from the simulation: {missing}")
    rows = []
    for e in analytical.entities:
        if e.kind not in kinds:
            continue
        s = simulated[(e.entity, e.cls)]
        diff = abs(e.residence - s.residence)
        if s.residence > 0:
            rel = diff / s.residence
        else:
            rel = 0.0 if diff == 0 else float("inf")
        rows.append(ComparisonRow(e.entity, e.cls, e.residence, s.residence, s.residence_hw, diff, rel))
    return ComparisonTable(rows)
