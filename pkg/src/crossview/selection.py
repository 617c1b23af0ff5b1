"""Clauses, selections, resolution operators, and the update/activate events.

A selection manages an insertion-ordered clause set (at most one clause
per source interactor) plus a resolution configuration. Resolution
aggregates surviving clause predicates into a single filter predicate,
optionally cross-filtered against a target view. Selections compose:
a downstream selection includes the clause sets of its upstream
selections and re-resolves them with its own operator.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

from . import expr as ex
from .scales import ScaleDescriptor

# Global monotone counter; comparable across composed selections so that
# "most recently added" is well defined over combined clause sets.
_seq = itertools.count(1)


class SelectionError(ValueError):
    pass


@dataclass(frozen=True)
class ClauseMeta:
    """Optimization metadata carried by a clause (see check_compatibility)."""
    type: str  # point | interval | match
    pixel_size: float = 1.0
    bin_fn: str = "FLOOR"
    scales: Tuple[ScaleDescriptor, ...] = ()
    match_method: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(self.scales))
        if self.type not in ("point", "interval", "match"):
            raise SelectionError(f"unknown clause type {self.type!r}")
        if self.type == "interval":
            if not self.scales:
                raise SelectionError("interval meta requires at least one scale")
            if self.pixel_size < 1:
                raise SelectionError("pixel_size must be >= 1")
            if self.bin_fn not in ("FLOOR", "CEIL", "ROUND"):
                raise SelectionError(f"unknown bin function {self.bin_fn!r}")
        else:
            if self.scales:
                raise SelectionError(f"{self.type} meta must not carry scales")
        if self.type == "match":
            if self.match_method not in ("prefix", "suffix", "contains", "regexp"):
                raise SelectionError(f"unknown match method {self.match_method!r}")


@dataclass(frozen=True)
class Clause:
    predicate: ex.Predicate
    source: str
    views: FrozenSet[str] = frozenset()
    meta: Optional[ClauseMeta] = None

    def __post_init__(self):
        object.__setattr__(self, "views", frozenset(self.views))
        if not self.source:
            raise SelectionError("clause source must be non-empty")


class Selection:
    """A clause set plus resolution configuration."""

    def __init__(self, resolver: str = "INTERSECT", cross: bool = False,
                 empty: str = "selectAll",
                 includes: Sequence["Selection"] = ()):
        if resolver not in ("LAST", "INTERSECT", "UNION"):
            raise SelectionError(f"unknown resolver {resolver!r}")
        if empty not in ("selectAll", "selectNone"):
            raise SelectionError(f"unknown empty behavior {empty!r}")
        self.resolver = resolver
        self.cross = cross
        self.empty = empty
        self.includes: List[Selection] = list(includes)
        self._clauses: Dict[str, Tuple[int, Clause]] = {}  # source -> (seq, clause)
        self._downstream: List[Selection] = []
        self._update_listeners: List[Callable[["Selection"], None]] = []
        self._activate_listeners: List[Callable[["Selection", Clause], None]] = []
        for up in self.includes:
            up._check_cycle(self)
            up._downstream.append(self)

    def _check_cycle(self, candidate: "Selection"):
        if self is candidate:
            raise SelectionError("selection includes graph must be acyclic")
        for up in self.includes:
            up._check_cycle(candidate)

    # -- events ------------------------------------------------------------

    def on_update(self, fn: Callable[["Selection"], None]):
        self._update_listeners.append(fn)

    def on_activate(self, fn: Callable[["Selection", Clause], None]):
        self._activate_listeners.append(fn)

    def _fire_update(self):
        for fn in list(self._update_listeners):
            fn(self)
        for down in list(self._downstream):
            down._relay_update()

    def _relay_update(self):
        self._fire_update()

    # -- clause maintenance ------------------------------------------------

    def update(self, clause: Clause):
        """Replace any prior clause from the same source and mark it active."""
        self._clauses[clause.source] = (next(_seq), clause)
        self._fire_update()

    def remove(self, source: str):
        """Drop all clauses from a source (e.g., brush dismissal)."""
        removed = self._clauses.pop(source, None)
        if removed is not None:
            self._fire_update()

    def activate(self, example: Clause):
        """Signal a likely upcoming update; the clause set is not modified."""
        for fn in list(self._activate_listeners):
            fn(self, example)
        for down in list(self._downstream):
            down.activate(example)

    # -- resolution --------------------------------------------------------

    @property
    def clauses(self) -> List[Clause]:
        """Own clauses in insertion order."""
        return [c for _, c in sorted(self._clauses.values(), key=lambda t: t[0])]

    @property
    def active(self) -> Optional[Clause]:
        """Most recently added clause in the effective set (sequence order)."""
        eff = self.effective_clauses()
        return eff[-1][1] if eff else None

    def effective_clauses(self) -> List[Tuple[int, Clause]]:
        """Own plus relayed upstream clauses, ordered by insertion sequence."""
        seen: Dict[int, Clause] = {}

        def collect(sel: Selection):
            for seq, c in sel._clauses.values():
                seen[seq] = c
            for up in sel.includes:
                collect(up)

        collect(self)
        return sorted(seen.items())

    def resolve(self, view: Optional[str] = None) -> Optional[ex.Predicate]:
        """Aggregate surviving clause predicates into a filter for a view.

        Returns None when the selection imposes no filter (selectAll).
        """
        survivors = [(seq, c) for seq, c in self.effective_clauses()
                     if not (self.cross and view is not None and view in c.views)]
        if not survivors:
            return None if self.empty == "selectAll" else ex.FALSE
        if self.resolver == "LAST":
            return survivors[-1][1].predicate
        preds = tuple(c.predicate for _, c in survivors)
        if len(preds) == 1:
            return preds[0]
        return ex.And(preds) if self.resolver == "INTERSECT" else ex.Or(preds)
