"""Reference labeling: Private / Shareable / Encapsulated.

A world pairs a heap with a total label assignment (absent entries read as
Private).  The global invariant ties the two together: shareable cells may
only reach shareable cells, and nothing past the allocation frontier carries
a label other than Private.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

from . import heap as hp
from .errors import (
    AlreadyLabeled,
    DanglingInit,
    MonotonicRefShare,
    ShareLeak,
    TypeMismatch,
    Uncontained,
)
from .heap import LABEL_MAP_MARKER, Heap, Preorder
from .values import Addr, TypeTag, Value, ref_entries


class Label(enum.Enum):
    PRIVATE = "Private"
    SHAREABLE = "Shareable"
    ENCAPSULATED = "Encapsulated"


def label_leq(l0: Label, l1: Label) -> bool:
    if l0 is Label.PRIVATE:
        return True
    return l0 is l1


@dataclass(frozen=True)
class World:
    heap: Heap
    labels: dict  # Addr -> Label; absent means Private; treated as immutable

    def label_of(self, addr: Addr) -> Label:
        return self.labels.get(addr, Label.PRIVATE)

    def __eq__(self, other):
        if not isinstance(other, World):
            return NotImplemented
        if self.heap != other.heap:
            return False
        keys = self.labels.keys() | other.labels.keys()
        return all(self.label_of(k) is other.label_of(k) for k in keys)


@dataclass(frozen=True)
class HeapRelation:
    name: str
    relation: Callable[[World, World], bool]

    def holds(self, w0: World, w1: World) -> bool:
        return bool(self.relation(w0, w1))


def initial_world() -> World:
    return World(heap=hp.EMPTY_HEAP, labels={})


def is_private(w: World, r: Addr) -> bool:
    return w.label_of(r) is Label.PRIVATE


def is_shareable(w: World, r: Addr) -> bool:
    return w.label_of(r) is Label.SHAREABLE


def is_encapsulated(w: World, r: Addr) -> bool:
    return w.label_of(r) is Label.ENCAPSULATED


def _check_embedded_contained(w: World, tag: TypeTag, v: Value, who: str) -> None:
    for addr, expected in ref_entries(tag, v):
        if not w.heap.contains(addr):
            raise DanglingInit(f"{who}: embedded address {addr} not in heap")
        actual = w.heap.cell(addr).tag
        if actual != expected:
            raise TypeMismatch(
                f"{who}: embedded ref {addr} expects cell of {expected}, found {actual}"
            )


def _private_embedded(w: World, tag: TypeTag, v: Value) -> frozenset[Addr]:
    return frozenset(
        a for a, _ in ref_entries(tag, v) if not is_shareable(w, a)
    )


def lr_inv(w: World) -> bool:
    """The global invariant, checked over the finite parts of the world.

    (a) stored values embed only contained, correctly-typed addresses;
    (b) shareable cells embed only shareable addresses;
    (c) no address at or past the allocation frontier carries a label;
    (d) the label-map marker stays private.
    """
    h = w.heap
    for addr, cell in h.cells.items():
        for sub, expected in ref_entries(cell.tag, cell.value):
            if not h.contains(sub) or h.cell(sub).tag != expected:
                return False
            if is_shareable(w, addr) and not is_shareable(w, sub):
                return False
    for addr, label in w.labels.items():
        if addr >= h.next_addr and label is not Label.PRIVATE:
            return False
    if not is_private(w, LABEL_MAP_MARKER):
        return False
    return True


def lr_alloc(w: World, tag: TypeTag, rel: Preorder, init: Value) -> tuple[Addr, World]:
    _check_embedded_contained(w, tag, init, "alloc")
    addr, h1 = hp.alloc(w.heap, tag, rel, init)
    return addr, World(heap=h1, labels=w.labels)


def lr_read(w: World, r: Addr) -> Value:
    return hp.read(w.heap, r)


def lr_write(w: World, r: Addr, v: Value) -> World:
    if r == LABEL_MAP_MARKER:
        raise Uncontained(r, "the label-map marker is not writable")
    cell = w.heap.cell(r)
    _check_embedded_contained(w, cell.tag, v, "write")
    if is_shareable(w, r):
        leaked = _private_embedded(w, cell.tag, v)
        if leaked:
            raise ShareLeak(r, v, leaked)
    h1 = hp.write(w.heap, r, v)
    return World(heap=h1, labels=w.labels)


def label_shareable(w: World, r: Addr) -> World:
    from . import mutants

    cell = w.heap.cell(r)
    if not is_private(w, r):
        raise AlreadyLabeled(f"{r} is already {w.label_of(r).value}")
    if cell.preorder.name != hp.TRIVIAL.name:
        raise MonotonicRefShare(
            f"cannot share {r}: carries preorder {cell.preorder.name}"
        )
    if not mutants.is_active("label_share_unchecked"):
        leaked = _private_embedded(w, cell.tag, cell.value)
        if leaked:
            raise ShareLeak(r, cell.value, leaked)
    labels = dict(w.labels)
    labels[r] = Label.SHAREABLE
    return World(heap=w.heap, labels=labels)


def label_encapsulated(w: World, r: Addr) -> World:
    if r == LABEL_MAP_MARKER:
        raise Uncontained(r, "the label-map marker cannot be relabeled")
    w.heap.cell(r)
    if not is_private(w, r):
        raise AlreadyLabeled(f"{r} is already {w.label_of(r).value}")
    labels = dict(w.labels)
    labels[r] = Label.ENCAPSULATED
    return World(heap=w.heap, labels=labels)


# ---------------------------------------------------------------------------
# two-world footprint predicates (all diff scans over dom(w0.heap))


def modif_only_shareable_and_encaps(w0: World, w1: World) -> bool:
    for addr, cell in w0.heap.cells.items():
        if is_shareable(w0, addr) or is_encapsulated(w0, addr):
            continue
        if not w1.heap.contains(addr) or w1.heap.cell(addr).value != cell.value:
            return False
    return True


def modif_shareable_and(w0: World, w1: World, s) -> bool:
    for addr, cell in w0.heap.cells.items():
        if is_shareable(w0, addr) or addr in s:
            continue
        if not w1.heap.contains(addr) or w1.heap.cell(addr).value != cell.value:
            return False
    return True


def same_labels(w0: World, w1: World) -> bool:
    return all(w0.label_of(a) is w1.label_of(a) for a in w0.heap.addresses())


def labels_monotone(w0: World, w1: World) -> bool:
    keys = w0.labels.keys() | w1.labels.keys()
    return all(label_leq(w0.label_of(a), w1.label_of(a)) for a in keys)


HREL_C = HeapRelation(
    "modif_only_shareable_and_encaps_and_same_labels",
    lambda w0, w1: modif_only_shareable_and_encaps(w0, w1) and same_labels(w0, w1),
)
