"""Monotonic heap: typed cells with per-cell preorders, never deallocated.

Heaps are immutable snapshots; every mutation returns a new heap sharing the
unchanged cells.  Addresses start at 1.  Address 0 is reserved as the label
map's identity marker and is never allocated.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .errors import PreorderViolation, TypeMismatch, Uncontained
from .values import Addr, TypeTag, Value, VInl, VInt, VLLNil, VPair, conforms

LABEL_MAP_MARKER: Addr = 0

AddrSet = frozenset


@dataclass(frozen=True)
class Preorder:
    """A named, executable binary relation over cell values.

    Reflexivity and transitivity are not assumed; the property suite checks
    them for every registered preorder.
    """

    name: str
    relation: Callable[[Value, Value], bool]

    def holds(self, old: Value, new: Value) -> bool:
        return bool(self.relation(old, new))


def _none_then_fixed(old: Value, new: Value) -> bool:
    # option-valued cell: unset may become anything, set stays put
    if isinstance(old, VInl):
        return True
    return old == new


def _nil_then_fixed(old: Value, new: Value) -> bool:
    # list-node cell: nil may grow a node, a node never changes
    if isinstance(old, VLLNil):
        return True
    return old == new


def _hist_prefix(old: Value, new: Value) -> bool:
    # pair cell whose first component is a list node under nil-then-fixed
    if not (isinstance(old, VPair) and isinstance(new, VPair)):
        return False
    return _nil_then_fixed(old.first, new.first)


TRIVIAL = Preorder("trivial", lambda a, b: True)
INT_LEQ = Preorder(
    "int_leq",
    lambda a, b: isinstance(a, VInt) and isinstance(b, VInt) and a.value <= b.value,
)
NONE_THEN_FIXED = Preorder("none_then_fixed", _none_then_fixed)
NIL_THEN_FIXED = Preorder("nil_then_fixed", _nil_then_fixed)
HIST_PREFIX = Preorder("hist_prefix", _hist_prefix)

PREORDERS: dict[str, Preorder] = {
    p.name: p for p in (TRIVIAL, INT_LEQ, NONE_THEN_FIXED, NIL_THEN_FIXED, HIST_PREFIX)
}


@dataclass(frozen=True)
class HeapCell:
    addr: Addr
    tag: TypeTag
    preorder: Preorder
    value: Value


@dataclass(frozen=True)
class Heap:
    cells: dict  # Addr -> HeapCell; treated as immutable
    next_addr: Addr

    def contains(self, addr: Addr) -> bool:
        return addr in self.cells

    def cell(self, addr: Addr) -> HeapCell:
        if addr not in self.cells:
            raise Uncontained(addr)
        return self.cells[addr]

    def addresses(self):
        return self.cells.keys()

    def __eq__(self, other):
        return (
            isinstance(other, Heap)
            and self.next_addr == other.next_addr
            and self.cells == other.cells
        )


EMPTY_HEAP = Heap(cells={}, next_addr=1)


def alloc(h: Heap, tag: TypeTag, rel: Preorder, init: Value) -> tuple[Addr, Heap]:
    if not conforms(init, tag):
        raise TypeMismatch(f"initial value {init!r} does not conform to {tag}")
    addr = h.next_addr
    cells = dict(h.cells)
    cells[addr] = HeapCell(addr=addr, tag=tag, preorder=rel, value=init)
    return addr, Heap(cells=cells, next_addr=addr + 1)


def read(h: Heap, r: Addr) -> Value:
    return h.cell(r).value


def write(h: Heap, r: Addr, v: Value) -> Heap:
    cell = h.cell(r)
    if not conforms(v, cell.tag):
        raise TypeMismatch(f"value {v!r} does not conform to {cell.tag} at {r}")
    if not cell.preorder.holds(cell.value, v):
        raise PreorderViolation(r, cell.preorder.name, cell.value, v)
    cells = dict(h.cells)
    cells[r] = HeapCell(addr=r, tag=cell.tag, preorder=cell.preorder, value=v)
    return Heap(cells=cells, next_addr=h.next_addr)


def heap_leq(h0: Heap, h1: Heap) -> bool:
    """Every cell of h0 is still present in h1 and evolved along its preorder."""
    for addr, cell in h0.cells.items():
        if not h1.contains(addr):
            return False
        if not cell.preorder.holds(cell.value, h1.cell(addr).value):
            return False
    return True


def modifies(s, h0: Heap, h1: Heap) -> bool:
    """Cells of h0 outside the footprint s are unchanged in h1."""
    for addr, cell in h0.cells.items():
        if addr in s:
            continue
        if not h1.contains(addr) or h1.cell(addr).value != cell.value:
            return False
    return True


def equal_dom(h0: Heap, h1: Heap) -> bool:
    return h0.cells.keys() == h1.cells.keys()


def fresh(r: Addr, h0: Heap, h1: Heap) -> bool:
    return not h0.contains(r) and h1.contains(r)
