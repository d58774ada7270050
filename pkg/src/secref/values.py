"""First-order dynamic values and their deeply embedded types.

Storable types are unit, int and bool closed under sums, pairs, references
and linked lists.  Linked lists are the one recursive container: a list node
is an ordinary value whose tail is the address of the next node's cell.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Iterator, Optional, Union

from .errors import TypeMismatch, Uncontained

if TYPE_CHECKING:
    from .heap import Heap

Addr = int


# ---------------------------------------------------------------------------
# type tags


@dataclass(frozen=True)
class Unit:
    def __str__(self):
        return "unit"


@dataclass(frozen=True)
class Int:
    def __str__(self):
        return "int"


@dataclass(frozen=True)
class Bool:
    def __str__(self):
        return "bool"


@dataclass(frozen=True)
class Sum:
    left: "TypeTag"
    right: "TypeTag"

    def __str__(self):
        return f"(sum {self.left} {self.right})"


@dataclass(frozen=True)
class Pair:
    first: "TypeTag"
    second: "TypeTag"

    def __str__(self):
        return f"(pair {self.first} {self.second})"


@dataclass(frozen=True)
class Ref:
    target: "TypeTag"

    def __str__(self):
        return f"(ref {self.target})"


@dataclass(frozen=True)
class LList:
    elem: "TypeTag"

    def __str__(self):
        return f"(llist {self.elem})"


TypeTag = Union[Unit, Int, Bool, Sum, Pair, Ref, LList]

UNIT = Unit()
INT = Int()
BOOL = Bool()


# ---------------------------------------------------------------------------
# values


@dataclass(frozen=True)
class VUnit:
    def __str__(self):
        return "()"


@dataclass(frozen=True)
class VInt:
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class VBool:
    value: bool

    def __str__(self):
        return "true" if self.value else "false"


@dataclass(frozen=True)
class VInl:
    payload: "Value"

    def __str__(self):
        return f"inl({self.payload})"


@dataclass(frozen=True)
class VInr:
    payload: "Value"

    def __str__(self):
        return f"inr({self.payload})"


@dataclass(frozen=True)
class VPair:
    first: "Value"
    second: "Value"

    def __str__(self):
        return f"({self.first}, {self.second})"


@dataclass(frozen=True)
class VRef:
    addr: Addr
    target: TypeTag

    def __str__(self):
        return f"ref@{self.addr}"


@dataclass(frozen=True)
class VLLNil:
    def __str__(self):
        return "llnil"


@dataclass(frozen=True)
class VLLCons:
    head: "Value"
    tail: Addr

    def __str__(self):
        return f"llcons({self.head}, ref@{self.tail})"


Value = Union[VUnit, VInt, VBool, VInl, VInr, VPair, VRef, VLLNil, VLLCons]

V_UNIT = VUnit()
V_NIL = VLLNil()


def conforms(v: Value, t: TypeTag) -> bool:
    """Structural conformance of a value to a type tag."""
    if isinstance(t, Unit):
        return isinstance(v, VUnit)
    if isinstance(t, Int):
        return isinstance(v, VInt)
    if isinstance(t, Bool):
        return isinstance(v, VBool)
    if isinstance(t, Sum):
        if isinstance(v, VInl):
            return conforms(v.payload, t.left)
        if isinstance(v, VInr):
            return conforms(v.payload, t.right)
        return False
    if isinstance(t, Pair):
        return (
            isinstance(v, VPair)
            and conforms(v.first, t.first)
            and conforms(v.second, t.second)
        )
    if isinstance(t, Ref):
        return isinstance(v, VRef) and v.target == t.target
    if isinstance(t, LList):
        if isinstance(v, VLLNil):
            return True
        return isinstance(v, VLLCons) and conforms(v.head, t.elem)
    raise TypeMismatch(f"unknown type tag {t!r}")


# ---------------------------------------------------------------------------
# reference traversal (one level deep: stops at embedded addresses)


@dataclass(frozen=True)
class RefPredicate:
    name: str
    test: Callable[[Addr, "Heap"], bool]


def ref_entries(t: TypeTag, v: Value) -> Iterator[tuple[Addr, TypeTag]]:
    """Yield each embedded address with the type tag its cell must carry."""
    if not conforms(v, t):
        raise TypeMismatch(f"value {v!r} does not conform to {t}")
    if isinstance(t, (Unit, Int, Bool)):
        return
    if isinstance(t, Sum):
        inner = t.left if isinstance(v, VInl) else t.right
        yield from ref_entries(inner, v.payload)
    elif isinstance(t, Pair):
        yield from ref_entries(t.first, v.first)
        yield from ref_entries(t.second, v.second)
    elif isinstance(t, Ref):
        yield (v.addr, t.target)
    elif isinstance(t, LList):
        if isinstance(v, VLLCons):
            yield from ref_entries(t.elem, v.head)
            yield (v.tail, LList(t.elem))


def embedded_addrs(t: TypeTag, v: Value) -> frozenset[Addr]:
    return frozenset(a for a, _ in ref_entries(t, v))


def forall_refs(pred, t: TypeTag, v: Value, h: "Heap") -> bool:
    """True iff every address embedded one level deep in v satisfies pred.

    Accepts a RefPredicate or a bare (addr, heap) -> bool callable.
    Base values hold vacuously; traversal never follows addresses through
    the heap.
    """
    test = pred.test if isinstance(pred, RefPredicate) else pred
    return all(test(a, h) for a, _ in ref_entries(t, v))


# ---------------------------------------------------------------------------
# linked-list chains


def llist_collect(h: "Heap", head: Addr) -> Optional[list[Value]]:
    """Element values of the chain starting at head, or None on a cycle."""
    out: list[Value] = []
    seen: set[Addr] = set()
    cur = head
    while True:
        if cur in seen:
            return None
        seen.add(cur)
        if not h.contains(cur):
            raise Uncontained(cur, "linked-list tail")
        node = h.cell(cur).value
        if isinstance(node, VLLNil):
            return out
        if not isinstance(node, VLLCons):
            raise TypeMismatch(f"cell {cur} holds {node!r}, not a list node")
        out.append(node.head)
        cur = node.tail


def llist_sorted(h: "Heap", head: Addr) -> bool:
    """Non-decreasing integer chain; a cycle counts as unsorted."""
    elems = llist_collect(h, head)
    if elems is None:
        return False
    ints = [e.value for e in elems if isinstance(e, VInt)]
    if len(ints) != len(elems):
        return False
    return all(a <= b for a, b in zip(ints, ints[1:]))


def llist_same_values(h0: "Heap", h1: "Heap", head: Addr) -> bool:
    """Multiset equality of the collected elements in both heaps."""
    a = llist_collect(h0, head)
    b = llist_collect(h1, head)
    if a is None or b is None:
        return False
    return Counter(a) == Counter(b)
