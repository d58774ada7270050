import random

import pytest

from secref.errors import TypeMismatch, Uncontained
from secref.heap import EMPTY_HEAP, NIL_THEN_FIXED, TRIVIAL, alloc, write
from secref.sampling import sample_tag, sample_value
from secref.values import (
    BOOL,
    INT,
    LList,
    Pair,
    Ref,
    Sum,
    UNIT,
    V_NIL,
    V_UNIT,
    VBool,
    VInl,
    VInt,
    VLLCons,
    VPair,
    VRef,
    conforms,
    embedded_addrs,
    forall_refs,
    llist_collect,
    llist_same_values,
    llist_sorted,
    ref_entries,
)


def test_conforms_int():
    assert conforms(VInt(3), INT)


def test_conforms_pair_with_ref():
    v = VPair(VInt(1), VRef(2, INT))
    assert conforms(v, Pair(INT, Ref(INT)))


def test_conforms_rejects_wrong_shape():
    assert not conforms(VInl(V_UNIT), INT)
    assert not conforms(VRef(1, INT), Ref(BOOL))
    assert not conforms(VBool(True), UNIT)


def test_forall_refs_always_true_pred():
    v = VPair(VRef(3, INT), VRef(5, INT))
    assert forall_refs(lambda a, h: True, Pair(Ref(INT), Ref(INT)), v, EMPTY_HEAP)


def test_forall_refs_enumerates_embedded_addrs():
    v = VPair(VRef(3, INT), VRef(5, INT))
    odd = lambda a, h: a % 2 == 1
    assert forall_refs(odd, Pair(Ref(INT), Ref(INT)), v, EMPTY_HEAP)
    v2 = VPair(VRef(3, INT), VRef(4, INT))
    assert not forall_refs(odd, Pair(Ref(INT), Ref(INT)), v2, EMPTY_HEAP)


def test_forall_refs_covers_list_node_tail_and_head():
    seen = []

    def spy(a, h):
        seen.append(a)
        return True

    assert forall_refs(spy, LList(INT), VLLCons(VInt(7), 4), EMPTY_HEAP)
    assert seen == [4]


def test_forall_refs_rejects_nonconforming():
    with pytest.raises(TypeMismatch):
        forall_refs(lambda a, h: True, INT, V_UNIT, EMPTY_HEAP)


def test_forall_refs_accepts_named_predicates():
    from secref.values import RefPredicate

    contained = RefPredicate("contained", lambda a, h: h.contains(a))
    addr, h = alloc(EMPTY_HEAP, INT, TRIVIAL, VInt(0))
    assert forall_refs(contained, Ref(INT), VRef(addr, INT), h)
    assert not forall_refs(contained, Ref(INT), VRef(addr + 1, INT), h)


def test_embedded_addrs_base():
    assert embedded_addrs(INT, VInt(1)) == frozenset()


def test_embedded_addrs_ref():
    assert embedded_addrs(Ref(INT), VRef(9, INT)) == frozenset({9})


def test_embedded_addrs_structural():
    v = VPair(VRef(1, INT), VLLCons(V_UNIT, 2))
    t = Pair(Ref(INT), LList(UNIT))
    assert embedded_addrs(t, v) == frozenset({1, 2})


def _oracle_collect_addrs(t, v):
    # independent recursion over the value shape, written head-first
    if isinstance(t, (type(UNIT), type(INT), type(BOOL))):
        return []
    if isinstance(t, Sum):
        inner = t.left if isinstance(v, VInl) else t.right
        return _oracle_collect_addrs(inner, v.payload)
    if isinstance(t, Pair):
        return _oracle_collect_addrs(t.first, v.first) + _oracle_collect_addrs(
            t.second, v.second
        )
    if isinstance(t, Ref):
        return [v.addr]
    if isinstance(v, VLLCons):
        return _oracle_collect_addrs(t.elem, v.head) + [v.tail]
    return []


def test_forall_refs_agrees_with_embedded_addrs_on_samples():
    rng = random.Random(31)
    for _ in range(300):
        t = sample_tag(rng)
        v = sample_value(t, rng)
        addrs = frozenset(_oracle_collect_addrs(t, v))
        assert embedded_addrs(t, v) == addrs
        for probe in list(addrs) + [17]:
            pred = lambda a, h, p=probe: a != p
            assert forall_refs(pred, t, v, EMPTY_HEAP) == all(
                a != probe for a in addrs
            )


def build_chain(values, preorder=TRIVIAL):
    """Allocate a nil-terminated chain and return (head addr, heap)."""
    h = EMPTY_HEAP
    tail, h = alloc(h, LList(INT), preorder, V_NIL)
    for x in reversed(values):
        tail, h = alloc(h, LList(INT), preorder, VLLCons(VInt(x), tail))
    return tail, h


def test_llist_collect_in_order():
    head, h = build_chain([1, 2, 3])
    assert llist_collect(h, head) == [VInt(1), VInt(2), VInt(3)]


def test_llist_collect_cycle():
    addr, h = alloc(EMPTY_HEAP, LList(INT), TRIVIAL, V_NIL)
    h = write(h, addr, VLLCons(VInt(1), addr))
    assert llist_collect(h, addr) is None


def test_llist_collect_empty():
    addr, h = alloc(EMPTY_HEAP, LList(INT), NIL_THEN_FIXED, V_NIL)
    assert llist_collect(h, addr) == []


def test_llist_collect_uncontained_tail():
    addr, h = alloc(EMPTY_HEAP, LList(INT), TRIVIAL, VLLCons(VInt(1), 99))
    with pytest.raises(Uncontained):
        llist_collect(h, addr)


def test_llist_sorted():
    head, h = build_chain([1, 2, 2, 5])
    assert llist_sorted(h, head)
    head2, h2 = build_chain([3, 1])
    assert not llist_sorted(h2, head2)


def test_llist_sorted_false_on_cycle():
    addr, h = alloc(EMPTY_HEAP, LList(INT), TRIVIAL, V_NIL)
    h = write(h, addr, VLLCons(VInt(1), addr))
    assert not llist_sorted(h, addr)


def test_llist_same_values_multiset():
    head, h0 = build_chain([3, 1, 2])
    # simulate an in-place sort by writing a permuted chain at the same cells
    h1 = h0
    order = [1, 2, 3]
    addr = head
    for x in order:
        node = h1.cell(addr).value
        h1 = write(h1, addr, VLLCons(VInt(x), node.tail))
        addr = node.tail
    assert llist_same_values(h0, h1, head)


def test_llist_same_values_rejects_multiset_change():
    head, h0 = build_chain([3, 1])
    node = h0.cell(head).value
    h1 = write(h0, head, VLLCons(VInt(1), node.tail))
    assert not llist_same_values(h0, h1, head)


def test_collection_terminates_on_dense_heaps():
    rng = random.Random(13)
    for _ in range(40):
        h = EMPTY_HEAP
        addrs = []
        for i in range(6):
            a, h = alloc(h, LList(INT), TRIVIAL, V_NIL)
            addrs.append(a)
        for a in addrs:
            h = write(h, a, VLLCons(VInt(rng.randint(0, 9)), rng.choice(addrs)))
        # every walk ends: either a cycle is reported or a nil is reached
        result = llist_collect(h, addrs[0])
        assert result is None or isinstance(result, list)
