import random
from collections import Counter

import pytest

from secref.contracts import (
    ArrowS,
    BaseS,
    ConstView,
    Err,
    ErrCode,
    ExecPost,
    ExecPre,
    Inl,
    Inr,
    LEAF,
    LListS,
    PairS,
    RefS,
    RefinedS,
    SumS,
    arrow_export_uses_either,
    export,
    hocs_of,
    import_value,
    preserves_refs_check,
    shape_matches,
    value_fits_spec,
)
from secref.errors import PurityViolation
from secref.heap import TRIVIAL
from secref.labels import initial_world
from secref.programs import Return, RunState, alloc_op, bind, do, read_op, write_op
from secref.sampling import sample_value
from secref.values import (
    INT,
    LList,
    Ref,
    UNIT,
    V_NIL,
    V_UNIT,
    VInl,
    VInr,
    VInt,
    VLLCons,
    VPair,
    VRef,
    llist_collect,
    llist_sorted,
)

INT_S = BaseS(INT)
POSITIVE = RefinedS(INT_S, "positive", lambda v: isinstance(v, VInt) and v.value > 0)


def fresh_env():
    return RunState()


def test_export_base_identity():
    assert export(INT_S, VInt(5), LEAF, ConstView(initial_world())) == VInt(5)


def test_export_ref_identity():
    spec = RefS(INT)
    v = VRef(4, INT)
    assert export(spec, v, LEAF, ConstView(initial_world())) == v


def test_import_base():
    assert import_value(INT_S, VInt(5), LEAF, ConstView(initial_world())) == Inl(VInt(5))


def test_import_base_shape_mismatch():
    out = import_value(INT_S, V_UNIT, LEAF, ConstView(initial_world()))
    assert isinstance(out, Inr)
    assert out.error.code is ErrCode.IMPORT_FAILURE


def test_import_refinement_violation():
    out = import_value(POSITIVE, VInt(-3), hocs_of(POSITIVE), ConstView(initial_world()))
    assert isinstance(out, Inr)
    assert out.error.code is ErrCode.REFINEMENT_VIOLATION


def test_import_refinement_pass():
    out = import_value(POSITIVE, VInt(3), hocs_of(POSITIVE), ConstView(initial_world()))
    assert out == Inl(VInt(3))


def test_import_pair_and_sum_recurse():
    spec = PairS(POSITIVE, SumS(INT_S, POSITIVE))
    env = ConstView(initial_world())
    ok = import_value(spec, VPair(VInt(1), VInr(VInt(2))), hocs_of(spec), env)
    assert ok == Inl(VPair(VInt(1), VInr(VInt(2))))
    bad = import_value(spec, VPair(VInt(1), VInr(VInt(-2))), hocs_of(spec), env)
    assert isinstance(bad, Inr)


def test_export_arrow_pre_violation_without_invoking():
    calls = []

    def body(v):
        calls.append(v)
        return Return(v)

    spec = ArrowS(
        INT_S,
        INT_S,
        pre=ExecPre(lambda v, w: None if v.value > 0 else Err(ErrCode.PRE_VIOLATION, "arg <= 0")),
    )
    env = fresh_env()
    wrapped = export(spec, body, hocs_of(spec), env)
    out = wrapped(VInt(-1))
    assert isinstance(out, Inr) and out.error.code is ErrCode.PRE_VIOLATION
    assert calls == []
    assert wrapped(VInt(2)) == Inl(VInt(2))


def test_export_arrow_without_checks_returns_raw():
    spec = ArrowS(INT_S, INT_S)
    assert not arrow_export_uses_either(spec)
    env = fresh_env()
    wrapped = export(spec, lambda v: Return(VInt(v.value + 1)), hocs_of(spec), env)
    assert wrapped(VInt(1)) == VInt(2)


def test_exported_arrow_runs_its_program_against_the_live_state():
    spec = ArrowS(BaseS(UNIT), INT_S)
    env = fresh_env()

    def body(_):
        def gen():
            a = yield alloc_op(INT, TRIVIAL, VInt(9))
            v = yield read_op(a)
            return VInt(v.value + 1)

        return do(gen)

    wrapped = export(spec, body, hocs_of(spec), env)
    assert wrapped(V_UNIT) == VInt(10)
    assert env.world.heap.contains(1)


def _chain_state(values):
    state = RunState()
    tail = state.op_alloc(LList(INT), TRIVIAL, V_NIL)
    for x in reversed(values):
        tail = state.op_alloc(LList(INT), TRIVIAL, VLLCons(VInt(x), tail))
    return state, tail


def sorting_post():
    def select(arg, world):
        return (arg.addr, Counter(llist_collect(world.heap, arg.addr) or []))

    def verify(captured, result, world):
        head, before = captured
        elems = llist_collect(world.heap, head)
        if elems is None:
            return Err(ErrCode.POST_VIOLATION, "cycle introduced")
        if not llist_sorted(world.heap, head):
            return Err(ErrCode.POST_VIOLATION, "not sorted")
        if Counter(elems) != before:
            return Err(ErrCode.POST_VIOLATION, "values changed")
        return None

    return ExecPost(select, verify)


def hw_spec():
    return ArrowS(LListS(INT), BaseS(UNIT), post=sorting_post())


def test_imported_arrow_post_violation_on_lazy_adversary():
    state, head = _chain_state([3, 1, 2])
    lazy = lambda ref: V_UNIT
    spec = hw_spec()
    imported = import_value(spec, lazy, hocs_of(spec), state)
    out = imported.value(VRef(head, LList(INT)))
    assert isinstance(out, Inr) and out.error.code is ErrCode.POST_VIOLATION


def test_imported_arrow_accepts_honest_worker():
    state, head = _chain_state([2, 1])

    def honest(ref):
        # swap the two elements in place through the raw operations
        first = state.op_read(ref.addr)
        second = state.op_read(first.tail)
        state.op_write(ref.addr, VLLCons(second.head, first.tail))
        state.op_write(first.tail, VLLCons(first.head, second.tail))
        return V_UNIT

    spec = hw_spec()
    imported = import_value(spec, honest, hocs_of(spec), state)
    out = imported.value(VRef(head, LList(INT)))
    assert out == Inl(V_UNIT)


def test_post_violation_does_not_roll_back_the_heap():
    state, head = _chain_state([1, 2])

    def vandal(ref):
        node = state.op_read(ref.addr)
        state.op_write(ref.addr, VLLCons(VInt(99), node.tail))
        return V_UNIT

    spec = hw_spec()
    imported = import_value(spec, vandal, hocs_of(spec), state)
    out = imported.value(VRef(head, LList(INT)))
    assert isinstance(out, Inr)
    assert state.world.heap.cell(head).value.head == VInt(99)


def test_contract_checks_are_counted_and_pure():
    state, head = _chain_state([1])
    spec = hw_spec()
    imported = import_value(spec, lambda r: V_UNIT, hocs_of(spec), state)
    before = state.trace.contract_checks
    imported.value(VRef(head, LList(INT)))
    assert state.trace.contract_checks == before + 2  # select + verify
    assert state.trace.purity_failures == 0


def test_purity_monitor_fires_on_a_mutating_check():
    state = RunState()

    class Sneaky:
        def __call__(self, v, w):
            state.op_alloc(INT, TRIVIAL, VInt(0))
            return None

    spec = ArrowS(INT_S, INT_S, pre=ExecPre(Sneaky()))
    wrapped = export(spec, lambda v: Return(v), hocs_of(spec), state)
    with pytest.raises(PurityViolation):
        wrapped(VInt(1))


def test_shape_matching():
    spec = PairS(POSITIVE, ArrowS(INT_S, INT_S))
    assert shape_matches(spec, hocs_of(spec))
    assert not shape_matches(spec, LEAF)


def _random_first_order_spec(rng, depth=2):
    roll = rng.random()
    if depth == 0 or roll < 0.4:
        return BaseS(rng.choice([INT, UNIT]))
    if roll < 0.6:
        return RefS(INT)
    if roll < 0.8:
        return PairS(
            _random_first_order_spec(rng, depth - 1),
            _random_first_order_spec(rng, depth - 1),
        )
    return SumS(
        _random_first_order_spec(rng, depth - 1),
        _random_first_order_spec(rng, depth - 1),
    )


def _spec_value(spec, rng):
    if isinstance(spec, BaseS):
        return sample_value(spec.tag, rng)
    if isinstance(spec, RefS):
        return VRef(rng.randint(1, 5), spec.target)
    if isinstance(spec, PairS):
        return VPair(_spec_value(spec.first, rng), _spec_value(spec.second, rng))
    if isinstance(spec, SumS):
        if rng.random() < 0.5:
            return VInl(_spec_value(spec.left, rng))
        return VInr(_spec_value(spec.right, rng))
    raise AssertionError(spec)


def test_round_trip_on_first_order_data():
    rng = random.Random(404)
    env = ConstView(initial_world())
    for _ in range(300):
        spec = _random_first_order_spec(rng)
        v = _spec_value(spec, rng)
        assert value_fits_spec(spec, v)
        out = import_value(spec, export(spec, v, hocs_of(spec), env), hocs_of(spec), env)
        assert out == Inl(v)


def test_preserves_refs_on_data():
    spec = PairS(RefS(INT), BaseS(INT))
    v = VPair(VRef(3, INT), VInt(1))
    env = ConstView(initial_world())
    assert preserves_refs_check(spec, v, export(spec, v, hocs_of(spec), env))
    assert not preserves_refs_check(spec, v, VPair(VRef(4, INT), VInt(1)))


def test_preserves_refs_vacuous_on_base():
    assert preserves_refs_check(INT_S, VInt(1), VInt(2))
