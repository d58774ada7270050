import pytest

from secref import heap as hp
from secref.errors import (
    OutOfFuel,
    RecallUnwitnessed,
    StabilityViolation,
    WitnessFalse,
)
from secref.heap import EMPTY_HEAP, INT_LEQ, TRIVIAL, alloc
from secref.labels import initial_world, is_shareable
from secref.programs import (
    Alloc,
    Read,
    Recall,
    Return,
    RunConfig,
    RunState,
    StablePredicate,
    Witness,
    Write,
    alloc_op,
    bind,
    contains_pred,
    do,
    label_shareable_op,
    private_pred,
    read_op,
    recall_op,
    ret,
    run,
    run_closed,
    shareable_pred,
    witness_op,
    write_op,
)
from secref.values import INT, VInt


def nonempty_pred():
    return StablePredicate("heap_nonempty", lambda w: len(w.heap.cells) > 0)


def observe(program, h0=EMPTY_HEAP):
    result, h1, ws = run(program, h0)
    return result, h1, frozenset(ws)


def test_bind_left_unit():
    k = lambda v: Return(v + 1)
    assert observe(bind(Return(1), k)) == observe(k(1))


def test_bind_right_unit():
    a, h = alloc(EMPTY_HEAP, INT, TRIVIAL, VInt(5))
    m = read_op(a)
    assert observe(bind(m, Return), h) == observe(m, h)


def test_bind_associativity():
    a, h = alloc(EMPTY_HEAP, INT, TRIVIAL, VInt(5))
    m = read_op(a)
    f = lambda v: write_op(a, VInt(v.value + 1))
    g = lambda _: read_op(a)
    lhs = bind(bind(m, f), g)
    rhs = bind(m, lambda x: bind(f(x), g))
    assert observe(lhs, h) == observe(rhs, h)


def test_run_return_leaves_heap_alone():
    result, h1, ws = run(Return(7), EMPTY_HEAP)
    assert (result, h1, ws) == (7, EMPTY_HEAP, {})


def test_witness_then_recall():
    a, h = alloc(EMPTY_HEAP, INT, TRIVIAL, VInt(5))
    p = nonempty_pred()
    prog = bind(witness_op(p), lambda _: bind(recall_op(p), lambda _: Return(1)))
    result, h1, ws = run(prog, h)
    assert result == 1
    assert h1 == h
    assert set(ws) == {"heap_nonempty"}


def test_bare_recall_is_refused():
    a, h = alloc(EMPTY_HEAP, INT, TRIVIAL, VInt(5))
    prog = bind(recall_op(nonempty_pred()), lambda _: Return(1))
    with pytest.raises(RecallUnwitnessed):
        run(prog, h)


def test_closed_witness_then_recall_succeeds():
    p = StablePredicate("frontier_past_one", lambda w: w.heap.next_addr >= 2)
    prog = bind(
        alloc_op(INT, TRIVIAL, VInt(0)),
        lambda a: bind(witness_op(p), lambda _: bind(recall_op(p), lambda _: Return(a))),
    )
    result, h1 = run_closed(prog)
    assert result == 1
    assert h1.contains(1)


def test_closed_bare_recall_refused():
    prog = recall_op(nonempty_pred())
    with pytest.raises(RecallUnwitnessed):
        run_closed(prog)


def test_run_closed_return():
    assert run_closed(Return(0)) == (0, EMPTY_HEAP)


def test_witness_false_predicate():
    with pytest.raises(WitnessFalse):
        run_closed(witness_op(nonempty_pred()))


def test_run_precondition_checks_initial_witnesses():
    p = nonempty_pred()
    with pytest.raises(WitnessFalse):
        run(Return(1), EMPTY_HEAP, {p.name: p})


def test_recall_from_provided_witness_set():
    a, h = alloc(EMPTY_HEAP, INT, TRIVIAL, VInt(5))
    p = nonempty_pred()
    result, _, _ = run(bind(recall_op(p), lambda _: Return(2)), h, {p.name: p})
    assert result == 2


def test_unstable_predicate_is_caught_on_recall():
    # empty-heap predicate is falsified by the intervening allocation
    p = StablePredicate("heap_empty", lambda w: len(w.heap.cells) == 0)
    prog = bind(
        witness_op(p),
        lambda _: bind(alloc_op(INT, TRIVIAL, VInt(0)), lambda _: recall_op(p)),
    )
    with pytest.raises(StabilityViolation):
        run_closed(prog)


def test_paranoid_mode_checks_witnessed_set_every_step():
    p = StablePredicate("heap_empty", lambda w: len(w.heap.cells) == 0)
    prog = bind(witness_op(p), lambda _: bind(alloc_op(INT, TRIVIAL, VInt(0)), lambda _: Return(0)))
    with pytest.raises(StabilityViolation):
        run_closed(prog, RunConfig(check_level="paranoid"))
    # without paranoid stepping and without a recall, the break goes unnoticed
    result, _ = run_closed(prog)
    assert result == 0


def test_fuel_exhaustion():
    def gen():
        a = yield alloc_op(INT, TRIVIAL, VInt(0))
        while True:
            yield write_op(a, VInt(1))

    with pytest.raises(OutOfFuel):
        run_closed(do(gen), RunConfig(fuel=50))


def test_do_notation_roundtrip():
    def gen():
        a = yield alloc_op(INT, TRIVIAL, VInt(10))
        v = yield read_op(a)
        yield write_op(a, VInt(v.value + 1))
        out = yield read_op(a)
        return out.value

    result, h1 = run_closed(do(gen))
    assert result == 11
    assert h1.cell(1).value == VInt(11)


def test_label_ops_inside_programs():
    def gen():
        a = yield alloc_op(INT, TRIVIAL, VInt(0))
        yield label_shareable_op(a)
        p = shareable_pred(a)
        yield witness_op(p)
        yield recall_op(p)
        return a

    state = RunState()
    a = state.interpret(do(gen))
    assert is_shareable(state.world, a)


def test_heap_monotone_across_whole_run():
    def gen():
        a = yield alloc_op(INT, INT_LEQ, VInt(0))
        yield write_op(a, VInt(5))
        b = yield alloc_op(INT, TRIVIAL, VInt(1))
        yield write_op(b, VInt(0))
        return 0

    a, h0 = alloc(EMPTY_HEAP, INT, TRIVIAL, VInt(9))
    _, h1, _ = run(do(gen), h0)
    assert hp.heap_leq(h0, h1)


def test_private_pred_is_not_stable_negative_control():
    def gen():
        a = yield alloc_op(INT, TRIVIAL, VInt(0))
        p = private_pred(a)
        yield witness_op(p)
        yield label_shareable_op(a)
        yield recall_op(p)

    with pytest.raises(StabilityViolation):
        run_closed(do(gen))
