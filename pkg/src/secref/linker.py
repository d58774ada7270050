"""Compile, link, back-translate, and the behavior function.

Untrusted context code gets exactly three capabilities: allocate a fresh
shareable cell, read a shareable cell, write a shareable cell.  Around
every context execution a monitor snapshots the world and asserts the
universal property: only shareable and encapsulated cells changed, and no
existing cell changed label.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional

from . import labels as lb
from . import mutants
from .contracts import (
    ArrowS,
    ContractTree,
    Inl,
    Inr,
    InterfaceSpec,
    PairS,
    SumS,
    export,
    import_value,
)
from .errors import BoundaryViolation, RunFailure, UniversalViolation
from .heap import TRIVIAL
from .labels import (
    HREL_C,
    HeapRelation,
    World,
    initial_world,  # the canonical start state, re-exported from here
    is_shareable,
    lr_alloc,
    lr_read,
    lr_write,
    modif_only_shareable_and_encaps,
    same_labels,
)
from .programs import Program, Return, RunConfig, RunState
from .values import Addr, TypeTag, Value, VInl, VInr, VPair, VRef, ref_entries


@dataclass(frozen=True)
class ThreePredicates:
    inv: Callable[[World], bool]
    phi: Callable[[Addr, World], bool]
    hrel: HeapRelation


THREEP_C = ThreePredicates(
    inv=lb.lr_inv,
    phi=lambda addr, w: is_shareable(w, addr),
    hrel=HREL_C,
)


@dataclass(frozen=True)
class SourceInterface:
    spec: InterfaceSpec
    hocs: ContractTree
    psi: Callable[[World, Any, World], bool]


@dataclass(frozen=True)
class SourceProgram:
    name: str
    body: Callable[[Any], Program]  # context value -> program returning int


@dataclass(frozen=True)
class TargetContext:
    name: str
    builder: Callable[["CtxOps"], Any]  # may allocate at build time


@dataclass(frozen=True)
class WholeProgram:
    name: str
    run_in: Callable[[RunState], Any]


# ---------------------------------------------------------------------------
# the three context-facing operations


def ctx_alloc(w: World, tag: TypeTag, init: Value) -> tuple[Addr, World]:
    for sub, _ in ref_entries(tag, init):
        if not is_shareable(w, sub):
            raise BoundaryViolation(
                f"context alloc embeds non-shareable address {sub}"
            )
    addr, w1 = lr_alloc(w, tag, TRIVIAL, init)
    w2 = lb.label_shareable(w1, addr)
    return addr, w2


def ctx_read(w: World, r: Addr) -> Value:
    if not is_shareable(w, r):
        raise BoundaryViolation(f"context read of non-shareable address {r}")
    return lr_read(w, r)


def ctx_write(w: World, r: Addr, v: Value) -> World:
    if not mutants.is_active("ctx_write_unchecked"):
        if not is_shareable(w, r):
            raise BoundaryViolation(f"context write to non-shareable address {r}")
        if w.heap.contains(r):
            for sub, _ in ref_entries(w.heap.cell(r).tag, v):
                if not is_shareable(w, sub):
                    raise BoundaryViolation(
                        f"context write embeds non-shareable address {sub}"
                    )
    return lr_write(w, r, v)


class CtxOps:
    """Live handles to the three operations, bound to one run state.

    Context code speaks in reference values; the handles unwrap them, burn
    fuel, and re-run the per-step monitors exactly like tree-node steps.
    """

    def __init__(self, state: RunState):
        self._state = state

    def tick(self) -> None:
        self._state._tick()

    def alloc(self, tag: TypeTag, init: Value) -> VRef:
        st = self._state
        st._tick()
        addr, w = ctx_alloc(st.world, tag, init)
        st.world = w
        st._after_step()
        return VRef(addr, tag)

    def read(self, ref: Value) -> Value:
        st = self._state
        st._tick()
        if not isinstance(ref, VRef):
            raise BoundaryViolation(f"context read of a non-reference: {ref}")
        v = ctx_read(st.world, ref.addr)
        st._after_step()
        return v

    def write(self, ref: Value, v: Value) -> Value:
        st = self._state
        st._tick()
        if not isinstance(ref, VRef):
            raise BoundaryViolation(f"context write to a non-reference: {ref}")
        st.world = ctx_write(st.world, ref.addr, v)
        st._after_step()
        return None


# ---------------------------------------------------------------------------
# the universal-property monitor


def _close_span(state: RunState, name: str, w0: World, require_same_labels: bool = True):
    w1 = state.world
    state.trace.context_spans.append((name, w0, w1))
    ok = modif_only_shareable_and_encaps(w0, w1)
    if ok and require_same_labels:
        ok = same_labels(w0, w1)
    if not ok:
        raise UniversalViolation(
            f"context code ({name}) modified non-shareable state or relabeled cells"
        )


def monitor_context_value(spec: InterfaceSpec, v: Any, state: RunState, name: str) -> Any:
    """Bracket every context-arrow call (and arrows it returns) with the
    universal-property assertion."""
    if isinstance(spec, ArrowS):
        if not callable(v):
            return v

        def monitored(x, _f=v, _spec=spec):
            w0 = state.world
            out = _f(x)
            _close_span(state, name, w0)
            return monitor_context_value(_spec.res, out, state, name)

        return monitored
    if isinstance(spec, PairS) and isinstance(v, VPair):
        return VPair(
            monitor_context_value(spec.first, v.first, state, name),
            monitor_context_value(spec.second, v.second, state, name),
        )
    if isinstance(spec, SumS):
        if isinstance(v, VInl):
            return VInl(monitor_context_value(spec.left, v.payload, state, name))
        if isinstance(v, VInr):
            return VInr(monitor_context_value(spec.right, v.payload, state, name))
    return v


def _instantiate(context: TargetContext, iface: SourceInterface, state: RunState):
    """Build the raw context value against the live world, monitored."""
    ops = CtxOps(state)
    w0 = state.world
    raw = context.builder(ops)
    _close_span(state, f"build:{context.name}", w0)
    return monitor_context_value(iface.spec, raw, state, context.name)


# ---------------------------------------------------------------------------
# compile / back-translate / link


def compile_program(program: SourceProgram, iface: SourceInterface):
    """Wrap a checked program so it accepts a raw context value.

    Pure wrapping: nothing touches the heap until the result runs.
    """

    def compiled(raw_ctx_value: Any, state: RunState) -> Program:
        guarded = monitor_context_value(iface.spec, raw_ctx_value, state, "ctx")
        imported = import_value(iface.spec, guarded, iface.hocs, state)
        if isinstance(imported, Inr):
            return Return(imported)
        return program.body(imported.value)

    compiled.interface = iface
    compiled.source = program
    return compiled


def back_translate(context: TargetContext, iface: SourceInterface):
    """The dual of compilation: a factory producing the checked-side context
    value by instantiating, monitoring, and importing the raw builder."""

    def materialize(state: RunState):
        raw = _instantiate(context, iface, state)
        return import_value(iface.spec, raw, iface.hocs, state)

    materialize.context = context
    return materialize


def link_target(compiled, context: TargetContext) -> WholeProgram:
    iface = compiled.interface

    def run_in(state: RunState):
        ops = CtxOps(state)
        w0 = state.world
        raw = context.builder(ops)
        _close_span(state, f"build:{context.name}", w0)
        return state.interpret(compiled(raw, state))

    return WholeProgram(name=f"{compiled.source.name}[{context.name}]", run_in=run_in)


def link_source(program: SourceProgram, ctx_factory) -> WholeProgram:
    ctx_name = getattr(getattr(ctx_factory, "context", None), "name", "src")

    def run_in(state: RunState):
        ctxv = ctx_factory(state)
        if isinstance(ctxv, Inr):
            return ctxv
        return state.interpret(program.body(ctxv.value))

    return WholeProgram(name=f"{program.name}[{ctx_name}]", run_in=run_in)


def const_context(value: Any):
    """Lift an already-checked context value into a linkable factory."""

    def materialize(state: RunState):
        return Inl(value)

    return materialize


# ---------------------------------------------------------------------------
# dual direction: the context has initial control


@dataclass(frozen=True)
class DualProgram:
    name: str
    setup: Callable[[RunState], Any]  # allocate program state, return the value
    spec: InterfaceSpec
    hocs: ContractTree


def link_dual(dual: DualProgram, context: TargetContext) -> WholeProgram:
    def run_in(state: RunState):
        progv = dual.setup(state)
        exported = export(dual.spec, progv, dual.hocs, state)
        ops = CtxOps(state)
        w0 = state.world
        main = context.builder(ops)
        result = main(exported) if callable(main) else main
        _close_span(state, f"dual:{context.name}", w0, require_same_labels=False)
        return result

    return WholeProgram(name=f"{context.name}[{dual.name}]", run_in=run_in)


# ---------------------------------------------------------------------------
# behavior


@dataclass(frozen=True)
class BehaviorRecord:
    outcome: tuple
    dump: tuple

    def lines(self):
        yield f"outcome: {self.outcome}"
        for line in self.dump:
            yield line


def render_world(w: World) -> tuple:
    out = []
    for addr in sorted(w.heap.addresses()):
        cell = w.heap.cell(addr)
        out.append(f"{addr}: {cell.tag} [{w.label_of(addr).value}] = {cell.value}")
    return tuple(out)


def beh(whole: WholeProgram, cfg: Optional[RunConfig] = None, state: Optional[RunState] = None) -> BehaviorRecord:
    """Deterministic run from the initial world; expected runtime failures
    become part of the record, monitor alarms propagate."""
    state = state if state is not None else RunState(config=cfg)
    try:
        result = whole.run_in(state)
        if isinstance(result, Inr):
            outcome = ("err", result.error.code.value, result.error.message)
        elif isinstance(result, (int, bool, str, type(None))):
            outcome = ("ok", result)
        else:
            outcome = ("ok", str(result))
    except RunFailure as failure:
        outcome = ("err", failure.code, str(failure))
    return BehaviorRecord(outcome=outcome, dump=render_world(state.world))


def beh_equal(b0: BehaviorRecord, b1: BehaviorRecord) -> bool:
    return b0 == b1
