"""Free-monad programs over the heap operations, plus witness/recall.

A program is a tree whose nodes are operation calls and whose continuations
are host functions.  The interpreter threads a world through the tree; in
paranoid mode it re-asserts the global invariant and every witnessed
predicate after each step.

Continuations run in program order, so host code inside them may also call
boundary-wrapped functions directly; those route their effects through the
same run state (and the same fuel meter) as the tree nodes themselves.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Union

from . import heap as hp
from . import labels as lb
from .errors import (
    InvariantViolation,
    OutOfFuel,
    RecallUnwitnessed,
    StabilityViolation,
    WitnessFalse,
)
from .heap import Heap, Preorder
from .labels import World
from .values import Addr, TypeTag, Value


@dataclass(frozen=True)
class StablePredicate:
    """A world predicate intended to be stable under every heap transition.

    Identity is the name: two predicates with equal tests but different
    names are distinct witness tokens.
    """

    name: str
    test: Callable[[World], bool]
    stability_hint: str = ""

    def holds(self, w: World) -> bool:
        return bool(self.test(w))


def shareable_pred(addr: Addr) -> StablePredicate:
    return StablePredicate(
        name=f"is_shareable@{addr}",
        test=lambda w: lb.is_shareable(w, addr),
        stability_hint="labels only evolve along the label preorder",
    )


def encapsulated_pred(addr: Addr) -> StablePredicate:
    return StablePredicate(
        name=f"is_encapsulated@{addr}",
        test=lambda w: lb.is_encapsulated(w, addr),
        stability_hint="labels only evolve along the label preorder",
    )


def private_pred(addr: Addr) -> StablePredicate:
    # deliberately unstable: private references can be relabeled
    return StablePredicate(
        name=f"is_private@{addr}",
        test=lambda w: lb.is_private(w, addr),
        stability_hint="NOT stable; negative control for the stability suite",
    )


def contains_pred(addr: Addr) -> StablePredicate:
    return StablePredicate(
        name=f"contains@{addr}",
        test=lambda w: w.heap.contains(addr),
        stability_hint="cells are never deallocated",
    )


# ---------------------------------------------------------------------------
# program trees


@dataclass(frozen=True)
class Return:
    value: Any


@dataclass(frozen=True)
class Read:
    addr: Addr
    cont: Callable[[Value], "Program"]


@dataclass(frozen=True)
class Write:
    addr: Addr
    value: Value
    cont: Callable[[None], "Program"]


@dataclass(frozen=True)
class Alloc:
    tag: TypeTag
    preorder: Preorder
    init: Value
    cont: Callable[[Addr], "Program"]


@dataclass(frozen=True)
class Witness:
    pred: StablePredicate
    cont: Callable[[None], "Program"]


@dataclass(frozen=True)
class Recall:
    pred: StablePredicate
    cont: Callable[[None], "Program"]


@dataclass(frozen=True)
class LabelShareable:
    addr: Addr
    cont: Callable[[None], "Program"]


@dataclass(frozen=True)
class LabelEncapsulated:
    addr: Addr
    cont: Callable[[None], "Program"]


Program = Union[
    Return, Read, Write, Alloc, Witness, Recall, LabelShareable, LabelEncapsulated
]

# Every node's continuation is a host function from the operation's result
# to the rest of the tree.  Keeping continuations as functions (even where
# the result is always None) is what lets unbounded programs unroll lazily
# under the fuel meter instead of forcing an infinite tree up front.


def ret(v: Any = None) -> Program:
    return Return(v)


def read_op(addr: Addr) -> Program:
    return Read(addr, Return)


def write_op(addr: Addr, v: Value) -> Program:
    return Write(addr, v, Return)


def alloc_op(tag: TypeTag, rel: Preorder, init: Value) -> Program:
    return Alloc(tag, rel, init, Return)


def witness_op(pred: StablePredicate) -> Program:
    return Witness(pred, Return)


def recall_op(pred: StablePredicate) -> Program:
    return Recall(pred, Return)


def label_shareable_op(addr: Addr) -> Program:
    return LabelShareable(addr, Return)


def label_encapsulated_op(addr: Addr) -> Program:
    return LabelEncapsulated(addr, Return)


def bind(m: Program, k: Callable[[Any], Program]) -> Program:
    """Graft k onto every leaf of m."""
    if isinstance(m, Return):
        return k(m.value)
    return dataclasses.replace(m, cont=lambda x, c=m.cont: bind(c(x), k))


def do(make_gen: Callable[[], Any]) -> Program:
    """Build a program from a generator that yields operation programs.

    Each `yield op` evaluates to the operation's result; a plain `return x`
    ends the program with x.  The generator is consumed once per run, so
    callers that run a program twice must rebuild it.
    """
    gen = make_gen()

    def step(send_val):
        try:
            op = gen.send(send_val)
        except StopIteration as stop:
            return Return(stop.value)
        return bind(op, step)

    return step(None)


# ---------------------------------------------------------------------------
# run state and interpreter


@dataclass
class RunConfig:
    check_level: str = "fast"  # "fast" | "paranoid"
    fuel: int = 1_000_000

    @property
    def paranoid(self) -> bool:
        return self.check_level == "paranoid"


@dataclass
class TraceLog:
    """Per-run observations consumed by the property campaigns."""

    worlds: list = field(default_factory=list)  # world after each step (paranoid)
    context_spans: list = field(default_factory=list)  # (name, w_before, w_after)
    contract_checks: int = 0
    purity_failures: int = 0
    steps: int = 0


class RunState:
    """Mutable interpreter state: current world, witnessed set, fuel."""

    def __init__(
        self,
        world: Optional[World] = None,
        witnesses: Optional[dict] = None,
        config: Optional[RunConfig] = None,
        trace: Optional[TraceLog] = None,
    ):
        self.world = world if world is not None else lb.initial_world()
        self.witnesses: dict[str, StablePredicate] = dict(witnesses or {})
        self.config = config or RunConfig()
        self.fuel = self.config.fuel
        self.trace = trace if trace is not None else TraceLog()

    # -- single-step operations; every one burns fuel and re-checks monitors

    def _tick(self) -> None:
        if self.fuel <= 0:
            raise OutOfFuel(f"fuel exhausted after {self.trace.steps} steps")
        self.fuel -= 1
        self.trace.steps += 1

    def _after_step(self) -> None:
        if self.config.paranoid:
            if not lb.lr_inv(self.world):
                raise InvariantViolation(
                    f"lr_inv broken after step {self.trace.steps}"
                )
            for pred in self.witnesses.values():
                if not pred.holds(self.world):
                    raise StabilityViolation(
                        f"witnessed predicate {pred.name} no longer holds"
                    )
            self.trace.worlds.append(self.world)

    def op_read(self, addr: Addr) -> Value:
        self._tick()
        v = lb.lr_read(self.world, addr)
        self._after_step()
        return v

    def op_write(self, addr: Addr, v: Value) -> None:
        self._tick()
        self.world = lb.lr_write(self.world, addr, v)
        self._after_step()

    def op_alloc(self, tag: TypeTag, rel: Preorder, init: Value) -> Addr:
        self._tick()
        addr, w1 = lb.lr_alloc(self.world, tag, rel, init)
        self.world = w1
        self._after_step()
        return addr

    def op_witness(self, pred: StablePredicate) -> None:
        self._tick()
        if not pred.holds(self.world):
            raise WitnessFalse(f"cannot witness {pred.name}: false on current heap")
        self.witnesses[pred.name] = pred
        self._after_step()

    def op_recall(self, pred: StablePredicate) -> None:
        self._tick()
        if pred.name not in self.witnesses:
            raise RecallUnwitnessed(f"{pred.name} was never witnessed on this run")
        if not pred.holds(self.world):
            raise StabilityViolation(
                f"recalled {pred.name} does not hold: stability claim was wrong"
            )
        self._after_step()

    def op_label_shareable(self, addr: Addr) -> None:
        self._tick()
        self.world = lb.label_shareable(self.world, addr)
        self._after_step()

    def op_label_encapsulated(self, addr: Addr) -> None:
        self._tick()
        self.world = lb.label_encapsulated(self.world, addr)
        self._after_step()

    # -- tree interpretation; re-entrant, shares fuel with direct op calls

    def interpret(self, program: Program) -> Any:
        node = program
        while True:
            if isinstance(node, Return):
                return node.value
            if isinstance(node, Read):
                node = node.cont(self.op_read(node.addr))
            elif isinstance(node, Write):
                self.op_write(node.addr, node.value)
                node = node.cont(None)
            elif isinstance(node, Alloc):
                node = node.cont(self.op_alloc(node.tag, node.preorder, node.init))
            elif isinstance(node, Witness):
                self.op_witness(node.pred)
                node = node.cont(None)
            elif isinstance(node, Recall):
                self.op_recall(node.pred)
                node = node.cont(None)
            elif isinstance(node, LabelShareable):
                self.op_label_shareable(node.addr)
                node = node.cont(None)
            elif isinstance(node, LabelEncapsulated):
                self.op_label_encapsulated(node.addr)
                node = node.cont(None)
            else:
                raise TypeError(f"not a program node: {node!r}")


def run(
    m: Program,
    h0: Heap,
    w0: Optional[dict] = None,
    cfg: Optional[RunConfig] = None,
) -> tuple[Any, Heap, dict]:
    """Interpret m from heap h0 with the witnessed set w0 (name -> predicate).

    Every predicate in w0 must hold on h0.  Returns the result, the final
    heap, and the final witnessed set.
    """
    world = World(heap=h0, labels={})
    witnesses = dict(w0 or {})
    for pred in witnesses.values():
        if not pred.holds(world):
            raise WitnessFalse(f"precondition: {pred.name} false on the initial heap")
    state = RunState(world=world, witnesses=witnesses, config=cfg)
    result = state.interpret(m)
    return result, state.world.heap, dict(state.witnesses)


def run_closed(m: Program, cfg: Optional[RunConfig] = None) -> tuple[Any, Heap]:
    """Run a closed program from the canonical initial heap, nothing witnessed."""
    result, h1, _ = run(m, hp.EMPTY_HEAP, {}, cfg)
    return result, h1
