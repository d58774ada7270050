"""Higher-order contracts: interface descriptions and import/export wrappers.

Import and export mediate between two calling conventions:

  * checked side: arrows are host functions from a value to a program tree;
  * raw side: arrows are host functions from a value to a value, with all
    effects routed through the live run state.

Contract failure is a value (Inr carrying an Err); contract checks may read
the current world but never change it, and a purity monitor asserts exactly
that around every check invocation.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Callable, Optional, Union

from . import mutants
from .errors import PurityViolation
from .labels import World
from .programs import TraceLog
from .values import (
    LList,
    TypeTag,
    Value,
    VInl,
    VInr,
    VPair,
    VRef,
    conforms,
)


class ErrCode(enum.Enum):
    PRE_VIOLATION = "PreViolation"
    POST_VIOLATION = "PostViolation"
    REFINEMENT_VIOLATION = "RefinementViolation"
    IMPORT_FAILURE = "ImportFailure"


@dataclass(frozen=True)
class Err:
    code: ErrCode
    message: str

    def __str__(self):
        return f"{self.code.value}: {self.message}"


@dataclass(frozen=True)
class Inl:
    value: Any

    def __str__(self):
        return f"Inl({self.value})"


@dataclass(frozen=True)
class Inr:
    error: Err

    def __str__(self):
        return f"Inr({self.error})"


Either = Union[Inl, Inr]


# ---------------------------------------------------------------------------
# interface descriptions


@dataclass(frozen=True)
class BaseS:
    tag: TypeTag


@dataclass(frozen=True)
class PairS:
    first: "InterfaceSpec"
    second: "InterfaceSpec"


@dataclass(frozen=True)
class SumS:
    left: "InterfaceSpec"
    right: "InterfaceSpec"


@dataclass(frozen=True)
class RefS:
    target: TypeTag


@dataclass(frozen=True)
class LListS:
    elem: TypeTag


@dataclass(frozen=True)
class ExecPre:
    check: Callable[[Value, World], Optional[Err]]


@dataclass(frozen=True)
class ExecPost:
    select: Callable[[Value, World], Any]
    verify: Callable[[Any, Any, World], Optional[Err]]


@dataclass(frozen=True)
class ArrowS:
    arg: "InterfaceSpec"
    res: "InterfaceSpec"
    pre: Optional[ExecPre] = None
    post: Optional[ExecPost] = None


@dataclass(frozen=True)
class RefinedS:
    base: "InterfaceSpec"  # non-arrow: behavioral checks belong on arrows
    name: str
    check: Callable[[Value], bool]

    def __post_init__(self):
        if isinstance(self.base, ArrowS):
            raise TypeError("refinements are not allowed on arrow nodes")


InterfaceSpec = Union[BaseS, PairS, SumS, RefS, LListS, ArrowS, RefinedS]


# ---------------------------------------------------------------------------
# contract trees (same shape as the spec, carrying the executable checks)


@dataclass(frozen=True)
class LeafC:
    pass


@dataclass(frozen=True)
class PairC:
    first: "ContractTree"
    second: "ContractTree"


@dataclass(frozen=True)
class SumC:
    left: "ContractTree"
    right: "ContractTree"


@dataclass(frozen=True)
class RefinedC:
    inner: "ContractTree"


@dataclass(frozen=True)
class ArrowC:
    pre: Optional[ExecPre]
    post: Optional[ExecPost]
    arg: "ContractTree"
    res: "ContractTree"


ContractTree = Union[LeafC, PairC, SumC, RefinedC, ArrowC]

LEAF = LeafC()


def hocs_of(spec: InterfaceSpec) -> ContractTree:
    """The contract tree carrying the checks declared inline on the spec."""
    if isinstance(spec, (BaseS, RefS, LListS)):
        return LEAF
    if isinstance(spec, PairS):
        return PairC(hocs_of(spec.first), hocs_of(spec.second))
    if isinstance(spec, SumS):
        return SumC(hocs_of(spec.left), hocs_of(spec.right))
    if isinstance(spec, RefinedS):
        return RefinedC(hocs_of(spec.base))
    return ArrowC(spec.pre, spec.post, hocs_of(spec.arg), hocs_of(spec.res))


def shape_matches(spec: InterfaceSpec, tree: ContractTree) -> bool:
    if isinstance(spec, (BaseS, RefS, LListS)):
        return isinstance(tree, LeafC)
    if isinstance(spec, PairS):
        return (
            isinstance(tree, PairC)
            and shape_matches(spec.first, tree.first)
            and shape_matches(spec.second, tree.second)
        )
    if isinstance(spec, SumS):
        return (
            isinstance(tree, SumC)
            and shape_matches(spec.left, tree.left)
            and shape_matches(spec.right, tree.right)
        )
    if isinstance(spec, RefinedS):
        return isinstance(tree, RefinedC) and shape_matches(spec.base, tree.inner)
    if isinstance(spec, ArrowS):
        return (
            isinstance(tree, ArrowC)
            and shape_matches(spec.arg, tree.arg)
            and shape_matches(spec.res, tree.res)
        )
    return False


def value_fits_spec(spec: InterfaceSpec, v: Any) -> bool:
    """Shallow conformance of a boundary value to a spec's data shape."""
    if isinstance(spec, BaseS):
        return not callable(v) and conforms(v, spec.tag)
    if isinstance(spec, RefS):
        return isinstance(v, VRef) and v.target == spec.target
    if isinstance(spec, LListS):
        return isinstance(v, VRef) and v.target == LList(spec.elem)
    if isinstance(spec, PairS):
        return (
            isinstance(v, VPair)
            and value_fits_spec(spec.first, v.first)
            and value_fits_spec(spec.second, v.second)
        )
    if isinstance(spec, SumS):
        if isinstance(v, VInl):
            return value_fits_spec(spec.left, v.payload)
        if isinstance(v, VInr):
            return value_fits_spec(spec.right, v.payload)
        return False
    if isinstance(spec, RefinedS):
        return value_fits_spec(spec.base, v)
    return callable(v)


def has_refinements(spec: InterfaceSpec) -> bool:
    if isinstance(spec, RefinedS):
        return True
    if isinstance(spec, PairS):
        return has_refinements(spec.first) or has_refinements(spec.second)
    if isinstance(spec, SumS):
        return has_refinements(spec.left) or has_refinements(spec.right)
    return False


def arrow_export_uses_either(spec: ArrowS) -> bool:
    """Exported arrows grow an error channel only when they can actually fail."""
    return spec.pre is not None or has_refinements(spec.arg) or has_refinements(spec.res)


# ---------------------------------------------------------------------------
# world views and the check-purity monitor


class ConstView:
    """A frozen world for wrapping first-order data outside any run."""

    def __init__(self, world: World):
        self.world = world
        self.trace = TraceLog()


def _run_check(env, fn, *args):
    """Invoke a contract check under the read-only monitor."""
    before = env.world
    out = fn(*args)
    after = env.world
    trace = getattr(env, "trace", None)
    if trace is not None:
        trace.contract_checks += 1
    if before != after:
        if trace is not None:
            trace.purity_failures += 1
        raise PurityViolation("a contract check modified the world")
    return out


def refinement_errors(spec: InterfaceSpec, v: Any, env) -> Optional[Err]:
    """First refinement violated by v anywhere in a first-order spec."""
    if isinstance(spec, RefinedS):
        err = refinement_errors(spec.base, v, env)
        if err is not None:
            return err
        if not _run_check(env, spec.check, v):
            return Err(ErrCode.REFINEMENT_VIOLATION, f"refinement {spec.name} failed on {v}")
        return None
    if isinstance(spec, PairS) and isinstance(v, VPair):
        return refinement_errors(spec.first, v.first, env) or refinement_errors(
            spec.second, v.second, env
        )
    if isinstance(spec, SumS):
        if isinstance(v, VInl):
            return refinement_errors(spec.left, v.payload, env)
        if isinstance(v, VInr):
            return refinement_errors(spec.right, v.payload, env)
    return None


# ---------------------------------------------------------------------------
# export / import


def export(spec: InterfaceSpec, v: Any, hocs: ContractTree, env) -> Any:
    """Lower a checked-side value to the raw side.

    Data passes through structurally.  Arrows are wrapped so that each call
    runs the declared pre-check, imports the argument, interprets the
    underlying program against the live run state, exports the result, and
    re-checks any result refinements.  Wrap time itself never fails.
    """
    if isinstance(spec, (BaseS, RefS, LListS)):
        return v
    if isinstance(spec, RefinedS):
        return export(spec.base, v, hocs.inner, env)
    if isinstance(spec, PairS):
        return VPair(
            export(spec.first, v.first, hocs.first, env),
            export(spec.second, v.second, hocs.second, env),
        )
    if isinstance(spec, SumS):
        if isinstance(v, VInl):
            return VInl(export(spec.left, v.payload, hocs.left, env))
        return VInr(export(spec.right, v.payload, hocs.right, env))
    if isinstance(spec, ArrowS):
        return _export_arrow(spec, v, hocs, env)
    raise TypeError(f"not an interface spec: {spec!r}")


def _export_arrow(spec: ArrowS, f, hocs: ArrowC, env):
    with_either = arrow_export_uses_either(spec)

    def wrapped(x):
        if hocs.pre is not None:
            err = _run_check(env, hocs.pre.check, x, env.world)
            if err is not None:
                return Inr(err)
        arg_in = import_value(spec.arg, x, hocs.arg, env)
        if isinstance(arg_in, Inr):
            return arg_in
        program = f(arg_in.value)
        result = env.interpret(program)
        out = export(spec.res, result, hocs.res, env)
        res_err = refinement_errors(spec.res, out, env)
        if res_err is not None:
            return Inr(res_err)
        return Inl(out) if with_either else out

    return wrapped


def import_value(spec: InterfaceSpec, v: Any, hocs: ContractTree, env) -> Either:
    """Raise a raw-side value to the checked side, adding dynamic checks.

    Refinements are checked immediately.  Arrows import without immediate
    failure: each call exports the argument, runs the stateful contract's
    select, invokes the underlying raw function, imports the result, and
    runs verify, turning a violation into the call's Inr result.  Heap
    effects of a failed call are not rolled back.
    """
    if isinstance(spec, (BaseS, RefS, LListS)):
        if not value_fits_spec(spec, v):
            return Inr(Err(ErrCode.IMPORT_FAILURE, f"{v} does not fit {spec}"))
        return Inl(v)
    if isinstance(spec, RefinedS):
        base = import_value(spec.base, v, hocs.inner, env)
        if isinstance(base, Inr):
            return base
        if not _run_check(env, spec.check, base.value):
            return Inr(
                Err(ErrCode.REFINEMENT_VIOLATION, f"refinement {spec.name} failed on {v}")
            )
        return base
    if isinstance(spec, PairS):
        if not isinstance(v, VPair):
            return Inr(Err(ErrCode.IMPORT_FAILURE, f"{v} is not a pair"))
        a = import_value(spec.first, v.first, hocs.first, env)
        if isinstance(a, Inr):
            return a
        b = import_value(spec.second, v.second, hocs.second, env)
        if isinstance(b, Inr):
            return b
        return Inl(VPair(a.value, b.value))
    if isinstance(spec, SumS):
        if isinstance(v, VInl):
            p = import_value(spec.left, v.payload, hocs.left, env)
            return p if isinstance(p, Inr) else Inl(VInl(p.value))
        if isinstance(v, VInr):
            p = import_value(spec.right, v.payload, hocs.right, env)
            return p if isinstance(p, Inr) else Inl(VInr(p.value))
        return Inr(Err(ErrCode.IMPORT_FAILURE, f"{v} is not a sum"))
    if isinstance(spec, ArrowS):
        if not callable(v):
            return Inr(Err(ErrCode.IMPORT_FAILURE, f"{v} is not callable"))
        return Inl(_import_arrow(spec, v, hocs, env))
    raise TypeError(f"not an interface spec: {spec!r}")


def _import_arrow(spec: ArrowS, f, hocs: ArrowC, env):
    def wrapped(x) -> Either:
        out = export(spec.arg, x, hocs.arg, env)
        captured = None
        if hocs.post is not None:
            captured = _run_check(env, hocs.post.select, x, env.world)
        raw = f(out)
        if isinstance(raw, Inr):
            return raw
        if isinstance(raw, Inl):
            raw = raw.value
        back = import_value(spec.res, raw, hocs.res, env)
        if isinstance(back, Inr):
            return back
        if hocs.post is not None and not mutants.is_active("import_no_post"):
            err = _run_check(env, hocs.post.verify, captured, back.value, env.world)
            if err is not None:
                return Inr(err)
        return Inl(back.value)

    return wrapped


# ---------------------------------------------------------------------------
# wrapper hygiene


def spec_addr_slots(spec: InterfaceSpec, v: Any) -> list:
    """Addresses at the spec's data positions, in traversal order."""
    if isinstance(spec, (RefS, LListS)):
        return [v.addr] if isinstance(v, VRef) else []
    if isinstance(spec, RefinedS):
        return spec_addr_slots(spec.base, v)
    if isinstance(spec, PairS) and isinstance(v, VPair):
        return spec_addr_slots(spec.first, v.first) + spec_addr_slots(spec.second, v.second)
    if isinstance(spec, SumS):
        if isinstance(v, VInl):
            return spec_addr_slots(spec.left, v.payload)
        if isinstance(v, VInr):
            return spec_addr_slots(spec.right, v.payload)
    return []


def preserves_refs_check(spec: InterfaceSpec, v_in: Any, v_out: Any) -> bool:
    """Wrapping introduces no new addresses at corresponding positions.

    Arrow positions hold vacuously here; their per-call behavior is covered
    by trace-based tests.
    """
    return spec_addr_slots(spec, v_in) == spec_addr_slots(spec, v_out)
