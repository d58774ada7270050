"""A deeply embedded, simply typed, fuel-bounded language with first-order
references: the concrete syntax for arbitrary untrusted code.

Concrete syntax is s-expressions, one top-level expression per `.sref` file:

    e ::= <int> | unit | true | false | <name>
        | (lam (x t) e) | (fix f (x t) t e) | (e e) | (let (x e) e)
        | (+ e e) | (- e e) | (* e e) | (= e e) | (< e e) | (<= e e)
        | (if e e e) | (pair e e) | (fst e) | (snd e)
        | (inl t e) | (inr t e)        ; t annotates the other component
        | (case e (x e) (y e))
        | (alloc e) | (! e) | (:= e e)
        | (llnil t) | (llcons e e) | (casell e e (h t e))
    t ::= unit | int | bool | (pair t t) | (sum t t)
        | (ref t) | (llist t) | (-> t t)

The language has no witness/recall and no way to observe labels; its only
effects are the three operations handed to it at link time, so every
allocation it makes is shareable.  Recursion is a fix form that burns
interpreter fuel on each unfolding.
"""
from __future__ import annotations

import random
import re
from dataclasses import dataclass
from typing import Optional, Union

from .contracts import ArrowS, BaseS, InterfaceSpec, LListS, PairS, RefS, RefinedS, SumS
from .errors import GenerationExhausted, InterfaceMismatch, SrefParseError, TargetTypeError
from .linker import CtxOps, TargetContext
from .values import (
    Bool,
    Int,
    LList,
    Pair,
    Ref,
    Sum,
    TypeTag,
    Unit,
    V_NIL,
    V_UNIT,
    VBool,
    VInl,
    VInr,
    VInt,
    VLLCons,
    VLLNil,
    VPair,
    VRef,
)

# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class TUnit:
    def __str__(self):
        return "unit"


@dataclass(frozen=True)
class TInt:
    def __str__(self):
        return "int"


@dataclass(frozen=True)
class TBool:
    def __str__(self):
        return "bool"


@dataclass(frozen=True)
class TPair:
    first: "SrcType"
    second: "SrcType"

    def __str__(self):
        return f"(pair {self.first} {self.second})"


@dataclass(frozen=True)
class TSum:
    left: "SrcType"
    right: "SrcType"

    def __str__(self):
        return f"(sum {self.left} {self.right})"


@dataclass(frozen=True)
class TRef:
    target: "SrcType"

    def __str__(self):
        return f"(ref {self.target})"


@dataclass(frozen=True)
class TLList:
    elem: "SrcType"

    def __str__(self):
        return f"(llist {self.elem})"


@dataclass(frozen=True)
class TArrow:
    arg: "SrcType"
    res: "SrcType"

    def __str__(self):
        return f"(-> {self.arg} {self.res})"


SrcType = Union[TUnit, TInt, TBool, TPair, TSum, TRef, TLList, TArrow]

T_UNIT = TUnit()
T_INT = TInt()
T_BOOL = TBool()


def is_full_ground(t: SrcType) -> bool:
    if isinstance(t, (TUnit, TInt, TBool)):
        return True
    if isinstance(t, (TPair,)):
        return is_full_ground(t.first) and is_full_ground(t.second)
    if isinstance(t, TSum):
        return is_full_ground(t.left) and is_full_ground(t.right)
    if isinstance(t, TRef):
        return is_full_ground(t.target)
    if isinstance(t, TLList):
        return is_full_ground(t.elem)
    return False


def srctype_to_tag(t: SrcType) -> TypeTag:
    if isinstance(t, TUnit):
        return Unit()
    if isinstance(t, TInt):
        return Int()
    if isinstance(t, TBool):
        return Bool()
    if isinstance(t, TPair):
        return Pair(srctype_to_tag(t.first), srctype_to_tag(t.second))
    if isinstance(t, TSum):
        return Sum(srctype_to_tag(t.left), srctype_to_tag(t.right))
    if isinstance(t, TRef):
        return Ref(srctype_to_tag(t.target))
    if isinstance(t, TLList):
        return LList(srctype_to_tag(t.elem))
    raise TargetTypeError("FunctionInStore", f"{t} is not a storable type")


def tag_to_srctype(tag: TypeTag) -> SrcType:
    if isinstance(tag, Unit):
        return T_UNIT
    if isinstance(tag, Int):
        return T_INT
    if isinstance(tag, Bool):
        return T_BOOL
    if isinstance(tag, Pair):
        return TPair(tag_to_srctype(tag.first), tag_to_srctype(tag.second))
    if isinstance(tag, Sum):
        return TSum(tag_to_srctype(tag.left), tag_to_srctype(tag.right))
    if isinstance(tag, Ref):
        return TRef(tag_to_srctype(tag.target))
    return TLList(tag_to_srctype(tag.elem))


def spec_to_srctype(spec: InterfaceSpec) -> SrcType:
    """The type at which untrusted code sees a boundary value."""
    if isinstance(spec, BaseS):
        return tag_to_srctype(spec.tag)
    if isinstance(spec, RefS):
        return TRef(tag_to_srctype(spec.target))
    if isinstance(spec, LListS):
        return TRef(TLList(tag_to_srctype(spec.elem)))
    if isinstance(spec, PairS):
        return TPair(spec_to_srctype(spec.first), spec_to_srctype(spec.second))
    if isinstance(spec, SumS):
        return TSum(spec_to_srctype(spec.left), spec_to_srctype(spec.right))
    if isinstance(spec, RefinedS):
        return spec_to_srctype(spec.base)
    if isinstance(spec, ArrowS):
        if spec.pre is not None:
            raise InterfaceMismatch(
                "arrows with pre-checks have no plain target type"
            )
        return TArrow(spec_to_srctype(spec.arg), spec_to_srctype(spec.res))
    raise InterfaceMismatch(f"not an interface spec: {spec!r}")


# ---------------------------------------------------------------------------
# expressions


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Lam:
    param: str
    param_ty: SrcType
    body: "Expr"


@dataclass(frozen=True)
class Fix:
    fname: str
    param: str
    param_ty: SrcType
    res_ty: SrcType
    body: "Expr"


@dataclass(frozen=True)
class App:
    fn: "Expr"
    arg: "Expr"


@dataclass(frozen=True)
class Let:
    name: str
    bound: "Expr"
    body: "Expr"


@dataclass(frozen=True)
class LitUnit:
    pass


@dataclass(frozen=True)
class LitInt:
    value: int


@dataclass(frozen=True)
class LitBool:
    value: bool


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * = < <=
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class If:
    cond: "Expr"
    then: "Expr"
    other: "Expr"


@dataclass(frozen=True)
class PairE:
    first: "Expr"
    second: "Expr"


@dataclass(frozen=True)
class Fst:
    pair: "Expr"


@dataclass(frozen=True)
class Snd:
    pair: "Expr"


@dataclass(frozen=True)
class InlE:
    right_ty: SrcType
    payload: "Expr"


@dataclass(frozen=True)
class InrE:
    left_ty: SrcType
    payload: "Expr"


@dataclass(frozen=True)
class Case:
    scrut: "Expr"
    lname: str
    lbranch: "Expr"
    rname: str
    rbranch: "Expr"


@dataclass(frozen=True)
class AllocE:
    init: "Expr"


@dataclass(frozen=True)
class DerefE:
    ref: "Expr"


@dataclass(frozen=True)
class AssignE:
    ref: "Expr"
    value: "Expr"


@dataclass(frozen=True)
class LLNilE:
    elem_ty: SrcType


@dataclass(frozen=True)
class LLConsE:
    head: "Expr"
    tail: "Expr"


@dataclass(frozen=True)
class CaseLL:
    scrut: "Expr"
    nil_branch: "Expr"
    hname: str
    tname: str
    cons_branch: "Expr"


Expr = Union[
    Var, Lam, Fix, App, Let, LitUnit, LitInt, LitBool, BinOp, If,
    PairE, Fst, Snd, InlE, InrE, Case, AllocE, DerefE, AssignE,
    LLNilE, LLConsE, CaseLL,
]


# ---------------------------------------------------------------------------
# parser


_INT_RE = re.compile(r"-?[0-9]+$")
_BINOPS = ("+", "-", "*", "=", "<", "<=")


@dataclass(frozen=True)
class _Tok:
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
        elif c.isspace():
            col += 1
            i += 1
        elif c == ";":
            while i < len(text) and text[i] != "\n":
                i += 1
        elif c in "()":
            toks.append(_Tok(c, line, col))
            col += 1
            i += 1
        else:
            start = i
            start_col = col
            while i < len(text) and not text[i].isspace() and text[i] not in "();":
                i += 1
                col += 1
            toks.append(_Tok(text[start:i], line, start_col))
    return toks


def _read_sexpr(toks: list[_Tok], pos: int):
    if pos >= len(toks):
        last = toks[-1] if toks else _Tok("", 1, 1)
        raise SrefParseError("unexpected end of input", last.line, last.col)
    tok = toks[pos]
    if tok.text == "(":
        items = []
        pos += 1
        while pos < len(toks) and toks[pos].text != ")":
            item, pos = _read_sexpr(toks, pos)
            items.append(item)
        if pos >= len(toks):
            raise SrefParseError("missing )", tok.line, tok.col)
        return (items, tok), pos + 1
    if tok.text == ")":
        raise SrefParseError("unexpected )", tok.line, tok.col)
    return (tok.text, tok), pos + 1


def _parse_type(sx) -> SrcType:
    node, tok = sx
    if isinstance(node, str):
        if node == "unit":
            return T_UNIT
        if node == "int":
            return T_INT
        if node == "bool":
            return T_BOOL
        raise SrefParseError(f"unknown type {node!r}", tok.line, tok.col)
    if not node:
        raise SrefParseError("empty type", tok.line, tok.col)
    head = node[0][0]
    if head == "pair" and len(node) == 3:
        return TPair(_parse_type(node[1]), _parse_type(node[2]))
    if head == "sum" and len(node) == 3:
        return TSum(_parse_type(node[1]), _parse_type(node[2]))
    if head == "ref" and len(node) == 2:
        return TRef(_parse_type(node[1]))
    if head == "llist" and len(node) == 2:
        return TLList(_parse_type(node[1]))
    if head == "->" and len(node) == 3:
        return TArrow(_parse_type(node[1]), _parse_type(node[2]))
    raise SrefParseError(f"bad type form {head!r}", tok.line, tok.col)


def _binder(sx, what: str) -> tuple[str, "SrcType"]:
    node, tok = sx
    if not isinstance(node, list) or len(node) != 2 or not isinstance(node[0][0], str):
        raise SrefParseError(f"{what} wants (name type)", tok.line, tok.col)
    return node[0][0], _parse_type(node[1])


def _name_of(sx, what: str) -> str:
    node, tok = sx
    if not isinstance(node, str):
        raise SrefParseError(f"{what} wants a name", tok.line, tok.col)
    return node


def _parse_expr(sx) -> Expr:
    node, tok = sx
    if isinstance(node, str):
        if _INT_RE.match(node):
            return LitInt(int(node))
        if node == "unit":
            return LitUnit()
        if node == "true":
            return LitBool(True)
        if node == "false":
            return LitBool(False)
        return Var(node)
    if not node:
        raise SrefParseError("empty form", tok.line, tok.col)
    head = node[0][0]

    def arity(n):
        if len(node) != n + 1:
            raise SrefParseError(f"{head} wants {n} argument(s)", tok.line, tok.col)

    if isinstance(head, str):
        if head == "lam":
            arity(2)
            param, ty = _binder(node[1], "lam")
            return Lam(param, ty, _parse_expr(node[2]))
        if head == "fix":
            arity(4)
            fname = _name_of(node[1], "fix")
            param, ty = _binder(node[2], "fix")
            return Fix(fname, param, ty, _parse_type(node[3]), _parse_expr(node[4]))
        if head == "let":
            arity(2)
            inner, itok = node[1]
            if not isinstance(inner, list) or len(inner) != 2:
                raise SrefParseError("let wants (name expr)", itok.line, itok.col)
            return Let(_name_of(inner[0], "let"), _parse_expr(inner[1]), _parse_expr(node[2]))
        if head in _BINOPS:
            arity(2)
            return BinOp(head, _parse_expr(node[1]), _parse_expr(node[2]))
        if head == "if":
            arity(3)
            return If(_parse_expr(node[1]), _parse_expr(node[2]), _parse_expr(node[3]))
        if head == "pair":
            arity(2)
            return PairE(_parse_expr(node[1]), _parse_expr(node[2]))
        if head == "fst":
            arity(1)
            return Fst(_parse_expr(node[1]))
        if head == "snd":
            arity(1)
            return Snd(_parse_expr(node[1]))
        if head == "inl":
            arity(2)
            return InlE(_parse_type(node[1]), _parse_expr(node[2]))
        if head == "inr":
            arity(2)
            return InrE(_parse_type(node[1]), _parse_expr(node[2]))
        if head == "case":
            arity(3)
            ln, ltok = node[2]
            rn, rtok = node[3]
            if not (isinstance(ln, list) and len(ln) == 2):
                raise SrefParseError("case wants (name expr) branches", ltok.line, ltok.col)
            if not (isinstance(rn, list) and len(rn) == 2):
                raise SrefParseError("case wants (name expr) branches", rtok.line, rtok.col)
            return Case(
                _parse_expr(node[1]),
                _name_of(ln[0], "case"), _parse_expr(ln[1]),
                _name_of(rn[0], "case"), _parse_expr(rn[1]),
            )
        if head == "alloc":
            arity(1)
            return AllocE(_parse_expr(node[1]))
        if head == "!":
            arity(1)
            return DerefE(_parse_expr(node[1]))
        if head == ":=":
            arity(2)
            return AssignE(_parse_expr(node[1]), _parse_expr(node[2]))
        if head == "llnil":
            arity(1)
            return LLNilE(_parse_type(node[1]))
        if head == "llcons":
            arity(2)
            return LLConsE(_parse_expr(node[1]), _parse_expr(node[2]))
        if head == "casell":
            arity(3)
            cn, ctok = node[3]
            if not (isinstance(cn, list) and len(cn) == 3):
                raise SrefParseError(
                    "casell wants (head tail expr) as the cons branch", ctok.line, ctok.col
                )
            return CaseLL(
                _parse_expr(node[1]),
                _parse_expr(node[2]),
                _name_of(cn[0], "casell"),
                _name_of(cn[1], "casell"),
                _parse_expr(cn[2]),
            )
    # anything else is application
    expr = _parse_expr(node[0])
    for arg in node[1:]:
        expr = App(expr, _parse_expr(arg))
    return expr


def parse(text: str) -> Expr:
    toks = _tokenize(text)
    if not toks:
        raise SrefParseError("empty input", 1, 1)
    sx, pos = _read_sexpr(toks, 0)
    if pos != len(toks):
        extra = toks[pos]
        raise SrefParseError("trailing tokens", extra.line, extra.col)
    return _parse_expr(sx)


# ---------------------------------------------------------------------------
# typechecker


def _validate_annotation(t: SrcType) -> None:
    if isinstance(t, (TRef, TLList)):
        inner = t.target if isinstance(t, TRef) else t.elem
        if not is_full_ground(inner):
            raise TargetTypeError(
                "FunctionInStore", f"{t} stores a function type"
            )
        _validate_annotation(inner)
    elif isinstance(t, TPair):
        _validate_annotation(t.first)
        _validate_annotation(t.second)
    elif isinstance(t, TSum):
        _validate_annotation(t.left)
        _validate_annotation(t.right)
    elif isinstance(t, TArrow):
        _validate_annotation(t.arg)
        _validate_annotation(t.res)


def typecheck(e: Expr, env: Optional[dict] = None, types: Optional[dict] = None) -> SrcType:
    """Infer the type of e, raising TargetTypeError with a reason on failure.

    When a `types` dict is supplied it is filled with id(node) -> type for
    every subexpression; the evaluator uses it for allocation tags.
    """
    env = env or {}
    types = types if types is not None else {}

    def expect(t, want, what):
        if t != want:
            raise TargetTypeError("Mismatch", f"{what}: expected {want}, found {t}")

    def go(e, env) -> SrcType:
        if isinstance(e, Var):
            if e.name not in env:
                raise TargetTypeError("UnboundVar", f"unknown name {e.name!r}")
            t = env[e.name]
        elif isinstance(e, Lam):
            _validate_annotation(e.param_ty)
            t = TArrow(e.param_ty, go(e.body, {**env, e.param: e.param_ty}))
        elif isinstance(e, Fix):
            _validate_annotation(e.param_ty)
            _validate_annotation(e.res_ty)
            fty = TArrow(e.param_ty, e.res_ty)
            body_t = go(e.body, {**env, e.fname: fty, e.param: e.param_ty})
            expect(body_t, e.res_ty, "fix body")
            t = fty
        elif isinstance(e, App):
            fn_t = go(e.fn, env)
            if not isinstance(fn_t, TArrow):
                raise TargetTypeError("NotAFunction", f"cannot apply {fn_t}")
            arg_t = go(e.arg, env)
            expect(arg_t, fn_t.arg, "application argument")
            t = fn_t.res
        elif isinstance(e, Let):
            t = go(e.body, {**env, e.name: go(e.bound, env)})
        elif isinstance(e, LitUnit):
            t = T_UNIT
        elif isinstance(e, LitInt):
            t = T_INT
        elif isinstance(e, LitBool):
            t = T_BOOL
        elif isinstance(e, BinOp):
            expect(go(e.left, env), T_INT, f"left operand of {e.op}")
            expect(go(e.right, env), T_INT, f"right operand of {e.op}")
            t = T_INT if e.op in ("+", "-", "*") else T_BOOL
        elif isinstance(e, If):
            expect(go(e.cond, env), T_BOOL, "if condition")
            t = go(e.then, env)
            expect(go(e.other, env), t, "else branch")
        elif isinstance(e, PairE):
            t = TPair(go(e.first, env), go(e.second, env))
        elif isinstance(e, Fst):
            pt = go(e.pair, env)
            if not isinstance(pt, TPair):
                raise TargetTypeError("NotAPair", f"fst of {pt}")
            t = pt.first
        elif isinstance(e, Snd):
            pt = go(e.pair, env)
            if not isinstance(pt, TPair):
                raise TargetTypeError("NotAPair", f"snd of {pt}")
            t = pt.second
        elif isinstance(e, InlE):
            _validate_annotation(e.right_ty)
            t = TSum(go(e.payload, env), e.right_ty)
        elif isinstance(e, InrE):
            _validate_annotation(e.left_ty)
            t = TSum(e.left_ty, go(e.payload, env))
        elif isinstance(e, Case):
            st = go(e.scrut, env)
            if not isinstance(st, TSum):
                raise TargetTypeError("NotASum", f"case of {st}")
            t = go(e.lbranch, {**env, e.lname: st.left})
            expect(go(e.rbranch, {**env, e.rname: st.right}), t, "case branches")
        elif isinstance(e, AllocE):
            it = go(e.init, env)
            if not is_full_ground(it):
                raise TargetTypeError("FunctionInStore", f"cannot store {it}")
            t = TRef(it)
        elif isinstance(e, DerefE):
            rt = go(e.ref, env)
            if not isinstance(rt, TRef):
                raise TargetTypeError("NotARef", f"dereference of {rt}")
            t = rt.target
        elif isinstance(e, AssignE):
            rt = go(e.ref, env)
            if not isinstance(rt, TRef):
                raise TargetTypeError("NotARef", f"assignment to {rt}")
            expect(go(e.value, env), rt.target, "assignment value")
            t = T_UNIT
        elif isinstance(e, LLNilE):
            _validate_annotation(e.elem_ty)
            if not is_full_ground(e.elem_ty):
                raise TargetTypeError("FunctionInStore", f"cannot store {e.elem_ty}")
            t = TLList(e.elem_ty)
        elif isinstance(e, LLConsE):
            ht = go(e.head, env)
            tt = go(e.tail, env)
            if tt != TRef(TLList(ht)):
                raise TargetTypeError(
                    "Mismatch", f"llcons tail: expected (ref (llist {ht})), found {tt}"
                )
            t = TLList(ht)
        elif isinstance(e, CaseLL):
            st = go(e.scrut, env)
            if not isinstance(st, TLList):
                raise TargetTypeError("NotAList", f"casell of {st}")
            t = go(e.nil_branch, env)
            cons_env = {**env, e.hname: st.elem, e.tname: TRef(st)}
            expect(go(e.cons_branch, cons_env), t, "casell branches")
        else:
            raise TargetTypeError("Mismatch", f"not an expression: {e!r}")
        types[id(e)] = t
        return t

    return go(e, env)


# ---------------------------------------------------------------------------
# elaboration into a context builder


def _eval(e: Expr, env: dict, ops: CtxOps, types: dict):
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Lam):
        return lambda v: _eval(e.body, {**env, e.param: v}, ops, types)
    if isinstance(e, Fix):
        def fn(v):
            ops.tick()
            return _eval(e.body, {**env, e.fname: fn, e.param: v}, ops, types)

        return fn
    if isinstance(e, App):
        f = _eval(e.fn, env, ops, types)
        a = _eval(e.arg, env, ops, types)
        return f(a)
    if isinstance(e, Let):
        return _eval(e.body, {**env, e.name: _eval(e.bound, env, ops, types)}, ops, types)
    if isinstance(e, LitUnit):
        return V_UNIT
    if isinstance(e, LitInt):
        return VInt(e.value)
    if isinstance(e, LitBool):
        return VBool(e.value)
    if isinstance(e, BinOp):
        a = _eval(e.left, env, ops, types).value
        b = _eval(e.right, env, ops, types).value
        if e.op == "+":
            return VInt(a + b)
        if e.op == "-":
            return VInt(a - b)
        if e.op == "*":
            return VInt(a * b)
        if e.op == "=":
            return VBool(a == b)
        if e.op == "<":
            return VBool(a < b)
        return VBool(a <= b)
    if isinstance(e, If):
        c = _eval(e.cond, env, ops, types)
        branch = e.then if c.value else e.other
        return _eval(branch, env, ops, types)
    if isinstance(e, PairE):
        return VPair(
            _eval(e.first, env, ops, types), _eval(e.second, env, ops, types)
        )
    if isinstance(e, Fst):
        return _eval(e.pair, env, ops, types).first
    if isinstance(e, Snd):
        return _eval(e.pair, env, ops, types).second
    if isinstance(e, InlE):
        return VInl(_eval(e.payload, env, ops, types))
    if isinstance(e, InrE):
        return VInr(_eval(e.payload, env, ops, types))
    if isinstance(e, Case):
        s = _eval(e.scrut, env, ops, types)
        if isinstance(s, VInl):
            return _eval(e.lbranch, {**env, e.lname: s.payload}, ops, types)
        return _eval(e.rbranch, {**env, e.rname: s.payload}, ops, types)
    if isinstance(e, AllocE):
        v = _eval(e.init, env, ops, types)
        tag = srctype_to_tag(types[id(e.init)])
        return ops.alloc(tag, v)
    if isinstance(e, DerefE):
        return ops.read(_eval(e.ref, env, ops, types))
    if isinstance(e, AssignE):
        r = _eval(e.ref, env, ops, types)
        v = _eval(e.value, env, ops, types)
        ops.write(r, v)
        return V_UNIT
    if isinstance(e, LLNilE):
        return V_NIL
    if isinstance(e, LLConsE):
        h = _eval(e.head, env, ops, types)
        t = _eval(e.tail, env, ops, types)
        return VLLCons(h, t.addr)
    if isinstance(e, CaseLL):
        s = _eval(e.scrut, env, ops, types)
        if isinstance(s, VLLNil):
            return _eval(e.nil_branch, env, ops, types)
        elem_ty = types[id(e.scrut)].elem
        tail_ref = VRef(s.tail, LList(srctype_to_tag(elem_ty)))
        cons_env = {**env, e.hname: s.head, e.tname: tail_ref}
        return _eval(e.cons_branch, cons_env, ops, types)
    raise TargetTypeError("Mismatch", f"not an expression: {e!r}")


def elaborate(e: Expr, spec: InterfaceSpec, name: str = "ctx") -> TargetContext:
    """Typecheck e against the interface and package it as a context builder."""
    types: dict = {}
    inferred = typecheck(e, {}, types)
    wanted = spec_to_srctype(spec)
    if inferred != wanted:
        raise InterfaceMismatch(f"context has type {inferred}, interface wants {wanted}")
    return TargetContext(name=name, builder=lambda ops: _eval(e, {}, ops, types))


def load_sref(text: str, spec: InterfaceSpec, name: str = "ctx") -> TargetContext:
    return elaborate(parse(text), spec, name)


# ---------------------------------------------------------------------------
# random well-typed context generation


def gen_random_context(spec: InterfaceSpec, seed: int, size: int = 40) -> Expr:
    """A seed-deterministic well-typed expression of the interface's type.

    Generation is type-directed with a shrinking budget; when the budget or
    depth runs out it falls back to the smallest canonical term, so every
    call yields a term unless the budget starts non-positive.
    """
    if size <= 0:
        raise GenerationExhausted(f"size budget {size} leaves no room for a term")
    rng = random.Random(seed)
    ty = spec_to_srctype(spec)
    budget = [size]
    return _gen(ty, {}, 4, rng, budget)


def _vars_of(env: dict, ty: SrcType) -> list[str]:
    return sorted(name for name, t in env.items() if t == ty)


def _canonical(ty: SrcType, env: dict, rng: random.Random) -> Expr:
    names = _vars_of(env, ty)
    if names:
        return Var(rng.choice(names))
    if isinstance(ty, TUnit):
        return LitUnit()
    if isinstance(ty, TInt):
        return LitInt(rng.randint(-3, 9))
    if isinstance(ty, TBool):
        return LitBool(rng.random() < 0.5)
    if isinstance(ty, TPair):
        return PairE(_canonical(ty.first, env, rng), _canonical(ty.second, env, rng))
    if isinstance(ty, TSum):
        return InlE(ty.right, _canonical(ty.left, env, rng))
    if isinstance(ty, TRef):
        return AllocE(_canonical(ty.target, env, rng))
    if isinstance(ty, TLList):
        return LLNilE(ty.elem)
    return Lam("u", ty.arg, _canonical(ty.res, {}, rng))


def _effect_stmt(env: dict, depth: int, rng: random.Random, budget) -> Optional[Expr]:
    """A typeable side-effecting expression, or None if nothing applies."""
    cands = []
    for name, t in sorted(env.items()):
        if isinstance(t, TRef):
            cands.append(("write", name, t))
            cands.append(("stash", name, t))
        if isinstance(t, TArrow):
            cands.append(("call", name, t))
    if not cands:
        return None
    kind, name, t = rng.choice(cands)
    if kind == "write":
        return AssignE(Var(name), _gen(t.target, env, depth - 1, rng, budget))
    if kind == "stash":
        # keep a copy of a reachable reference in fresh storage
        return AllocE(DerefE(Var(name))) if rng.random() < 0.7 else AllocE(Var(name))
    return App(Var(name), _gen(t.arg, env, depth - 1, rng, budget))


def _walker_stmt(env: dict, rng: random.Random) -> Optional[Expr]:
    """A fix-powered chain traversal writing zeros over every element cell."""
    lists = [(n, t) for n, t in sorted(env.items())
             if isinstance(t, TRef) and isinstance(t.target, TLList) and t.target.elem == T_INT]
    if not lists:
        return None
    name, t = rng.choice(lists)
    walk = Fix(
        "walk", "cur", t, T_UNIT,
        CaseLL(
            DerefE(Var("cur")),
            LitUnit(),
            "h", "tl",
            Let("_w", AssignE(Var("cur"), LLConsE(LitInt(rng.randint(-2, 2)), Var("tl"))),
                App(Var("walk"), Var("tl"))),
        ),
    )
    return App(walk, Var(name))


def _gen(ty: SrcType, env: dict, depth: int, rng: random.Random, budget) -> Expr:
    budget[0] -= 1
    if budget[0] <= 0 or depth <= 0:
        return _canonical(ty, env, rng)

    # sometimes sequence an effect before producing the value
    if rng.random() < 0.35:
        stmt = _walker_stmt(env, rng) if rng.random() < 0.25 else _effect_stmt(env, depth, rng, budget)
        if stmt is not None:
            rest = _gen(ty, env, depth - 1, rng, budget)
            return Let(f"_s{budget[0]}", stmt, rest)

    names = _vars_of(env, ty)
    roll = rng.random()
    if names and roll < 0.3:
        return Var(rng.choice(names))

    if isinstance(ty, TInt):
        choice = rng.random()
        if choice < 0.35:
            return LitInt(rng.randint(-5, 20))
        if choice < 0.55:
            return BinOp(rng.choice(["+", "-", "*"]),
                         _gen(T_INT, env, depth - 1, rng, budget),
                         _gen(T_INT, env, depth - 1, rng, budget))
        refs = _vars_of(env, TRef(T_INT))
        if choice < 0.75 and refs:
            return DerefE(Var(rng.choice(refs)))
        arrows = [n for n, t in sorted(env.items()) if isinstance(t, TArrow) and t.res == T_INT]
        if arrows:
            fn = rng.choice(arrows)
            return App(Var(fn), _gen(env[fn].arg, env, depth - 1, rng, budget))
        return LitInt(rng.randint(-5, 20))
    if isinstance(ty, TBool):
        if rng.random() < 0.5:
            return LitBool(rng.random() < 0.5)
        return BinOp(rng.choice(["=", "<", "<="]),
                     _gen(T_INT, env, depth - 1, rng, budget),
                     _gen(T_INT, env, depth - 1, rng, budget))
    if isinstance(ty, TUnit):
        stmt = _effect_stmt(env, depth, rng, budget)
        if stmt is not None and rng.random() < 0.7:
            return Let(f"_u{budget[0]}", stmt, LitUnit())
        return LitUnit()
    if isinstance(ty, TPair):
        return PairE(_gen(ty.first, env, depth - 1, rng, budget),
                     _gen(ty.second, env, depth - 1, rng, budget))
    if isinstance(ty, TSum):
        if rng.random() < 0.5:
            return InlE(ty.right, _gen(ty.left, env, depth - 1, rng, budget))
        return InrE(ty.left, _gen(ty.right, env, depth - 1, rng, budget))
    if isinstance(ty, TRef):
        names = _vars_of(env, ty)
        if names and rng.random() < 0.5:
            return Var(rng.choice(names))
        return AllocE(_gen(ty.target, env, depth - 1, rng, budget))
    if isinstance(ty, TLList):
        if rng.random() < 0.4:
            return LLNilE(ty.elem)
        return LLConsE(_gen(ty.elem, env, depth - 1, rng, budget),
                       _gen(TRef(ty), env, depth - 1, rng, budget))
    if isinstance(ty, TArrow):
        param = f"x{len(env)}"
        inner = {**env, param: ty.arg}
        if isinstance(ty.arg, TPair):
            # expose the components so generated bodies actually use them
            a, b = f"{param}a", f"{param}b"
            body_env = {**inner, a: ty.arg.first, b: ty.arg.second}
            body = Let(a, Fst(Var(param)),
                       Let(b, Snd(Var(param)),
                           _gen(ty.res, body_env, depth - 1, rng, budget)))
        else:
            body = _gen(ty.res, inner, depth - 1, rng, budget)
        return Lam(param, ty.arg, body)
    return _canonical(ty, env, rng)


def count_ref_stashes(e: Expr) -> int:
    """Allocations whose payload is itself read or copied from a reference."""
    total = 0
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, AllocE) and isinstance(node.init, (DerefE, Var)):
            total += 1
        for fname in getattr(node, "__dataclass_fields__", {}):
            sub = getattr(node, fname)
            if hasattr(sub, "__dataclass_fields__"):
                stack.append(sub)
    return total
