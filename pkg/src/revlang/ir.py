"""Reversible intermediate representation: expressions, data views, statements,
functions, programs, and the static validator.

Structural equality on IR nodes ignores source spans, so a parse/print
round-trip compares equal. Runtime view identity (which needs an
environment to evaluate index expressions) lives with the interpreter.
"""

from dataclasses import dataclass, field

from .errors import NO_SPAN, Diagnostic, SourceSpan


def _span_field():
    return field(default=NO_SPAN, compare=False, repr=False)


# --- expressions ---

@dataclass(frozen=True)
class Lit:
    value: object
    span: SourceSpan = _span_field()


@dataclass(frozen=True)
class ViewRef:
    view: object
    span: SourceSpan = _span_field()


@dataclass(frozen=True)
class Un:
    op: str  # '-' | '!'
    operand: object
    span: SourceSpan = _span_field()


@dataclass(frozen=True)
class Bin:
    op: str  # + - * / ^ % == != < <= > >= && ||
    left: object
    right: object
    span: SourceSpan = _span_field()


@dataclass(frozen=True)
class Call:
    fname: str
    args: tuple
    span: SourceSpan = _span_field()


EXPR_TYPES = (Lit, ViewRef, Un, Bin, Call)


# --- data views ---

@dataclass(frozen=True)
class VarView:
    name: str
    span: SourceSpan = _span_field()


@dataclass(frozen=True)
class FieldView:
    base: object
    field_name: str
    span: SourceSpan = _span_field()


@dataclass(frozen=True)
class IndexView:
    base: object
    indices: tuple  # expressions
    span: SourceSpan = _span_field()


@dataclass(frozen=True)
class BijView:
    base: object
    bij: str
    args: tuple  # literal constants
    span: SourceSpan = _span_field()


VIEW_TYPES = (VarView, FieldView, IndexView, BijView)


def view_root(view):
    while not isinstance(view, VarView):
        view = view.base
    return view.name


# --- statements ---

@dataclass(frozen=True)
class AncillaAlloc:
    name: str
    expr: object
    span: SourceSpan = _span_field()


@dataclass(frozen=True)
class AncillaDealloc:
    name: str
    expr: object
    span: SourceSpan = _span_field()


@dataclass(frozen=True)
class InstrCall:
    op: str        # '+=' | '-=' | '*=' | '/=' | 'xor='
    fname: str     # registered scalar function; 'identity' for a bare atom
    args: tuple    # first entry is the mutated target view; views or Lit
    span: SourceSpan = _span_field()


@dataclass(frozen=True)
class FnCall:
    fname: str
    args: tuple    # data views
    span: SourceSpan = _span_field()


@dataclass(frozen=True)
class UncallFn:
    fname: str
    args: tuple
    span: SourceSpan = _span_field()


class _SameAsPre:
    """Sentinel postcondition: reuse the precondition (the `~` shorthand)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "SAME_AS_PRE"


SAME_AS_PRE = _SameAsPre()


@dataclass(frozen=True)
class If:
    pre: object
    post: object   # expression or SAME_AS_PRE
    then_block: object
    else_block: object
    span: SourceSpan = _span_field()


@dataclass(frozen=True)
class While:
    pre: object
    post: object
    body: object
    span: SourceSpan = _span_field()


@dataclass(frozen=True)
class For:
    var: str
    start: object
    step: object
    stop: object
    body: object
    span: SourceSpan = _span_field()


@dataclass(frozen=True)
class RoutineBegin:
    block: object
    span: SourceSpan = _span_field()


@dataclass(frozen=True)
class RoutineEnd:
    span: SourceSpan = _span_field()


@dataclass(frozen=True)
class InvCheckOff:
    stmt: object
    span: SourceSpan = _span_field()


@dataclass(frozen=True)
class Safe:
    kind: str      # 'assert' | 'print'
    exprs: tuple
    span: SourceSpan = _span_field()


@dataclass(frozen=True)
class Block:
    stmts: tuple
    span: SourceSpan = _span_field()


STMT_TYPES = (AncillaAlloc, AncillaDealloc, InstrCall, FnCall, UncallFn, If,
              While, For, RoutineBegin, RoutineEnd, InvCheckOff, Safe, Block)


# --- functions and programs ---

PARAM_KINDS = ("scalar", "array", "any")


@dataclass(frozen=True)
class Param:
    name: str
    kind: str = "any"
    span: SourceSpan = _span_field()


@dataclass(frozen=True)
class FunctionDef:
    name: str
    params: tuple
    body: Block
    span: SourceSpan = _span_field()

    def param_names(self):
        return [p.name for p in self.params]


class Program:
    """An ordered collection of function definitions."""

    def __init__(self, functions=()):
        self.functions = {}
        self.duplicate_names = []
        for f in functions:
            self.add(f)

    def add(self, fdef):
        if fdef.name in self.functions:
            self.duplicate_names.append(fdef.name)
        self.functions[fdef.name] = fdef

    def get(self, name):
        return self.functions.get(name)

    def __contains__(self, name):
        return name in self.functions

    def __iter__(self):
        return iter(self.functions.values())

    def __eq__(self, other):
        return (isinstance(other, Program)
                and list(self.functions) == list(other.functions)
                and all(self.functions[k] == other.functions[k]
                        for k in self.functions))

    def __repr__(self):
        return f"Program({list(self.functions)})"


# --- static validation ---

def is_affine_index(e):
    """Index expressions are limited to +,-,* over integer literals and
    variables with at most degree one, so view identity is decidable."""
    def walk(x):
        # returns degree (0 constant, 1 linear) or None if not affine
        if isinstance(x, Lit):
            return 0 if isinstance(x.value, int) and not isinstance(x.value, bool) else None
        if isinstance(x, ViewRef):
            return 1 if isinstance(x.view, VarView) else None
        if isinstance(x, Un) and x.op == "-":
            return walk(x.operand)
        if isinstance(x, Bin):
            l, r = walk(x.left), walk(x.right)
            if l is None or r is None:
                return None
            if x.op in ("+", "-"):
                return max(l, r)
            if x.op == "*":
                return l + r if l + r <= 1 else None
            return None
        return None

    return walk(e) is not None


def _walk_views_in_expr(e):
    if isinstance(e, ViewRef):
        yield e.view
    elif isinstance(e, Un):
        yield from _walk_views_in_expr(e.operand)
    elif isinstance(e, Bin):
        yield from _walk_views_in_expr(e.left)
        yield from _walk_views_in_expr(e.right)
    elif isinstance(e, Call):
        for a in e.args:
            yield from _walk_views_in_expr(a)


def _subviews(view):
    while isinstance(view, VIEW_TYPES):
        yield view
        if isinstance(view, VarView):
            return
        view = view.base


def validate(program):
    """Check program well-formedness; returns a list of Diagnostics (empty
    when the program is valid). Pure: never raises for invalid input."""
    from . import numerics  # registries only

    diags = []
    seen_fn = set()

    def check_view(view):
        for v in _subviews(view):
            if isinstance(v, IndexView):
                for ix in v.indices:
                    if not is_affine_index(ix):
                        diags.append(Diagnostic(
                            "NonAffineIndex",
                            "index expressions must be affine in variables",
                            getattr(ix, "span", NO_SPAN)))
            elif isinstance(v, BijView):
                if v.bij not in numerics.BIJECTORS:
                    diags.append(Diagnostic(
                        "UnknownBijector", f"no bijector named {v.bij!r}", v.span))
                elif not numerics.BIJECTORS[v.bij].valid_args(v.args):
                    diags.append(Diagnostic(
                        "BadBijectorArgs",
                        f"invalid arguments for bijector {v.bij!r}", v.span))

    def check_expr(e):
        for v in _walk_views_in_expr(e):
            check_view(v)
        if isinstance(e, Call) and e.fname not in numerics.EXPR_FNS:
            diags.append(Diagnostic(
                "UnknownFunction",
                f"{e.fname!r} is not a registered pure function", e.span))
        if isinstance(e, Un):
            check_expr(e.operand)
        elif isinstance(e, Bin):
            check_expr(e.left)
            check_expr(e.right)
        elif isinstance(e, Call):
            for a in e.args:
                check_expr(a)

    def check_stmts(stmts):
        live = []            # ancilla names allocated in this block, in order
        routine_stack = []   # pending routine net-deltas
        for s in stmts:
            check_stmt(s, live, routine_stack)
        if routine_stack:
            diags.append(Diagnostic(
                "UnmatchedRoutine", "routine block is never closed",
                routine_stack[-1][1]))
        for name, span in live:
            diags.append(Diagnostic(
                "UnbalancedAncilla",
                f"{name!r} is allocated but not released in the same scope", span))

    def block_delta(stmts):
        # net ancilla effect of a statement list (for routine bookkeeping)
        delta = []
        for s in stmts:
            if isinstance(s, AncillaAlloc):
                delta.append(("+", s.name))
            elif isinstance(s, AncillaDealloc):
                if ("+", s.name) in delta:
                    delta.remove(("+", s.name))
                else:
                    delta.append(("-", s.name))
            elif isinstance(s, Block):
                delta.extend(block_delta(s.stmts))
            elif isinstance(s, InvCheckOff):
                delta.extend(block_delta([s.stmt]))
        return delta

    def check_stmt(s, live, routine_stack):
        match s:
            case AncillaAlloc(name=name, expr=e, span=span):
                check_expr(e)
                live.append((name, span))
            case AncillaDealloc(name=name, expr=e, span=span):
                check_expr(e)
                for entry in reversed(live):
                    if entry[0] == name:
                        live.remove(entry)
                        break
                else:
                    diags.append(Diagnostic(
                        "UnbalancedAncilla",
                        f"{name!r} is released but was not allocated in this scope",
                        span))
            case InstrCall(op=op, fname=fname, args=args, span=span):
                if not isinstance(args[0], VIEW_TYPES):
                    diags.append(Diagnostic(
                        "BadInstructionTarget",
                        "instruction target must be a data view", span))
                if fname not in numerics.INSTR_FNS:
                    diags.append(Diagnostic(
                        "UnknownFunction",
                        f"{fname!r} is not a registered instruction function", span))
                for a in args:
                    if isinstance(a, VIEW_TYPES):
                        check_view(a)
            case FnCall(fname=fname, args=args, span=span) | \
                    UncallFn(fname=fname, args=args, span=span):
                if fname not in program and fname not in numerics.PRIM_STATEMENTS:
                    diags.append(Diagnostic(
                        "UnknownFunction", f"call to undefined {fname!r}", span))
                else:
                    spec_arity = (numerics.PRIM_STATEMENTS[fname]
                                  if fname in numerics.PRIM_STATEMENTS
                                  else len(program.get(fname).params))
                    if len(args) != spec_arity:
                        diags.append(Diagnostic(
                            "ArityMismatch",
                            f"{fname!r} expects {spec_arity} arguments, got {len(args)}",
                            span))
                for a in args:
                    check_view(a)
            case If(pre=pre, post=post, then_block=tb, else_block=eb):
                check_expr(pre)
                if post is not SAME_AS_PRE:
                    check_expr(post)
                check_stmts(tb.stmts)
                check_stmts(eb.stmts)
            case While(pre=pre, post=post, body=body, span=span):
                check_expr(pre)
                if post is SAME_AS_PRE:
                    diags.append(Diagnostic(
                        "WhilePostconditionRequired",
                        "a while loop needs an explicit postcondition", span))
                else:
                    check_expr(post)
                check_stmts(body.stmts)
            case For(start=start, step=step, stop=stop, body=body):
                check_expr(start)
                check_expr(step)
                check_expr(stop)
                check_stmts(body.stmts)
            case RoutineBegin(block=block, span=span):
                check_stmts_routine(block.stmts)
                delta = block_delta(block.stmts)
                routine_stack.append((delta, span))
                # the routine body's allocations stay live until the mirror
                for sign, name in delta:
                    if sign == "+":
                        live.append((name, span))
                    else:
                        for entry in reversed(live):
                            if entry[0] == name:
                                live.remove(entry)
                                break
            case RoutineEnd(span=span):
                if not routine_stack:
                    diags.append(Diagnostic(
                        "UnmatchedRoutine",
                        "routine close without a matching open", span))
                else:
                    delta, _ = routine_stack.pop()
                    # the mirrored inverse releases what the routine allocated
                    for sign, name in reversed(delta):
                        if sign == "+":
                            for entry in reversed(live):
                                if entry[0] == name:
                                    live.remove(entry)
                                    break
                            else:
                                diags.append(Diagnostic(
                                    "UnbalancedAncilla",
                                    f"routine close releases unknown {name!r}",
                                    span))
                        else:
                            live.append((name, span))
            case InvCheckOff(stmt=stmt):
                check_stmt(stmt, live, routine_stack)
            case Safe(exprs=exprs):
                for e in exprs:
                    check_expr(e)
            case Block(stmts=stmts):
                check_stmts(stmts)

    def check_stmts_routine(stmts):
        # validate the inside of a routine; its own ancilla imbalance is
        # fine (the mirrored inverse balances it), so drop only those
        saved = len(diags)
        inner_live = []
        inner_stack = []
        for s in stmts:
            check_stmt(s, inner_live, inner_stack)
        if inner_stack:
            diags.append(Diagnostic(
                "UnmatchedRoutine", "routine block is never closed",
                inner_stack[-1][1]))
        new = diags[saved:]
        del diags[saved:]
        diags.extend(d for d in new if d.rule != "UnbalancedAncilla")

    for name in getattr(program, "duplicate_names", ()):
        diags.append(Diagnostic(
            "DuplicateFunction", f"function {name!r} defined twice",
            program.get(name).span))
    for fdef in program:
        if fdef.name in seen_fn:
            diags.append(Diagnostic(
                "DuplicateFunction", f"function {fdef.name!r} defined twice",
                fdef.span))
        seen_fn.add(fdef.name)
        pnames = set()
        for p in fdef.params:
            if p.name in pnames:
                diags.append(Diagnostic(
                    "DuplicateParam",
                    f"parameter {p.name!r} repeated in {fdef.name!r}", p.span))
            pnames.add(p.name)
        check_stmts(fdef.body.stmts)

    return diags
