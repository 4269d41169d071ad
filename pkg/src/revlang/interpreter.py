"""Evaluator for the reversible IR.

Forward execution follows the statement semantics directly; backward
execution is forward execution of the mechanically inverted function, so
there is one evaluator and no runtime stack. Reversibility checks
(branch postconditions, clean ancilla release, unchanged loop iterators,
alias rejection) are observers: on a passing program, disabling them
changes nothing but speed.

Function bodies are compiled once into Python closures. Aliasing between
argument views is decided statically when their root names differ; only
same-root pairs are compared at run time.
"""

import json
from dataclasses import dataclass, field

from .errors import (NO_SPAN, AliasedArguments, AssertFailed, DirtyAncilla,
                     DuplicateBinding, FuelExhausted, IndexOutOfBounds,
                     KindError, LoopIteratorMutated, PostconditionMismatch,
                     RevDomainError, RevLangError, UnboundVariable,
                     UnknownFunction, ValidationFailed)
from .ir import (SAME_AS_PRE, AncillaAlloc, AncillaDealloc, Bin, BijView,
                 Block, Call, FieldView, FnCall, For, If, IndexView,
                 InstrCall, InvCheckOff, Lit, RoutineBegin, RoutineEnd, Safe,
                 Un, UncallFn, VarView, ViewRef, While, validate, view_root)
from .numerics import (BIJECTORS, EXPR_FNS, INSTR_FNS, PRIM_INVERSE,
                       PRIM_STATEMENTS, PrimitiveInstr, apply_instr,
                       wrap_gvar)
from .reverser import expand_routines, invert_function
from .values import (Array, Complex, Dual, Fixed, GVar, Record, ULog,
                     deep_copy, deviation, is_bool, is_float, is_int,
                     kind_name, s_div, s_pow, to_real, values_close)


@dataclass
class ExecOptions:
    invcheck: bool = True
    float_tolerance: float = 1e-9
    max_steps: int = 500_000_000
    trace: bool = False
    gradient_mode: bool = False
    float_dtype: object = None      # e.g. numpy.float32 for binary32 runs
    trace_sink: object = None       # list to append trace lines to

    def __post_init__(self):
        if self.float_tolerance < 0:
            raise ValueError("float_tolerance must be non-negative")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")


@dataclass
class ExecStats:
    steps: int = 0
    checks_passed: dict = field(default_factory=lambda: {
        "postcondition": 0, "ancilla": 0, "iterator": 0, "alias": 0})


class Frame:
    """The environment: name -> value bindings plus ancilla bookkeeping."""

    __slots__ = ("bindings", "ancillas", "fname")

    def __init__(self, fname="<frame>"):
        self.bindings = {}
        self.ancillas = set()
        self.fname = fname


Env = Frame


# --- resolved views and the public view operations --------------------------

class ResolvedView:
    """A view with its index expressions evaluated: a concrete lens."""

    __slots__ = ("root", "steps")

    def __init__(self, root, steps):
        self.root = root
        self.steps = steps  # ('field', name) | ('idx', idx) | ('bij', name, args)

    def storage_id(self):
        return (self.root,) + tuple(s for s in self.steps if s[0] != "bij")


def resolve_view(env, view, opts=None):
    opts = opts or ExecOptions()
    chain = []
    v = view
    while not isinstance(v, VarView):
        chain.append(v)
        v = v.base
    root = v.name
    if root not in env.bindings:
        raise UnboundVariable(f"{root!r} is not bound", v.span)
    steps = []
    for node in reversed(chain):
        if isinstance(node, FieldView):
            steps.append(("field", node.field_name))
        elif isinstance(node, IndexView):
            idx = tuple(_index_value(eval_expr(env, e, opts))
                        for e in node.indices)
            steps.append(("idx", idx))
        else:
            steps.append(("bij", node.bij, node.args))
    return ResolvedView(root, tuple(steps))


def canonical_view_identity(env, view, opts=None):
    """StorageId of a view in an environment: equal ids denote the same
    mutable cell; bijectors do not change identity."""
    return resolve_view(env, view, opts).storage_id()


def ids_overlap(id_a, id_b):
    """True when two storage ids denote overlapping memory (equal, or one
    a prefix of the other, e.g. a whole array and one of its cells)."""
    n = min(len(id_a), len(id_b))
    return id_a[:n] == id_b[:n]


def _index_value(v):
    if isinstance(v, GVar):
        v = v.x
    if not is_int(v):
        raise IndexOutOfBounds(f"index must be an Int, got {kind_name(v)}")
    return int(v)


def _read_field(v, name):
    if isinstance(v, Complex):
        if name == "re":
            return v.re
        if name == "im":
            return v.im
        raise KindError(f"complex values have fields re/im, not {name!r}")
    if isinstance(v, Record):
        return v.get(name)
    raise KindError(f"field access on {kind_name(v)}")


def _write_field(v, name, new):
    if isinstance(v, Complex):
        if name == "re":
            v.re = new
        elif name == "im":
            v.im = new
        else:
            raise KindError(f"complex values have fields re/im, not {name!r}")
    elif isinstance(v, Record):
        v.set(name, new)
    else:
        raise KindError(f"field write on {kind_name(v)}")


def read_resolved(env, rv):
    v = env.bindings[rv.root]
    for s in rv.steps:
        if s[0] == "field":
            v = _read_field(v, s[1])
        elif s[0] == "idx":
            if not isinstance(v, Array):
                raise KindError(f"indexing into {kind_name(v)}")
            v = v.get(s[1])
        else:
            v = BIJECTORS[s[1]].fwd(v, s[2])
    return v


def write_resolved(env, rv, value):
    steps = list(rv.steps)
    v = value
    while steps and steps[-1][0] == "bij":
        s = steps.pop()
        v = BIJECTORS[s[1]].inv(v, s[2])
    if not steps:
        env.bindings[rv.root] = v
        return
    parent = read_resolved(env, ResolvedView(rv.root, tuple(steps[:-1])))
    last = steps[-1]
    if last[0] == "idx":
        if not isinstance(parent, Array):
            raise KindError(f"indexing into {kind_name(parent)}")
        parent.set(last[1], v)
    else:
        _write_field(parent, last[1], v)


def read_view(env, view, opts=None):
    return read_resolved(env, resolve_view(env, view, opts))


def write_view(env, view, value, opts=None):
    write_resolved(env, resolve_view(env, view, opts), value)
    return env


# --- expression evaluation (walker form, shared by the public API) ---------

def _bool_of(v):
    if isinstance(v, GVar):
        v = v.x
    if not is_bool(v):
        raise KindError(f"condition must be Bool, got {kind_name(v)}")
    return v


def _num_bin(op, a, b):
    if isinstance(a, Complex) or isinstance(b, Complex):
        ca = complex(float(to_real(a.re)), float(to_real(a.im))) \
            if isinstance(a, Complex) else complex(float(to_real(a)), 0.0)
        cb = complex(float(to_real(b.re)), float(to_real(b.im))) \
            if isinstance(b, Complex) else complex(float(to_real(b)), 0.0)
        if op == "+":
            r = ca + cb
        elif op == "-":
            r = ca - cb
        elif op == "*":
            r = ca * cb
        elif op == "/":
            r = ca / cb
        else:
            raise KindError(f"operator {op} undefined on complex values")
        return Complex(r.real, r.imag)
    if isinstance(a, Fixed) or isinstance(b, Fixed):
        if isinstance(a, Fixed) and isinstance(b, Fixed):
            if op == "+":
                return a + b
            if op == "-":
                return a - b
        fa = a.to_float() if isinstance(a, Fixed) else to_real(a)
        fb = b.to_float() if isinstance(b, Fixed) else to_real(b)
        return Fixed.from_real(_real_bin(op, fa, fb))
    return _real_bin(op, to_real(a), to_real(b))


def _real_bin(op, a, b):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return s_div(a, b)
    if op == "^":
        return s_pow(a, b)
    if op == "%":
        if not (is_int(a) and is_int(b)):
            raise KindError("% needs Int operands")
        if b == 0:
            raise RevDomainError("modulo by zero")
        return a % b
    raise KindError(f"unknown operator {op}")


def _compare(op, a, b):
    if isinstance(a, GVar):
        a = a.x
    if isinstance(b, GVar):
        b = b.x
    if isinstance(a, Complex) or isinstance(b, Complex):
        if op not in ("==", "!="):
            raise KindError("complex values only compare with == and !=")
        eq = (isinstance(a, Complex) and isinstance(b, Complex)
              and to_real(a.re) == to_real(b.re)
              and to_real(a.im) == to_real(b.im))
        return eq if op == "==" else not eq
    if isinstance(a, Fixed) or isinstance(b, Fixed):
        fa = a if isinstance(a, Fixed) else Fixed.from_real(to_real(a))
        fb = b if isinstance(b, Fixed) else Fixed.from_real(to_real(b))
        a, b = fa.raw, fb.raw
    else:
        a, b = to_real(a), to_real(b)
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return bool(a < b)
    if op == "<=":
        return bool(a <= b)
    if op == ">":
        return bool(a > b)
    return bool(a >= b)


def _negate_value(v):
    if isinstance(v, (Fixed,)) or is_int(v) or is_float(v):
        return -v
    if isinstance(v, Complex):
        return Complex(-to_real(v.re), -to_real(v.im))
    raise KindError(f"cannot negate {kind_name(v)}")


def eval_expr(env, e, opts=None):
    """Reference expression evaluator (the compiled engine mirrors it)."""
    opts = opts or ExecOptions()
    if isinstance(e, Lit):
        v = e.value
        if isinstance(v, float) and opts.float_dtype is not None:
            return opts.float_dtype(v)
        if isinstance(v, complex):
            z = opts.float_dtype or float
            return Complex(z(v.real), z(v.imag))
        return v
    if isinstance(e, ViewRef):
        v = read_resolved(env, resolve_view(env, e.view, opts))
        return v.x if isinstance(v, GVar) else v
    if isinstance(e, Un):
        return _negate_value(eval_expr(env, e.operand, opts))
    if isinstance(e, Bin):
        if e.op == "&&":
            return _bool_of(eval_expr(env, e.left, opts)) \
                and _bool_of(eval_expr(env, e.right, opts))
        if e.op == "||":
            return _bool_of(eval_expr(env, e.left, opts)) \
                or _bool_of(eval_expr(env, e.right, opts))
        a = eval_expr(env, e.left, opts)
        b = eval_expr(env, e.right, opts)
        if e.op in ("==", "!=", "<", "<=", ">", ">="):
            return _compare(e.op, a, b)
        return _num_bin(e.op, a, b)
    if isinstance(e, Call):
        fn = EXPR_FNS.get(e.fname)
        if fn is None:
            raise UnknownFunction(f"{e.fname!r} is not a registered pure function",
                                  e.span)
        vals = []
        for a in e.args:
            v = eval_expr(env, a, opts)
            vals.append(v.x if isinstance(v, GVar) else v)
        return fn(*vals)
    raise KindError(f"not an expression: {e!r}")


# --- ancilla release comparison ---------------------------------------------

def _leaf_pairs(a, b):
    if isinstance(a, Complex) and isinstance(b, Complex):
        yield from _leaf_pairs(a.re, b.re)
        yield from _leaf_pairs(a.im, b.im)
    elif isinstance(a, Array) and isinstance(b, Array):
        if a.shape != b.shape:
            raise KindError("shape mismatch")
        for x, y in zip(a.data, b.data):
            yield from _leaf_pairs(x, y)
    elif isinstance(a, Record) and isinstance(b, Record):
        fa, fb = a.fields(), b.fields()
        if fa.keys() != fb.keys():
            raise KindError("record shape mismatch")
        for k in fa:
            yield from _leaf_pairs(fa[k], fb[k])
    else:
        yield a, b


def _dual_primal(v):
    return v.primal if isinstance(v, Dual) else v


def _ancilla_residual(current, declared, tol):
    """None when the ancilla may be released; otherwise the residual.

    Only primal content is checked: a tracked ancilla's cotangent at
    release is the sensitivity to its pinned initial value and is
    discarded with it. Discrete kinds must match exactly; float-backed
    kinds within the tolerance (the remainder is then zero-cleared by the
    release itself)."""
    try:
        pairs = list(_leaf_pairs(current, declared))
    except KindError:
        return float("inf")
    for cur, dec in pairs:
        if isinstance(cur, GVar):
            cur = cur.x
        if isinstance(dec, GVar):
            dec = dec.x
        if isinstance(cur, (Fixed,)) or is_int(cur) or is_bool(cur):
            if not values_close(cur, dec, 0.0):
                return deviation(cur, dec)
        elif isinstance(cur, ULog) and isinstance(dec, ULog):
            d = abs(float(_dual_primal(cur.log_x)) - float(_dual_primal(dec.log_x)))
            if d > tol:
                return d
        elif is_float(cur) and is_float(dec):
            d = abs(float(_dual_primal(cur)) - float(_dual_primal(dec)))
            if d > tol:
                return d
        else:
            return float("inf")
    return None


# --- the compiling interpreter ----------------------------------------------

class Interpreter:
    """Validates and compiles a Program, then runs its functions in either
    direction. One instance per execution context; instances share only
    the (read-only) Program."""

    def __init__(self, program, opts=None):
        diags = validate(program)
        if diags:
            raise ValidationFailed(diags)
        self.program = program
        self.opts = opts or ExecOptions()
        self.stats = ExecStats()
        self._nocheck_depth = 0
        self.defs = {}
        for fdef in program:
            self.defs[fdef.name] = expand_routines(fdef)
        for fdef in list(program):
            inv = invert_function(fdef)
            if inv.name not in self.defs:
                self.defs[inv.name] = expand_routines(inv)
        self._compiled = {}

    # --- entry points ---

    def run_function(self, fname, args):
        body, names, span = self._function(fname)
        if len(args) != len(names):
            raise KindError(f"{fname} takes {len(names)} arguments, "
                            f"got {len(args)}")
        frame = Frame(fname)
        frame.bindings.update(zip(names, args))
        body(frame)
        if len(frame.bindings) != len(names):
            leftover = sorted(set(frame.bindings) - set(names))
            raise DirtyAncilla(f"bindings leaked from {fname}: {leftover}", span)
        b = frame.bindings
        return [b[n] for n in names]

    def uncall_function(self, fname, args):
        inverse = fname[1:] if fname.startswith("~") else "~" + fname
        return self.run_function(inverse, args)

    def _function(self, fname):
        entry = self._compiled.get(fname)
        if entry is None:
            fdef = self.defs.get(fname)
            if fdef is None:
                raise UnknownFunction(f"no function named {fname!r}")
            # placeholder enables recursion during compilation
            cell = [None, fdef.param_names(), fdef.span]

            def body(frame, _cell=cell):
                return _cell[0](frame)

            self._compiled[fname] = (body, cell[1], cell[2])
            cell[0] = self._compile_block(fdef.body)
            entry = self._compiled[fname]
        return entry

    # --- shared runtime helpers captured by the closures ---

    def _tick(self, span):
        st = self.stats
        st.steps += 1
        if st.steps > self.opts.max_steps:
            raise FuelExhausted(
                f"exceeded {self.opts.max_steps} statement executions", span)

    def _trace_line(self, span, kind, detail):
        line = f"{span.line}:{span.col}\t{kind}\t{detail}"
        if self.opts.trace_sink is not None:
            self.opts.trace_sink.append(line)
        else:
            print(line)

    # --- expression compilation ---

    def _compile_expr(self, e):
        opts = self.opts
        if isinstance(e, Lit):
            v = e.value
            if isinstance(v, float) and opts.float_dtype is not None:
                v = opts.float_dtype(v)
            elif isinstance(v, complex):
                z = opts.float_dtype or float
                re_, im_ = z(v.real), z(v.imag)
                return lambda frame: Complex(re_, im_)
            return lambda frame, _v=v: _v
        if isinstance(e, ViewRef):
            rd = self._compile_reader(e.view)

            def run(frame, _rd=rd):
                v = _rd(frame)
                return v.x if isinstance(v, GVar) else v
            return run
        if isinstance(e, Un):
            inner = self._compile_expr(e.operand)
            return lambda frame: _negate_value(inner(frame))
        if isinstance(e, Bin):
            op = e.op
            lf = self._compile_expr(e.left)
            rf = self._compile_expr(e.right)
            if op == "&&":
                return lambda frame: _bool_of(lf(frame)) and _bool_of(rf(frame))
            if op == "||":
                return lambda frame: _bool_of(lf(frame)) or _bool_of(rf(frame))
            if op in ("==", "!=", "<", "<=", ">", ">="):
                return lambda frame, _op=op: _compare(_op, lf(frame), rf(frame))
            return lambda frame, _op=op: _num_bin(_op, lf(frame), rf(frame))
        if isinstance(e, Call):
            fn = EXPR_FNS.get(e.fname)
            if fn is None:
                raise UnknownFunction(
                    f"{e.fname!r} is not a registered pure function", e.span)
            arg_fns = [self._compile_expr(a) for a in e.args]

            def run(frame, _fn=fn, _args=arg_fns):
                vals = []
                for af in _args:
                    v = af(frame)
                    vals.append(v.x if isinstance(v, GVar) else v)
                return _fn(*vals)
            return run
        raise KindError(f"not an expression: {e!r}")

    def _compile_int_expr(self, e, what):
        inner = self._compile_expr(e)

        def run(frame):
            v = inner(frame)
            if isinstance(v, GVar):
                v = v.x
            if not is_int(v):
                raise KindError(f"{what} must be an Int, got {kind_name(v)}")
            return v
        return run

    # --- view compilation ---

    def _compile_reader(self, view):
        if isinstance(view, VarView):
            name = view.name

            def read(frame):
                try:
                    return frame.bindings[name]
                except KeyError:
                    raise UnboundVariable(f"{name!r} is not bound",
                                          view.span) from None
            return read
        if isinstance(view, FieldView):
            base = self._compile_reader(view.base)
            fname = view.field_name
            return lambda frame: _read_field(base(frame), fname)
        if isinstance(view, IndexView):
            base = self._compile_reader(view.base)
            idx_fns = [self._compile_int_expr(ix, "array index")
                       for ix in view.indices]

            def read(frame):
                arr = base(frame)
                if not isinstance(arr, Array):
                    raise KindError(f"indexing into {kind_name(arr)}")
                return arr.get(tuple(f(frame) for f in idx_fns))
            return read
        if isinstance(view, BijView):
            base = self._compile_reader(view.base)
            bij = BIJECTORS[view.bij]
            args = view.args
            return lambda frame: bij.fwd(base(frame), args)
        raise KindError(f"not a view: {view!r}")

    def _compile_writer(self, view):
        if isinstance(view, VarView):
            name = view.name

            def write(frame, v):
                frame.bindings[name] = v
            return write
        if isinstance(view, BijView):
            inner = self._compile_writer(view.base)
            bij = BIJECTORS[view.bij]
            args = view.args
            return lambda frame, v: inner(frame, bij.inv(v, args))
        if isinstance(view, FieldView):
            base = self._compile_reader(view.base)
            fname = view.field_name
            return lambda frame, v: _write_field(base(frame), fname, v)
        if isinstance(view, IndexView):
            base = self._compile_reader(view.base)
            idx_fns = [self._compile_int_expr(ix, "array index")
                       for ix in view.indices]

            def write(frame, v):
                arr = base(frame)
                if not isinstance(arr, Array):
                    raise KindError(f"indexing into {kind_name(arr)}")
                arr.set(tuple(f(frame) for f in idx_fns), v)
            return write
        raise KindError(f"not a view: {view!r}")

    def _compile_id(self, view):
        """Storage-id closure (root name + concrete non-bijector path)."""
        parts = []
        v = view
        while not isinstance(v, VarView):
            parts.append(v)
            v = v.base
        root = v.name
        step_fns = []
        for node in reversed(parts):
            if isinstance(node, FieldView):
                step_fns.append(lambda frame, _n=node.field_name: ("field", _n))
            elif isinstance(node, IndexView):
                idx_fns = [self._compile_int_expr(ix, "array index")
                           for ix in node.indices]
                step_fns.append(
                    lambda frame, _fs=idx_fns:
                        ("idx", tuple(f(frame) for f in _fs)))
            # bijectors do not contribute to identity
        if not step_fns:
            return lambda frame: (root,)
        return lambda frame: (root,) + tuple(sf(frame) for sf in step_fns)

    def _alias_checks(self, arg_views, span, strict_pairs, grad_pairs):
        """Compile runtime alias checks. Only pairs of views rooted at the
        same name can ever overlap; pairs listed in `strict_pairs` raise in
        every mode, `grad_pairs` only in gradient mode."""
        roots = [view_root(v) if not isinstance(v, Lit) else None
                 for v in arg_views]
        id_fns = {}

        def idf(i):
            if i not in id_fns:
                id_fns[i] = self._compile_id(arg_views[i])
            return id_fns[i]

        checks = []
        for (i, j, message) in strict_pairs:
            if roots[i] is None or roots[j] is None or roots[i] != roots[j]:
                continue
            fi, fj = idf(i), idf(j)

            def chk(frame, _fi=fi, _fj=fj, _m=message):
                if ids_overlap(_fi(frame), _fj(frame)):
                    raise AliasedArguments(_m, span)
            checks.append(chk)
        grad_checks = []
        if self.opts.gradient_mode:
            for (i, j, message) in grad_pairs:
                if roots[i] is None or roots[j] is None or roots[i] != roots[j]:
                    continue
                fi, fj = idf(i), idf(j)

                def chk(frame, _fi=fi, _fj=fj, _m=message):
                    if ids_overlap(_fi(frame), _fj(frame)):
                        raise AliasedArguments(_m, span)
                grad_checks.append(chk)
        return checks + grad_checks

    # --- statement compilation ---

    def _compile_block(self, block):
        fns = [self._compile_stmt(s) for s in block.stmts]
        if len(fns) == 1:
            return fns[0]

        def run(frame, _fns=tuple(fns)):
            for f in _fns:
                f(frame)
        return run

    def _compile_stmt(self, s):
        inner = self._compile_stmt_inner(s)
        span = s.span
        tick = self._tick
        if self.opts.trace:
            kind = type(s).__name__
            detail = self._touched(s)

            def run(frame):
                tick(span)
                self._trace_line(span, kind, detail)
                try:
                    inner(frame)
                except RevLangError as err:
                    if err.span is NO_SPAN:
                        err.span = span
                    raise
            return run

        def run(frame):
            tick(span)
            try:
                inner(frame)
            except RevLangError as err:
                if err.span is NO_SPAN:
                    err.span = span
                raise
        return run

    def _touched(self, s):
        from .parser import fmt_view
        if isinstance(s, InstrCall):
            return ",".join(fmt_view(a) for a in s.args if not isinstance(a, Lit))
        if isinstance(s, (FnCall, UncallFn)):
            return ",".join(fmt_view(a) for a in s.args)
        if isinstance(s, (AncillaAlloc, AncillaDealloc)):
            return s.name
        if isinstance(s, For):
            return s.var
        return ""

    def _compile_stmt_inner(self, s):
        match s:
            case InstrCall():
                return self._compile_instr(s)
            case AncillaAlloc(name=name, expr=e, span=span):
                val = self._compile_expr(e)
                wrap = self.opts.gradient_mode

                def run(frame):
                    if name in frame.bindings:
                        raise DuplicateBinding(f"{name!r} is already bound", span)
                    v = val(frame)
                    if wrap:
                        v = wrap_gvar(v)
                    frame.bindings[name] = v
                    frame.ancillas.add(name)
                return run
            case AncillaDealloc(name=name, expr=e, span=span):
                val = self._compile_expr(e)
                tol = self.opts.float_tolerance
                stats = self.stats

                def run(frame):
                    if name not in frame.bindings:
                        raise UnboundVariable(f"{name!r} is not bound", span)
                    if self._checking:
                        residual = _ancilla_residual(
                            frame.bindings[name], val(frame), tol)
                        if residual is not None:
                            raise DirtyAncilla(
                                f"{name!r} released with residual {residual}",
                                span, name=name, residual=residual)
                        stats.checks_passed["ancilla"] += 1
                    del frame.bindings[name]
                    frame.ancillas.discard(name)
                return run
            case FnCall(fname=fname, args=args, span=span):
                return self._compile_call(fname, args, span, uncall=False)
            case UncallFn(fname=fname, args=args, span=span):
                return self._compile_call(fname, args, span, uncall=True)
            case If(pre=pre, post=post, then_block=tb, else_block=eb, span=span):
                pre_f = self._compile_expr(pre)
                post_f = pre_f if post is SAME_AS_PRE \
                    else self._compile_expr(post)
                then_f = self._compile_block(tb) if tb.stmts else _noop
                else_f = self._compile_block(eb) if eb.stmts else _noop
                stats = self.stats

                def run(frame):
                    took = _bool_of(pre_f(frame))
                    (then_f if took else else_f)(frame)
                    if self._checking:
                        after = _bool_of(post_f(frame))
                        if after != took:
                            raise PostconditionMismatch(
                                f"branch postcondition is {after}, "
                                f"expected {took}", span)
                        stats.checks_passed["postcondition"] += 1
                return run
            case While(pre=pre, post=post, body=body, span=span):
                pre_f = self._compile_expr(pre)
                post_f = self._compile_expr(post)
                body_f = self._compile_block(body) if body.stmts else _noop
                stats = self.stats
                tick = self._tick

                def run(frame):
                    if self._checking:
                        if _bool_of(post_f(frame)):
                            raise PostconditionMismatch(
                                "loop postcondition already true at entry", span)
                        stats.checks_passed["postcondition"] += 1
                        while _bool_of(pre_f(frame)):
                            tick(span)
                            body_f(frame)
                            if self._checking and not _bool_of(post_f(frame)):
                                raise PostconditionMismatch(
                                    "loop postcondition false after an "
                                    "iteration", span)
                            stats.checks_passed["postcondition"] += 1
                    else:
                        while _bool_of(pre_f(frame)):
                            tick(span)
                            body_f(frame)
                return run
            case For(var=var, start=a, step=st, stop=b, body=body, span=span):
                return self._compile_for(var, a, st, b, body, span)
            case Safe(kind=kind, exprs=exprs, span=span):
                arg_fns = [self._compile_expr(e) for e in exprs]
                if kind == "assert":
                    from .parser import fmt_expr
                    texts = [fmt_expr(e) for e in exprs]

                    def run(frame):
                        for f, text in zip(arg_fns, texts):
                            if not _bool_of(f(frame)):
                                raise AssertFailed(f"assertion failed: {text}",
                                                   span)
                    return run

                def run(frame):
                    print(*(f(frame) for f in arg_fns))
                return run
            case InvCheckOff(stmt=stmt):
                inner = self._compile_stmt(stmt)

                def run(frame):
                    self._nocheck_depth += 1
                    try:
                        inner(frame)
                    finally:
                        self._nocheck_depth -= 1
                return run
            case Block():
                if not s.stmts:
                    return _noop
                return self._compile_block(s)
            case RoutineBegin() | RoutineEnd():
                raise KindError("routine markers must be expanded before "
                                "execution", s.span)
        raise KindError(f"cannot execute {type(s).__name__}", s.span)

    @property
    def _checking(self):
        return self.opts.invcheck and self._nocheck_depth == 0

    def _compile_for(self, var, a, st, b, body, span):
        a_f = self._compile_int_expr(a, "loop start")
        st_f = self._compile_int_expr(st, "loop step")
        b_f = self._compile_int_expr(b, "loop stop")
        body_f = self._compile_block(body) if body.stmts else _noop
        stats = self.stats
        tick = self._tick

        def run(frame):
            n1, n2, n3 = a_f(frame), st_f(frame), b_f(frame)
            if n2 == 0:
                raise RevDomainError("loop step is zero", span)
            bindings = frame.bindings
            if var in bindings:
                raise DuplicateBinding(
                    f"loop variable {var!r} shadows an existing binding", span)
            x = n1
            checking = self._checking
            try:
                if n2 > 0:
                    while x <= n3:
                        tick(span)
                        bindings[var] = x
                        body_f(frame)
                        if checking and bindings.get(var) != x:
                            raise LoopIteratorMutated(
                                f"loop variable {var!r} was modified in the "
                                f"body", span)
                        x += n2
                else:
                    while x >= n3:
                        tick(span)
                        bindings[var] = x
                        body_f(frame)
                        if checking and bindings.get(var) != x:
                            raise LoopIteratorMutated(
                                f"loop variable {var!r} was modified in the "
                                f"body", span)
                        x += n2
            finally:
                bindings.pop(var, None)
            if self._checking:
                if a_f(frame) != n1 or st_f(frame) != n2 or b_f(frame) != n3:
                    raise LoopIteratorMutated(
                        "loop range changed while the loop ran", span)
                stats.checks_passed["iterator"] += 1
        return run

    def _compile_instr(self, s):
        opts = self.opts
        readers = []
        for a in s.args:
            if isinstance(a, Lit):
                v = a.value
                if isinstance(v, float) and opts.float_dtype is not None:
                    v = opts.float_dtype(v)
                elif isinstance(v, complex):
                    z = opts.float_dtype or float
                    v = Complex(z(v.real), z(v.imag))
                readers.append(lambda frame, _v=v: _v)
            else:
                readers.append(self._compile_reader(a))
        target_writer = self._compile_writer(s.args[0])
        strict = [(0, i, "an instruction's target may not alias its inputs")
                  for i in range(1, len(s.args))]
        grad = [(i, j, "shared reads are rejected under differentiation: "
                       "their gradient update would be a shared write "
                       "(rewrite y += x * x as y += x ^ 2)")
                for i in range(1, len(s.args))
                for j in range(i + 1, len(s.args))]
        checks = self._alias_checks(s.args, s.span, strict, grad)
        instr = PrimitiveInstr(s.op, s.fname)
        fast = None
        if s.op in ("+=", "-=") and s.fname not in ("convert", "angle"):
            spec = INSTR_FNS[s.fname]
            if spec.apply is not None:
                fast = (spec.apply, 1 if s.op == "+=" else -1)

        if fast and not checks:
            apply_fn, sign = fast

            def run(frame):
                vals = [r(frame) for r in readers]
                t = vals[0]
                if type(t) is float:
                    ok = True
                    for a2 in vals[1:]:
                        ta = type(a2)
                        if ta is not float and ta is not int:
                            ok = False
                            break
                    if ok:
                        fv = apply_fn(*vals[1:])
                        if type(fv) is float or type(fv) is int:
                            target_writer(frame, t + fv if sign > 0 else t - fv)
                            return
                out = apply_instr(instr, vals)
                target_writer(frame, out[0])
            return run

        stats = self.stats

        def run(frame):
            vals = [r(frame) for r in readers]
            for chk in checks:
                chk(frame)
            if checks:
                stats.checks_passed["alias"] += 1
            out = apply_instr(instr, vals)
            target_writer(frame, out[0])
        return run

    def _compile_call(self, fname, arg_views, span, uncall):
        if fname in PRIM_STATEMENTS:
            return self._compile_prim(fname, arg_views, span, uncall)
        callee = fname
        if uncall:
            callee = fname[1:] if fname.startswith("~") else "~" + fname
        if callee not in self.defs:
            raise UnknownFunction(f"no function named {callee!r}", span)
        readers = [self._compile_reader(a) for a in arg_views]
        writers = [self._compile_writer(a) for a in arg_views]
        strict = [(i, j, "call arguments may not share memory")
                  for i in range(len(arg_views))
                  for j in range(i + 1, len(arg_views))]
        checks = self._alias_checks(arg_views, span, strict, [])
        get_function = self._function
        n_args = len(arg_views)
        stats = self.stats

        def run(frame):
            body, names, fspan = get_function(callee)
            if n_args != len(names):
                raise KindError(
                    f"{callee} takes {len(names)} arguments, got {n_args}",
                    span)
            for chk in checks:
                chk(frame)
            if checks:
                stats.checks_passed["alias"] += 1
            sub = Frame(callee)
            b = sub.bindings
            for n, rd in zip(names, readers):
                b[n] = rd(frame)
            body(sub)
            if len(b) != len(names):
                leftover = sorted(set(b) - set(names))
                raise DirtyAncilla(
                    f"bindings leaked from {callee}: {leftover}", span)
            for n, wr in zip(names, writers):
                wr(frame, b[n])
        return run

    def _compile_prim(self, fname, arg_views, span, uncall):
        kind = PRIM_INVERSE[fname] if uncall else fname
        if len(arg_views) != PRIM_STATEMENTS[fname]:
            raise KindError(
                f"{fname} takes {PRIM_STATEMENTS[fname]} arguments", span)
        readers = [self._compile_reader(a) for a in arg_views]
        writers = [self._compile_writer(a) for a in arg_views]
        strict = [(i, j, f"{fname} arguments may not share memory")
                  for i in range(len(arg_views))
                  for j in range(i + 1, len(arg_views))]
        checks = self._alias_checks(arg_views, span, strict, [])
        instr = PrimitiveInstr(kind)

        def run(frame):
            for chk in checks:
                chk(frame)
            vals = [r(frame) for r in readers]
            out = apply_instr(instr, vals)
            for wr, nv in zip(writers, out):
                wr(frame, nv)
        return run


def _noop(frame):
    return None


# --- public operations --------------------------------------------------

def run(program, fname, args, opts=None):
    """Execute a function forward; returns the updated arguments in order."""
    return Interpreter(program, opts).run_function(fname, list(args))


def uncall(program, fname, args, opts=None):
    """Execute the inverse of a function: uncall(f, run(f, a)) == a."""
    return Interpreter(program, opts).uncall_function(fname, list(args))


@dataclass
class CheckReport:
    fname: str
    ok: bool
    max_deviation: float
    error: str = None
    per_arg_deviation: list = None
    checks_passed: dict = None

    def to_json(self):
        return json.dumps({
            "function": self.fname,
            "ok": self.ok,
            "max_deviation": self.max_deviation,
            "error": self.error,
            "per_arg_deviation": self.per_arg_deviation,
            "checks_passed": self.checks_passed,
        }, sort_keys=True)


def check_reversibility(program, fname, args, opts=None):
    """Run f then ~f and report the componentwise deviation from the
    original arguments; runtime errors are embedded, not raised."""
    opts = opts or ExecOptions()
    original = [deep_copy(a) for a in args]
    interp = Interpreter(program, opts)
    try:
        mid = interp.run_function(fname, [deep_copy(a) for a in args])
        back = interp.uncall_function(fname, mid)
        per_arg = [deviation(o, r) for o, r in zip(original, back)]
        worst = max(per_arg, default=0.0)
        ok = all(
            values_close(o, r, opts.float_tolerance)
            for o, r in zip(original, back))
        return CheckReport(fname, ok, worst, None, per_arg,
                           dict(interp.stats.checks_passed))
    except RevLangError as err:
        return CheckReport(fname, False, float("inf"), str(err), None,
                           dict(interp.stats.checks_passed))
