import pytest

from revlang.errors import (AliasedArguments, AssertFailed, DirtyAncilla,
                            DuplicateBinding, FuelExhausted,
                            LoopIteratorMutated, PostconditionMismatch,
                            RevDomainError, UnknownFunction, ValidationFailed)
from revlang.interpreter import (ExecOptions, Frame, Interpreter,
                                 check_reversibility, read_view, run, uncall,
                                 write_view)
from revlang.parser import parse_program
from revlang.stdlib import load_example
from revlang.values import Array, Complex, deviation


def prog(src):
    return parse_program(src)


class TestRunUncall:
    def test_multiplier_spec_values(self):
        p = load_example("multiplier")
        assert run(p, "multiplier", [2, 3, 5]) == [17, 3, 5]
        assert uncall(p, "multiplier", [17, 3, 5]) == [2, 3, 5]

    def test_rrfib_matches_countdown_oracle(self):
        def oracle(n):
            total, c = 1, n
            while c > 1:
                total += oracle(c - 1)
                c -= 2
            return total

        p = load_example("rrfib_corrected")
        for n in range(11):
            assert run(p, "rrfib", [0, n]) == [oracle(n), n]
        # frozen oracle values for the record
        assert [oracle(n) for n in range(9)] == [1, 1, 2, 3, 5, 8, 13, 21, 34]

    def test_complex_log_identity_property(self):
        p = load_example("complex_log")
        out = run(p, "complex_log", [Complex(0.0, 0.0), Complex(1.0, 1.2)])
        back = uncall(p, "complex_log", out)
        assert deviation(back[0], Complex(0.0, 0.0)) <= 1e-9
        assert back[1] == Complex(1.0, 1.2)

    def test_wrong_arity(self):
        p = load_example("multiplier")
        with pytest.raises(Exception):
            run(p, "multiplier", [1, 2])

    def test_invalid_program_rejected(self):
        with pytest.raises(ValidationFailed):
            run(prog("fn f(y)\nx <- 0\nend"), "f", [1])

    def test_unknown_function(self):
        with pytest.raises(UnknownFunction):
            run(load_example("multiplier"), "nope", [])


class TestChecks:
    def test_while_postcondition_true_at_entry(self):
        p = prog("""fn f(n)
c <- 0
while (c < n, c > 0)
    c += 1
end
c -= n
c -> 0
end""")
        # at entry c == 0, postcondition c > 0 is false: fine for n >= 1
        assert run(p, "f", [3]) == [3]
        # rebind: postcondition c > -1 is true at entry
        p2 = prog("""fn f(n)
c <- 0
while (c < n, c > -1)
    c += 1
end
c -= n
c -> 0
end""")
        with pytest.raises(PostconditionMismatch):
            run(p2, "f", [3])

    def test_while_postcondition_false_after_iteration(self):
        p = prog("""fn f(n)
c <- 0
while (c < n, c > 2)
    c += 1
end
c -= n
c -> 0
end""")
        with pytest.raises(PostconditionMismatch):
            run(p, "f", [5])

    def test_if_postcondition_mismatch(self):
        p = prog("""fn f(x)
if (x > 0, x > 1)
    x += 1
end
end""")
        # branch taken with x=0.5 -> x=1.5 -> post true == pre true: passes
        assert run(p, "f", [0.5]) == [1.5]
        p2 = prog("""fn f(x)
if (x > 0, x > 2)
    x += 1
end
end""")
        with pytest.raises(PostconditionMismatch):
            run(p2, "f", [0.5])  # post 1.5 > 2 is false, branch was taken

    def test_dirty_ancilla(self):
        p = prog("""fn f(x)
n <- 0.0
n += x
n -> 0.0
end""")
        with pytest.raises(DirtyAncilla):
            run(p, "f", [1.0])
        assert run(p, "f", [0.0]) == [0.0]

    def test_discrete_ancilla_requires_exact(self):
        p = prog("""fn f(x)
n <- 0
n += x
n -= x
n -> 0
end""")
        assert run(p, "f", [7]) == [7]

    def test_mutated_for_iterator(self):
        p = prog("""fn f(x!, n)
for i = 1:1:n
    n += 1
    x! += 1
    n -= 1
end
end""")
        assert run(p, "f", [0, 3]) == [3, 3]
        p2 = prog("""fn f(x!, n!)
for i = 1:1:n!
    n! += 1
end
end""")
        with pytest.raises(LoopIteratorMutated):
            run(p2, "f", [0, 3])

    def test_mutated_loop_variable(self):
        p = prog("""fn f(x!)
for i = 1:1:3
    INC(i)
    x! += 1
end
end""")
        with pytest.raises(LoopIteratorMutated):
            run(p, "f", [0])

    def test_aliased_instruction_target(self):
        p = prog("fn f(a)\na += a\nend")
        with pytest.raises(AliasedArguments):
            run(p, "f", [1.0])

    def test_aliased_call_arguments(self):
        p = prog("""fn g(a, b)
a += b
end
fn f(x)
g(x, x)
end""")
        with pytest.raises(AliasedArguments):
            run(p, "f", [1.0])

    def test_aliased_array_cell_vs_whole(self):
        p = prog("""fn g(a, b)
a += b[1]
end
fn f(x)
g(x[2], x)
end""")
        with pytest.raises(AliasedArguments):
            run(p, "f", [Array.vector([1.0, 2.0])])

    def test_distinct_cells_allowed(self):
        p = prog("""fn g(a, b)
a += b
end
fn f(x)
g(x[2], x[1])
end""")
        out = run(p, "f", [Array.vector([1.0, 2.0])])
        assert out[0].data == [1.0, 3.0]

    def test_shared_read_plain_ok_gradient_rejected(self):
        p = prog("fn f(y, x)\ny += x * x\nend")
        assert run(p, "f", [0.0, 3.0]) == [9.0, 3.0]
        with pytest.raises(AliasedArguments):
            run(p, "f", [0.0, 3.0], ExecOptions(gradient_mode=True))

    def test_safe_assert_fires_even_unchecked(self):
        p = prog("""fn f(x)
@invcheckoff @safe assert(x > 0)
end""")
        with pytest.raises(AssertFailed):
            run(p, "f", [-1.0], ExecOptions(invcheck=False))

    def test_fuel_exhausted(self):
        p = prog("""fn f(x!)
for i = 1:1:100000
    x! += 1
end
end""")
        with pytest.raises(FuelExhausted):
            run(p, "f", [0], ExecOptions(max_steps=1000))

    def test_zero_step_loop(self):
        p = prog("fn f(x!)\nfor i = 1:0:3\nx! += 1\nend\nend")
        with pytest.raises(RevDomainError):
            run(p, "f", [0])

    def test_duplicate_allocation_rejected_at_runtime(self):
        p = prog("fn f(y)\nx <- 0\nx <- 0\nx -> 0\nx -> 0\nend")
        with pytest.raises(DuplicateBinding):
            run(p, "f", [1])

    def test_invcheckoff_skips_dirty_check(self):
        p = prog("""fn f(x)
n <- 0.0
n += x
@invcheckoff n -> 0.0
end""")
        assert run(p, "f", [5.0]) == [5.0]

    def test_checks_are_observers(self):
        # identical results with and without checks on a passing program
        p = load_example("i_umm")
        import random
        from revlang.stdlib import sample_args
        args = sample_args("i_umm", random.Random(5))
        a = run(p, "i_umm", [x for x in map(_dc, args)])
        b = run(p, "i_umm", [x for x in map(_dc, args)],
                ExecOptions(invcheck=False))
        assert a == b


def _dc(v):
    from revlang.values import deep_copy
    return deep_copy(v)


class TestViews:
    def _env(self, **bindings):
        env = Frame()
        env.bindings.update(bindings)
        return env

    def _view(self, text):
        p = parse_program(f"fn t(q)\nq += {text}\nend")
        return p.get("t").body.stmts[0].args[1]

    def test_bijector_read(self):
        env = self._env(x=3)
        assert read_view(env, self._view("x |> addconst(1)")) == 4

    def test_bijector_write_applies_inverse(self):
        env = self._env(x=3)
        write_view(env, self._view("x |> addconst(1)"), 7)
        assert env.bindings["x"] == 6

    def test_array_cell_write(self):
        env = self._env(a=Array.vector([1, 2, 3]))
        write_view(env, self._view("a[2]"), 9)
        assert env.bindings["a"].data == [1, 9, 3]

    def test_field_write(self):
        env = self._env(p=Complex(1.0, 2.0))
        write_view(env, self._view("p.im"), 7.0)
        assert env.bindings["p"] == Complex(1.0, 7.0)

    def test_neg_bijector_roundtrip(self):
        env = self._env(x=3.5)
        v = self._view("x |> neg")
        assert read_view(env, v) == -3.5
        write_view(env, v, read_view(env, v))
        assert env.bindings["x"] == 3.5


class TestEnvironmentHygiene:
    def test_binding_keyset_restored(self):
        p = prog("""fn g(a)
t <- 0.0
t += a
a += t
t -= a / 2
t -> 0.0
end
fn f(x)
g(x)
end""")
        interp = Interpreter(p)
        out = interp.run_function("f", [1.5])
        assert out == [3.0]

    def test_determinism(self):
        p = load_example("complex_log")
        args = [Complex(0.0, 0.0), Complex(1.0, 1.2)]
        from revlang.values import deep_copy
        a = run(p, "complex_log", [deep_copy(v) for v in args])
        b = run(p, "complex_log", [deep_copy(v) for v in args])
        assert a == b


class TestCheckReversibility:
    def test_multiplier_exact(self):
        rep = check_reversibility(load_example("multiplier"), "multiplier",
                                  [2, 3, 5])
        assert rep.ok and rep.max_deviation == 0.0

    def test_dirty_program_reported_not_raised(self):
        p = prog("""fn f(x)
n <- 0.0
n += x
n -> 0.0
end""")
        rep = check_reversibility(p, "f", [1.0])
        assert not rep.ok
        assert "DirtyAncilla" in rep.error

    def test_report_json_stable(self):
        rep = check_reversibility(load_example("multiplier"), "multiplier",
                                  [2, 3, 5])
        import json
        d = json.loads(rep.to_json())
        assert d["ok"] is True and d["function"] == "multiplier"


class TestTrace:
    def test_trace_golden(self):
        p = prog("fn f(y, a)\ny += a\nSWAP(y, a)\nend")
        sink = []
        run(p, "f", [1.0, 2.0], ExecOptions(trace=True, trace_sink=sink))
        assert sink == [
            "2:1\tInstrCall\ty,a",
            "3:1\tFnCall\ty,a",
        ]


class TestFloat32Mode:
    def test_literals_and_arithmetic_stay_binary32(self):
        import numpy as np
        p = prog("""fn f(x)
h <- 0.0
h += x / 2
x += h * h
h -= x |> addconst(0) / 2
end""")
        # simpler: just exercise literal dtype
        p = prog("""fn f(x)
h <- 2.0
x += h
h -> 2.0
end""")
        out = run(p, "f", [np.float32(1.0)],
                  ExecOptions(float_dtype=np.float32))
        assert isinstance(out[0], np.float32)
        assert out[0] == np.float32(3.0)


class TestMiscSurface:
    def test_safe_print_goes_to_stdout(self, capsys):
        p = prog("fn f(x)\n@safe print(x)\nend")
        run(p, "f", [7])
        assert capsys.readouterr().out.strip() == "7"

    def test_invcheckoff_block_form(self):
        p = prog("""fn f(x)
@invcheckoff begin
    n <- 0.0
    n += x
    n -> 0.0
end
end""")
        assert run(p, "f", [2.5]) == [2.5]

    def test_exec_options_validation(self):
        with pytest.raises(ValueError):
            ExecOptions(float_tolerance=-1.0)
        with pytest.raises(ValueError):
            ExecOptions(max_steps=0)

    def test_uncall_of_textual_inverse_name(self):
        p = prog("fn f(x)\nx += 1\nend")
        # calling the generated inverse by its name works
        assert Interpreter(p).run_function("~f", [3]) == [2]
