import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gasconic.conic import ConicProgram, LinExpr, debug_dump
from gasconic.ipm import solve_socp


def test_linexpr_arithmetic():
    e = 2.0 * LinExpr.variable(0) - LinExpr.variable(1) + 3.0
    assert e.coeffs == {0: 2.0, 1: -1.0}
    assert e.const == 3.0
    assert e.value([1.0, 4.0]) == 2.0 - 4.0 + 3.0


def test_mccormick_corner_tightness():
    # at box corners the envelopes pin w to x*y exactly
    for x, y in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]:
        p = ConicProgram()
        w = p.add_var("w", -10, 10)
        p.add_mccormick(p.x(w), LinExpr.constant(x), LinExpr.constant(y),
                        0.0, 1.0, 0.0, 1.0)
        p.add_objective(p.x(w))
        lo = solve_socp(p.freeze()).primal_objective
        p2 = ConicProgram()
        w2 = p2.add_var("w", -10, 10)
        p2.add_mccormick(p2.x(w2), LinExpr.constant(x), LinExpr.constant(y),
                         0.0, 1.0, 0.0, 1.0)
        p2.add_objective(-1.0 * p2.x(w2))
        hi = -solve_socp(p2.freeze()).primal_objective
        assert abs(lo - x * y) < 1e-7 and abs(hi - x * y) < 1e-7


def _mccormick_range(lx, ux, ly, uy, x, y):
    lo = max(ly * x + lx * y - lx * ly, uy * x + ux * y - ux * uy)
    hi = min(uy * x + lx * y - lx * uy, ly * x + ux * y - ux * ly)
    return lo, hi


def test_mccormick_midpoint_range():
    # frozen from the independent evaluation of the four inequalities
    lo, hi = _mccormick_range(0, 1, 0, 1, 0.5, 0.5)
    assert (lo, hi) == (0.0, 0.5)
    lo, hi = _mccormick_range(-1, 1, -2, 2, 0.0, 0.0)
    assert (lo, hi) == (-2.0, 2.0)


@given(x=st.floats(0, 1), y=st.floats(0, 1))
@settings(max_examples=80, deadline=None)
def test_mccormick_validity_property(x, y):
    lo, hi = _mccormick_range(0, 1, 0, 1, x, y)
    assert lo - 1e-12 <= x * y <= hi + 1e-12


def test_mccormick_rejects_infinite_bounds():
    p = ConicProgram()
    w = p.add_var("w", -1, 1)
    with pytest.raises(ValueError):
        p.add_mccormick(p.x(w), 0.0, 0.0, -math.inf, 1.0, 0.0, 1.0)


def test_linearize_abs_negative_value():
    p = ConicProgram()
    x = p.add_var("x", -3.0, 5.0)
    p.add_linear(p.x(x), "==", -2.0)
    plus, minus = p.linearize_abs(x, 1.0)
    sol = solve_socp(p.freeze())
    assert abs(sol.x[plus]) < 1e-7
    assert abs(sol.x[minus] - 2.0) < 1e-7
    assert abs(sol.primal_objective - 2.0) < 1e-7


def test_linearize_abs_zero_and_one_sided():
    p = ConicProgram()
    x = p.add_var("x", 0.0, 5.0)
    plus, minus = p.linearize_abs(x, 1.0)
    assert p.var_ub[minus] == 0.0
    p.add_linear(p.x(x), "==", 0.0)
    sol = solve_socp(p.freeze())
    assert abs(sol.primal_objective) < 1e-7


def test_linearize_abs_requires_finite_bounds():
    p = ConicProgram()
    x = p.add_var("x")
    with pytest.raises(ValueError):
        p.linearize_abs(x, 1.0)


def test_rotated_rewrite_values():
    # (u,v,x) = (1,2,2): rewritten cone row is 3 >= ||(-1, 2*sqrt(2))|| = 3
    p = ConicProgram()
    u = p.add_var("u", 0, 10)
    v = p.add_var("v", 0, 10)
    x = p.add_var("x", -10, 10)
    p.add_rotated_soc(p.x(u), p.x(v), [p.x(x)])
    std = p.freeze(equilibrate=False)
    start = std.p + std.q
    A = std.A.toarray()
    point = np.array([1.0, 2.0, 2.0])
    s = std.b[start:start + 3] - A[start:start + 3] @ point
    assert np.allclose(s, [3.0, -1.0, 2.0 * math.sqrt(2.0)])
    assert abs(s[0] - np.linalg.norm(s[1:])) < 1e-12


@given(u=st.floats(0.01, 5), v=st.floats(0.01, 5),
       x1=st.floats(-3, 3), x2=st.floats(-3, 3))
@settings(max_examples=100, deadline=None)
def test_rotated_rewrite_preserves_membership(u, v, x1, x2):
    in_rotated = 2 * u * v >= x1 * x1 + x2 * x2
    t, d = u + v, u - v
    in_plain = t >= math.sqrt(d * d + 2 * x1 * x1 + 2 * x2 * x2) - 1e-12
    if in_rotated:
        assert in_plain or abs(2 * u * v - (x1 * x1 + x2 * x2)) < 1e-9
    else:
        assert not (t > math.sqrt(d * d + 2 * (x1 * x1 + x2 * x2)) + 1e-12)


def test_empty_cone_rejected():
    p = ConicProgram()
    t = p.add_var("t", 0, 1)
    with pytest.raises(ValueError):
        p.add_soc(p.x(t), [])
    with pytest.raises(ValueError):
        p.add_rotated_soc(p.x(t), p.x(t), [])


def test_coefficient_limit():
    p = ConicProgram()
    x = p.add_var("x", 0, 1)
    with pytest.raises(ValueError):
        p.add_linear(2e12 * p.x(x), "<=", 1.0)


def test_freeze_deterministic():
    def build():
        p = ConicProgram("d")
        a = p.add_var("a", 0, 2)
        b = p.add_var("b", -1, 1)
        p.add_linear(p.x(a) + 2.0 * p.x(b), "<=", 1.5)
        p.add_soc(p.x(a), [p.x(b), 0.5])
        p.add_objective(p.x(a) - p.x(b))
        return p.freeze()

    s1, s2 = build(), build()
    assert (s1.A != s2.A).nnz == 0
    assert np.array_equal(s1.b, s2.b)
    assert np.array_equal(s1.c, s2.c)


def test_debug_dump_contains_rows():
    p = ConicProgram("dump")
    a = p.add_var("a", 0, 2)
    p.add_linear(p.x(a), "<=", 1.0, "cap")
    p.add_rotated_soc(p.x(a), p.x(a), [1.0], "rot")
    text = debug_dump(p)
    assert "cap:" in text and "rsoc rot:" in text and "var a" in text


def test_bound_row_editing():
    p = ConicProgram()
    z = p.add_var("z", binary=True)
    p.add_objective(-1.0 * p.x(z))
    std = p.freeze()
    b = std.b.copy()
    std.set_var_bounds(b, z, lb=0.0, ub=0.0)
    sol = solve_socp(std, b_override=b)
    assert abs(sol.x[z]) < 1e-7
