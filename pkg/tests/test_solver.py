import math
from dataclasses import replace

import numpy as np
import pytest

from concavity_lab.experiments.oracles import oracle_torsion_1d
from concavity_lab.geometry import IntervalDomain, preset
from concavity_lab.solver import (EigenSource, GroundStateSource, PowerSource, ProblemSpec,
                                  SingularSource, SumPowersSource, Weight, pde_residual,
                                  random_init, solve, solve_dirichlet, solve_eigen,
                                  solve_singular_continuation, source_from_literal, weight_from_literal)
from concavity_lab.transforms import TransformSpec, zeta_constant

SQUARE = preset("square")


@pytest.mark.parametrize("p,tol", [(2.0, 1e-3), (3.0, 5e-3)])
def test_interval_torsion_matches_closed_form(p, tol):
    res = solve(ProblemSpec(p, PowerSource(0.0), IntervalDomain(-1.0, 1.0), 1 / 128))
    exact = oracle_torsion_1d(p, res.u.mask)
    assert np.max(np.abs(res.u.values - exact.values)[res.u.valid]) <= tol
    assert res.u.max() == pytest.approx((p - 1) / p, abs=tol)


def test_sublinear_square_contract():
    res = solve(ProblemSpec(2.0, PowerSource(0.5), SQUARE, 1 / 32))
    assert res.converged
    assert res.u.min_interior() > 0
    assert res.residual <= 1e-10 * max(1.0, abs(res.energy))


def test_energy_history_nonincreasing():
    res = solve(ProblemSpec(3.0, PowerSource(1.0), SQUARE, 1 / 16))
    hist = np.array(res.history)
    assert np.all(np.diff(hist) <= 1e-14 * np.maximum(1.0, np.abs(hist[1:])))


def test_eigen_square():
    res = solve(ProblemSpec(2.0, EigenSource(), SQUARE, 1 / 64))
    assert res.multiplier == pytest.approx(2 * math.pi ** 2, rel=5e-3)
    u = res.u.values / res.u.max()
    xy = res.u.mask.coords
    mode = np.sin(math.pi * xy[..., 0]) * np.sin(math.pi * xy[..., 1])
    assert np.max(np.abs(u - mode)[res.u.valid]) < 1e-3


def test_eigen_interval_and_weight_scaling():
    dom = IntervalDomain(0.0, 1.0)
    one = solve(ProblemSpec(2.0, EigenSource(), dom, 1 / 128))
    two = solve(ProblemSpec(2.0, EigenSource(Weight("const", (2.0,))), dom, 1 / 128))
    assert one.multiplier == pytest.approx(math.pi ** 2, rel=1e-3)
    assert two.multiplier == pytest.approx(one.multiplier / 2, rel=1e-9)
    assert np.argmax(one.u.values) == np.argmax(two.u.values)


def test_ground_state_absorbs_multiplier():
    spec = ProblemSpec(2.0, GroundStateSource(3.0), SQUARE, 1 / 32)
    res = solve(spec)
    assert res.u.min_interior() > 0
    r = pde_residual(spec, res.u)
    assert np.max(np.abs(r)) <= 1e-6 * res.u.max() ** 3
    assert res.info["M_q"] == pytest.approx(res.u.max())


def test_singular_continuation_steps_shrink():
    spec = ProblemSpec(2.0, SingularSource(-0.5, 0.1), SQUARE, 1 / 32)
    stages = solve_singular_continuation(spec, [1e-1, 1e-2, 1e-3])
    steps = [s.info["step_distance"] for s in stages[1:]]
    assert steps[1] < steps[0]
    assert [s.info["eta"] for s in stages] == [1e-1, 1e-2, 1e-3]
    with pytest.raises(ValueError):
        solve_singular_continuation(spec, [])


def test_invariants_checked():
    with pytest.raises(ValueError):
        ProblemSpec(2.0, PowerSource(1.5), SQUARE, 1 / 16)
    with pytest.raises(ValueError):
        ProblemSpec(2.0, SumPowersSource(0.25, 0.5), SQUARE, 1 / 16)
    with pytest.raises(ValueError):
        ProblemSpec(2.0, SingularSource(-0.5, 0.0), SQUARE, 1 / 16)
    with pytest.raises(ValueError):
        ProblemSpec(1.0, PowerSource(0.0), SQUARE, 1 / 16)


def test_multistart_uniqueness():
    spec = ProblemSpec(3.0, PowerSource(0.5), SQUARE, 1 / 16)
    base = solve_dirichlet(spec).u.values
    for seed in range(3):
        other = solve_dirichlet(spec, random_init(spec.mask, SQUARE, seed)).u.values
        assert np.max(np.abs(other - base)) <= 1e-6


def test_comparison_principle_ordered_weights():
    a1, a2 = Weight(), Weight("affine", (1.0, 0.3, 0.0))
    u1 = solve(ProblemSpec(3.0, PowerSource(0.0, a1), SQUARE, 1 / 32)).u.values
    u2 = solve(ProblemSpec(3.0, PowerSource(0.0, a2), SQUARE, 1 / 32)).u.values
    assert np.all(u1 <= u2 + 1e-8)


def test_regularized_minimizers_converge():
    p, h = 2.0, 1 / 32
    base = ProblemSpec(p, PowerSource(0.0), SQUARE, h)
    u0 = solve(base).u.values
    kernel = TransformSpec.power(0.5, zeta_constant(p, 0.0)).with_p(p)
    dists = []
    for eps in (1e-1, 1e-2, 1e-3):
        u = solve(replace(base, paper_epsilon=eps, kernel=kernel)).u.values
        dists.append(float(np.max(np.abs(u - u0))))
    assert dists[0] > dists[1] > dists[2]


def test_hopf_diagnostic_positive():
    res = solve(ProblemSpec(2.0, PowerSource(0.0), SQUARE, 1 / 32))
    assert res.info["hopf_c"] > 0


def test_literals():
    src = source_from_literal({"type": "sum_powers", "q": 0.5, "r": 0.25, "a": {"affine": [1, 0, 0]}})
    assert isinstance(src, SumPowersSource) and src.weight.kind == "affine"
    assert source_from_literal({"type": "torsion"}) == PowerSource(0.0)
    assert weight_from_literal({"hardy_henon": {"omega": 0.5}}).params == (0.5,)
    with pytest.raises(ValueError):
        source_from_literal({"type": "cubic"})
