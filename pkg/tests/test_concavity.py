import json
import math

import numpy as np
import pytest

from concavity_lab.concavity import (KAPPA_TOL, ConcavityError, concavity_defect, eps_uniform_modulus,
                                     harmonic_concavity_defect, hessian_min_eig, lambda_grid,
                                     mid_concavity_defect, quasiconcavity_defect, recompute_defect,
                                     segment_filter, tau)
from concavity_lab.discretization import GridField, rasterize
from concavity_lab.geometry import IntervalDomain, preset, signed_distance
from concavity_lab.solver import PowerSource, ProblemSpec, solve
from concavity_lab.transforms import TransformSpec, apply

SQUARE = preset("square")
LINE = IntervalDomain(-1.0, 1.0)


def field(domain, h, fn):
    return GridField.from_function(rasterize(domain, h), fn, where="all")


@pytest.fixture(scope="module")
def square_torsion():
    return solve(ProblemSpec(2.0, PowerSource(0.0), SQUARE, 1 / 32)).u


def test_tau_is_linear_in_h():
    assert tau(1 / 64) == KAPPA_TOL / 64


def test_lambda_grid():
    lams = lambda_grid(16)
    assert lams[0] == 1 / 16 and lams[-1] == 15 / 16 and 0.5 in lams
    assert np.all(np.diff(lams) > 0)


def test_affine_has_zero_defect():
    v = field(SQUARE, 1 / 16, lambda x: 2 * x[:, 0] - 3 * x[:, 1] + 1)
    assert abs(concavity_defect(v).sup_defect) <= 1e-14


def test_square_parabola_defect_one():
    v = field(LINE, 1 / 32, lambda x: x ** 2)
    rep = concavity_defect(v)
    assert rep.sup_defect == pytest.approx(1.0)
    assert rep.argmax["lambda"] == 0.5
    assert sorted([rep.argmax["x"][0], rep.argmax["y"][0]]) == [-1.0, 1.0]


def test_sqrt_torsion_passes(square_torsion):
    rep = concavity_defect(apply(TransformSpec.power(0.5), square_torsion))
    assert rep.passes


def test_witness_reproduces(square_torsion):
    rep = concavity_defect(square_torsion.with_values(square_torsion.values ** 2))
    assert recompute_defect(square_torsion.with_values(square_torsion.values ** 2), rep.argmax) == rep.sup_defect


def test_report_json_keys(square_torsion):
    d = json.loads(concavity_defect(square_torsion).to_json())
    assert {"functional", "sup_defect", "argmax", "skipped", "h", "L", "tau"} <= set(d)


def test_gamma_hierarchy(square_torsion):
    d = [concavity_defect(apply(TransformSpec.power(g), square_torsion)).sup_defect for g in (0.25, 0.5, 1.0)]
    h = square_torsion.mask.h
    assert d[0] <= d[1] + tau(h) and d[1] <= d[2] + tau(h)


def test_stride_subscan(square_torsion):
    v = square_torsion.with_values(square_torsion.values ** 1.5)
    assert concavity_defect(v, stride=1).sup_defect >= concavity_defect(v, stride=2).sup_defect


def test_mid_defect_relations(square_torsion):
    v = apply(TransformSpec.power(0.5), square_torsion)
    assert mid_concavity_defect(v).sup_defect <= concavity_defect(v).sup_defect
    line = field(IntervalDomain(0.0, 1.0), 1 / 64, lambda x: np.sin(math.pi * x))
    logsin = apply(TransformSpec.log(), line)
    assert mid_concavity_defect(logsin).sup_defect <= tau(1 / 64)


def test_all_pairs_skipped_is_an_error():
    mask = rasterize(SQUARE, 1 / 8)
    v = GridField(mask, np.full(mask.shape, np.nan))
    with pytest.raises(ConcavityError):
        concavity_defect(v)


def test_quasiconcavity_examples():
    h = 1 / 32
    cone = field(SQUARE, h, lambda x: signed_distance(SQUARE, x))
    assert quasiconcavity_defect(cone).sup_defect <= 2 * h
    saddle = field(SQUARE, h, lambda x: (x[:, 0] - 0.5) ** 2 - (x[:, 1] - 0.5) ** 2)
    assert quasiconcavity_defect(saddle).sup_defect > 0.1
    assert quasiconcavity_defect(field(SQUARE, h, lambda x: 1.0 + 0 * x[:, 0])).sup_defect == 0


def test_eps_uniform_modulus():
    h, eps = 1 / 64, 0.25
    rho = eps_uniform_modulus(field(LINE, h, lambda x: -x ** 2), eps)
    assert rho == pytest.approx(eps ** 2 / 4, abs=2 * h * eps)
    assert eps_uniform_modulus(field(LINE, h, lambda x: 3 * x + 1), eps) == pytest.approx(0, abs=1e-14)
    assert eps_uniform_modulus(field(LINE, h, lambda x: x ** 2), eps) < 0
    with pytest.raises(ConcavityError):
        eps_uniform_modulus(field(LINE, h, lambda x: -x ** 2), h)


def test_harmonic_concavity_examples():
    box = [(1.0, 2.0)]
    assert harmonic_concavity_defect(lambda z: 2.0 + 0 * z[..., 0], box).sup_defect <= 1e-15
    assert harmonic_concavity_defect(lambda z: 1 / z[..., 0], box).sup_defect <= 1e-15
    # 1/h = e^t is convex, so e^{-t} is harmonic concave
    assert harmonic_concavity_defect(lambda z: np.exp(-z[..., 0]), [(0.0, 2.0)]).sup_defect <= 0
    # 1/h = sqrt(t) is strictly concave
    assert harmonic_concavity_defect(lambda z: z[..., 0] ** -0.5, box).sup_defect > 1e-4
    with pytest.raises(ConcavityError):
        harmonic_concavity_defect(lambda z: z[..., 0] - 1.5, box)


def test_hessian_examples():
    h = 1 / 32
    rep = hessian_min_eig(field(SQUARE, h, lambda x: -0.5 * (x ** 2).sum(axis=1)))
    ok = np.isfinite(rep.max_eig)
    assert np.allclose(rep.max_eig[ok], -1, atol=1e-9) and np.allclose(rep.min_eig[ok], -1, atol=1e-9)
    assert rep.strongly_concave
    flat = hessian_min_eig(field(SQUARE, h, lambda x: x[:, 0] + 2 * x[:, 1]))
    assert np.nanmax(np.abs(flat.max_eig)) <= 1e-12 and not flat.strongly_concave
    root = field(LINE, 1 / 128, lambda x: np.sqrt(np.maximum(1 - x ** 2, 0) / 2))
    inner = np.abs(root.mask.coords) < 0.9
    assert hessian_min_eig(root, region=inner).sup_max_eig < -0.5


def test_segment_filter_keeps_segments_above_threshold():
    v = field(LINE, 1 / 32, lambda x: 1 - x ** 2)
    keep = segment_filter(v, 0.5)
    ia = np.array([[32], [40], [8]])
    ib = np.array([[40], [56], [56]])
    # 0 -> 0.25 stays above 0.5; 0.25 -> 0.75 and -0.75 -> 0.75 dip below it
    assert keep(ia, ib).tolist() == [True, False, False]
