"""Acceptance criteria 1-12, each reported as one PASS/FAIL line.

Every experiment is run once through the CLI in reference mode; the verdicts
are read back from the emitted report.json files.
"""

import json
import math
import time

import numpy as np
import pytest

from concavity_lab import cli
from concavity_lab.concavity import concavity_defect
from concavity_lab.discretization import EnergyFunctional
from concavity_lab.experiments import NAMES
from concavity_lab.geometry import preset
from concavity_lab.solver import PowerSource, ProblemSpec, Weight
from concavity_lab.transforms import (BSourceSpec, GFunction, TransformSpec, check_B_conditions,
                                      check_g_conditions)

TITLES = {
    1: "oracle accuracy", 2: "exact concavity grid", 3: "triangle negative control",
    4: "perturbed bound", 5: "comparison estimates", 6: "p to infinity",
    7: "superhomogeneous limit", 8: "singular sources", 9: "sigma-shifted eigen bound",
    10: "fractional p=2", 11: "structural math suite", 12: "determinism and exit codes",
}


class Runs:
    def __init__(self, root):
        self.root = root
        self.status, self.seconds, self.reports = {}, {}, {}

    def get(self, name):
        if name not in self.reports:
            t0 = time.perf_counter()
            self.status[name] = cli.main(["experiment", name, "--reference-mode"])
            self.seconds[name] = time.perf_counter() - t0
            path = self.root / name / "report.json"
            self.reports[name] = json.loads(path.read_text())
        return self.reports[name]


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    mp = pytest.MonkeyPatch()
    mp.setenv("CONCAVITY_LAB_OUT", str(root))
    yield Runs(root)
    mp.undo()


@pytest.fixture
def record(criterion_log):
    def _record(n, ok, detail=""):
        line = f"CRITERION {n:>2} {'PASS' if ok else 'FAIL'}  {TITLES[n]}" + (f": {detail}" if detail else "")
        criterion_log[n] = line
        print(line)
        assert ok, line
    return _record


def cases(report):
    return {c["name"]: c for c in report["cases"]}


def test_criterion_01_oracle_accuracy(runs, record):
    rep = runs.get("oracle_accuracy")
    c = cases(rep)
    ok = (rep["passed"] and c["torsion_1d_p2"]["sup_defect"] <= 1e-3
          and c["torsion_1d_p3"]["sup_defect"] <= 5e-3
          and abs(c["torsion_disk_centre"]["details"]["centre_value"] - 0.25) <= 5e-3
          and all(v["details"]["within_time"] for v in c.values()))
    record(1, ok, ", ".join(f"{k}={v['sup_defect']:.2e}" for k, v in c.items()))


def test_criterion_02_exact_concavity(runs, record):
    rep = runs.get("exact_concavity_square")
    c = rep["cases"]
    grid = [x for x in c if x["name"].startswith("p")]
    worst = max(x["sup_defect"] for x in c)
    ok = (rep["passed"] and runs.status["exact_concavity_square"] == 0 and len(grid) == 9
          and len(c) >= 12 and all(x["details"]["refinement_ok"] for x in c)
          and all(x["sup_defect"] <= x["tau"] for x in c)
          and runs.seconds["exact_concavity_square"] <= 300)
    record(2, ok, f"{len(c)} cases, worst defect {worst:.2e}, {runs.seconds['exact_concavity_square']:.0f} s")


def test_criterion_03_triangle(runs, record):
    rep = runs.get("triangle_counterexample")
    d = rep["cases"][0]["details"]
    tau = rep["cases"][0]["tau"]
    ok = (rep["passed"] and runs.status["triangle_counterexample"] == 0
          and d["defects"][0] > 10 * tau and d["defects"][1] > d["defects"][0])
    record(3, ok, f"defects {d['defects'][0]:.2e} -> {d['defects'][1]:.2e}, 10 tau = {10 * tau:.1e}")


def test_criterion_04_perturbed_bound(runs, record):
    rep = runs.get("perturbed_bound")
    c = cases(rep)
    want = {"p2_q0", "p2_q0.5", "p3_q0", "p3_q1"}
    rows = [r for x in c.values() for r in x["details"]["rows"]]
    ok = (rep["passed"] and want <= set(c)
          and all(r["defect"] <= r["bound"] for r in rows)
          and all(x["details"]["slope"] >= 0.9 for x in c.values()))
    record(4, ok, ", ".join(f"{k} slope {v['details']['slope']:.2f}" for k, v in sorted(c.items())))


def test_criterion_05_comparison(runs, record):
    rep = runs.get("comparison")
    c = cases(rep)
    p2, p3 = c["p2"]["details"], c["p3"]["details"]
    ok = (rep["passed"] and p2["slope"] >= 0.95
          and p3["slope"] >= 0.95 * p3["predicted_exponent"]
          and p2["monotone"] and p3["monotone"])
    record(5, ok, f"p=2 slope {p2['slope']:.3f}; p=3 slope {p3['slope']:.3f} vs 0.95*{p3['predicted_exponent']:.3f}")


def test_criterion_06_p_limit(runs, record):
    rep = runs.get("p_limit")
    c = cases(rep)
    gaps = c["sup_gap_decreasing"]["details"]["gaps"]
    one_d = c["interval_gap_is_1_over_p"]["details"]["rows"]
    ok = (rep["passed"] and all(b < a for a, b in zip(gaps, gaps[1:]))
          and all(r["error"] <= 1e-3 for r in one_d)
          and c["quasiconcave"]["sup_defect"] <= c["quasiconcave"]["tau"]
          and c["eps_uniform_quasi_p32"]["details"]["rho"] > 0)
    record(6, ok, f"gaps {[round(g, 4) for g in gaps]}, rho {c['eps_uniform_quasi_p32']['details']['rho']:.1e}")


def test_criterion_07_q_to_eigen(runs, record):
    rep = runs.get("q_to_eigen")
    c = cases(rep)
    rows = sorted(rep["sweeps"]["sweep"], key=lambda r: -r["q"])
    dist = [r["distance"] for r in rows]
    rho = c["eps_uniform_log_q1.05"]["details"]["rho"]
    ok = (rep["passed"] and [r["q"] for r in rows] == [1.5, 1.25, 1.1, 1.05]
          and all(b < a for a, b in zip(dist, dist[1:])) and rho > 0)
    record(7, ok, "distance at q=" + ", ".join(f"{r['q']:g}: {r['distance']:.4f}" for r in rows)
           + f"; rho {rho:.3f}")


def test_criterion_08_singular(runs, record):
    rep = runs.get("singular")
    c = cases(rep)
    ok = (rep["passed"] and {"q-0.5_p2", "q-0.5_p3", "q-1_p2"} <= set(c)
          and all(x["details"]["phi_defects_ok"] and x["sup_defect"] <= x["bound"] for x in c.values()))
    record(8, ok, ", ".join(f"{k} {v['sup_defect']:.1e}<={v['bound']:.1e}" for k, v in c.items()))


def test_criterion_09_sigma_log(runs, record):
    rep = runs.get("sigma_log")
    c = rep["cases"]
    flat = [x for x in c if x["name"].startswith("eps0_")]
    ok = (rep["passed"] and len(c) == 4 and all(x["sup_defect"] <= x["bound"] for x in c)
          and all(x["sup_defect"] <= x["tau"] for x in flat))
    record(9, ok, ", ".join(f"{x['name']} {x['sup_defect']:.1e}" for x in c))


def test_criterion_10_fractional(runs, record):
    rep = runs.get("fractional_p2")
    c = cases(rep)
    ok = rep["passed"]
    for dom in ("interval", "square"):
        d = c[f"{dom}_distance_decreasing"]["details"]["distances"]
        ok = ok and all(b < a for a, b in zip(d, d[1:]))
        ok = ok and c[f"{dom}_scaled_eigenvalue_bounded"]["details"]["spread"] <= 0.5
    record(10, ok, "spreads " + ", ".join(
        f"{dom} {c[f'{dom}_scaled_eigenvalue_bounded']['details']['spread']:.2f}" for dom in ("interval", "square")))


def _gradient_check():
    worst = 0.0
    rng = np.random.default_rng(11)
    for p, q, w in [(2.0, 0.0, Weight()), (3.0, 1.0, Weight("affine", (1.0, 0.4, 0.1))),
                    (1.5, 0.2, Weight("sin", (0.3, 5.0)))]:
        spec = ProblemSpec(p, PowerSource(q, w), preset("square"), 1 / 8)
        fun = EnergyFunctional(spec, spec.mask)
        for _ in range(20 // 3 + 1):
            x = rng.uniform(0.05, 1.0, spec.mask.n_interior)
            g = fun.gradient(x)
            fd = np.array([(fun.value(x + 1e-6 * e) - fun.value(x - 1e-6 * e)) / 2e-6
                           for e in np.eye(len(x))])
            worst = max(worst, np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(g))))
    return worst


def _product_rule_check():
    rng = np.random.default_rng(12)
    worst = -np.inf
    for alpha, beta in [(0.5, 1.0), (2.0, 0.3), (1.0, 1.0)]:
        x0, x1 = rng.uniform(0, 1, (2, 2))
        h = lambda z: (2.5 - np.sum((z - x0) ** 2, -1)) ** (1 / alpha)  # noqa: E731
        k = lambda z: (2.5 - np.sum((z - x1) ** 2, -1)) ** (1 / beta)  # noqa: E731
        g = 1 / (1 / alpha + 1 / beta)
        v = lambda z: (h(z) * k(z)) ** g  # noqa: E731
        x, y = rng.uniform(0, 1, (2, 1000, 2))
        lam = rng.uniform(0, 1, (1000, 1))
        worst = max(worst, float(np.max(lam[:, 0] * v(x) + (1 - lam[:, 0]) * v(y) - v(lam * x + (1 - lam) * y))))
    return worst


def _hc_subadditivity_check():
    rng = np.random.default_rng(13)
    f = lambda z: np.exp(np.sin(2 * z[..., 0]) + z[..., 1] ** 2)  # noqa: E731
    g = lambda z: 1 + z[..., 0] ** 2 + np.cos(z[..., 1])  # noqa: E731
    x, y = rng.uniform(-1, 1, (2, 1000, 2))
    lam = rng.uniform(0, 1, 1000)
    z = lam[:, None] * x + (1 - lam[:, None]) * y

    def hc(fx, fy, fz):
        return fx * fy / (lam * fy + (1 - lam) * fx) - fz

    gap = hc(f(x) + g(x), f(y) + g(y), f(z) + g(z)) - hc(f(x), f(y), f(z)) - hc(g(x), g(y), g(z))
    return float(-gap.min())


def _round_trip_check():
    worst = 0.0
    for tr, t in [(TransformSpec.power(0.3, 2.0), np.geomspace(1e-3, 1e3, 50)),
                  (TransformSpec.log(), np.geomspace(1e-6, 1e3, 50)),
                  (TransformSpec.shifted_log(0.2), 0.2 + np.geomspace(1e-4, 10, 50)),
                  (TransformSpec.integral_G(GFunction.power(0.5), 2.0), np.geomspace(1e-2, 10, 15)),
                  (TransformSpec.singular_phi(0.01, -0.5, 2.0), np.geomspace(1e-2, 5, 15))]:
        worst = max(worst, float(np.max(np.abs(tr.psi(tr.phi(t)) - t) / t)))
    return worst


def _b_classifier_check():
    box = {"x": [(0.1, 1.0), (0.1, 1.0)], "t": (-2.0, 1.0), "xi": (0.0, 2.0)}
    case2 = [check_B_conditions(BSourceSpec(2.0, TransformSpec.log(), lambda x, u: 1.0 + 0.5 * x[..., 0] + 0 * u,
                                            lambda u, q1=q1: u ** (1 - q1)), box).harmonic_concave
             for q1 in (0.25, 0.5, 1.0)]
    positive = [check_g_conditions(GFunction(np.log1p), 2.0, (0.01, 3.0)).holds,
                check_g_conditions(GFunction(lambda t: 1 - np.asarray(t)), 2.0, (0.01, 0.99)).holds]
    return (not any(case2)) and all(positive)


def test_criterion_11_structural(runs, record):
    rep = runs.get("uniqueness_comparison")
    c = cases(rep)
    grad = _gradient_check()
    prod = _product_rule_check()
    hc = _hc_subadditivity_check()
    trip = _round_trip_check()
    bcls = _b_classifier_check()
    uniq = max(v["details"]["worst_gap"] for k, v in c.items() if k.startswith("unique"))
    comp = max(v["details"]["max_excess"] for k, v in c.items() if k.startswith("comparison"))
    ok = (grad <= 1e-5 and prod <= 1e-9 and hc <= 1e-9 and trip <= 1e-10 and bcls
          and rep["passed"] and uniq <= 1e-6 and comp <= 1e-8)
    record(11, ok, f"grad {grad:.1e}, product {prod:.1e}, HC {hc:.1e}, round-trip {trip:.1e}, "
                   f"uniqueness {uniq:.1e}, comparison {comp:.1e}, B/g classifier {'ok' if bcls else 'wrong'}")


def test_criterion_12_determinism(runs, record, tmp_path, monkeypatch):
    names = ["triangle_counterexample", "comparison", "p_limit", "q_to_eigen"]
    for n in names:
        runs.get(n)
    monkeypatch.setenv("CONCAVITY_LAB_OUT", str(tmp_path / "rerun"))
    same = True
    for n in names:
        assert cli.main(["experiment", n, "--reference-mode"]) == 0
        for f in sorted((runs.root / n).iterdir()):
            same = same and f.read_bytes() == (tmp_path / "rerun" / n / f.name).read_bytes()
    all_pass = all(runs.status[n] == 0 for n in runs.status)
    missing = cli.main(["solve", str(tmp_path / "absent.json")]) == 2
    # a convex field handed to the concavity command is a failing verdict
    field = tmp_path / "convex.csv"
    from concavity_lab.discretization import GridField, rasterize, write_field_csv
    mask = rasterize(preset("square"), 1 / 16)
    write_field_csv(GridField.from_function(mask, lambda x: (x ** 2).sum(axis=1), where="all"), field)
    ident = tmp_path / "id.json"
    ident.write_text('{"power": {"gamma": 1.0}}')
    failing = cli.main(["concavity", str(field), str(ident)]) == 1
    ok = same and all_pass and missing and failing
    record(12, ok, f"byte-identical reruns {same}, statuses pass->0 {all_pass}, fail->1 {failing}, missing->2 {missing}")


def test_all_experiments_ran(runs):
    for n in NAMES:
        runs.get(n)
    assert all(runs.status[n] == 0 for n in NAMES), runs.status
    assert math.isfinite(sum(runs.seconds.values()))
