import dataclasses
import json
import math

import numpy as np
import pytest

from eigenlocus.dataset import LabeledDataset
from eigenlocus.diagnostics import (component_eigenlocus_report, diagnose, directional_symmetry,
                                    eigenenergy_ledger, equilibrium_check, extreme_rank_check,
                                    kkt_audit, pointwise_covariance, rayleigh_report,
                                    spectrum_report, weak_dual_experiment)
from eigenlocus.gaussian import GaussianSpec, sample_pair
from eigenlocus.geometry import gram_matrix
from eigenlocus.model import fit

TWO = LabeledDataset.from_classes([[1.0, 0.0]], [[-1.0, 0.0]])
EX1 = (GaussianSpec([3, 0.5], np.diag([0.5, 2.0])), GaussianSpec([3, -0.5], np.diag([0.5, 2.0])))


@pytest.fixture(scope="module")
def two_point():
    return fit(TWO, math.inf)


@pytest.fixture(scope="module")
def example_one():
    data = sample_pair(*EX1, 300, 300, 1)
    return data, fit(data, 1.0)


def test_kkt_two_point(two_point):
    rep = kkt_audit(two_point, TWO, 1e-10)
    assert rep.passed, rep.residuals()


def test_kkt_injected_fault(two_point):
    psi = two_point.psi.copy()
    psi[0] += 0.1
    bad = dataclasses.replace(two_point, psi=psi, xi=two_point.eps * psi)
    rep = kkt_audit(bad, TWO)
    assert rep.equality == pytest.approx(0.1, abs=1e-12)
    assert "KKTE2 equality" in rep.failures


def test_kkt_example_one(example_one):
    data, m = example_one
    assert kkt_audit(m, data, 1e-6).passed


def test_kkt_rejects_mismatched_data(two_point):
    with pytest.raises(ValueError):
        kkt_audit(two_point, LabeledDataset(np.ones((3, 2)), np.array([1.0, -1, 1])))


def test_equilibrium(two_point, example_one):
    eq = equilibrium_check(two_point)
    assert eq.sum1 == pytest.approx(0.5, abs=1e-8) and eq.residual <= 1e-15
    data, m = example_one
    assert equilibrium_check(m).residual <= 1e-10 * data.n
    assert equilibrium_check(m).residual == pytest.approx(abs(m.psi @ data.y), abs=1e-12)


def test_equilibrium_imbalanced_counts():
    rng = np.random.default_rng(0)
    data = LabeledDataset.from_classes(rng.normal(size=(100, 2)) + 1, rng.normal(size=(500, 2)) - 1)
    m = fit(data, 1.0)
    assert equilibrium_check(m).residual <= 1e-10 * data.n


def test_ledger_two_point(two_point):
    led = eigenenergy_ledger(two_point)
    assert led.tau_norm_sq == pytest.approx(1.0, abs=1e-7)
    assert led.E_tau1 == pytest.approx(0.5, abs=1e-7)
    assert led.class1_rhs == pytest.approx(0.5, abs=1e-7)
    assert max(led.residuals().values()) <= 1e-8


def test_ledger_label_negation(example_one):
    data, m = example_one
    neg = fit(data.negated(), 1.0)
    a, b = eigenenergy_ledger(m), eigenenergy_ledger(neg)
    assert a.E_tau1 == pytest.approx(b.E_tau2, rel=1e-12)
    assert a.E_tau2 == pytest.approx(b.E_tau1, rel=1e-12)
    assert a.nabla_eq == pytest.approx(-b.nabla_eq, rel=1e-12)
    ra, rb = a.residuals(), b.residuals()
    for k in ra:
        # the near-zero residuals are rounding noise and only agree at that level
        assert ra[k] == pytest.approx(rb[k], rel=1e-9, abs=1e-6)


def test_ledger_identities_a_to_d_at_optimum(example_one):
    data, m = example_one
    led = eigenenergy_ledger(m)
    res = led.residuals()
    for k in ("(a) total eigenenergy", "(b) class one component",
              "(c) class two component", "(d) law of cosines"):
        assert res[k] <= led.bound, k


def test_fulcrum_gap_equals_slack_imbalance(example_one):
    # E1 + nabla - f_s reduces to (sum_2 psi xi - sum_1 psi xi)/2 at the optimum
    data, m = example_one
    led = eigenenergy_ledger(m)
    pos = data.y > 0
    expected = 0.5 * (m.psi[~pos] @ m.xi[~pos] - m.psi[pos] @ m.xi[pos])
    assert led.E_tau1 + led.nabla_eq - led.fulcrum == pytest.approx(expected, abs=1e-6)


def test_pointwise_covariance_examples():
    single = LabeledDataset(np.array([[2.0, 0.0]]), np.array([1.0]))
    assert pointwise_covariance(single).cov_up[0] == 4.0
    rep = pointwise_covariance(TWO)
    assert rep.cov_up_labeled[0] == 2.0 and rep.cov_up_labeled[1] == 2.0


def test_pointwise_covariance_brute_force():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(12, 3))
    y = np.where(rng.random(12) < 0.5, 1.0, -1.0)
    psi = rng.random(12) * (rng.random(12) < 0.6)
    data = LabeledDataset(X, y)
    rep = pointwise_covariance(data, psi)
    for i in range(12):
        own = sum(X[j] for j in range(12) if y[j] == y[i])
        other = sum((X[j] for j in range(12) if y[j] != y[i]), np.zeros(3))
        eb_own = sum((psi[j] * X[j] for j in range(12) if y[j] == y[i]), np.zeros(3))
        eb_other = sum((psi[j] * X[j] for j in range(12) if y[j] != y[i]), np.zeros(3))
        assert rep.cov_up[i] == pytest.approx(X[i] @ X.sum(axis=0))
        assert rep.cov_up_labeled[i] == pytest.approx(X[i] @ (own - other))
        assert rep.cov_up_eigenbalanced[i] == pytest.approx(X[i] @ (eb_own - eb_other))
    assert np.array_equal(rep.index, np.arange(12))


def test_pointwise_covariance_additive():
    rng = np.random.default_rng(4)
    A, B = rng.normal(size=(5, 2)), rng.normal(size=(7, 2))
    both = LabeledDataset(np.vstack([A, B]), np.ones(12))
    x = both.X
    full = pointwise_covariance(both).cov_up
    np.testing.assert_allclose(full, x @ A.sum(axis=0) + x @ B.sum(axis=0), rtol=1e-12)


def test_extreme_rank_check_counts():
    rng = np.random.default_rng(5)
    data = LabeledDataset.from_classes(rng.normal(size=(20, 2)), rng.normal(size=(20, 2)))
    psi = rng.random(40)
    chk = extreme_rank_check(data, psi)
    rep = pointwise_covariance(data)
    top = np.argsort(-psi)[:4]
    ref = sum(rep.cov_up_labeled[i] > np.median(rep.cov_up_labeled[data.y == data.y[i]]) for i in top)
    assert chk.n_top == 4 and chk.n_above_median == ref


def test_extreme_rank_claim_on_example_one(example_one):
    # the claim: >= 90% of the top-decile-psi points sit above their class median
    data, m = example_one
    chk = extreme_rank_check(data, m.psi)
    assert chk.passed, f"only {chk.fraction:.0%} of top-decile-psi points above class median"


def test_spectrum_examples():
    rep = spectrum_report(np.eye(3))
    np.testing.assert_allclose(rep.eigenvalues, [1, 1, 1])
    assert rep.rank_estimate == 3
    rng = np.random.default_rng(6)
    X = rng.normal(size=(5, 2))
    y = np.array([1.0, -1, 1, -1, 1])
    assert spectrum_report(gram_matrix(X, y)).rank_estimate <= 2
    rep = spectrum_report(gram_matrix(X, y, 0.01))
    assert rep.rank_estimate == 5 and rep.lambda_min >= 0.01 - 1e-12
    with pytest.raises(ValueError):
        spectrum_report(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        spectrum_report(np.eye(4), max_n=3)


def test_spectrum_trace_and_shift():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(30, 3))
    y = np.where(rng.random(30) < 0.5, 1.0, -1.0)
    Q0 = gram_matrix(X, y)
    a = spectrum_report(Q0)
    assert a.eigenvalues.sum() == pytest.approx(np.trace(Q0), rel=1e-9)
    b = spectrum_report(gram_matrix(X, y, 0.3))
    np.testing.assert_allclose(b.eigenvalues - a.eigenvalues, 0.3, atol=1e-10 * a.lambda_max)


def test_rayleigh_examples():
    Q = np.array([[2.0, 1.0], [1.0, 2.0]])
    r = rayleigh_report(Q, np.array([1.0, 1.0]) / math.sqrt(2))
    assert r.quotient == pytest.approx(3.0) and r.eigen_residual_norm == pytest.approx(0.0, abs=1e-15)
    r = rayleigh_report(np.ones((2, 2)), [0.5, 0.5])
    assert r.quotient == pytest.approx(2.0) and r.eigen_residual_norm == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        rayleigh_report(Q, [0.0, 0.0])


def test_component_report_and_symmetry(example_one):
    data, m = example_one
    rep = component_eigenlocus_report(m, data)
    assert rep.optimum_relation_residual <= 1e-6
    assert math.isfinite(rep.rel_discrepancy)
    assert directional_symmetry(m, data) <= 1e-12


def test_weak_dual_example_one_kkt_not_worse():
    for seed in range(10):
        data = sample_pair(*EX1, 60, 60, seed)
        rep = weak_dual_experiment(data, 1.0)
        assert rep.regularized.kkt_passed >= rep.unregularized.kkt_passed
        assert not rep.well_posed and rep.unregularized.rank <= 2


def test_weak_dual_well_posed_when_d_exceeds_n():
    rng = np.random.default_rng(8)
    data = LabeledDataset(rng.normal(size=(4, 10)), np.array([1.0, -1, 1, -1]))
    rep = weak_dual_experiment(data, 1.0)
    assert rep.well_posed and "well-posed" in rep.note
    assert rep.regularized.rank == rep.unregularized.rank == 4


def test_full_report(two_point):
    rep = diagnose(two_point, TWO)
    assert rep.passed, rep.failures
    doc = json.loads(rep.to_json())
    assert doc["version"] == 1 and doc["passed"]
    assert doc["widths"]["full_width"] == pytest.approx(2.0, abs=1e-8)
    assert 0.0 <= doc["sv_fraction"] <= 1.0
    assert "overall" in rep.table()
