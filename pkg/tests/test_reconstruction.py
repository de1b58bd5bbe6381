import json
import math

import numpy as np
import pytest

from sigrecon.cde import solve_batch, taylor_word_operator
from sigrecon.cli import demo_config
from sigrecon.observables import CoordinateProjection
from sigrecon.reconstruction import (
    ReconstructionConfig,
    RFitError,
    SingularSystemError,
    build_system,
    compare,
    r_derivative_at_zero,
    r_grid,
    reconstruct,
)
from sigrecon.signature import TruncatedTensor, get_coefficient, path_signature, random_walk_path, words
from sigrecon.vector_fields import sample_model


@pytest.fixture(scope="module")
def case():
    model = sample_model("neural2exp", 2, 2, seed=42)
    path = random_walk_path(np.random.default_rng(7), 2, 4, box=1.0)
    return model, path


def test_r_derivative_of_polynomials():
    r = r_grid(0.5, 9)
    assert r_derivative_at_zero((r, r**2), 2) == pytest.approx(2.0)
    assert r_derivative_at_zero((r, 3 * r + r**3), 1) == pytest.approx(3.0)
    assert r_derivative_at_zero([(x, 1 + x**3) for x in r], 3) == pytest.approx(6.0)
    vals = np.stack([np.sin(r), np.cos(r)], axis=1)
    np.testing.assert_allclose(r_derivative_at_zero((r, vals), 1, degree=7), [1.0, 0.0], atol=1e-8)


def test_r_derivative_errors():
    with pytest.raises(RFitError):
        r_derivative_at_zero((np.array([-1.0, 0.0, 1.0]), np.zeros(3)), 2, degree=4)
    with pytest.raises(RFitError):
        r_derivative_at_zero((np.zeros(6), np.zeros(6)), 1)


def test_r_derivative_lowers_degree_when_ill_conditioned():
    r = np.array([-1.0, -0.999, 0.0, 0.001, 0.002, 1.0])
    assert r_derivative_at_zero((r, 5 * r), 1, degree=5, cond_cap=1e3) == pytest.approx(5.0)


def test_config_validation_and_round_trip():
    cfg = ReconstructionConfig(L=3, epsilon=(0.05, 0.04, 0.03))
    assert cfg.epsilon_for(3) == 0.03 and cfg.degree_for(2) == 6 and cfg.nodes_for(2) == 17
    assert ReconstructionConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(ValueError):
        ReconstructionConfig(L=3, degree=4)
    with pytest.raises(ValueError):
        ReconstructionConfig(L=2, degree=5, nodes=5)
    with pytest.raises(ValueError):
        ReconstructionConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        ReconstructionConfig(L=1, degree=5, nodes=12)


def test_fast_system_matches_word_operators(case, rng):
    model, _ = case
    etas = rng.standard_normal((3, 2))
    fast, meta, _ = build_system(model, 2, etas)
    slow, _, _ = build_system(model, 2, etas, gs=[CoordinateProjection(j, 2) for j in (1, 2)])
    np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=1e-14)
    assert meta[:2] == [(0, 1), (0, 2)]


def test_system_needs_enough_rows(case):
    with pytest.raises(ValueError):
        build_system(case[0], 3, np.zeros((3, 2)))


def test_singular_system_detected():
    model = sample_model("scalar_poly", 3, 1, seed=0)
    etas = np.random.default_rng(0).standard_normal((54, 1))
    with pytest.raises(SingularSystemError):
        build_system(model, 3, etas, rng=np.random.default_rng(1), retries=1)


def test_extracted_derivative_matches_taylor_coefficients(case, rng):
    model, path = case
    S = path_signature(path, 3)
    etas = rng.standard_normal((2, 2))
    for m in (1, 2, 3):
        rs = r_grid(0.03, 2 * (m + 4) + 5)
        Y = solve_batch(model, path, np.tile(etas, (rs.size, 1)), np.repeat(rs, 2)).y_T.reshape(rs.size, 2, 2)
        deriv = r_derivative_at_zero((rs, Y), m, m + 4) / math.factorial(m)
        for e in range(2):
            for j in (1, 2):
                g = CoordinateProjection(j, 2)
                expected = sum(taylor_word_operator(w, g, model, etas[e]) * get_coefficient(S, w)
                               for w in words(2, m))
                assert deriv[e, j - 1] == pytest.approx(expected, abs=1e-6, rel=1e-4)


def test_reconstruction_recovers_signature(case):
    model, path = case
    report = reconstruct(model, path)
    for lv in report.levels:
        assert lv.ok and lv.within(1e-3, 1e-5), lv.to_dict()
    est = report.estimated_tensor()
    np.testing.assert_allclose(est.levels[1], path.points[-1] - path.points[0], atol=1e-6)


def test_lower_levels_do_not_depend_on_truncation(case):
    model, path = case
    a = reconstruct(model, path, ReconstructionConfig(L=2))
    b = reconstruct(model, path, ReconstructionConfig(L=3))
    for m in (1, 2):
        np.testing.assert_array_equal(a.level(m).estimated, b.level(m).estimated)


def test_reports_are_deterministic(case):
    model, path = case
    assert reconstruct(model, path).to_json() == reconstruct(model, path).to_json()


def test_refinement_does_not_degrade():
    cfg = demo_config(42)
    model, path = cfg.build_model(), cfg.build_path()
    for m in (1, 2, 3):
        deg = m + 4
        base = ReconstructionConfig(L=m, degree=deg, nodes=2 * deg + 5)
        fine = ReconstructionConfig(L=m, degree=deg, nodes=2 * (2 * deg + 5) - 1,
                                    solver=type(base.solver)(atol=base.solver.atol / 2))
        e0 = reconstruct(model, path, base).level(m).max_abs_err
        e1 = reconstruct(model, path, fine).level(m).max_abs_err
        assert e1 <= 2 * e0 + 1e-12


def test_negative_control_reports_singular_level():
    model = sample_model("scalar_poly", 3, 1, seed=0)
    path = random_walk_path(np.random.default_rng(1), 3, 3, box=1.0)
    report = reconstruct(model, path, ReconstructionConfig(L=3))
    lv3 = report.level(3)
    assert lv3.estimated is None and lv3.error.startswith("SingularSystemError")
    with pytest.raises(ValueError):
        report.estimated_tensor()
    assert "SingularSystemError" in report.to_csv()


def test_report_serialisation(case):
    model, path = case
    report = reconstruct(model, path, ReconstructionConfig(L=2))
    data = json.loads(report.to_json())
    assert data["config"]["L"] == 2 and len(data["levels"]) == 2
    rows = report.to_csv().splitlines()
    assert rows[0] == "level,max_abs_err,max_rel_err,cond,residual,error" and len(rows) == 3


def test_compare_tables():
    S = path_signature(random_walk_path(np.random.default_rng(3), 2, 3), 2)
    assert all(row["max_abs_err"] == 0.0 for row in compare(S, S))
    levels = [lv.copy() for lv in S.levels]
    levels[2][1] += 1e-6
    table = compare(TruncatedTensor(2, 2, tuple(levels)), S)
    assert table[2]["max_abs_err"] == pytest.approx(1e-6, rel=1e-6)
    assert table[2]["worst_word"] == [1, 2]
    with pytest.raises(ValueError):
        compare(S, path_signature(random_walk_path(np.random.default_rng(3), 2, 3), 3))


def test_path_model_mismatch(case):
    with pytest.raises(ValueError):
        reconstruct(case[0], random_walk_path(np.random.default_rng(0), 3, 2))
