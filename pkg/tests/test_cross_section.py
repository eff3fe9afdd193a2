import math

import numpy as np
import pytest

from boltzslab.cross_section import (
    CrossSectionModel,
    beta_from_table,
    check_grad_cutoff,
    evaluate_B,
    hard_sphere,
    model_from_config,
)


def test_hard_sphere_value():
    m = hard_sphere()
    # 2 * cos(pi/4) sin(pi/4) = 2 * 1/2 = 1
    assert abs(evaluate_B(m, 2.0, math.pi / 4) - 1.0) < 1e-14


def test_zero_relative_speed():
    m = hard_sphere()
    assert evaluate_B(m, 0.0, 0.3) == 0.0


def test_grazing_angle():
    m = hard_sphere()
    assert abs(evaluate_B(m, 5.0, math.pi / 2)) < 1e-15


def test_domain_errors():
    m = hard_sphere()
    with pytest.raises(ValueError):
        evaluate_B(m, -1.0, 0.3)
    with pytest.raises(ValueError):
        evaluate_B(m, 1.0, -0.1)
    with pytest.raises(ValueError):
        evaluate_B(m, 1.0, 2.0)


def test_cutoff_check_hard_sphere():
    ok, rep = check_grad_cutoff(hard_sphere(), 1024)
    assert ok
    assert abs(rep.max_ratio - 1.0) < 1e-9


def test_cutoff_violated_small_constant():
    with pytest.raises(ValueError):
        CrossSectionModel(gamma=1.0, beta=lambda t: math.cos(t) * math.sin(t),
                          cutoff_const=0.5)


def test_cutoff_cos2_model():
    m = CrossSectionModel(gamma=1.0, beta=lambda t: math.cos(t) ** 2 * math.sin(t),
                          cutoff_const=1.0)
    ok, rep = check_grad_cutoff(m, 512)
    assert ok
    assert rep.max_ratio <= 1.0 + 1e-12


def test_gamma_validation():
    with pytest.raises(ValueError):
        CrossSectionModel(gamma=0.0, beta=lambda t: 0.0, cutoff_const=1.0)
    with pytest.raises(ValueError):
        CrossSectionModel(gamma=1.5, beta=lambda t: 0.0, cutoff_const=1.0)
    with pytest.raises(ValueError):
        CrossSectionModel(gamma=1.0, beta=lambda t: -1.0, cutoff_const=1.0)


def test_n_samples_validation():
    with pytest.raises(ValueError):
        check_grad_cutoff(hard_sphere(), 1)


@pytest.mark.parametrize("gamma", [1.0, 0.5, 0.25])
def test_homogeneity(gamma, rng):
    m = CrossSectionModel(gamma=gamma,
                          beta=lambda t: 0.5 * math.cos(t) * math.sin(t),
                          cutoff_const=1.0)
    for _ in range(50):
        v = rng.uniform(0.01, 10.0)
        lam = rng.uniform(0.1, 10.0)
        th = rng.uniform(0.0, math.pi / 2)
        lhs = evaluate_B(m, lam * v, th)
        rhs = lam**gamma * evaluate_B(m, v, th)
        assert abs(lhs - rhs) <= 1e-12 * max(abs(rhs), 1e-300)


def test_nonnegative(rng):
    m = hard_sphere()
    for _ in range(200):
        assert evaluate_B(m, rng.uniform(0, 8), rng.uniform(0, math.pi / 2)) >= 0.0


def test_beta_table_roundtrip(tmp_path):
    th = np.linspace(0.0, math.pi / 2, 200)
    vals = 0.8 * np.cos(th) * np.sin(th)
    path = tmp_path / "beta.txt"
    np.savetxt(path, np.column_stack([th, vals]))
    m = model_from_config("table", gamma=0.5, cutoff_const=1.0, table_path=str(path))
    assert m.gamma == 0.5
    for t in (0.1, 0.7, 1.3):
        assert abs(m.beta(t) - 0.8 * math.cos(t) * math.sin(t)) < 1e-3
    with pytest.raises(ValueError):
        model_from_config("table")
    with pytest.raises(ValueError):
        model_from_config("unknown_kind")
