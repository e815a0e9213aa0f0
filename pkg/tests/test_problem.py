import numpy as np
import pytest

from quadelast.problem import (
    Compliance,
    LameParams,
    ManufacturedSolution,
    compliance_apply,
    compliance_matrix,
    trig_solution,
)

MATERIAL = LameParams(mu=79.3, lam=123.0)


def test_lame_validation():
    with pytest.raises(ValueError):
        LameParams(mu=0.0, lam=1.0)
    with pytest.raises(ValueError):
        LameParams(mu=1.0, lam=-0.1)
    LameParams(mu=1.0, lam=0.0)  # boundary of the admissible range is fine


def test_from_young_poisson():
    p = LameParams.from_young_poisson(E=1000.0, nu=0.3)
    assert np.isclose(p.mu, 1000.0 / 2.6)
    assert np.isclose(p.lam, 1000.0 * 0.3 / (1.3 * 0.4))
    # nearly incompressible value used in the locking study
    p = LameParams.from_young_poisson(E=1000.0, nu=0.4999)
    assert np.isclose(p.lam, 1000.0 * 0.4999 / (1.4999 * 0.0002), rtol=1e-12)
    assert p.lam > 1.6e6
    with pytest.raises(ValueError):
        LameParams.from_young_poisson(E=1.0, nu=0.5)


def test_compliance_identity_simple():
    A = Compliance(LameParams(mu=0.5, lam=0.0))
    np.testing.assert_allclose(compliance_apply(A, np.eye(2)), np.eye(2))


def test_compliance_identity_benchmark_material():
    A = Compliance(MATERIAL)
    out = compliance_apply(A, np.eye(2))
    # (1/158.6) * (1 - 246/404.6) = 1/404.6 on each diagonal entry
    np.testing.assert_allclose(out, np.eye(2) / 404.6)
    assert np.isclose(out[0, 0], 0.0024716, atol=1e-7)


def test_compliance_skew_part():
    A = Compliance(MATERIAL)
    skw = np.array([[0.0, 1.0], [-1.0, 0.0]])
    np.testing.assert_allclose(compliance_apply(A, skw), skw / (2 * 79.3))
    A2 = Compliance(MATERIAL, skew_factor=3.0)
    np.testing.assert_allclose(compliance_apply(A2, skw), 3.0 * skw)
    with pytest.raises(ValueError):
        Compliance(MATERIAL, skew_factor=-1.0)


def test_compliance_symmetry():
    A = Compliance(MATERIAL)
    rng = np.random.RandomState(0)
    for _ in range(20):
        t, e = rng.randn(2, 2), rng.randn(2, 2)
        lhs = np.sum(compliance_apply(A, t) * e)
        rhs = np.sum(t * compliance_apply(A, e))
        assert np.isclose(lhs, rhs, atol=1e-14)


@pytest.mark.parametrize("params", [
    MATERIAL,
    LameParams(mu=1.0, lam=0.0),
    LameParams.from_young_poisson(1000.0, 0.4999),
])
def test_compliance_positivity(params):
    A4 = compliance_matrix(Compliance(params))
    np.testing.assert_allclose(A4, A4.T, atol=1e-15)
    ev = np.linalg.eigvalsh(A4)
    assert ev.min() > 0
    mu, lam = params.mu, params.lam
    # spectrum: 1/(2(mu+lam)) on traces, 1/(2mu) elsewhere (default skew)
    expect = sorted([1 / (2 * (mu + lam)), 1 / (2 * mu), 1 / (2 * mu), 1 / (2 * mu)])
    np.testing.assert_allclose(sorted(ev), expect, rtol=1e-12)


def test_solution_point_values():
    sol = trig_solution(MATERIAL)
    assert np.isclose(sol.p(np.array([0.0, 0.0])), np.pi / 2)
    # div u at (1/2, 1/2) is -pi
    g = sol.grad_u(np.array([0.5, 0.5]))
    assert np.isclose(g[0, 0] + g[1, 1], -np.pi)
    # boundary data does not vanish on the left edge
    assert abs(sol.g(np.array([0.0, 0.25]))[0]) > 0.9


def test_sigma_symmetric():
    sol = trig_solution(MATERIAL)
    x = np.random.RandomState(1).uniform(0, 1, size=(50, 2))
    s = sol.sigma(x)
    np.testing.assert_allclose(s[..., 0, 1], s[..., 1, 0])


def test_grad_u_against_fd():
    sol = trig_solution(MATERIAL)
    rng = np.random.RandomState(2)
    x = rng.uniform(0.1, 0.9, size=(30, 2))
    h = 1e-7
    for j in range(2):
        step = np.zeros(2)
        step[j] = h
        fd = (sol.u(x + step) - sol.u(x - step)) / (2 * h)
        np.testing.assert_allclose(sol.grad_u(x)[..., j], fd, atol=1e-6)


def test_constitutive_residual():
    # A sigma + [[0, p], [-p, 0]] = grad u pointwise
    sol = trig_solution(MATERIAL)
    A = Compliance(MATERIAL)
    x = np.random.RandomState(3).uniform(0, 1, size=(1000, 2))
    p = sol.p(x)
    skw = np.zeros(x.shape[:-1] + (2, 2))
    skw[..., 0, 1] = p
    skw[..., 1, 0] = -p
    resid = compliance_apply(A, sol.sigma(x)) + skw - sol.grad_u(x)
    assert np.abs(resid).max() < 1e-12


def test_equilibrium_fd_rate():
    # f = div sigma: centered differences converge at second order
    sol = trig_solution(MATERIAL)
    rng = np.random.RandomState(4)
    x = rng.uniform(0.2, 0.8, size=(100, 2))
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        div_fd = np.zeros(x.shape[:-1] + (2,))
        for j in range(2):
            step = np.zeros(2)
            step[j] = h
            ds = (sol.sigma(x + step) - sol.sigma(x - step)) / (2 * h)
            div_fd += ds[..., :, j]
        errs.append(np.abs(div_fd - sol.f(x)).max())
    rate1 = np.log2(errs[0] / errs[1])
    rate2 = np.log2(errs[1] / errs[2])
    assert 1.9 < rate1 < 2.1 and 1.9 < rate2 < 2.1


def test_solution_carries_params():
    sol = trig_solution(LameParams(mu=2.0, lam=5.0))
    assert isinstance(sol, ManufacturedSolution)
    assert sol.params.mu == 2.0
    # sigma depends on the material: pure shear entry scales with mu
    x = np.array([0.0, 0.0])
    s_small = trig_solution(LameParams(mu=1.0, lam=5.0)).sigma(x)
    np.testing.assert_allclose(sol.sigma(x)[0, 1], 2.0 * s_small[0, 1])
