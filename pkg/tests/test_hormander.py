import numpy as np
import pytest
import scipy.linalg

from gaussian_decoherence import model as mdl
from gaussian_decoherence import propagation as prop
from gaussian_decoherence.errors import UnsupportedStructureError
from gaussian_decoherence.hormander import (DF, chain_coupling, chain_order_map, classify_direction, filtration,
                                            order_exponent)

from conftest import random_model, scenario_models


def chain(n, site, delta=1.0):
    return mdl.scenario_chain([1.0] * n, mdl.nearest_neighbour(n, delta), site)


def test_free_particle():
    f = filtration(mdl.scenario_free_particle())
    assert f.dims == [1, 2] and f.r == 1 and f.holds
    assert f.W_DF.shape == (2, 0)


def test_pq():
    f = filtration(mdl.scenario_pq())
    assert f.dims == [1, 1] and f.r == 0 and not f.holds
    np.testing.assert_allclose(np.abs(f.W_DF[:, 0]), [0, 1], atol=1e-14)


def test_empty_lindblad():
    f = filtration(mdl.build_model(2, 1.0, np.eye(4), []))
    assert not f.holds and f.dims[0] == 0
    assert f.W_DF.shape == (4, 4)
    assert classify_direction(f, np.ones(4)) == DF


def test_three_chain_middle_noise():
    f = filtration(chain(3, 2))
    assert f.dims[:2] == [2, 4] and f.dims[-1] == 4 and not f.holds
    expected = np.array([[1, 0, 0, 0, -1, 0], [0, 1, 0, 0, 0, -1]], float).T / np.sqrt(2)
    assert np.max(scipy.linalg.subspace_angles(f.W_DF, expected)) <= 1e-8
    assert f.symplectic_df()


def test_four_chain_site_two():
    f = filtration(chain(4, 2))
    assert f.holds and f.r == 3
    assert f.dims == [2, 4, 6, 8]


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_end_noise_chain(n):
    f = filtration(chain(n, 1))
    assert f.holds and f.r == n - 1
    orders = [row.order for row in chain_order_map(chain(n, 1), f)]
    assert orders == list(range(n))
    assert all(row.fully_reached for row in chain_order_map(chain(n, 1), f))


def test_three_chain_middle_order_map():
    m = chain(3, 2)
    f = filtration(m)
    rows = chain_order_map(m, f)
    assert rows[1].order == 0
    # outer modes mix the order-1 sum (x,0,x) with the DF difference (x,0,-x)
    assert rows[0].order == 1 and not rows[0].fully_reached
    assert rows[0].weights[-1] == pytest.approx(1.0)
    for row in rows:
        assert sum(row.weights) == pytest.approx(2.0)
    assert classify_direction(f, [1, 0, 0, 0, 1, 0]) == 1
    assert classify_direction(f, [1, 0, 0, 0, -1, 0]) == DF


def test_chain_order_map_rejects_non_chain():
    with pytest.raises(UnsupportedStructureError):
        chain_order_map(mdl.scenario_pq())
    with pytest.raises(UnsupportedStructureError):
        chain_coupling(mdl.scenario_free_particle())


def test_chain_coupling_recovers_Qn():
    Delta = mdl.nearest_neighbour(3, 0.25)
    np.testing.assert_allclose(chain_coupling(chain(3, 1, 0.25)), np.eye(3) + Delta)


@pytest.mark.parametrize("xi, order", [([1.0, 0.0], 0), ([0.0, 1.0], 1), ([1.0, 1.0], 0)])
def test_classify_free_particle(xi, order):
    assert classify_direction(filtration(mdl.scenario_free_particle()), xi) == order


def test_classify_pq():
    f = filtration(mdl.scenario_pq())
    assert classify_direction(f, [0.0, 1.0]) == DF
    assert classify_direction(f, [1.0, 0.0]) == 0


def test_classify_zero_vector():
    with pytest.raises(ValueError):
        classify_direction(filtration(mdl.scenario_pq()), [0.0, 0.0])


@pytest.mark.parametrize("tol", [0.0, 1e-3, -1e-10])
def test_tol_range(tol):
    with pytest.raises(ValueError):
        filtration(mdl.scenario_pq(), tol)


def test_order_exponent():
    assert order_exponent(0) == 1 and order_exponent(2) == 5 and order_exponent(DF) is None


@pytest.mark.parametrize("name", list(scenario_models()))
def test_decomposition_orthogonal_and_complete(name):
    f = filtration(scenario_models()[name])
    B = np.hstack([*f.W_blocks, f.W_DF])
    np.testing.assert_allclose(B.T @ B, np.eye(f.dim), atol=1e-10)
    assert f.holds == (f.W_DF.shape[1] == 0)
    assert all(b > a for a, b in zip(f.dims[: f.r + 1], f.dims[1 : f.r + 1]))


@pytest.mark.parametrize("name", list(scenario_models()))
def test_cayley_hamilton_cap(name):
    m = scenario_models()[name]
    f = filtration(m)
    # one more application of F adds nothing
    V = f.V_r
    ext = np.hstack([V, m.F @ V])
    assert np.linalg.matrix_rank(ext, tol=1e-10 * max(np.linalg.norm(ext, 2), 1)) == V.shape[1]
    assert f.r <= 2 * m.n - 1


@pytest.mark.parametrize("name", list(scenario_models()))
def test_degeneracy_equivalence(name):
    m = scenario_models()[name]
    f = filtration(m)
    if f.holds:
        for t in (0.1, 1.0):
            D = prop.diffusion(m, t)
            assert np.linalg.eigvalsh(D)[0] >= 1e-6 * t ** (4 * m.n - 1)
    else:
        for t in np.linspace(0, 5, 11):
            D = prop.diffusion(m, t)
            for xi in f.W_DF.T:
                assert xi @ D @ xi <= 1e-12


def test_random_models_generically_hold():
    rng = np.random.default_rng(0)
    for _ in range(10):
        assert filtration(random_model(rng, 2, 1)).holds


def test_report_fields():
    rep = filtration(chain(3, 2)).report()
    assert rep["dims"] == [2, 4, 4] and rep["r"] == 1 and rep["holds"] is False
    assert rep["W_DF_dim"] == 2 and len(rep["W_DF_basis"]) == 2
    assert rep["symplectic_DF"] is True
