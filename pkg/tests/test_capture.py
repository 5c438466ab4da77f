import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fraclap import operator as op_mod
from fraclap.capture import (
    GreensBank,
    InteractionMatrix,
    build_interaction,
    check_eps_validity,
    gmfpt_full,
    gmfpt_two_term,
)
from fraclap.constants import make_alpha_params
from fraclap.errors import ConfigurationError, DomainError, RegimeError
from fraclap.operator import GridSpec, assemble
from fraclap.targets import RegimeWarning, Role, Target, TargetSet

from .helpers import constant_provider, free_space_provider, zero_provider

P06 = make_alpha_params(0.6)
POOL = [(a, b) for a in (0.2, 0.5, 0.8) for b in (0.2, 0.5, 0.8)]


@pytest.fixture(scope="module")
def periodic_bank():
    op = assemble(GridSpec(48), "periodic", 0.6, scheme="corrected")
    yield GreensBank(op)
    op_mod.clear_cache()


def quiet_set(eps, centers, boundary, kappas=None):
    kappas = kappas or [1.0] * len(centers)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        return TargetSet(eps, [Target(c, k) for c, k in zip(centers, kappas)], boundary)


# --- target sets --------------------------------------------------------------

def test_target_validation():
    with pytest.raises(DomainError):
        Target((0.5, 0.5), kappa=20.0)
    with pytest.raises(DomainError):
        TargetSet(0.03, [Target((1.2, 0.5))], "neumann")
    with pytest.raises(DomainError):
        TargetSet(0.7, [Target((0.5, 0.5))], "neumann")
    with pytest.raises(ConfigurationError):
        TargetSet(0.03, [], "neumann")


def test_overlap_is_a_regime_error():
    with pytest.raises(RegimeError, match="well-separated"):
        TargetSet(0.03, [Target((0.5, 0.5)), Target((0.55, 0.5))], "periodic")
    with pytest.raises(RegimeError, match="boundary"):
        TargetSet(0.03, [Target((0.02, 0.5))], "neumann")


def test_marginal_separation_warns():
    with pytest.warns(RegimeWarning, match="radii"):
        ts = TargetSet(0.03, [Target((0.5, 0.5)), Target((0.7, 0.5))], "periodic")
    assert len(ts.warnings_issued) == 1


def test_periodic_separation_uses_nearest_copy():
    ts = quiet_set(0.01, [(0.05, 0.5), (0.95, 0.5)], "periodic")
    assert ts.separation(0, 1) == pytest.approx(0.1)


def test_roles_parse():
    assert Target((0.5, 0.5), role="desired").role is Role.DESIRED


# --- interaction matrix -------------------------------------------------------

def test_single_target_matrix():
    im = build_interaction(quiet_set(0.03, [(0.5, 0.5)], "neumann"), constant_provider(0.42), 0.6)
    np.testing.assert_array_equal(im.g, [[0.42]])


def test_pair_reciprocity_from_two_solves(periodic_bank):
    ts = quiet_set(0.03, [(0.25, 0.25), (0.6, 0.75)], "periodic")
    with warnings.catch_warnings():
        warnings.simplefilter("error", RegimeWarning)
        im = build_interaction(ts, periodic_bank, 0.6)
    assert im.asymmetry < 1e-2
    np.testing.assert_array_equal(im.g, im.g.T)


def test_asymmetric_provider_warns():
    def lopsided(x0):
        return 0.5, lambda p: np.full(len(p), 1.0 + x0[0])

    with pytest.warns(RegimeWarning, match="asymmetry"):
        im = build_interaction(quiet_set(0.03, [(0.2, 0.5), (0.8, 0.5)], "periodic"), lopsided, 0.6)
    assert im.asymmetry > 0.1


def test_kappa_weights():
    im = build_interaction(quiet_set(0.02, [(0.2, 0.5), (0.8, 0.5)], "periodic", [0.5, 2.0]), zero_provider, 0.6)
    np.testing.assert_allclose(np.diag(im.k_inv), [0.5**0.8, 2.0**0.8])


# --- GMFPT --------------------------------------------------------------------

def test_single_target_reduction():
    ts = quiet_set(0.03, [(0.5, 0.5)], "neumann")
    im = build_interaction(ts, constant_provider(0.37), 0.6)
    lead = P06.leading_capacity(0.03)
    ubar, s = gmfpt_full(ts, im, P06)
    assert ubar == pytest.approx(lead - 0.37, rel=1e-13)
    assert gmfpt_two_term(ts, im, P06) == pytest.approx(lead - 0.37, rel=1e-13)
    assert s[0] == pytest.approx(P06.c_alpha, rel=1e-13)


@pytest.mark.parametrize("N", [1, 2, 4])
def test_no_interaction_scales_with_count(N):
    centers = [(0.2 + 0.2 * i, 0.5) for i in range(N)]
    ts = quiet_set(0.01, centers, "periodic")
    im = build_interaction(ts, zero_provider, 0.6)
    lead = P06.leading_capacity(0.01)
    with pytest.warns(RegimeWarning, match="leading"):
        # max|G| = 0 never triggers, so force the guard path through a tiny leading term instead
        check_eps_validity(ts, InteractionMatrix(np.full((N, N), lead), im.k_inv), P06)
    assert gmfpt_full(ts, im, P06)[0] == pytest.approx(lead / N, rel=1e-13)
    assert gmfpt_two_term(ts, im, P06) == pytest.approx(lead / N, rel=1e-13)


def test_consistency_and_symmetric_strengths(periodic_bank):
    ts = quiet_set(0.03, [(0.25, 0.25), (0.75, 0.75)], "periodic")
    ubar, s = gmfpt_full(ts, build_interaction(ts, periodic_bank, 0.6), P06)
    assert s.sum() == pytest.approx(P06.c_alpha, rel=1e-10)
    assert s[0] == pytest.approx(s[1], rel=1e-8)
    assert ubar > 0


@given(st.sets(st.sampled_from(POOL), min_size=2, max_size=5), st.sampled_from([0.01, 0.02]))
def test_removing_a_target_never_decreases_ubar(periodic_bank, centers, eps):
    centers = sorted(centers)
    ts = quiet_set(eps, centers, "periodic")
    ubar = gmfpt_full(ts, build_interaction(ts, periodic_bank, 0.6), P06)[0]
    assert ubar > 0
    for k in range(len(centers)):
        sub = quiet_set(eps, centers[:k] + centers[k + 1 :], "periodic")
        assert gmfpt_full(sub, build_interaction(sub, periodic_bank, 0.6), P06)[0] >= ubar


@pytest.mark.filterwarnings("ignore::fraclap.targets.RegimeWarning")
def test_two_term_converges_to_full():
    centers = [(0.3, 0.3), (0.6, 0.7), (0.8, 0.2)]
    provider = free_space_provider(0.6)
    diffs = []
    for eps in (0.05, 0.03, 0.02):
        ts = quiet_set(eps, centers, "periodic")
        im = build_interaction(ts, provider, 0.6)
        diffs.append(abs(gmfpt_full(ts, im, P06)[0] - gmfpt_two_term(ts, im, P06)))
    assert diffs[0] > diffs[1] > diffs[2]


def test_singular_bracket_is_a_regime_error():
    ts = quiet_set(0.03, [(0.5, 0.5)], "neumann")
    im = InteractionMatrix(np.array([[P06.leading_capacity(0.03)]]), np.eye(1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        with pytest.raises(RegimeError, match="eps"):
            gmfpt_full(ts, im, P06)


def test_bank_caches_solves(periodic_bank):
    a = periodic_bank.field((0.3, 0.3))
    assert periodic_bank.field(np.array([0.3, 0.3])) is a
    ev = periodic_bank.evaluator(quiet_set(0.03, [(0.3, 0.3)], "periodic"))
    np.testing.assert_allclose(ev(np.array([[0.6, 0.6]]), 0), a.G([[0.6, 0.6]]))


def test_pool_is_well_separated():
    for a, b in itertools.combinations(POOL, 2):
        assert np.hypot(a[0] - b[0], a[1] - b[1]) >= 0.3 - 1e-12
