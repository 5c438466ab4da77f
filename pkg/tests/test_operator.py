import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fraclap import operator as op_mod
from fraclap.constants import make_alpha_params
from fraclap.errors import DomainError, ResourceError
from fraclap.lattice import ImageMap, image_sum_kernel
from fraclap.operator import (
    GridSpec,
    apply,
    assemble,
    dump,
    eigenmode,
    load,
    spectral_residual,
    structure_defects,
)

# eigenvalues -(|lambda|^alpha) of the continuum operator (tests/oracles/compute_fixtures.py)
NEUMANN_11 = -5.986842660187338  # (pi^2 * 2)^0.6
PERIODIC_10 = -9.07435660113713  # (4 pi^2)^0.6


@pytest.fixture(scope="module", params=["periodic", "neumann"])
def small(request):
    return assemble(GridSpec(8), request.param, 0.6, 4)


def test_grid_spec():
    g = GridSpec(4)
    assert g.h == 0.25 and g.size == 16
    np.testing.assert_allclose(g.nodes()[5], (0.375, 0.375))
    assert g.nearest_index((0.3, 0.9)) == 4 + 3
    with pytest.raises(DomainError):
        GridSpec(1)


def test_structure(small):
    asym, rows = structure_defects(small.entries)
    assert asym < 1e-12 and rows < 1e-10
    off = small.entries - np.diag(np.diag(small.entries))
    assert off.min() >= 0
    assert np.all(np.diag(small.entries) < 0)


def test_entry_formula(small):
    g = small.grid
    x = g.nodes()
    p, q = 3, 41
    k = image_sum_kernel(ImageMap(small.boundary, 4), x[p], x[q], 0.6, tail=True)
    assert small.entries[p, q] == pytest.approx(make_alpha_params(0.6).C_alpha * g.h**2 * k, rel=1e-12)


def test_constant_in_kernel(small):
    np.testing.assert_allclose(apply(small, np.ones(small.grid.size)), 0.0, atol=1e-10)


def test_apply_shape_checks(small):
    assert apply(small, np.zeros((8, 8))).shape == (64,)
    with pytest.raises(DomainError):
        apply(small, np.zeros(10))


@given(st.lists(st.floats(-1, 1), min_size=64, max_size=64))
def test_negative_semidefinite(values):
    A = assemble(GridSpec(8), "neumann", 0.6, 4).entries
    f = np.asarray(values)
    assert f @ A @ f <= 1e-10 * max(1.0, f @ f)


@given(st.integers(0, 7), st.integers(0, 7))
def test_periodic_shift_equivariance(s1, s2):
    op = assemble(GridSpec(8), "periodic", 0.6, 4)
    rng = np.random.default_rng(0)
    f = rng.standard_normal((8, 8))
    shifted = np.roll(f, (s1, s2), axis=(0, 1))
    lhs = apply(op, shifted).reshape(8, 8)
    rhs = np.roll(apply(op, f).reshape(8, 8), (s1, s2), axis=(0, 1))
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_neumann_eigenvalue_sign():
    phi, lam = eigenmode(GridSpec(8), "neumann", 1, 1)
    assert -(lam**0.6) == pytest.approx(NEUMANN_11, rel=1e-12)
    phi, lam = eigenmode(GridSpec(8), "periodic", 1, 0)
    assert -(lam**0.6) == pytest.approx(PERIODIC_10, rel=1e-12)


def test_null_mode_rejected():
    with pytest.raises(DomainError, match="null"):
        eigenmode(GridSpec(8), "neumann", 0, 0)


@pytest.mark.slow
@pytest.mark.parametrize("boundary, mode", [("neumann", (1, 1)), ("periodic", (1, 0))])
def test_spectral_residual_n64(boundary, mode):
    op = assemble(GridSpec(64), boundary, 0.6)
    assert spectral_residual(op, *mode) < 0.05
    op_mod.clear_cache()


def test_resource_guard():
    with pytest.raises(ResourceError, match="GiB"):
        assemble(GridSpec(200), "neumann", 0.6, memory_cap=2**30)


def test_unknown_scheme():
    with pytest.raises(DomainError):
        assemble(GridSpec(8), "neumann", 0.6, scheme="fancy")


def test_dump_roundtrip(tmp_path, small):
    path = tmp_path / "a.bin"
    dump(small, path)
    raw = path.read_bytes()
    assert raw[:4] == b"FLAP" and len(raw) == 32 + 8 * small.grid.size**2
    back = load(path)
    assert back.boundary is small.boundary and back.alpha == small.alpha and back.m_max == small.m_max
    np.testing.assert_array_equal(back.entries, small.entries)


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE" + bytes(60))
    with pytest.raises(DomainError):
        load(path)


def test_disk_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("FRACLAP_CACHE_DIR", str(tmp_path))
    op_mod.clear_cache()
    a = assemble(GridSpec(6), "periodic", 0.4, 3)
    assert len(list(tmp_path.glob("operator-*.bin"))) == 1
    op_mod.clear_cache()
    b = assemble(GridSpec(6), "periodic", 0.4, 3)
    np.testing.assert_array_equal(a.entries, b.entries)


@pytest.mark.parametrize("boundary", ["periodic", "neumann"])
def test_corrected_scheme_invariants(boundary):
    op = assemble(GridSpec(12), boundary, 0.6, 4, scheme="corrected")
    asym, rows = structure_defects(op.entries)
    assert asym < 1e-12 and rows < 1e-10
    assert np.linalg.eigvalsh(op.entries).max() < 1e-10


def test_corrected_scheme_more_accurate():
    errs = {s: spectral_residual(assemble(GridSpec(16), "neumann", 0.6, 4, scheme=s), 1, 1) for s in op_mod.SCHEMES}
    assert errs["corrected"] < errs["lattice"]
