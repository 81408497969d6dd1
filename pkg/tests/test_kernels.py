import numpy as np
import pytest

from cliffordflow import algebra as ga
from cliffordflow import kernels
from cliffordflow.layers import ManyBodyProduct

BACKENDS = kernels.AVAILABLE


def test_numpy_backend_always_available():
    assert "numpy" in BACKENDS
    assert kernels.backend() == BACKENDS[0]


def test_use_backend_context_restores():
    before = kernels.backend()
    with kernels.use_backend("numpy"):
        assert kernels.backend() == "numpy"
    assert kernels.backend() == before
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


@pytest.mark.parametrize("name", BACKENDS)
def test_shared_table_matches_loop(name):
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal((2, 7, 3, 16))
    expected = np.zeros((7, 3, 16))
    for i in range(16):
        for j in range(16):
            expected[..., ga.GP_TARGET[i, j]] += ga.GP_SIGN[i, j] * a[..., i] * b[..., j]
    with kernels.use_backend(name):
        got = kernels.blade_bilinear(a, b, ga.GP_SIGN, ga.GP_TARGET)
    assert np.allclose(got, expected, atol=1e-13)


@pytest.mark.parametrize("name", BACKENDS)
def test_broadcasting(name):
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((5, 1, 16)), rng.standard_normal((1, 4, 16))
    with kernels.use_backend(name):
        got = kernels.blade_bilinear(a, b, ga.GP_SIGN, ga.GP_TARGET)
    assert got.shape == (5, 4, 16)
    assert np.allclose(got[2, 3], ga.geometric_product(a[2, 0], b[0, 3]))


def test_backends_agree_on_per_channel_tables():
    if len(BACKENDS) < 2:
        pytest.skip("compiled extension not built")
    rng = np.random.default_rng(2)
    layer = ManyBodyProduct.init(rng, 3, 4, scale=1.0)
    a = rng.standard_normal((11, 3, 16))
    outs = []
    for name in BACKENDS:
        with kernels.use_backend(name):
            outs.append(layer(a))
    assert np.allclose(outs[0], outs[1], atol=1e-13)


def test_channel_mismatch_rejected():
    coef = np.zeros((3, 16, 16))
    with pytest.raises(ValueError):
        kernels.blade_bilinear(np.zeros((2, 4, 16)), np.zeros((2, 4, 16)), coef, ga.GP_TARGET)
