import numpy as np
import pytest
from scipy.linalg import expm

from resfluor.semigroup import SemigroupCache, _batch_expm


@pytest.mark.parametrize("seed", range(5))
def test_cache_matches_expm(seed):
    rng = np.random.default_rng(400 + seed)
    G = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    sg = SemigroupCache(G)
    xs = rng.uniform(0, 3, size=7)
    fast = sg.at(xs)
    for k, x in enumerate(xs):
        assert np.linalg.norm(fast[k] - expm(x * G)) < 1e-10 * max(
            1.0, np.linalg.norm(expm(x * G))
        )


def test_defective_generator_falls_back():
    # a Jordan block is not diagonalizable; the batch fallback must engage
    G = np.zeros((4, 4), dtype=complex)
    G[0, 1] = G[1, 2] = G[2, 3] = 1.0
    sg = SemigroupCache(G)
    assert not sg._diagonalizable
    xs = np.array([0.0, 0.5, 2.0])
    out = sg.at(xs)
    for k, x in enumerate(xs):
        assert np.linalg.norm(out[k] - expm(x * G)) < 1e-12


def test_batch_expm_direct():
    rng = np.random.default_rng(17)
    G = rng.normal(size=(4, 4))
    xs = np.array([0.0, 0.3, 1.7, 4.0])
    out = _batch_expm(G, xs)
    for k, x in enumerate(xs):
        ref = expm(x * G)
        assert np.linalg.norm(out[k] - ref) < 1e-11 * max(1.0, np.linalg.norm(ref))


def test_scalar_argument_shape():
    G = np.diag([-1.0, -2.0, -3.0, -4.0]).astype(complex)
    sg = SemigroupCache(G)
    out = sg.at(0.5)
    assert out.shape == (4, 4)
    assert np.allclose(np.diag(out), np.exp(0.5 * np.diag(G)))
    with pytest.raises(ValueError):
        sg.at(-0.2)
