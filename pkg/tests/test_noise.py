import numpy as np
import pytest

from sensenoise.errors import NotHermitian, NotPositiveDefinite
from sensenoise.fileio import load_covariance_csv, save_covariance_csv
from sensenoise.grid import Domain
from sensenoise.noise import CoilCovariance, Scale, sample_coil_noise, sample_noise_batch


def coil_vectors(stack):
    # [L, pixels] real and imaginary parts
    d = stack.data.reshape(stack.data.shape[0], -1)
    return d.real, d.imag


def test_identity_covariance_statistics():
    stack = sample_coil_noise(CoilCovariance(np.eye(4)), (250, 400), seed=1)
    re, im = coil_vectors(stack)
    assert re.shape[1] == 100_000
    for part in (re, im):
        np.testing.assert_allclose(part.var(axis=1), 1.0, rtol=0.02)
        corr = np.corrcoef(part)
        assert np.max(np.abs(corr - np.eye(4))) < 0.01


def test_correlated_eight_coil_covariance():
    cov = CoilCovariance.uniform(8, 100.0, 0.1)
    re, im = coil_vectors(sample_coil_noise(cov, (250, 400), seed=2))
    for part in (re, im):
        np.testing.assert_allclose(part.var(axis=1), 100.0, rtol=0.02)
        corr = np.corrcoef(part)
        off = corr[~np.eye(8, dtype=bool)]
        assert np.max(np.abs(off - 0.1)) < 0.01


def test_sample_covariance_converges():
    cov = CoilCovariance([[2.0, 0.6, -0.3], [0.6, 1.0, 0.2], [-0.3, 0.2, 1.5]])
    re, im = coil_vectors(sample_coil_noise(cov, (200, 250), seed=3))
    n = re.shape[1]
    bound = 3 * np.sqrt(2 / n) * np.max(np.abs(cov.sigma))
    for part in (re, im):
        assert np.max(np.abs(part @ part.T / n - cov.sigma.real)) < bound
    cross = re @ im.T / n
    assert np.max(np.abs(cross)) < 4 * np.sqrt(np.max(cov.sigma.real) ** 2 / n)


def test_spatially_white():
    stack = sample_coil_noise(CoilCovariance(np.eye(1)), (256, 256), seed=4)
    img = stack.data[0]
    n = img.size
    for shifted in (np.roll(img, 1, axis=0), np.roll(img, 1, axis=1), np.roll(img, 7, axis=1)):
        rho = np.mean(img.real * shifted.real)
        assert abs(rho) < 4 / np.sqrt(n)


def test_same_seed_bit_identical():
    cov = CoilCovariance.uniform(8, 100.0, 0.1)
    a = sample_coil_noise(cov, (16, 8), seed=99, stream=3).data
    b = sample_coil_noise(cov, (16, 8), seed=99, stream=3).data
    assert a.tobytes() == b.tobytes()
    c = sample_coil_noise(cov, (16, 8), seed=98, stream=3).data
    assert a.tobytes() != c.tobytes()


def test_batch_matches_single_draws():
    cov = CoilCovariance.uniform(3, 2.0, 0.3)
    batch = sample_noise_batch(cov, (8, 4), seed=5, start=10, count=3)
    for i in range(3):
        single = sample_coil_noise(cov, (8, 4), seed=5, stream=10 + i).data
        assert batch[i].tobytes() == single.tobytes()


def test_domain_follows_scale():
    k = sample_coil_noise(CoilCovariance(np.eye(2), Scale.KSPACE_FULL), (4, 4), seed=0)
    assert k.domain is Domain.KSPACE
    x = sample_coil_noise(CoilCovariance(np.eye(2)), (4, 4), seed=0)
    assert x.domain is Domain.XSPACE


def test_invalid_covariances():
    with pytest.raises(NotPositiveDefinite):
        CoilCovariance([[1.0, 1.1], [1.1, 1.0]])
    with pytest.raises(NotHermitian):
        CoilCovariance([[1.0, 0.1], [0.5, 1.0]])
    with pytest.raises(NotPositiveDefinite):
        CoilCovariance([[-1.0]])


def test_complex_covariance_is_circular():
    sigma = np.array([[1.0, 0.3 + 0.4j], [0.3 - 0.4j, 1.0]])
    stack = sample_coil_noise(CoilCovariance(sigma), (300, 300), seed=8)
    d = stack.data.reshape(2, -1)
    n = d.shape[1]
    np.testing.assert_allclose(d @ d.conj().T / n, 2 * sigma, atol=0.02)
    # pseudo-covariance vanishes for circular noise
    assert np.max(np.abs(d @ d.T / n)) < 0.02


def test_covariance_csv_round_trip(tmp_path):
    cov = CoilCovariance.uniform(4, 100.0, 0.1)
    save_covariance_csv(tmp_path / "cov.csv", cov)
    back = load_covariance_csv(tmp_path / "cov.csv")
    np.testing.assert_array_equal(back.sigma, cov.sigma)

    sigma = np.array([[1.0, 0.3 + 0.4j], [0.3 - 0.4j, 1.0]])
    cplx = CoilCovariance(sigma)
    save_covariance_csv(tmp_path / "re.csv", cplx, tmp_path / "im.csv")
    back = load_covariance_csv(tmp_path / "re.csv", tmp_path / "im.csv")
    np.testing.assert_array_equal(back.sigma, sigma)


def test_covariance_csv_validates(tmp_path):
    (tmp_path / "bad.csv").write_text("1,2\n2,1\n")
    with pytest.raises(NotPositiveDefinite):
        load_covariance_csv(tmp_path / "bad.csv")
