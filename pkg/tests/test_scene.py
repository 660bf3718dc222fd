import numpy as np
import pytest

from clkl import manifold, scene
from clkl.scene import (
    CompressedObservation,
    ScenarioConfig,
    draw_combiner,
    draw_scene,
    draw_sources,
    model_covariance,
    snr_to_noise,
    whiten,
)


def test_snr_to_noise_values():
    assert snr_to_noise(25.0) == pytest.approx(0.00316, rel=1e-2)
    assert snr_to_noise(0.0) == 1.0
    assert snr_to_noise(10.0) == pytest.approx(0.1, rel=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(n_rf=100)
    with pytest.raises(ValueError):
        ScenarioConfig(n_paths=0)
    with pytest.raises(ValueError):
        ScenarioConfig(angle_support_deg=(60.0, 20.0))
    with pytest.raises(ValueError):
        ScenarioConfig(range_support_frac=(0.0, 1.0))
    with pytest.raises(ValueError):
        ScenarioConfig(source_model="bpsk")
    with pytest.raises(ValueError):
        ScenarioConfig(truth_model="exact")


def test_combiner_entries_and_columns():
    rng = np.random.default_rng(3)
    w = draw_combiner(64, 8, rng)
    assert np.allclose(np.abs(w), 1 / 8.0, atol=1e-15)  # 1/sqrt(64)
    assert np.allclose(np.linalg.norm(w, axis=0), 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        draw_combiner(8, 9, rng)


def test_combiner_gram_statistics():
    # off-diagonal |[W^H W]| concentrates near sqrt(pi/4)/sqrt(M)
    rng = np.random.default_rng(0)
    means = []
    for _ in range(1000):
        w = draw_combiner(64, 8, rng)
        g = w.conj().T @ w
        assert np.allclose(np.diag(g).real, 1.0, atol=1e-12)
        means.append(np.mean(np.abs(g[~np.eye(8, dtype=bool)])))
    expected = np.sqrt(np.pi / 4) / 8.0
    assert abs(np.mean(means) - expected) / expected < 0.2


def test_qpsk_sources_constant_modulus():
    rng = np.random.default_rng(1)
    s = draw_sources("qpsk", 2, 1000, [1.0, 0.25], rng)
    assert np.allclose(np.abs(s[0]), 1.0, atol=1e-14)
    assert np.allclose(np.abs(s[1]), 0.5, atol=1e-14)


def test_gaussian_source_variance():
    rng = np.random.default_rng(2)
    s = draw_sources("gaussian", 1, 100_000, [1.0], rng)
    assert abs(np.mean(np.abs(s) ** 2) - 1.0) < 0.02


def test_source_cross_correlation():
    for model in ("gaussian", "qpsk"):
        rng = np.random.default_rng(4)
        s = draw_sources(model, 2, 10_000, [1.0, 1.0], rng)
        rho = np.abs(np.vdot(s[0], s[1])) / np.sqrt(
            np.vdot(s[0], s[0]).real * np.vdot(s[1], s[1]).real
        )
        assert rho < 0.05
    with pytest.raises(ValueError):
        draw_sources("laplace", 1, 8, [1.0], np.random.default_rng(0))


def test_scene_covariance_hermitian_psd_and_noise_floor():
    for snr, n0 in ((25.0, 0.00316), (0.0, 1.0)):
        sc = ScenarioConfig(snr_db=snr)
        s = draw_scene(sc, np.random.default_rng(7))
        assert s.noise_power == pytest.approx(n0, rel=1e-2)
        assert np.allclose(s.sample_cov, s.sample_cov.conj().T, atol=1e-12)
        evals = np.linalg.eigvalsh(s.sample_cov)
        assert evals.min() >= -1e-10 * evals.max()


def test_single_path_noise_free_rank_one():
    sc = ScenarioConfig(snr_db=300.0, n_paths=1)  # noise power ~ 1e-30
    s = draw_scene(sc, np.random.default_rng(11))
    evals = np.linalg.eigvalsh(s.sample_cov)[::-1]
    assert evals[1] / evals[0] < 1e-12


def test_reproducibility_bit_identical():
    sc = ScenarioConfig()
    a = draw_scene(sc, np.random.default_rng(123))
    b = draw_scene(sc, np.random.default_rng(123))
    for attr in ("sources", "combiner", "snapshots_full", "snapshots", "sample_cov"):
        assert np.array_equal(getattr(a, attr), getattr(b, attr))
    assert a.paths == b.paths


def test_sample_covariance_converges_to_model():
    sc = ScenarioConfig(n_snapshots=100_000, snr_db=10.0)
    s = draw_scene(sc, np.random.default_rng(5))
    r_true = model_covariance(sc, s.paths, s.combiner, s.noise_power)
    rel = np.linalg.norm(s.sample_cov - r_true) / np.linalg.norm(r_true)
    assert rel < 0.05


def test_qpsk_gaussian_second_order_equivalence():
    base = ScenarioConfig(n_snapshots=100_000, snr_db=10.0)
    from dataclasses import replace

    g = draw_scene(replace(base, source_model="gaussian"), np.random.default_rng(9))
    q = draw_scene(replace(base, source_model="qpsk"), np.random.default_rng(9))
    # identical seed: same paths and combiner, only the gain/noise draws differ
    assert g.paths == q.paths
    assert np.array_equal(g.combiner, q.combiner)
    rel = np.linalg.norm(g.sample_cov - q.sample_cov) / np.linalg.norm(g.sample_cov)
    assert rel < 0.05


def test_truth_model_switch():
    from dataclasses import replace

    base = ScenarioConfig()
    u = draw_scene(replace(base, truth_model="usw"), np.random.default_rng(13))
    f = draw_scene(replace(base, truth_model="fresnel"), np.random.default_rng(13))
    assert u.paths == f.paths
    assert not np.allclose(u.snapshots_full, f.snapshots_full)
    col = manifold.steering_fresnel(base.array, f.paths[0].theta_rad, f.paths[0].range_m)
    recon = f.channel - np.outer(col, f.sources[0])
    rest = sum(
        np.outer(
            manifold.steering_fresnel(base.array, p.theta_rad, p.range_m), f.sources[i]
        )
        for i, p in enumerate(f.paths)
        if i > 0
    )
    assert np.allclose(recon, rest, atol=1e-9)


def test_whiten_orthonormalizes_and_is_idempotent():
    sc = ScenarioConfig()
    s = draw_scene(sc, np.random.default_rng(17))
    obs = whiten(s.observation())
    gram = obs.combiner.conj().T @ obs.combiner
    assert np.allclose(gram, np.eye(sc.n_rf), atol=1e-10)
    twice = whiten(obs)
    assert np.allclose(twice.snapshots, obs.snapshots, atol=1e-12)
    assert np.allclose(twice.sample_cov, obs.sample_cov, atol=1e-12)


def test_whiten_noise_only_covariance_is_scaled_identity():
    # d paths with zero power: synthesize noise-only snapshots directly
    sc = ScenarioConfig(n_snapshots=10_000, snr_db=0.0)
    rng = np.random.default_rng(19)
    w = draw_combiner(64, 8, rng)
    n0 = 1.0
    noise = (rng.standard_normal((64, 10_000)) + 1j * rng.standard_normal((64, 10_000))) * np.sqrt(
        n0 / 2
    )
    y = w.conj().T @ noise
    obs = CompressedObservation(
        combiner=w, snapshots=y, sample_cov=y @ y.conj().T / 10_000, n_rf=8, n_snapshots=10_000
    )
    white = whiten(obs)
    off = white.sample_cov - np.diag(np.diag(white.sample_cov))
    assert np.max(np.abs(off)) < 0.05 * n0


def test_scene_for_trial_seeding():
    sc = ScenarioConfig()
    a = scene.scene_for_trial(sc, 42, 7)
    b = scene.scene_for_trial(sc, 42, 7)
    c = scene.scene_for_trial(sc, 42, 8)
    assert np.array_equal(a.sample_cov, b.sample_cov)
    assert not np.array_equal(a.sample_cov, c.sample_cov)
