"""Random scenario generation, hybrid combining, and compressed covariance.

One trial draws d paths with uniform angle/range supports and unit total
power split equally, synthesises N snapshots

    x(n) = sum_l s_l(n) * a(theta_l, r_l) + w(n),   w(n) ~ CN(0, N0*I),

compresses them through a random phase-only combiner W (M x N_RF, entries of
modulus 1/sqrt(M)), and forms the sample covariance R = (1/N) * Y * Y^H.
Because every steering entry has unit modulus and powers sum to one, the
scenario SNR reduces to 1/N0, so N0 = 10^(-snr_db/10).

The ground-truth channel uses the exact spherical-wave manifold by default;
``truth_model="fresnel"`` switches data generation to the chirp
approximation for model-mismatch experiments.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from clkl import manifold
from clkl.manifold import ArrayConfig, PathParam

SOURCE_MODELS = ("gaussian", "qpsk")
TRUTH_MODELS = ("usw", "fresnel")


@dataclass(frozen=True)
class ScenarioConfig:
    """Trial-generation parameters (defaults = the benchmark's base scenario)."""

    array: ArrayConfig = field(default_factory=ArrayConfig)
    n_rf: int = 8
    n_snapshots: int = 64
    n_paths: int = 3
    snr_db: float = 10.0
    angle_support_deg: tuple[float, float] = (20.0, 60.0)
    range_support_frac: tuple[float, float] = (0.05, 1.0)  # fractions of Rayleigh distance
    source_model: str = "gaussian"
    truth_model: str = "usw"
    seed: int = 42

    def __post_init__(self):
        if self.n_rf > self.array.n_elements:
            raise ValueError("cannot have more RF chains than elements")
        if self.n_paths < 1:
            raise ValueError("need at least one path")
        if self.angle_support_deg[1] < self.angle_support_deg[0]:
            raise ValueError("empty angle support")
        if not 0 < self.range_support_frac[0] <= self.range_support_frac[1]:
            raise ValueError("empty or nonpositive range support")
        if self.source_model not in SOURCE_MODELS:
            raise ValueError(f"unknown source model {self.source_model!r}")
        if self.truth_model not in TRUTH_MODELS:
            raise ValueError(f"unknown truth model {self.truth_model!r}")

    @property
    def range_support_m(self) -> tuple[float, float]:
        r_rd = self.array.rayleigh_distance_m
        return (self.range_support_frac[0] * r_rd, self.range_support_frac[1] * r_rd)


@dataclass(frozen=True)
class CompressedObservation:
    """What an estimator is allowed to see: combiner and compressed snapshots."""

    combiner: np.ndarray  # (M, N_RF)
    snapshots: np.ndarray  # (N_RF, N)
    sample_cov: np.ndarray  # (N_RF, N_RF) Hermitian PSD
    n_rf: int
    n_snapshots: int


@dataclass(frozen=True)
class Scene:
    """One drawn trial: ground truth plus the observables derived from it."""

    config: ScenarioConfig
    paths: tuple[PathParam, ...]
    noise_power: float
    sources: np.ndarray  # (d, N)
    combiner: np.ndarray  # (M, N_RF)
    snapshots_full: np.ndarray  # (M, N)
    snapshots: np.ndarray  # (N_RF, N)
    sample_cov: np.ndarray  # (N_RF, N_RF)

    @property
    def channel(self) -> np.ndarray:
        """Noiseless channel H = A*S that reconstruction quality is judged against."""
        steer = _truth_steering(self.config, self.paths)
        return steer @ self.sources

    def observation(self) -> CompressedObservation:
        return CompressedObservation(
            combiner=self.combiner,
            snapshots=self.snapshots,
            sample_cov=self.sample_cov,
            n_rf=self.config.n_rf,
            n_snapshots=self.config.n_snapshots,
        )


def snr_to_noise(snr_db: float) -> float:
    """Noise floor for a given scenario SNR; with unit total path power SNR = 1/N0."""
    return 10.0 ** (-snr_db / 10.0)


def draw_combiner(n_elements: int, n_rf: int, rng: np.random.Generator) -> np.ndarray:
    """Random phase-only combiner: entries e^{j*phi}/sqrt(M), unit-norm columns."""
    if n_rf > n_elements:
        raise ValueError("cannot have more RF chains than elements")
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(n_elements, n_rf))
    return np.exp(1j * phases) / np.sqrt(n_elements)


def draw_sources(model: str, n_paths: int, n_snapshots: int, powers, rng: np.random.Generator) -> np.ndarray:
    """Path gain matrix (d x N) with E|s_l(n)|^2 = powers[l].

    gaussian: circularly symmetric complex normal.
    qpsk: sqrt(p)*exp(j*pi*(2k+1)/4), k uniform on {0..3} — same second-order
    statistics, constant modulus.
    """
    powers = np.asarray(powers, dtype=float)
    if np.any(powers < 0):
        raise ValueError("powers must be nonnegative")
    amp = np.sqrt(powers)[:, None]
    if model == "gaussian":
        z = rng.standard_normal((n_paths, n_snapshots)) + 1j * rng.standard_normal(
            (n_paths, n_snapshots)
        )
        return amp * z / np.sqrt(2.0)
    if model == "qpsk":
        k = rng.integers(0, 4, size=(n_paths, n_snapshots))
        return amp * np.exp(1j * np.pi * (2 * k + 1) / 4.0)
    raise ValueError(f"unknown source model {model!r}")


def _truth_steering(sc: ScenarioConfig, paths) -> np.ndarray:
    if sc.truth_model == "usw":
        cols = [manifold.steering_usw(sc.array, p.theta_rad, p.range_m) for p in paths]
    else:
        cols = [manifold.steering_fresnel(sc.array, p.theta_rad, p.range_m) for p in paths]
    return np.column_stack(cols)


def draw_scene(sc: ScenarioConfig, rng: np.random.Generator) -> Scene:
    """Draw one full trial. Draw order is fixed (paths, combiner, sources, noise)
    so that scenes sharing a seed share path geometry and combiner across
    source models."""
    lo, hi = np.deg2rad(sc.angle_support_deg)
    r_lo, r_hi = sc.range_support_m
    thetas = rng.uniform(lo, hi, size=sc.n_paths)
    ranges = rng.uniform(r_lo, r_hi, size=sc.n_paths)
    powers = np.full(sc.n_paths, 1.0 / sc.n_paths)
    paths = tuple(
        PathParam(theta_rad=float(t), range_m=float(r), power=float(p))
        for t, r, p in zip(thetas, ranges, powers)
    )

    combiner = draw_combiner(sc.array.n_elements, sc.n_rf, rng)
    sources = draw_sources(sc.source_model, sc.n_paths, sc.n_snapshots, powers, rng)

    noise_power = snr_to_noise(sc.snr_db)
    m, n = sc.array.n_elements, sc.n_snapshots
    noise = (
        rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
    ) * np.sqrt(noise_power / 2.0)

    steer = _truth_steering(sc, paths)
    snap_full = steer @ sources + noise
    snap = combiner.conj().T @ snap_full
    sample_cov = snap @ snap.conj().T / sc.n_snapshots

    return Scene(
        config=sc,
        paths=paths,
        noise_power=noise_power,
        sources=sources,
        combiner=combiner,
        snapshots_full=snap_full,
        snapshots=snap,
        sample_cov=sample_cov,
    )


def model_covariance(sc: ScenarioConfig, paths, combiner: np.ndarray, noise_power: float) -> np.ndarray:
    """Population covariance of the compressed snapshots for a fixed scene:
    sum_l p_l*d_l*d_l^H + N0*W^H*W with d_l the compressed steering vectors."""
    steer = _truth_steering(sc, paths)
    d = combiner.conj().T @ steer
    powers = np.array([p.power for p in paths])
    return (d * powers) @ d.conj().T + noise_power * combiner.conj().T @ combiner


def whiten(obs: CompressedObservation) -> CompressedObservation:
    """Return the observation in coordinates where the combiner is orthonormal.

    Applies T = (W^H W)^{-1/2} to the snapshots and folds it into an effective
    combiner W*T, after which W^H W = I. Idempotent.
    """
    gram = obs.combiner.conj().T @ obs.combiner
    evals, evecs = np.linalg.eigh(gram)
    if np.min(evals) <= 0:
        raise np.linalg.LinAlgError("combiner Gram matrix is singular")
    t = (evecs / np.sqrt(evals)) @ evecs.conj().T
    snap = t @ obs.snapshots
    return CompressedObservation(
        combiner=obs.combiner @ t,
        snapshots=snap,
        sample_cov=snap @ snap.conj().T / obs.n_snapshots,
        n_rf=obs.n_rf,
        n_snapshots=obs.n_snapshots,
    )


def scene_for_trial(sc: ScenarioConfig, base_seed: int, trial: int) -> Scene:
    """Scene for trial k, seeded base_seed + k: serial and parallel sweeps agree."""
    rng = np.random.default_rng(base_seed + trial)
    return draw_scene(replace(sc, seed=base_seed + trial), rng)
