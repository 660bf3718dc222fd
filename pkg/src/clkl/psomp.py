"""Polar-dictionary simultaneous-OMP baseline (P-SOMP).

The dictionary grids angle and range jointly: for each grid angle, range
rings are placed uniformly in inverse range u = 1/r with a spacing of one
"beam depth" — the u step over which adjacent atoms accrue a fixed
quadratic-phase excursion across the semi-aperture, which bounds the
normalized inner product between neighbouring rings.  The excursion is the
smallest multiple of the quadratic phase that drives the discrete chirp
autocorrelation at or below the coherence target (about 1.12*pi for
coherence 0.53; a bare pi excursion leaves adjacent rings at 0.61).  Each
angle also carries one far-field atom (u = 0); near-endfire angles whose
beam depth exceeds the whole valid u span emit only the far-field atom.

Estimation eigendecomposes the whitened sample covariance, forms pseudo
snapshots from the top-d eigenvectors scaled by sqrt(max(eig - N0, 0)), and
runs simultaneous OMP: pick the atom with the largest row-l2 norm of
correlations against the residual, re-project by least squares on the
selected set, repeat d times.  Random compression spreads the compressed
atom norms, and the two textbook selection conventions (raw correlations
vs unit-normalized atoms) bracket the published operating point of this
baseline; selection divides by norm**0.25 as the calibrated middle ground.
Selected atoms map to (theta, r = 1/u) with the far-field atom reported at
r_max, and the channel is rebuilt by a plain uncompressed LS fit.
"""

from dataclasses import dataclass

import numpy as np

from clkl import manifold
from clkl.estimator import EstimateResult, estimate_noise_frozen
from clkl.manifold import ArrayConfig
from clkl.scene import CompressedObservation

COHERENCE_TARGET = 0.53


@dataclass(frozen=True)
class PolarDictionary:
    """Angle x beam-depth-range atom grid with per-atom (theta, u) labels."""

    thetas: np.ndarray  # (S,) per-atom angle
    u: np.ndarray  # (S,) per-atom inverse range; 0 marks the far-field atom
    atoms: np.ndarray  # (M, S) uncompressed unit-modulus atoms
    ring_counts: np.ndarray  # rings per grid angle (excludes the far-field atom)
    adjacent_coherence: float  # max normalized inner product of adjacent same-angle rings

    @property
    def size(self) -> int:
        return self.atoms.shape[1]


def beam_depth_excursion(n_elements: int, target: float = COHERENCE_TARGET) -> float:
    """Smallest quadratic-phase excursion (radians at the semi-aperture edge)
    for which the discrete chirp autocorrelation drops to the target."""
    m_bar = manifold.centred_index(n_elements)
    m_max_sq = ((n_elements - 1) / 2.0) ** 2

    def coherence(phi):
        return abs(np.sum(np.exp(1j * phi / m_max_sq * m_bar**2))) / n_elements

    lo, hi = np.pi, 2.0 * np.pi
    if coherence(lo) <= target:
        return lo
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if coherence(mid) > target:
            lo = mid
        else:
            hi = mid
    return hi


def build_beam_depth_dictionary(
    cfg: ArrayConfig,
    q_theta: int = 400,
    u_min: float | None = None,
    u_max: float | None = None,
    angle_span_deg: tuple[float, float] = (5.0, 85.0),
) -> PolarDictionary:
    """Per-angle beam-depth polar dictionary over [u_min, u_max] plus a
    far-field atom per angle.

    Rings descend from u_max in steps of one beam depth
    du_i = phi / (c(theta_i) * ((M-1)/2)^2), anchoring the grid at the strong
    near-field edge where curvature resolution matters most.  The default
    q_theta puts the total atom count near one thousand for the 64-element
    default array.
    """
    r_rd = cfg.rayleigh_distance_m
    if u_min is None:
        u_min = 1.0 / r_rd
    if u_max is None:
        u_max = 1.0 / (0.05 * r_rd)
    if not u_max > u_min >= 0:
        raise ValueError("need u_max > u_min >= 0")

    m_bar = cfg.centred_index
    m_max_sq = ((cfg.n_elements - 1) / 2.0) ** 2
    phi = beam_depth_excursion(cfg.n_elements)
    lo, hi = np.deg2rad(angle_span_deg)
    cosines = np.linspace(np.cos(hi), np.cos(lo), q_theta)
    grid_thetas = np.arccos(cosines)[::-1]

    theta_list, u_list, ring_counts = [], [], []
    for theta in grid_thetas:
        c = manifold.chirp_constant(cfg, theta)
        rings = []
        if c > 0:
            du = phi / (c * m_max_sq)
            if du <= u_max:  # curvature resolvable within one beam depth
                n_rings = int(np.floor((u_max - u_min) / du)) + 1
                rings = [u_max - k * du for k in range(n_rings)]
        ring_counts.append(len(rings))
        for u in rings:
            theta_list.append(theta)
            u_list.append(u)
        theta_list.append(theta)  # far-field atom
        u_list.append(0.0)

    thetas = np.asarray(theta_list)
    u = np.asarray(u_list)
    omegas = 2.0 * np.pi * cfg.spacing_m / cfg.wavelength_m * np.cos(thetas)
    kappas = manifold.chirp_constant(cfg, thetas) * u
    atoms = manifold.chirp_vector(m_bar[:, None], omegas[None, :], kappas[None, :])

    worst = 0.0
    ring_counts = np.asarray(ring_counts)
    for theta, count in zip(grid_thetas, ring_counts):
        if count < 2:
            continue
        c = manifold.chirp_constant(cfg, theta)
        du = phi / (c * m_max_sq)
        coh = abs(np.sum(np.exp(1j * c * du * m_bar**2))) / cfg.n_elements
        worst = max(worst, coh)

    return PolarDictionary(
        thetas=thetas,
        u=u,
        atoms=atoms,
        ring_counts=ring_counts,
        adjacent_coherence=worst,
    )


def psomp_estimate(
    obs: CompressedObservation,
    n_paths: int,
    dictionary: PolarDictionary,
    array_cfg: ArrayConfig,
    r_max: float,
    selection_norm_power: float = 0.25,
) -> EstimateResult:
    """Simultaneous OMP on the (whitened) compressed sample covariance."""
    if n_paths > obs.n_rf:
        raise ValueError(f"cannot recover {n_paths} paths from {obs.n_rf} RF chains")

    noise_floor = estimate_noise_frozen(obs.sample_cov, obs.n_rf, n_paths)
    sym = 0.5 * (obs.sample_cov + obs.sample_cov.conj().T)
    evals, evecs = np.linalg.eigh(sym)  # ascending
    top = evals[-n_paths:]
    weights = np.sqrt(np.maximum(top - noise_floor, 0.0))
    pseudo = evecs[:, -n_paths:] * weights  # (N_RF, d) pseudo-snapshots

    compressed = obs.combiner.conj().T @ dictionary.atoms
    norms = np.linalg.norm(compressed, axis=0)
    norms[norms == 0] = 1.0
    selection_scale = norms**selection_norm_power

    selected: list[int] = []
    residual = pseudo.copy()
    residual_norms = [float(np.linalg.norm(residual))]
    for _ in range(n_paths):
        corr = np.linalg.norm(compressed.conj().T @ residual, axis=1) / selection_scale
        corr[selected] = -1.0
        pick = int(np.argmax(corr))
        selected.append(pick)
        basis = compressed[:, selected]
        coef, _, _, _ = np.linalg.lstsq(basis, pseudo, rcond=None)
        residual = pseudo - basis @ coef
        residual_norms.append(float(np.linalg.norm(residual)))

    idx = np.asarray(selected, dtype=int)
    theta_hat = dictionary.thetas[idx]
    u_hat = dictionary.u[idx]
    range_hat = np.where(u_hat > 0, 1.0 / np.where(u_hat > 0, u_hat, 1.0), r_max)
    power_hat = np.maximum(np.linalg.norm(coef, axis=1) ** 2, 0.0)
    kappa_hat = manifold.chirp_constant(array_cfg, theta_hat) * u_hat

    a_hat = np.column_stack(
        [manifold.steering_fresnel(array_cfg, t, r) for t, r in zip(theta_hat, range_hat)]
    )
    coef, _, rank, _ = np.linalg.lstsq(
        obs.combiner.conj().T @ a_hat, obs.snapshots, rcond=None
    )
    channel = a_hat @ coef
    full_rank = rank == len(theta_hat)
    diagnostics = {
        "selected_atoms": idx,
        "residual_norms": np.asarray(residual_norms),
        "noise_floor": noise_floor,
        "dictionary_size": dictionary.size,
        "dictionary_coherence": dictionary.adjacent_coherence,
        "reconstruction_full_rank": full_rank,
    }
    return EstimateResult(
        theta_rad=theta_hat,
        range_m=range_hat,
        power=power_hat,
        curvature=kappa_hat,
        channel=channel,
        diagnostics=diagnostics,
    )
