"""Curvature-learning covariance-fit estimator (CL-KL).

The estimator grids only the angle dimension (Q atoms, uniform in cos(theta))
and attaches a learnable inverse-range parameter u = 1/r to each atom.  With
compressed atoms d_i(u_i) = W^H a_i(u_i), the model covariance is

    R(p, u, N0) = sum_i p_i * d_i(u_i) d_i(u_i)^H + N0 * W^H W

and the fit criterion is the Gaussian covariance-matching objective

    L(p, u) = log det R + tr(R^{-1} Rhat) + lam * ||p||_1,   p >= 0.

Optimisation runs in two phases.  Phase 1 is a power-only loop with u frozen
at one of three warm starts (ring-indexed, near-range, far-range): projected
descent steps p <- max(0, p - alpha * g/h) under Armijo backtracking, where g
is the objective gradient and h a damped diagonal curvature estimate
(h_i = [d2L/dp_i^2]_+ + damping * median Fisher diagonal).  The damping makes
the step equal plain gradient descent in the noise-dominated regime while
taming the 1/N0^2 curvature blow-up at high SNR; an undamped gradient step
stalls far above the objective basin there.  The noise floor is estimated
once from the smallest sample-covariance eigenvalues and never updated.

Phase 2 refines the active atoms (the top-d local maxima of the fitted power
profile) with four alternating matched-filter scans, angle then curvature.
Scores are evaluated in noise-whitened coordinates and normalised per
candidate-atom energy, which makes the additive noise contribution constant
across candidates; the raw quadratic form is biased by the atom-norm spread
that random compression induces.  Each atom scores against the residual
covariance with all other active atoms deflated and jumps to the argmax.
Because the loop may hit its iteration cap mid-descent at high SNR, the
deflation powers are first re-fitted by exact single-coordinate minimisation
of the same objective restricted to the active set, under a conservative
sparsity weight: mild under-deflation leaves benign residual energy, while
deflating with the cap-limited loop powers collapses every atom onto the
strongest path.  The channel is then reconstructed by a whitened
least-squares fit on the refined atoms.

The curvature gradient of L is provided for validation only; it is never
used inside the loop (its magnitude scales like 1/N0^2 across SNR, which is
the instability the two-phase split removes).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.linalg import eigh as scipy_eigh

from clkl import manifold
from clkl.manifold import ArrayConfig
from clkl.scene import CompressedObservation

NOISE_FLOOR_MIN = 1e-12


@dataclass(frozen=True)
class ClklConfig:
    """Estimator hyperparameters. Defaults are the published operating point."""

    grid_size: int = 256  # coarse angle grid Q
    scan_grid_angles: int = 512
    scan_grid_curvatures: int = 256
    sparsity_weight: float = 1e-3
    max_iterations: int = 150
    rel_tolerance: float = 5e-4
    tolerance_hits: int = 2  # consecutive sub-tolerance iterations required
    armijo_alpha: float = 1.0
    armijo_beta: float = 0.5
    armijo_sigma: float = 1e-4
    max_backtracks: int = 40
    curvature_damping: float = 3.0  # ridge on the diagonal curvature, in median-Fisher units
    ring_beta: float = 1.2
    angle_span_deg: tuple[float, float] = (5.0, 85.0)
    starts: tuple[int, ...] = (1, 2, 3)
    scan_passes: int = 4
    refit_weight: float = 0.1  # sparsity weight of the pre-scan deflation refit
    refit_cycles: int = 2
    recon_rcond: float = 1e-2
    noise_refresh_every: int = 0  # >0 re-estimates the noise floor (ablation only)


@dataclass
class DictionaryState:
    """Per-trial working state: grid geometry plus the learned (p, u) pair."""

    thetas: np.ndarray  # (Q,) angles; active entries move off-grid during scans
    omegas: np.ndarray  # (Q,) linear phase slopes
    chirps: np.ndarray  # (Q,) curvature prefactors c(theta)
    u: np.ndarray  # (Q,) inverse ranges within [u_min, u_max]
    powers: np.ndarray  # (Q,) nonnegative
    atoms: np.ndarray  # (N_RF, Q) compressed atoms, consistent with (thetas, u)
    noise_floor: float  # frozen for the whole run


@dataclass
class PowerLoopResult:
    powers: np.ndarray
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    noise_floor: float


@dataclass
class EstimateResult:
    """Estimated paths plus the reconstructed channel and run diagnostics."""

    theta_rad: np.ndarray
    range_m: np.ndarray
    power: np.ndarray
    curvature: np.ndarray
    channel: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def angle_grid(span_deg: tuple[float, float], size: int) -> np.ndarray:
    """Ascending angle grid uniform in cos(theta), so angular coherence between
    neighbours is uniform across the span."""
    lo, hi = np.deg2rad(span_deg)
    cosines = np.linspace(np.cos(hi), np.cos(lo), size)
    return np.arccos(cosines)[::-1].copy()


def compressed_atoms(
    combiner: np.ndarray, m_bar: np.ndarray, omegas: np.ndarray, kappas: np.ndarray
) -> np.ndarray:
    """W^H a for a batch of chirp atoms given per-atom (omega, kappa)."""
    full = manifold.chirp_vector(m_bar[:, None], omegas[None, :], kappas[None, :])
    return combiner.conj().T @ full


def estimate_noise_frozen(
    sample_cov: np.ndarray, n_rf: int, n_paths: int, gram: np.ndarray | None = None
) -> float:
    """Noise floor from the noise subspace: mean of the smallest N_RF - d
    eigenvalues of the symmetrised sample covariance, floored at 1e-12.

    When the combiner Gram matrix W^H W is supplied, the eigenvalues are
    generalized ones of (Rhat, W^H W) -- the spectrum of the noise-whitened
    covariance -- which removes the Gram-spread bias that otherwise pulls
    the smallest eigenvalues well below N0.  Estimated once before the loop
    and held fixed; re-estimating inside the loop lets the signal term
    absorb all energy and blows up the gradient.
    """
    if n_rf <= n_paths:
        raise ValueError(
            f"noise-subspace estimate needs n_rf > d (got n_rf={n_rf}, d={n_paths}); "
            f"the covariance identifies at most (n_rf-1)//2 = {(n_rf - 1) // 2} paths"
        )
    sym = 0.5 * (sample_cov + sample_cov.conj().T)
    if gram is None:
        evals = np.linalg.eigvalsh(sym)  # ascending
    else:
        evals = scipy_eigh(sym, 0.5 * (gram + gram.conj().T), eigvals_only=True)
    return max(float(np.mean(evals[: n_rf - n_paths])), NOISE_FLOOR_MIN)


def model_covariance(
    powers: np.ndarray, atoms: np.ndarray, noise_floor: float, gram: np.ndarray
) -> np.ndarray:
    """R(p, u, N0) = sum_i p_i d_i d_i^H + N0 W^H W, Hermitian-symmetrised."""
    r = (atoms * powers) @ atoms.conj().T + noise_floor * gram
    return 0.5 * (r + r.conj().T)


def _factor(powers, atoms, noise_floor, gram):
    r = model_covariance(powers, atoms, noise_floor, gram)
    try:
        return cho_factor(r, lower=True, check_finite=False)
    except LinAlgError as exc:  # cannot happen with noise_floor >= 1e-12 and PD gram
        raise LinAlgError(f"model covariance not positive definite: {exc}") from exc


def _objective_from_factor(factor, powers, sample_cov, sparsity_weight):
    logdet = 2.0 * float(np.sum(np.log(np.real(np.diag(factor[0])))))
    fit = float(np.real(np.trace(cho_solve(factor, sample_cov, check_finite=False))))
    return logdet + fit + sparsity_weight * float(np.sum(powers))


def _kl_matrix_gradient(factor, sample_cov):
    """G = R^{-1} - R^{-1} Rhat R^{-1}; Hermitian part kept against round-off."""
    n = sample_cov.shape[0]
    rinv = cho_solve(factor, np.eye(n, dtype=complex), check_finite=False)
    g = rinv - rinv @ sample_cov @ rinv
    return 0.5 * (g + g.conj().T)


def kl_objective(powers, atoms, noise_floor, sample_cov, gram, sparsity_weight) -> float:
    """log det R + tr(R^{-1} Rhat) + lam * sum(p)."""
    factor = _factor(powers, atoms, noise_floor, gram)
    return _objective_from_factor(factor, powers, sample_cov, sparsity_weight)


def power_gradient(powers, atoms, noise_floor, sample_cov, gram, sparsity_weight) -> np.ndarray:
    """dL/dp_i = d_i^H G d_i + lam with G the covariance-fit matrix gradient."""
    factor = _factor(powers, atoms, noise_floor, gram)
    g = _kl_matrix_gradient(factor, sample_cov)
    quad = np.real(np.einsum("iq,ij,jq->q", atoms.conj(), g, atoms))
    return quad + sparsity_weight


def curvature_gradient(powers, atoms, atoms_du, noise_floor, sample_cov, gram) -> np.ndarray:
    """dL/du_i = 2 p_i Re{ (dd_i/du)^H G d_i }.

    Validation only: |G| scales like 1/N0^2, so a gradient step in u is
    wildly SNR-dependent; the estimator refines u by scanning instead.
    """
    factor = _factor(powers, atoms, noise_floor, gram)
    g = _kl_matrix_gradient(factor, sample_cov)
    cross = np.einsum("iq,ij,jq->q", atoms_du.conj(), g, atoms)
    return 2.0 * powers * np.real(cross)


def atom_u_derivatives(
    combiner: np.ndarray, m_bar: np.ndarray, omegas, chirps, u
) -> tuple[np.ndarray, np.ndarray]:
    """Compressed atoms and their derivative in u: da/du = -j*c*m^2 * a."""
    kappas = np.asarray(chirps) * np.asarray(u)
    full = manifold.chirp_vector(m_bar[:, None], np.asarray(omegas)[None, :], kappas[None, :])
    dfull = -1j * np.asarray(chirps)[None, :] * m_bar[:, None] ** 2 * full
    wh = combiner.conj().T
    return wh @ full, wh @ dfull


def power_loop(
    powers0: np.ndarray,
    atoms: np.ndarray,
    noise_floor: float,
    sample_cov: np.ndarray,
    gram: np.ndarray,
    cfg: ClklConfig,
    n_paths: int | None = None,
) -> PowerLoopResult:
    """Power-only descent with u frozen.

    Per iteration: form g_i = d_i^H G d_i + lam and the diagonal curvature
    h_i = [s_i(2 q_i - s_i)]_+ + damping * median(s)^2 with s_i = d_i^H R^{-1} d_i
    and q_i = d_i^H R^{-1} Rhat R^{-1} d_i, then backtrack alpha from 1 on the
    projected step max(0, p - alpha*g/h) until the decrease is at least
    sigma * (p - p_plus)^T g.  A fully failed backtrack means the gradient is
    numerically null: the zero step is accepted and the loop marked converged.
    Stops when the relative objective change stays below rel_tolerance for
    tolerance_hits consecutive iterations, or at max_iterations.
    """
    lam = cfg.sparsity_weight
    p = np.asarray(powers0, dtype=float).copy()
    noise = noise_floor
    n = sample_cov.shape[0]
    eye = np.eye(n, dtype=complex)
    factor = _factor(p, atoms, noise, gram)
    objective = _objective_from_factor(factor, p, sample_cov, lam)
    trace = [objective]
    iterations = 0
    converged = False
    hits = 0

    for t in range(cfg.max_iterations):
        if cfg.noise_refresh_every and t > 0 and t % cfg.noise_refresh_every == 0:
            noise = _residual_noise(p, atoms, sample_cov, gram, n_paths)
            factor = _factor(p, atoms, noise, gram)
            objective = _objective_from_factor(factor, p, sample_cov, lam)
        rinv = cho_solve(factor, eye, check_finite=False)
        rinv_atoms = rinv @ atoms
        s = np.real(np.einsum("iq,iq->q", atoms.conj(), rinv_atoms))
        q = np.real(np.einsum("iq,iq->q", rinv_atoms.conj(), sample_cov @ rinv_atoms))
        grad = s - q + lam
        curv = np.maximum(s * (2.0 * q - s), 0.0) + cfg.curvature_damping * np.median(s) ** 2
        step = grad / curv

        alpha = cfg.armijo_alpha
        accepted = False
        for _ in range(cfg.max_backtracks):
            candidate = np.maximum(0.0, p - alpha * step)
            cand_factor = _factor(candidate, atoms, noise, gram)
            cand_obj = _objective_from_factor(cand_factor, candidate, sample_cov, lam)
            if objective - cand_obj >= cfg.armijo_sigma * float(np.dot(p - candidate, grad)):
                accepted = True
                break
            alpha *= cfg.armijo_beta
        if not accepted:
            converged = True
            break

        previous = objective
        p, factor, objective = candidate, cand_factor, cand_obj
        trace.append(objective)
        iterations = t + 1
        hits = hits + 1 if abs(objective - previous) < cfg.rel_tolerance * abs(objective) else 0
        if hits >= cfg.tolerance_hits:
            converged = True
            break

    return PowerLoopResult(
        powers=p,
        objective_trace=np.asarray(trace),
        iterations=iterations,
        converged=converged,
        noise_floor=noise,
    )


def _residual_noise(powers, atoms, sample_cov, gram, n_paths):
    """Ablation path: noise floor from the whitened eigenvalues of Rhat
    minus the current signal model."""
    residual = sample_cov - (atoms * powers) @ atoms.conj().T
    evals = scipy_eigh(
        0.5 * (residual + residual.conj().T),
        0.5 * (gram + gram.conj().T),
        eigvals_only=True,
    )
    keep = max(1, atoms.shape[0] - (n_paths or 0))
    return max(float(np.mean(evals[:keep])), NOISE_FLOOR_MIN)


def ring_init(
    array_cfg: ArrayConfig, thetas: np.ndarray, u_min: float, u_max: float, ring_beta: float
) -> np.ndarray:
    """Warm start 1: focus each atom on the ring 1/u = Z * sin(theta)^2 with
    Z = D^2/(2*beta^2*lambda), clipped into the valid inverse-range box."""
    z = array_cfg.aperture_m**2 / (2.0 * ring_beta**2 * array_cfg.wavelength_m)
    with np.errstate(divide="ignore"):
        u = 1.0 / (z * np.sin(thetas) ** 2)
    return np.clip(u, u_min, u_max)


@dataclass
class MultiStartResult:
    powers: np.ndarray
    u: np.ndarray
    start_index: int  # 1-based: 1 ring, 2 near-range, 3 far-range
    loop: PowerLoopResult
    all_loops: dict


def multi_start(
    sample_cov: np.ndarray,
    combiner: np.ndarray,
    array_cfg: ArrayConfig,
    thetas: np.ndarray,
    omegas: np.ndarray,
    chirps: np.ndarray,
    noise_floor: float,
    u_min: float,
    u_max: float,
    cfg: ClklConfig,
    n_paths: int | None = None,
) -> MultiStartResult:
    """Run the power loop from each warm start and keep the lowest objective."""
    m_bar = array_cfg.centred_index
    gram = combiner.conj().T @ combiner
    inits = {
        1: ring_init(array_cfg, thetas, u_min, u_max, cfg.ring_beta),
        2: np.full_like(thetas, u_max),
        3: np.full_like(thetas, u_min),
    }
    best = None
    loops = {}
    for start in cfg.starts:
        u0 = inits[start]
        atoms = compressed_atoms(combiner, m_bar, omegas, chirps * u0)
        loop = power_loop(
            np.zeros_like(thetas), atoms, noise_floor, sample_cov, gram, cfg, n_paths
        )
        loops[start] = loop
        if best is None or loop.objective_trace[-1] < best[0]:
            best = (loop.objective_trace[-1], start, u0, loop)
    _, start_index, u0, loop = best
    return MultiStartResult(
        powers=loop.powers, u=u0.copy(), start_index=start_index, loop=loop, all_loops=loops
    )


def select_active(powers: np.ndarray, n_paths: int) -> np.ndarray:
    """Top-d local maxima of the power profile, by descending power then index.

    Local maxima rather than raw top-d entries: the fit spreads one path's
    power over adjacent grid atoms, and raw selection would return d copies
    of the strongest path.
    """
    q = powers.shape[0]
    peaks = []
    for i in range(q):
        if powers[i] <= 0:
            continue
        left = powers[i - 1] if i > 0 else -np.inf
        right = powers[i + 1] if i < q - 1 else -np.inf
        if powers[i] >= left and powers[i] >= right:
            peaks.append(i)
    idx = np.asarray(peaks, dtype=int)
    if idx.size == 0:
        return idx
    order = np.argsort(-powers[idx], kind="stable")
    return idx[order[:n_paths]]


def refit_active_powers(
    powers: np.ndarray,
    active: np.ndarray,
    atoms: np.ndarray,
    noise_floor: float,
    sample_cov: np.ndarray,
    gram: np.ndarray,
    sparsity_weight: float,
    cycles: int = 2,
) -> np.ndarray:
    """Exact cyclic minimisation of the fit objective over the active powers.

    With atom i removed from the model (R_minus), the one-dimensional
    objective in p_i is log(1 + p*s) - p*q/(1 + p*s) + lam*p with
    s = d^H R_minus^{-1} d and q = d^H R_minus^{-1} Rhat R_minus^{-1} d,
    minimised in closed form at p = (x - 1)/s, lam*x^2 + s*x - q = 0.
    Used to calibrate the scan's deflation; the loop powers can be far from
    their conditional optimum when the iteration cap binds.
    """
    p = powers.copy()
    lam = sparsity_weight
    for _ in range(cycles):
        for i in active:
            others = p.copy()
            others[i] = 0.0
            r_minus = model_covariance(others, atoms, noise_floor, gram)
            b = np.linalg.inv(r_minus)
            d = atoms[:, i]
            bd = b @ d
            s = float(np.real(np.vdot(d, bd)))
            q = float(np.real(np.vdot(bd, sample_cov @ bd)))
            if lam > 0:
                x = (-s + np.sqrt(s * s + 4.0 * lam * q)) / (2.0 * lam)
            else:
                x = q / s
            p[i] = max(0.0, (x - 1.0) / s)
    return p


class _WhitenedScanSpace:
    """Noise-whitened coordinates for matched-filter scoring.

    T = (W^H W)^{-1/2} maps the compressed space to one where the noise part
    of the covariance is N0*I, so the noise contribution to the normalised
    score d^H R d / d^H d is the same for every candidate atom.
    """

    def __init__(self, combiner: np.ndarray, sample_cov: np.ndarray):
        gram = combiner.conj().T @ combiner
        evals, evecs = np.linalg.eigh(gram)
        if np.min(evals) <= 0:
            raise np.linalg.LinAlgError("combiner Gram matrix is singular")
        self.t = (evecs / np.sqrt(evals)) @ evecs.conj().T
        self.project = self.t @ combiner.conj().T  # whitened compression of full atoms
        self.sample_cov = self.t @ sample_cov @ self.t

    def scores(self, cand: np.ndarray, residual: np.ndarray) -> np.ndarray:
        num = np.real(np.einsum("iq,ij,jq->q", cand.conj(), residual, cand))
        den = np.real(np.einsum("iq,iq->q", cand.conj(), cand))
        return num / den


def post_loop_scan(
    state: DictionaryState,
    active: np.ndarray,
    space: _WhitenedScanSpace,
    array_cfg: ArrayConfig,
    u_min: float,
    u_max: float,
    cfg: ClklConfig,
) -> bool:
    """Alternating matched-filter refinement of the active atoms.

    Odd passes rescan the angle on the fine cos-uniform grid at the atom's
    current u; even passes rescan u on [u_min, u_max] at the current angle.
    Each atom scores against the residual covariance with every other active
    atom deflated at its fitted power, then jumps to the argmax; the atom is
    rebuilt immediately so later deflations see the update.  Returns False
    (state untouched) when the active set is empty.
    """
    if active.size == 0:
        return False
    m_bar = array_cfg.centred_index
    atoms_w = space.t @ state.atoms

    fine_thetas = angle_grid(cfg.angle_span_deg, cfg.scan_grid_angles)
    fine_omegas = 2.0 * np.pi * array_cfg.spacing_m / array_cfg.wavelength_m * np.cos(fine_thetas)
    fine_chirps = manifold.chirp_constant(array_cfg, fine_thetas)
    fine_u = np.linspace(u_min, u_max, cfg.scan_grid_curvatures)

    for pass_idx in range(cfg.scan_passes):
        scan_angle = pass_idx % 2 == 0
        for i in active:
            residual = space.sample_cov.copy()
            for j in active:
                if j == i:
                    continue
                d_j = atoms_w[:, j]
                residual -= state.powers[j] * np.outer(d_j, d_j.conj())
            if scan_angle:
                cand = space.project @ manifold.chirp_vector(
                    m_bar[:, None], fine_omegas[None, :], (fine_chirps * state.u[i])[None, :]
                )
            else:
                cand = space.project @ manifold.chirp_vector(
                    m_bar[:, None],
                    np.full((1, fine_u.size), state.omegas[i]),
                    (state.chirps[i] * fine_u)[None, :],
                )
            k = int(np.argmax(space.scores(cand, residual)))
            if scan_angle:
                state.thetas[i] = fine_thetas[k]
                state.omegas[i] = fine_omegas[k]
                state.chirps[i] = fine_chirps[k]
            else:
                state.u[i] = fine_u[k]
            atoms_w[:, i] = cand[:, k]
    state.atoms = np.linalg.solve(space.t, atoms_w)
    return True


def matched_filter_pad(
    state: DictionaryState,
    space: _WhitenedScanSpace,
    active: np.ndarray,
    n_paths: int,
) -> np.ndarray:
    """Pad the active set to exactly d atoms by the whitened matched-filter
    score of the remaining grid atoms against the deflated residual."""
    need = n_paths - active.size
    if need <= 0:
        return active[:n_paths]
    atoms_w = space.t @ state.atoms
    residual = space.sample_cov.copy()
    for j in active:
        d_j = atoms_w[:, j]
        residual -= state.powers[j] * np.outer(d_j, d_j.conj())
    scores = space.scores(atoms_w, residual)
    scores[active] = -np.inf
    extra = np.argsort(-scores, kind="stable")[:need]
    return np.concatenate([active, extra])


def reconstruct_channel(
    array_cfg: ArrayConfig,
    thetas: np.ndarray,
    ranges: np.ndarray,
    combiner: np.ndarray,
    snapshots: np.ndarray,
    rcond: float = 1e-2,
) -> tuple[np.ndarray, bool]:
    """Uncompressed LS fit S = (W^H A)^+ Y, H = A*S with chirp-model atoms.

    The fit is solved in noise-whitened coordinates (the ML weighting for
    white element noise) and the pseudoinverse drops directions below rcond
    of the dominant singular value, which bounds the noise amplification when
    estimated atoms are nearly collinear.  Returns the channel and a flag
    that is False when the truncation actually removed directions.
    """
    n = snapshots.shape[1]
    if len(thetas) == 0:
        return np.zeros((array_cfg.n_elements, n), dtype=complex), True
    a_hat = np.column_stack(
        [manifold.steering_fresnel(array_cfg, t, r) for t, r in zip(thetas, ranges)]
    )
    gram = combiner.conj().T @ combiner
    evals, evecs = np.linalg.eigh(gram)
    t_w = (evecs / np.sqrt(evals)) @ evecs.conj().T
    b = t_w @ (combiner.conj().T @ a_hat)
    u, sv, vh = np.linalg.svd(b, full_matrices=False)
    keep = sv > rcond * sv[0]
    coef = (vh[keep].conj().T / sv[keep]) @ (u[:, keep].conj().T @ (t_w @ snapshots))
    return a_hat @ coef, bool(np.all(keep))


def clkl_estimate(
    obs: CompressedObservation,
    n_paths: int,
    array_cfg: ArrayConfig,
    range_bounds_m: tuple[float, float],
    cfg: ClklConfig | None = None,
) -> EstimateResult:
    """Full pipeline: frozen noise floor, three warm starts, power-only loop,
    post-loop scan, channel reconstruction."""
    cfg = cfg or ClklConfig()
    if n_paths > (obs.n_rf - 1) // 2:
        warnings.warn(
            f"d={n_paths} exceeds the identifiable limit (n_rf-1)//2={(obs.n_rf - 1) // 2}; "
            "estimates may be unreliable",
            stacklevel=2,
        )
    r_min, r_max = range_bounds_m
    u_min, u_max = 1.0 / r_max, 1.0 / r_min

    gram = obs.combiner.conj().T @ obs.combiner
    noise_floor = estimate_noise_frozen(obs.sample_cov, obs.n_rf, n_paths, gram)
    thetas = angle_grid(cfg.angle_span_deg, cfg.grid_size)
    omegas = 2.0 * np.pi * array_cfg.spacing_m / array_cfg.wavelength_m * np.cos(thetas)
    chirps = manifold.chirp_constant(array_cfg, thetas)

    ms = multi_start(
        obs.sample_cov, obs.combiner, array_cfg, thetas, omegas, chirps,
        noise_floor, u_min, u_max, cfg, n_paths,
    )
    state = DictionaryState(
        thetas=thetas.copy(),
        omegas=omegas.copy(),
        chirps=chirps.copy(),
        u=ms.u,
        powers=ms.powers,
        atoms=compressed_atoms(obs.combiner, array_cfg.centred_index, omegas, chirps * ms.u),
        noise_floor=noise_floor,
    )
    space = _WhitenedScanSpace(obs.combiner, obs.sample_cov)

    active = select_active(state.powers, n_paths)
    scanned = False
    if cfg.scan_passes > 0:
        if active.size and cfg.refit_cycles > 0:
            state.powers = refit_active_powers(
                state.powers, active, state.atoms, noise_floor, obs.sample_cov,
                obs.combiner.conj().T @ obs.combiner, cfg.refit_weight, cfg.refit_cycles,
            )
        scanned = post_loop_scan(state, active, space, array_cfg, u_min, u_max, cfg)
    padded = n_paths - active.size
    if padded > 0:
        active = matched_filter_pad(state, space, active, n_paths)

    theta_hat = state.thetas[active]
    u_hat = state.u[active]
    range_hat = 1.0 / u_hat
    power_hat = state.powers[active]
    kappa_hat = state.chirps[active] * u_hat
    channel, full_rank = reconstruct_channel(
        array_cfg, theta_hat, range_hat, obs.combiner, obs.snapshots, cfg.recon_rcond
    )

    diagnostics = {
        "winning_start": ms.start_index,
        "iterations": {s: l.iterations for s, l in ms.all_loops.items()},
        "converged": {s: l.converged for s, l in ms.all_loops.items()},
        "objective_trace": {s: l.objective_trace for s, l in ms.all_loops.items()},
        "noise_floor": noise_floor,
        "loop_noise_floor": ms.loop.noise_floor,
        "scan_performed": scanned,
        "padded_paths": max(padded, 0),
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
