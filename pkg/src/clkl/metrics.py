"""Trial metrics: channel NMSE, matched angle/range errors, failure flag.

Estimated and true paths are paired by minimum-cost assignment with the cost
normalised by the failure tolerances,

    c(i, j) = |dtheta_ij| / 15 deg + |dr_ij| / (0.6 * r_j),

so angle and range errors are commensurate and the failure decision barely
depends on the matching.  A trial fails when any matched path is off by more
than 15 degrees in angle or 60 percent in relative range; errors at the
boundary pass.  Failed trials still contribute their matched errors to RMSE
pools (failure rates run high here while RMSE stays finite, so exclusion is
not an option).
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

ANGLE_TOLERANCE_DEG = 15.0
RANGE_TOLERANCE_REL = 0.6
NMSE_DB_FLOOR = -200.0


@dataclass(frozen=True)
class TrialMetrics:
    nmse: float
    nmse_db: float
    rmse_theta_deg: float
    rmse_range_m: float
    failed: bool
    matching: tuple[int, ...]  # truth index matched to each estimate


def nmse_to_db(value: float) -> float:
    if value <= 0:
        return NMSE_DB_FLOOR
    return float(max(10.0 * np.log10(value), NMSE_DB_FLOOR))


def channel_nmse(estimate: np.ndarray, truth: np.ndarray) -> float:
    """||H_hat - H||_F^2 / ||H||_F^2."""
    if estimate.shape != truth.shape:
        raise ValueError(f"shape mismatch {estimate.shape} vs {truth.shape}")
    denom = np.linalg.norm(truth) ** 2
    if denom == 0:
        raise ValueError("true channel has zero energy")
    return float(np.linalg.norm(estimate - truth) ** 2 / denom)


def match_paths(
    est_theta_rad: np.ndarray,
    est_range_m: np.ndarray,
    true_theta_rad: np.ndarray,
    true_range_m: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Assign estimates to true paths; returns (perm, dtheta_deg, drange_m).

    perm[i] is the truth index matched to estimate i; errors are signed,
    est minus truth.
    """
    if len(est_theta_rad) != len(true_theta_rad):
        raise ValueError("path count mismatch")
    est_t = np.rad2deg(np.asarray(est_theta_rad, dtype=float))
    tru_t = np.rad2deg(np.asarray(true_theta_rad, dtype=float))
    est_r = np.asarray(est_range_m, dtype=float)
    tru_r = np.asarray(true_range_m, dtype=float)
    cost = (
        np.abs(est_t[:, None] - tru_t[None, :]) / ANGLE_TOLERANCE_DEG
        + np.abs(est_r[:, None] - tru_r[None, :]) / (tru_r[None, :] * RANGE_TOLERANCE_REL)
    )
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(len(est_t), dtype=int)
    perm[rows] = cols
    return perm, est_t - tru_t[perm], est_r - tru_r[perm]


def failure(dtheta_deg: np.ndarray, drange_m: np.ndarray, true_range_m: np.ndarray) -> bool:
    """True iff any matched path exceeds the angle or relative-range tolerance."""
    over_angle = np.abs(dtheta_deg) > ANGLE_TOLERANCE_DEG
    over_range = np.abs(drange_m) / np.asarray(true_range_m, dtype=float) > RANGE_TOLERANCE_REL
    return bool(np.any(over_angle | over_range))


def trial_metrics(
    est_theta_rad: np.ndarray,
    est_range_m: np.ndarray,
    est_channel: np.ndarray,
    true_theta_rad: np.ndarray,
    true_range_m: np.ndarray,
    true_channel: np.ndarray,
) -> TrialMetrics:
    nmse = channel_nmse(est_channel, true_channel)
    perm, dtheta, drange = match_paths(
        est_theta_rad, est_range_m, true_theta_rad, true_range_m
    )
    true_r = np.asarray(true_range_m, dtype=float)[perm]
    return TrialMetrics(
        nmse=nmse,
        nmse_db=nmse_to_db(nmse),
        rmse_theta_deg=float(np.sqrt(np.mean(dtheta**2))),
        rmse_range_m=float(np.sqrt(np.mean(drange**2))),
        failed=failure(dtheta, drange, true_r),
        matching=tuple(int(i) for i in perm),
    )
