"""Seeded Monte-Carlo benchmark harness.

One sweep = one variable (snr, n_rf, n_snapshots, d, range_max_frac,
m_elements, source_model, truth_model) crossed with N_MC trials.  Trial k of
every sweep value uses seed base_seed + k, so sweeps are paired across
values and bit-identical between serial and parallel runs; rows are sorted
by (value, trial, method) before writing.  A trial that raises is recorded
as an error row and the sweep continues.

The proposed estimator consumes the raw observation (its covariance model
carries the N0*W^H*W term); the baseline consumes the whitened observation.
Channel quality is judged against the noiseless ground-truth channel.  Each
sweep value also carries the compressed-domain CRB medians (50 draws over
the same scene distribution), repeated on its rows for plotting.

CSV schema v1 (columns in CSV_COLUMNS): one row per (sweep value, trial,
method).  Floats are written with repr so identical runs produce identical
bytes; the runtime column stays empty unless timing is requested, keeping
default sweep output deterministic.  Aggregate NMSE is reported both as
10*log10(mean linear) -- the headline number -- and as the median.
"""

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from clkl import crb as crb_mod
from clkl import metrics, psomp
from clkl.estimator import ClklConfig, clkl_estimate
from clkl.manifold import ArrayConfig
from clkl.scene import ScenarioConfig, draw_scene, snr_to_noise, whiten

SCHEMA_VERSION = "clkl-trials-v1"
TRACE_SCHEMA_VERSION = "clkl-traces-v1"
CRB_SCHEMA_VERSION = "clkl-crb-v1"

SWEEP_VARIABLES = (
    "snr",
    "n_rf",
    "n_snapshots",
    "d",
    "range_max_frac",
    "m_elements",
    "source_model",
    "truth_model",
)

DEFAULT_SNR_VALUES = (-15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0)

CSV_COLUMNS = [
    "schema_version",
    "sweep_var",
    "sweep_value",
    "variant",
    "trial",
    "seed",
    "method",
    "m_elements",
    "n_rf",
    "n_snapshots",
    "d_paths",
    "snr_db",
    "carrier_hz",
    "angle_min_deg",
    "angle_max_deg",
    "range_min_frac",
    "range_max_frac",
    "source_model",
    "truth_model",
    "fixed_combiner",
    "whitened",
    "nmse",
    "nmse_db",
    "rmse_theta_deg",
    "rmse_range_m",
    "failed",
    "runtime_s",
    "win_start",
    "iterations",
    "converged",
    "n0_est",
    "n0_true",
    "crb_theta_deg",
    "crb_range_m",
    "error",
]

TRACE_COLUMNS = [
    "schema_version",
    "snr_db",
    "trial",
    "start",
    "iteration",
    "objective",
    "objective_delta",
]

CRB_COLUMNS = [
    "schema_version",
    "sweep_var",
    "sweep_value",
    "d_paths",
    "snr_db",
    "n_rf",
    "n_snapshots",
    "crb_theta_deg",
    "crb_range_m",
    "n_valid",
    "n_trials",
]


@dataclass(frozen=True)
class SweepSpec:
    """Everything one sweep needs; identical specs give identical CSV bytes."""

    variable: str = "snr"
    values: tuple = DEFAULT_SNR_VALUES
    base: ScenarioConfig = field(default_factory=ScenarioConfig)
    n_trials: int = 100
    methods: tuple[str, ...] = ("clkl", "psomp")
    variant: str = "full"
    clkl_config: ClklConfig = field(default_factory=ClklConfig)
    base_seed: int = 42
    fixed_combiner: bool = False
    workers: int = 1
    timing: bool = False
    compute_crb: bool = True

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"unknown sweep variable {self.variable!r}")
        if self.n_trials < 1:
            raise ValueError("need at least one trial")
        for m in self.methods:
            if m not in ("clkl", "psomp"):
                raise ValueError(f"unknown method {m!r}")


def apply_sweep_value(base: ScenarioConfig, variable: str, value) -> ScenarioConfig:
    if variable == "snr":
        return replace(base, snr_db=float(value))
    if variable == "n_rf":
        return replace(base, n_rf=int(value))
    if variable == "n_snapshots":
        return replace(base, n_snapshots=int(value))
    if variable == "d":
        return replace(base, n_paths=int(value))
    if variable == "range_max_frac":
        return replace(base, range_support_frac=(base.range_support_frac[0], float(value)))
    if variable == "m_elements":
        array = ArrayConfig(carrier_hz=base.array.carrier_hz, n_elements=int(value))
        return replace(base, array=array)
    if variable == "source_model":
        return replace(base, source_model=str(value))
    if variable == "truth_model":
        return replace(base, truth_model=str(value))
    raise ValueError(f"unknown sweep variable {variable!r}")


_DICTIONARY_CACHE: dict = {}


def _cached_dictionary(array: ArrayConfig, u_min: float, u_max: float):
    key = (array.carrier_hz, array.n_elements, array.spacing_m, u_min, u_max)
    if key not in _DICTIONARY_CACHE:
        _DICTIONARY_CACHE[key] = psomp.build_beam_depth_dictionary(
            array, u_min=u_min, u_max=u_max
        )
    return _DICTIONARY_CACHE[key]


def _run_trial_task(args):
    """One (sweep value, trial): draw the scene, run each method, build rows.

    Top-level so process pools can pickle it; exceptions per method become
    error rows instead of aborting the sweep.
    """
    spec, value, trial = args
    scenario = apply_sweep_value(spec.base, spec.variable, value)
    seed = spec.base_seed + trial
    if spec.fixed_combiner:
        # one combiner for the whole sweep, drawn from the base seed; path,
        # source and noise randomness still varies per trial
        rng_w = np.random.default_rng(spec.base_seed)
        from clkl.scene import draw_combiner

        fixed_w = draw_combiner(scenario.array.n_elements, scenario.n_rf, rng_w)
    rng = np.random.default_rng(seed)
    scene = draw_scene(replace(scenario, seed=seed), rng)
    if spec.fixed_combiner:
        snap = fixed_w.conj().T @ scene.snapshots_full
        scene = replace(
            scene,
            combiner=fixed_w,
            snapshots=snap,
            sample_cov=snap @ snap.conj().T / scenario.n_snapshots,
        )
    truth_theta = np.array([p.theta_rad for p in scene.paths])
    truth_range = np.array([p.range_m for p in scene.paths])
    truth_channel = scene.channel

    base_row = {
        "schema_version": SCHEMA_VERSION,
        "sweep_var": spec.variable,
        "sweep_value": value,
        "variant": spec.variant,
        "trial": trial,
        "seed": seed,
        "m_elements": scenario.array.n_elements,
        "n_rf": scenario.n_rf,
        "n_snapshots": scenario.n_snapshots,
        "d_paths": scenario.n_paths,
        "snr_db": scenario.snr_db,
        "carrier_hz": scenario.array.carrier_hz,
        "angle_min_deg": scenario.angle_support_deg[0],
        "angle_max_deg": scenario.angle_support_deg[1],
        "range_min_frac": scenario.range_support_frac[0],
        "range_max_frac": scenario.range_support_frac[1],
        "source_model": scenario.source_model,
        "truth_model": scenario.truth_model,
        "fixed_combiner": int(spec.fixed_combiner),
        "n0_true": scene.noise_power,
    }

    rows = []
    for method in spec.methods:
        row = dict(base_row)
        row["method"] = method
        row["whitened"] = int(method == "psomp")
        try:
            t0 = time.perf_counter()
            if method == "clkl":
                result = clkl_estimate(
                    scene.observation(),
                    scenario.n_paths,
                    scenario.array,
                    scenario.range_support_m,
                    spec.clkl_config,
                )
            else:
                obs = whiten(scene.observation())
                dictionary = _cached_dictionary(
                    scenario.array,
                    1.0 / scenario.range_support_m[1],
                    1.0 / scenario.range_support_m[0],
                )
                result = psomp.psomp_estimate(
                    obs, scenario.n_paths, dictionary, scenario.array,
                    scenario.range_support_m[1],
                )
            elapsed = time.perf_counter() - t0
            tm = metrics.trial_metrics(
                result.theta_rad, result.range_m, result.channel,
                truth_theta, truth_range, truth_channel,
            )
            row.update(
                nmse=tm.nmse,
                nmse_db=tm.nmse_db,
                rmse_theta_deg=tm.rmse_theta_deg,
                rmse_range_m=tm.rmse_range_m,
                failed=int(tm.failed),
                error="",
            )
            if spec.timing:
                row["runtime_s"] = elapsed
            diag = result.diagnostics
            row["n0_est"] = diag.get("noise_floor", "")
            if method == "clkl":
                win = diag["winning_start"]
                row["win_start"] = win
                row["iterations"] = diag["iterations"][win]
                row["converged"] = int(diag["converged"][win])
        except Exception as exc:  # crash isolation: record, keep sweeping
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return (value, trial, rows)


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, rows, columns):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row.get(col, "")) for col in columns])


def run_sweep(spec: SweepSpec, out_path=None, echo=print):
    """Execute the sweep, return the row dicts (sorted), optionally write CSV."""
    tasks = [(spec, value, trial) for value in spec.values for trial in range(spec.n_trials)]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_run_trial_task, tasks, chunksize=4))
    else:
        results = [_run_trial_task(t) for t in tasks]

    value_order = {v: i for i, v in enumerate(spec.values)}
    results.sort(key=lambda r: (value_order[r[0]], r[1]))
    rows = [row for _, _, trial_rows in results for row in trial_rows]

    if spec.compute_crb:
        for value in spec.values:
            scenario = apply_sweep_value(spec.base, spec.variable, value)
            summary = crb_mod.crb_sweep(
                scenario, n_trials=min(spec.n_trials, 50), base_seed=spec.base_seed
            )
            for row in rows:
                if row["sweep_value"] == value:
                    row["crb_theta_deg"] = summary.median_theta_deg
                    row["crb_range_m"] = summary.median_range_m

    if out_path is not None:
        write_csv(out_path, rows, CSV_COLUMNS)
    if echo is not None:
        print_summary(rows, echo)
    return rows


def aggregate(rows):
    """Per (variant, sweep value, method) summary over non-error rows."""
    groups: dict = {}
    for row in rows:
        if row.get("error"):
            continue
        key = (row["variant"], row["sweep_value"], row["method"])
        groups.setdefault(key, []).append(row)
    out = []
    for (variant, value, method), grp in groups.items():
        nmse = np.array([r["nmse"] for r in grp], dtype=float)
        rmse_t = np.array([r["rmse_theta_deg"] for r in grp], dtype=float)
        rmse_r = np.array([r["rmse_range_m"] for r in grp], dtype=float)
        failed = np.array([r["failed"] for r in grp], dtype=float)
        entry = {
            "variant": variant,
            "sweep_value": value,
            "method": method,
            "n_trials": len(grp),
            "nmse_db_mean": metrics.nmse_to_db(float(np.mean(nmse))),
            "nmse_db_median": metrics.nmse_to_db(float(np.median(nmse))),
            "rmse_theta_deg": float(np.sqrt(np.mean(rmse_t**2))),
            "rmse_range_m": float(np.sqrt(np.mean(rmse_r**2))),
            "failure_rate": float(np.mean(failed)),
        }
        runtimes = [r["runtime_s"] for r in grp if r.get("runtime_s") not in ("", None)]
        if runtimes:
            entry["runtime_median_s"] = float(np.median(np.asarray(runtimes, dtype=float)))
        crb_t = grp[0].get("crb_theta_deg", "")
        if crb_t != "":
            entry["crb_theta_deg"] = crb_t
            entry["crb_range_m"] = grp[0]["crb_range_m"]
        out.append(entry)
    out.sort(key=lambda e: (str(e["variant"]), str(e["sweep_value"]), e["method"]))
    return out


def print_summary(rows, echo=print):
    agg = aggregate(rows)
    if not agg:
        echo("no successful trials")
        return
    header = (
        f"{'variant':>12} {'value':>10} {'method':>6} {'n':>4} "
        f"{'NMSE(dB)':>9} {'med':>7} {'RMSEth':>7} {'RMSEr':>7} {'fail%':>6}"
    )
    echo(header)
    for e in agg:
        echo(
            f"{e['variant']:>12} {str(e['sweep_value']):>10} {e['method']:>6} "
            f"{e['n_trials']:>4} {e['nmse_db_mean']:>9.2f} {e['nmse_db_median']:>7.2f} "
            f"{e['rmse_theta_deg']:>7.2f} {e['rmse_range_m']:>7.2f} "
            f"{100 * e['failure_rate']:>6.1f}"
        )
    errors = sum(1 for r in rows if r.get("error"))
    if errors:
        echo(f"{errors} trial rows recorded errors")


ABLATION_VARIANTS = {
    "full": {},
    "refresh_noise": {"noise_refresh_every": 10},
    "single_start": {"starts": (3,)},
    "no_scan": {"scan_passes": 0},
}


def run_ablation(
    base: ScenarioConfig,
    snr_values=(-5.0, 5.0, 15.0),
    n_trials: int = 50,
    base_seed: int = 42,
    workers: int = 1,
    out_path=None,
    echo=print,
):
    """Four estimator configurations over the ablation SNR grid."""
    all_rows = []
    for variant, overrides in ABLATION_VARIANTS.items():
        spec = SweepSpec(
            variable="snr",
            values=tuple(snr_values),
            base=base,
            n_trials=n_trials,
            methods=("clkl",),
            variant=variant,
            clkl_config=ClklConfig(**overrides),
            base_seed=base_seed,
            workers=workers,
            compute_crb=False,
        )
        all_rows.extend(run_sweep(spec, out_path=None, echo=None))
    if out_path is not None:
        write_csv(out_path, all_rows, CSV_COLUMNS)
    if echo is not None:
        print_summary(all_rows, echo)
    return all_rows


def run_convergence_diag(
    base: ScenarioConfig,
    snr_values=(-10.0, 0.0, 10.0, 20.0),
    n_trials: int = 50,
    base_seed: int = 42,
    out_path=None,
    echo=print,
):
    """Objective traces of the winning start per trial, plus summary stats.

    The logged delta is objective(t) - objective(1), i.e. relative to the
    first accepted iteration.
    """
    trace_rows = []
    summary = []
    for snr in snr_values:
        scenario = apply_sweep_value(base, "snr", snr)
        iters, convs = [], []
        for trial in range(n_trials):
            seed = base_seed + trial
            rng = np.random.default_rng(seed)
            scene = draw_scene(replace(scenario, seed=seed), rng)
            result = clkl_estimate(
                scene.observation(), scenario.n_paths, scenario.array,
                scenario.range_support_m,
            )
            win = result.diagnostics["winning_start"]
            trace = result.diagnostics["objective_trace"][win]
            iters.append(result.diagnostics["iterations"][win])
            convs.append(result.diagnostics["converged"][win])
            ref = trace[1] if len(trace) > 1 else trace[0]
            for it, objective in enumerate(trace):
                trace_rows.append(
                    {
                        "schema_version": TRACE_SCHEMA_VERSION,
                        "snr_db": snr,
                        "trial": trial,
                        "start": win,
                        "iteration": it,
                        "objective": float(objective),
                        "objective_delta": float(objective - ref),
                    }
                )
        summary.append(
            {
                "snr_db": snr,
                "median_iterations": float(np.median(iters)),
                "convergence_rate": float(np.mean(convs)),
            }
        )
    if out_path is not None:
        write_csv(out_path, trace_rows, TRACE_COLUMNS)
    if echo is not None:
        for s in summary:
            echo(
                f"SNR {s['snr_db']:+5.1f} dB: median iterations "
                f"{s['median_iterations']:5.0f}, formal convergence "
                f"{100 * s['convergence_rate']:5.1f}%"
            )
    return trace_rows, summary


def run_runtime_bench(
    base: ScenarioConfig,
    m_values=(32, 64, 128, 256),
    n_trials: int = 50,
    base_seed: int = 42,
    out_path=None,
    echo=print,
):
    """Estimator-only wall clock vs array size; single worker by design."""
    spec = SweepSpec(
        variable="m_elements",
        values=tuple(m_values),
        base=base,
        n_trials=n_trials,
        methods=("clkl", "psomp"),
        base_seed=base_seed,
        workers=1,
        timing=True,
        compute_crb=False,
    )
    rows = run_sweep(spec, out_path=out_path, echo=None)
    summary = {}
    for e in aggregate(rows):
        summary[(e["sweep_value"], e["method"])] = e.get("runtime_median_s", np.nan)
    if echo is not None:
        for (m, method), rt in sorted(summary.items()):
            echo(f"M={m:>4} {method:>6}: median {1e3 * rt:8.2f} ms/trial")
    return rows, summary


def run_crb_report(
    base: ScenarioConfig,
    d_values=(1, 2, 3, 4, 5),
    n_trials: int = 50,
    base_seed: int = 42,
    out_path=None,
    echo=print,
):
    """Median compressed-domain bounds vs path count."""
    rows = []
    for d in d_values:
        scenario = apply_sweep_value(base, "d", d)
        summary = crb_mod.crb_sweep(scenario, n_trials=min(n_trials, 50), base_seed=base_seed)
        rows.append(
            {
                "schema_version": CRB_SCHEMA_VERSION,
                "sweep_var": "d",
                "sweep_value": d,
                "d_paths": d,
                "snr_db": scenario.snr_db,
                "n_rf": scenario.n_rf,
                "n_snapshots": scenario.n_snapshots,
                "crb_theta_deg": summary.median_theta_deg,
                "crb_range_m": summary.median_range_m,
                "n_valid": summary.n_valid,
                "n_trials": summary.n_trials,
            }
        )
    if out_path is not None:
        write_csv(out_path, rows, CRB_COLUMNS)
    if echo is not None:
        echo(f"{'d':>3} {'sqrtCRB_theta(deg)':>19} {'sqrtCRB_r(m)':>13} {'valid':>7}")
        for r in rows:
            echo(
                f"{r['d_paths']:>3} {r['crb_theta_deg']:>19.4f} "
                f"{r['crb_range_m']:>13.3f} {r['n_valid']:>4}/{r['n_trials']}"
            )
    return rows
