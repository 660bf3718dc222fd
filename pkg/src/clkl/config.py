"""Plain-text key=value config files for the benchmark harness.

Lines are `key = value`; `#` starts a comment; blank lines are ignored.
Keys mirror the default-scenario table (see README for the full list).
Unknown keys raise, so typos fail loudly instead of silently running the
default scenario.
"""

from dataclasses import replace

from clkl.harness import DEFAULT_SNR_VALUES, SweepSpec
from clkl.manifold import ArrayConfig
from clkl.scene import ScenarioConfig

SCENARIO_KEYS = {
    "carrier_hz": float,
    "m_elements": int,
    "n_rf": int,
    "n_snapshots": int,
    "d_paths": int,
    "snr_db": float,
    "angle_min_deg": float,
    "angle_max_deg": float,
    "range_min_frac": float,
    "range_max_frac": float,
    "source_model": str,
    "truth_model": str,
}

SWEEP_KEYS = {
    "sweep": str,
    "values": str,
    "mc": int,
    "seed": int,
    "methods": str,
    "fixed_combiner": lambda s: s.strip().lower() in ("1", "true", "yes"),
    "workers": int,
}


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in SCENARIO_KEYS:
            out[key] = SCENARIO_KEYS[key](value)
        elif key in SWEEP_KEYS:
            out[key] = SWEEP_KEYS[key](value)
        else:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
    return out


def load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def scenario_from_config(cfg: dict) -> ScenarioConfig:
    array = ArrayConfig(
        carrier_hz=cfg.get("carrier_hz", 28e9),
        n_elements=cfg.get("m_elements", 64),
    )
    base = ScenarioConfig(array=array)
    return replace(
        base,
        n_rf=cfg.get("n_rf", base.n_rf),
        n_snapshots=cfg.get("n_snapshots", base.n_snapshots),
        n_paths=cfg.get("d_paths", base.n_paths),
        snr_db=cfg.get("snr_db", base.snr_db),
        angle_support_deg=(
            cfg.get("angle_min_deg", base.angle_support_deg[0]),
            cfg.get("angle_max_deg", base.angle_support_deg[1]),
        ),
        range_support_frac=(
            cfg.get("range_min_frac", base.range_support_frac[0]),
            cfg.get("range_max_frac", base.range_support_frac[1]),
        ),
        source_model=cfg.get("source_model", base.source_model),
        truth_model=cfg.get("truth_model", base.truth_model),
    )


def _parse_values(variable: str, text: str) -> tuple:
    items = [v.strip() for v in text.split(",") if v.strip()]
    if variable in ("source_model", "truth_model"):
        return tuple(items)
    if variable in ("n_rf", "n_snapshots", "d", "m_elements"):
        return tuple(int(float(v)) for v in items)
    return tuple(float(v) for v in items)


def sweep_spec_from_config(cfg: dict) -> SweepSpec:
    base = scenario_from_config(cfg)
    variable = cfg.get("sweep", "snr")
    if "values" in cfg:
        values = _parse_values(variable, cfg["values"])
    elif variable == "snr":
        values = DEFAULT_SNR_VALUES
    else:
        raise ValueError(f"sweep over {variable!r} needs an explicit 'values' entry")
    spec = SweepSpec(variable=variable, values=values, base=base)
    overrides = {}
    if "mc" in cfg:
        overrides["n_trials"] = cfg["mc"]
    if "seed" in cfg:
        overrides["base_seed"] = cfg["seed"]
    if "methods" in cfg:
        overrides["methods"] = tuple(m.strip() for m in cfg["methods"].split(",") if m.strip())
    if "fixed_combiner" in cfg:
        overrides["fixed_combiner"] = cfg["fixed_combiner"]
    if "workers" in cfg:
        overrides["workers"] = cfg["workers"]
    return replace(spec, **overrides) if overrides else spec
