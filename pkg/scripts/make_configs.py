"""Regenerate configs/ from the scenario presets so the JSON never drifts from the code."""
import json
from pathlib import Path

from sdsim.config import config_to_json
from sdsim.experiments import small_data_scenario, smooth_scenario
from sdsim.config import ScenarioConfig, GridSpec, ParamSpec, StepSpec, InitialSpec, DiagnosticsSpec, validate

OUT = Path(__file__).resolve().parent.parent / "configs"


def scenarios() -> dict[str, ScenarioConfig]:
    out = {f"small_d{d}": small_data_scenario(d) for d in (1, 2, 3, 4)}
    out["small_d1_focusing"] = small_data_scenario(1, params={"lam": -1}, name="small_data_d1_focusing")
    out["small_d2_focusing"] = small_data_scenario(2, params={"lam": -1}, name="small_data_d2_focusing")
    out["smooth_d1"] = smooth_scenario()
    out["zero_d1"] = smooth_scenario(initial={"u_amplitude": 0.0, "v_amplitude": 0.0},
                                     step={"output_stride": 1}, diagnostics={"gamma": True}, name="zero_d1")
    out["focusing_d2_large"] = validate(ScenarioConfig(
        grid=GridSpec(2, 128, 25.6), params=ParamSpec(1.0, -1), step=StepSpec(0.01, 5.0, None, 10),
        initial=InitialSpec(4.0, 1.0, (), 0.1, 1.0), diagnostics=DiagnosticsSpec(p_list=(4.0,)),
        name="focusing_d2_large"))
    return out


def sweeps() -> dict[str, dict]:
    mu_base = smooth_scenario(initial={"u_amplitude": 0.5, "v_amplitude": 0.5}, step={"dt": 0.01}, name="mu_limit")
    scan_base = scenarios()["focusing_d2_large"].replace(initial={"u_amplitude": 0.1}, name="smallness_d2")
    return {
        "sweep_mu_limit": {"kind": "mu_limit", "values": [1, 0.5, 0.25, 0.125, 0.0625],
                           "base": json.loads(config_to_json(mu_base))},
        "sweep_smallness_d2": {"kind": "smallness", "values": [0.5, 1, 2, 4],
                               "base": json.loads(config_to_json(scan_base))},
        "sweep_scaling": {"kind": "scaling", "values": [1, 4],
                          "base": json.loads(config_to_json(smooth_scenario(name="scaling")))},
    }


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    for name, cfg in scenarios().items():
        (OUT / f"{name}.json").write_text(config_to_json(cfg) + "\n")
    for name, spec in sweeps().items():
        (OUT / f"{name}.json").write_text(json.dumps(spec, indent=2, sort_keys=True) + "\n")
    print("\n".join(sorted(p.name for p in OUT.glob("*.json"))))
