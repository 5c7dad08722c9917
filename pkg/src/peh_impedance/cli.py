"""Command-line front end.

Every run is described by a JSON RunConfig (``--config``) whose fields can
be overridden from the command line.  Physical quantities carry explicit
units, both in the file (``{"value": 30, "unit": "deg"}``) and on the
command line (``--phi 30deg``, ``--omega 55.8Hz``).  Artifacts are a CSV and
a JSON summary per run, written with fixed 9-significant-digit formatting so
identical configs give identical bytes.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import re
import sys
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import ideal, impedance, oracle, power
from .model import PehSystem
from .presets import FIELDS, SYSTEM_SCHEMA, UNITS, _quantity_schema, load_preset, preset_names, system_from_document
from .waveforms import PI, Topology, TuningPoint, energy_split, synthesize_vp

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3

SCHEMA_VERSION = 1
COMMANDS = ("ideal", "waveform", "region", "sweep", "bandwidth", "oracle", "compare")

FREQ_UNITS = {"Hz": 2.0 * PI, "rad/s": 1.0, "omega_n": None}
ANGLE_UNITS = {"deg": PI / 180.0, "rad": 1.0}
SECOND_UNITS = ("1", "fraction", "deg", "rad", "V")


def _q(units) -> dict:
    return {
        "type": "object",
        "properties": {"value": {"type": "number"}, "unit": {"enum": list(units)}},
        "required": ["value", "unit"],
        "additionalProperties": False,
    }


def _axis(units) -> dict:
    return {
        "type": "object",
        "properties": {"start": _q(units), "stop": _q(units), "points": {"type": "integer", "minimum": 1}},
        "required": ["start", "stop", "points"],
        "additionalProperties": False,
    }


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


RUN_SCHEMA: dict = _obj(
    {
        "schema_version": {"const": SCHEMA_VERSION},
        "system": {"oneOf": [{"enum": preset_names()}, SYSTEM_SCHEMA]},
        "system_overrides": _obj({k: _quantity_schema(FIELDS[k]) for k in ("Rp", "gamma", "accel", "force")}),
        "topology": {"enum": [t.value for t in Topology]},
        "pv_enabled": {"type": "boolean"},
        "omega": _q(FREQ_UNITS),
        "tuning": _obj({"phi": _q(ANGLE_UNITS), "second": _q(SECOND_UNITS)}),
        "grids": _obj({
            "omega": _axis(FREQ_UNITS),
            "phi": _axis(ANGLE_UNITS),
            "second": _obj({"points": {"type": "integer", "minimum": 2}}, ["points"]),
        }),
        "ideal": _obj({
            "eta": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
            "zeta": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        }),
        "waveform": _obj({"samples": {"type": "integer", "minimum": 16}}),
        "region": _obj({"phi_points": {"type": "integer", "minimum": 16},
                        "second_points": {"type": "integer", "minimum": 16}}),
        "oracle": _obj({
            "steps_per_cycle": {"type": "integer", "minimum": 64},
            "max_cycles": {"type": "integer", "minimum": 10},
            "tol": {"type": "number", "exclusiveMinimum": 0},
            "stable_cycles": {"type": "integer", "minimum": 1},
            "window": {"type": "integer", "minimum": 1},
            "sync": {"enum": ["velocity", "locked"]},
            "lock_gain": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "initial": {"enum": ["rest", "open_circuit"]},
            "record_every": {"type": "integer", "minimum": 1},
            "diode_drop": _q(["V"]),
            "workers": {"type": "integer", "minimum": 1},
        }),
        "output": _obj({"dir": {"type": "string"}, "prefix": {"type": "string"}}),
    },
    required=["schema_version"],
)

DEFAULTS: dict = {
    "schema_version": SCHEMA_VERSION,
    "system": "strong",
    "topology": "S-SSHI",
    "pv_enabled": True,
    "grids": {
        "omega": {"start": {"value": 0.9, "unit": "omega_n"}, "stop": {"value": 1.1, "unit": "omega_n"}, "points": 401},
        "phi": {"start": {"value": -90, "unit": "deg"}, "stop": {"value": 90, "unit": "deg"}, "points": 181},
        "second": {"points": 201},
    },
    "ideal": {"eta": [0, 1], "zeta": [0.01]},
    "waveform": {"samples": 1024},
    "region": {"phi_points": 181, "second_points": 201},
    "oracle": {},
    "output": {"dir": ".", "prefix": ""},
}


# per-command grid defaults, applied beneath the config file
COMMAND_DEFAULTS: dict = {
    "compare": {
        "grids": {
            "omega": {"start": {"value": 0.9, "unit": "omega_n"}, "stop": {"value": 1.1, "unit": "omega_n"}, "points": 21},
            "phi": {"start": {"value": -90, "unit": "deg"}, "stop": {"value": 90, "unit": "deg"}, "points": 13},
            "second": {"points": 15},
        },
    },
}


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


# ---------------------------------------------------------------- formatting

def fmt(x) -> str:
    """Fixed 9-significant-digit text for CSV cells."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x + 0.0, ".9g")


def _json_ready(obj):
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return None if not math.isfinite(x) else float(format(x + 0.0, ".9g"))
    if isinstance(obj, complex):
        return {"re": _json_ready(obj.real), "im": _json_ready(obj.imag)}
    return obj


def dumps(obj) -> str:
    return json.dumps(_json_ready(obj), indent=2, sort_keys=True) + "\n"


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


# ------------------------------------------------------------------- config

_NUM = r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"


def parse_quantity(text: str, units, field: str) -> dict:
    """``"30deg"`` -> ``{"value": 30.0, "unit": "deg"}``; the unit suffix is mandatory."""
    m = re.fullmatch(_NUM + r"\s*(\S+)", text.strip())
    if not m or m.group(2) not in units:
        raise ConfigError(f"{field}: expected a number with unit suffix from {sorted(units)}, got {text!r}")
    return {"value": float(m.group(1)), "unit": m.group(2)}


def _float_list(text: str, field: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{field}: expected comma-separated numbers, got {text!r}") from None


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key != "system":
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _field_path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def validate_config(doc: dict) -> None:
    errors = sorted(jsonschema.Draft202012Validator(RUN_SCHEMA).iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = [f"{_field_path(e)}: {e.message}" for e in errors]
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines))


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config: file {path!r} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be an object")
    return doc


def overrides_from_args(args: argparse.Namespace) -> dict:
    o: dict[str, Any] = {}
    if args.preset:
        o["system"] = args.preset
    if args.topology:
        try:
            o["topology"] = Topology.parse(args.topology).value
        except ValueError as exc:
            raise ConfigError(f"topology: {exc}") from None
    if args.pv is not None:
        o["pv_enabled"] = args.pv
    if args.rp:
        o.setdefault("system_overrides", {})["Rp"] = (
            {"value": "inf", "unit": "Ohm"} if args.rp.strip() == "inf" else parse_quantity(args.rp, UNITS["resistance"], "Rp"))
    if args.omega:
        o["omega"] = parse_quantity(args.omega, FREQ_UNITS, "omega")
    tuning = {}
    if args.phi:
        tuning["phi"] = parse_quantity(args.phi, ANGLE_UNITS, "phi")
    if args.second:
        text = args.second.strip()
        if re.search(r"[A-Za-z]", text.replace("e", "").replace("E", "")):
            tuning["second"] = parse_quantity(text, SECOND_UNITS, "second")
        else:
            tuning["second"] = {"value": _float_list(text, "second")[0], "unit": "1"}
    if tuning:
        o["tuning"] = tuning
    if args.out:
        o.setdefault("output", {})["dir"] = args.out
    if args.prefix is not None:
        o.setdefault("output", {})["prefix"] = args.prefix
    if getattr(args, "eta", None):
        o.setdefault("ideal", {})["eta"] = _float_list(args.eta, "eta")
    if getattr(args, "zeta", None):
        o.setdefault("ideal", {})["zeta"] = _float_list(args.zeta, "zeta")
    if getattr(args, "sync", None):
        o.setdefault("oracle", {})["sync"] = args.sync
    if getattr(args, "workers", None):
        o.setdefault("oracle", {})["workers"] = args.workers
    return o


def resolve_config(file_doc: dict, overrides: dict, command: str | None = None) -> dict:
    if file_doc:
        validate_config(file_doc)
    base = _merge(DEFAULTS, COMMAND_DEFAULTS.get(command, {}))
    doc = _merge(_merge(base, file_doc), overrides)
    validate_config(doc)
    return doc


class Run:
    """Resolved configuration with SI accessors."""

    def __init__(self, doc: dict):
        self.doc = doc
        sysdoc = doc["system"]
        try:
            preset = load_preset(sysdoc) if isinstance(sysdoc, str) else system_from_document(sysdoc)
        except (ValueError, jsonschema.ValidationError) as exc:
            raise ConfigError(f"system: {getattr(exc, 'message', exc)}") from None
        changes = {}
        for key, q in doc.get("system_overrides", {}).items():
            value = math.inf if q["value"] == "inf" else float(q["value"]) * UNITS[FIELDS[key]][q["unit"]]
            changes[key] = value
        try:
            self.system: PehSystem = preset.system.with_changes(**changes) if changes else preset.system
        except ValueError as exc:
            raise ConfigError(f"system_overrides: {exc}") from None
        self.preset_omega = preset.omega
        self.topology = Topology(doc["topology"])
        self.pv = bool(doc["pv_enabled"])

    def frequency(self, q: dict) -> float:
        scale = FREQ_UNITS[q["unit"]]
        value = q["value"] * (self.system.omega_n if scale is None else scale)
        if not value > 0:
            raise ConfigError(f"frequency must be positive, got {q['value']} {q['unit']}")
        return value

    @property
    def omega(self) -> float:
        if "omega" in self.doc:
            return self.frequency(self.doc["omega"])
        return self.preset_omega or self.system.omega_n

    def omega_grid(self) -> np.ndarray:
        g = self.doc["grids"]["omega"]
        return np.linspace(self.frequency(g["start"]), self.frequency(g["stop"]), g["points"])

    def phi_grid(self) -> np.ndarray:
        g = self.doc["grids"]["phi"]
        lo = g["start"]["value"] * ANGLE_UNITS[g["start"]["unit"]]
        hi = g["stop"]["value"] * ANGLE_UNITS[g["stop"]["unit"]]
        if not (-PI / 2 - 1e-12 <= lo <= PI / 2 + 1e-12 and -PI / 2 - 1e-12 <= hi <= PI / 2 + 1e-12):
            raise ConfigError("grids/phi: bounds must lie within [-90deg, 90deg]")
        return np.clip(np.linspace(lo, hi, g["points"]), -PI / 2, PI / 2)

    def s_grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.doc["grids"]["second"]["points"])

    def phi(self) -> float:
        q = self.doc.get("tuning", {}).get("phi")
        if q is None:
            return 0.0
        return q["value"] * ANGLE_UNITS[q["unit"]]

    def second_quantity(self) -> dict | None:
        return self.doc.get("tuning", {}).get("second")

    def tuning(self) -> TuningPoint:
        """Analytic tuning; absolute volts are rejected here."""
        q = self.second_quantity()
        topo, phi = self.topology, self.phi()
        try:
            if topo is Topology.SECE:
                if q is not None:
                    raise ConfigError("tuning/second: SECE has no second parameter")
                return TuningPoint(topo, phi)
            if q is None:
                raise ConfigError(f"tuning/second: required for {topo.value}")
            unit = q["unit"]
            if unit == "V":
                raise ConfigError("tuning/second: volts are only accepted by the oracle subcommand")
            if unit == "fraction":
                if not 0.0 <= q["value"] <= 1.0:
                    raise ConfigError("tuning/second: fraction must lie in [0, 1]")
                return TuningPoint.from_unit(topo, phi, q["value"])
            if (unit in ANGLE_UNITS) != (topo is Topology.P_SSHI):
                raise ConfigError(f"tuning/second: unit {unit!r} does not fit {topo.value}")
            value = q["value"] * ANGLE_UNITS[unit] if unit in ANGLE_UNITS else q["value"]
            return TuningPoint(topo, phi, value)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"tuning: {exc}") from None

    def sim_options(self) -> oracle.SimOptions:
        o = dict(self.doc.get("oracle", {}))
        o.pop("workers", None)
        if "diode_drop" in o:
            o["diode_drop"] = float(o["diode_drop"]["value"])
        try:
            return oracle.SimOptions(**o)
        except ValueError as exc:
            raise ConfigError(f"oracle: {exc}") from None

    @property
    def workers(self) -> int:
        return int(self.doc.get("oracle", {}).get("workers", 1))

    def path(self, name: str) -> Path:
        out = Path(self.doc["output"]["dir"])
        out.mkdir(parents=True, exist_ok=True)
        return out / f"{self.doc['output']['prefix']}{name}"


# ----------------------------------------------------------------- commands

def _hz(w):
    return w / (2.0 * PI)


def _deg(a):
    return math.degrees(a)


def cmd_ideal(run: Run) -> tuple[dict, int]:
    cfg = run.doc["ideal"]
    rows = ideal.sweep_table(cfg["eta"], cfg["zeta"])
    write_csv(run.path("ideal.csv"), ["eta", "zeta", "beta_r", "bandwidth"],
              ([r["eta"], r["zeta"], r["beta_r"], r["bandwidth"]] for r in rows))
    bands = []
    for eta in cfg["eta"]:
        for zeta in cfg["zeta"]:
            b = ideal.half_power_roots(eta, zeta)
            bands.append({"eta": eta, "zeta": zeta, "lower": b.lower, "upper": b.upper,
                          "closed_form": b.closed_form, "two_sided": b.two_sided})
    p_m, p_h = ideal.power_limits(run.system)
    return {"rows": len(rows), "half_power": bands, "p_m_max_w": p_m, "p_h_max_w": p_h}, EXIT_OK


def cmd_waveform(run: Run) -> tuple[dict, int]:
    tuning = run.tuning()
    wave = synthesize_vp(tuning, run.system.gamma, 1.0)
    angle, v = wave.sample(run.doc["waveform"]["samples"])
    z = impedance.fundamental_harmonic(wave)
    v_f = z.real * np.sin(angle) + z.imag * np.cos(angle)
    q = -np.cos(angle)
    write_csv(run.path("waveform.csv"), ["omega_t_rad", "vp", "vp_f", "q"], zip(angle, v, v_f, q))
    e_h, e_d = energy_split(wave, 1.0, 1.0)
    summary = {
        "topology": tuning.topology.value, "phi_deg": _deg(tuning.phi), "second_param": tuning.second,
        "v0_tilde": wave.interior.v0_tilde if wave.interior else None,
        "v1_tilde": wave.interior.v1_tilde if wave.interior else None,
        "vr_tilde": wave.vr_tilde, "open_circuit": wave.open_circuit,
        "z_normalized": z, "e_h_normalized": e_h, "e_d_normalized": e_d,
    }
    return summary, EXIT_OK


def cmd_region(run: Run) -> tuple[dict, int]:
    cfg = run.doc["region"]
    w = run.omega
    region = impedance.attainable_region(run.system, run.topology, w, run.pv, cfg["phi_points"], cfg["second_points"])
    write_csv(run.path("region.csv"), ["phi_deg", "second_param", "z_re", "z_im"],
              ([_deg(p), s, z.real, z.imag] for p, s, z in zip(region.phi, region.second, region.samples)))
    k = int(np.argmax(np.abs(region.samples)))
    rep = impedance.match_report(run.system, run.topology, w, run.pv)
    summary = {
        "omega_hz": _hz(w), "kind": region.kind, "samples": int(region.samples.size),
        "extreme": {"phi_deg": _deg(region.phi[k]), "second_param": region.second[k], "z": complex(region.samples[k])},
        "circle": None if region.closed_form is None else {"center": region.closed_form[0], "radius": region.closed_form[1]},
        "scale_mechanical": region.scale,
        "match": {
            "target_normalized": rep.target_normalized, "distance_normalized": rep.distance_normalized,
            "distance_relative": rep.distance_relative, "feasible": rep.feasible,
            "closest_normalized": rep.closest, "seh_intersections": rep.seh_intersections,
        },
    }
    return summary, EXIT_OK


def cmd_sweep(run: Run) -> tuple[dict, int]:
    omegas = run.omega_grid()
    pm = power.phase_map(run.system, run.topology, run.pv, omegas, run.phi_grid(), run.s_grid())

    def rows():
        for i, w in enumerate(pm.omega):
            for j, p in enumerate(pm.phi):
                yield [_hz(w), _deg(p), pm.second[i, j], 1e3 * pm.p_h[i, j]]

    write_csv(run.path("sweep.csv"), ["omega_hz", "phi_deg", "second_param", "p_h_mw"], rows())
    i, j = np.unravel_index(int(np.argmax(pm.p_h)), pm.p_h.shape)
    return {
        "topology": run.topology.value, "pv_enabled": run.pv,
        "peak_power_w": pm.p_h[i, j], "peak_freq_hz": _hz(pm.omega[i]), "peak_phi_deg": _deg(pm.phi[j]),
        "power_limit_w": power.power_limit(run.system, pm.omega[i]),
        "shape": [int(pm.omega.size), int(pm.phi.size)],
    }, EXIT_OK


def _envelope_rows(env: power.Envelope):
    for w, p, ph, s in zip(env.omega, env.p_h, env.phi, env.second):
        yield [_hz(w), _deg(ph), s, 1e3 * p]


def cmd_bandwidth(run: Run) -> tuple[dict, int]:
    omegas = run.omega_grid()
    sys_, topo = run.system, run.topology
    env = power.envelope(sys_, topo, run.pv, omegas)
    base = power.envelope(sys_, topo, False, omegas, fix_phi=0.0) if topo.phase_variable else env
    seh = power.envelope(sys_, Topology.SEH, False, omegas)
    header = ["omega_hz", "phi_deg", "second_param", "p_h_mw"]
    write_csv(run.path("bandwidth.csv"), header, _envelope_rows(env))
    write_csv(run.path("bandwidth_phi0.csv"), header, _envelope_rows(base))
    write_csv(run.path("bandwidth_seh.csv"), header, _envelope_rows(seh))
    rep = power.bandwidth_metrics(omegas, env.p_h, seh.p_h, base.p_h)
    summary = rep.as_dict()
    summary.update({
        "topology": topo.value, "pv_enabled": run.pv, "oracle_discrepancy_pct": None,
        "power_limit_at_peak_w": power.power_limit(sys_, rep.peak_omega),
        "seh_peak_power_w": float(seh.p_h.max()),
        "phi0_peak_power_w": float(base.p_h.max()),
    })
    return summary, EXIT_OK


def cmd_oracle(run: Run) -> tuple[dict, int]:
    w = run.omega
    q = run.second_quantity()
    analytic = None
    if q is not None and q["unit"] == "V":
        if run.topology is Topology.SECE:
            raise ConfigError("tuning/second: SECE has no second parameter")
        try:
            ot = oracle.OracleTuning(run.topology, run.phi(), q["value"])
        except ValueError as exc:
            raise ConfigError(f"tuning: {exc}") from None
    else:
        analytic = run.tuning()
        ot = oracle.oracle_tuning(run.system, analytic, w)
    opts = run.sim_options()
    trace = oracle.simulate(run.system, ot, w, opts)
    write_csv(run.path("oracle.csv"), ["t", "x", "xdot", "vp", "vr"],
              zip(trace.t, trace.x, trace.xdot, trace.vp, trace.v_r))
    d = trace.ledger[-1] - trace.ledger[-1 - min(trace.cycles, opts.window)]
    summary: dict[str, Any] = {
        "status": trace.status, "cycles": trace.cycles, "omega_hz": _hz(w),
        "topology": run.topology.value, "phi_deg": _deg(ot.phi), "v_r": ot.v_r, "sync": opts.sync,
        "ledger_window_j": dict(zip(oracle.LEDGER_COLUMNS, d)),
        "oracle_discrepancy_pct": None,
    }
    if not trace.converged:
        return summary, EXIT_NONCONVERGED
    ss = oracle.steady_state_power(trace)
    z_o = oracle.oracle_impedance(trace) * w * run.system.Cp
    summary.update({
        "p_h_w": ss.p_h, "p_d_flip_w": ss.p_d_flip, "p_rp_w": ss.p_rp, "thd_ih": ss.thd_ih,
        "ledger_residual": oracle.ledger_residual(trace), "z_normalized": z_o,
    })
    if analytic is not None:
        p_a = power.power_at(run.system, analytic, w)
        summary["p_h_analytic_w"] = p_a
        summary["oracle_discrepancy_pct"] = 100.0 * (ss.p_h - p_a) / p_a if p_a > 0 else None
    return summary, EXIT_OK


def cmd_compare(run: Run) -> tuple[dict, int]:
    omegas = run.omega_grid()
    topo = run.topology
    axis = run.s_grid()[1:-1] if topo is Topology.SEH else run.phi_grid()
    rows = oracle.compare_grid(run.system, topo, omegas, axis, run.sim_options(), run.workers)
    err = oracle.power_discrepancy(rows)
    write_csv(
        run.path("compare.csv"),
        ["omega_hz", "phi_deg", "second_param", "p_h_analytic_mw", "p_h_oracle_mw", "discrepancy_pct",
         "z_mag_err_pct", "z_phase_err_deg", "thd_ih", "converged"],
        ([_hz(r.omega), _deg(r.tuning.phi), r.tuning.second, 1e3 * r.p_analytic, 1e3 * r.p_oracle, 100 * e,
          100 * r.z_mag_error, r.z_phase_error_deg, r.thd_ih, r.converged] for r, e in zip(rows, err)),
    )
    ok = [r.converged for r in rows]
    finite = err[np.isfinite(err)]
    summary = {
        "topology": topo.value, "points": len(rows), "nonconverged": ok.count(False),
        "oracle_discrepancy_pct": 100 * float(finite.max()) if finite.size else None,
        "mean_discrepancy_pct": 100 * float(finite.mean()) if finite.size else None,
        "max_z_mag_err_pct": 100 * max((abs(r.z_mag_error) for r in rows if r.converged), default=math.nan),
        "max_z_phase_err_deg": max((abs(r.z_phase_error_deg) for r in rows if r.converged), default=math.nan),
        "sync": run.sim_options().sync,
    }
    return summary, EXIT_OK if all(ok) else EXIT_NONCONVERGED


HANDLERS = {
    "ideal": cmd_ideal, "waveform": cmd_waveform, "region": cmd_region, "sweep": cmd_sweep,
    "bandwidth": cmd_bandwidth, "oracle": cmd_oracle, "compare": cmd_compare,
}


def run(command: str, doc: dict) -> int:
    """Execute one subcommand on a resolved config; writes CSV + JSON artifacts."""
    r = Run(doc)
    summary, code = HANDLERS[command](r)
    summary = {"command": command, "schema_version": SCHEMA_VERSION, **summary}
    r.path(f"{command}.json").write_text(dumps(summary))
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="peh-impedance", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="RunConfig JSON file")
        p.add_argument("--preset", help=f"system preset ({', '.join(preset_names())})")
        p.add_argument("--topology", help="SEH | SECE | S-SSHI | P-SSHI")
        pv = p.add_mutually_exclusive_group()
        pv.add_argument("--pv", dest="pv", action="store_true", default=None, help="enable phase-variable switching")
        pv.add_argument("--no-pv", dest="pv", action="store_false")
        p.add_argument("--rp", help="leakage resistance override, e.g. 200kOhm or inf")
        p.add_argument("--omega", help="frequency with unit, e.g. 55.8Hz, 350rad/s, 1.02omega_n")
        p.add_argument("--phi", help="switch phase with unit, e.g. 30deg")
        p.add_argument("--second", help="Vr~ (plain number), 0.5fraction, 120deg (theta) or 3.2V (oracle)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--prefix", help="artifact file-name prefix")
        if name == "ideal":
            p.add_argument("--eta", help="comma-separated eta values")
            p.add_argument("--zeta", help="comma-separated zeta values")
        if name in ("oracle", "compare"):
            p.add_argument("--sync", choices=["velocity", "locked"])
        if name == "compare":
            p.add_argument("--workers", type=int)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = resolve_config(load_config(args.config), overrides_from_args(args), args.command)
        code = run(args.command, doc)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if code == EXIT_NONCONVERGED:
        print("error: oracle did not converge; partial artifacts written", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
