"""Command-line front end.

Subcommands::

    qfo synth     --config problem.json   --out DIR   [--seed N] [--threads N]
    qfo eval      --config eval.json      --out DIR
    qfo propagate --config scene.json     --out DIR
    qfo show      REPORT.json

Exit codes: 0 ok, 1 bad config, 2 optimization failed, 3 physics check failed.
Every float written to JSON or CSV uses 17 significant digits, so equal
inputs give byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Mapping

import jsonschema
import numpy as np

from .evolution import CoincidenceProjector, coincidence_project, evolve, reduced_one_photon_density
from .layers import DiagonalPhases, PupilProfile, circulant_transform, compose_8f
from .modes import ModeWindow, PhotonicState, QubitLayout, make_qubit_state, product_state, single_photon
from .propagation import (
    AliasingError,
    FreeSpace,
    Grid,
    Modulator,
    ParaxialError,
    PropagationScene,
    Pupil,
    ThinLens,
    eight_f,
    four_f,
    output_scene,
    propagate_scene,
    pupil_leakage,
)
from .synthesis import GateReport, SynthesisProblem, evaluate_profiles, synthesize

log = logging.getLogger("qfo")

EXIT_OK, EXIT_CONFIG, EXIT_OPTIMIZATION, EXIT_PHYSICS = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- serialization


def _fmt(v: float) -> str:
    if not math.isfinite(v):
        raise ValueError(f"cannot serialize non-finite value {v}")
    return f"{v:.17g}"


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float written at 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path: Path, obj: Any) -> None:
    path.write_text(dumps(obj) + "\n")


# ---------------------------------------------------------------- schemas

_NUM = {"type": "number"}
_INT = {"type": "integer"}
_MATRIX = {"type": "array", "items": {"type": "array", "items": _NUM}}

PROBLEM_PROPS = {
    "target": {
        "oneOf": [
            {"type": "string"},
            {"type": "object", "required": ["re", "im"], "properties": {"re": _MATRIX, "im": _MATRIX}},
        ]
    },
    "qubits": {"type": "array", "items": _INT, "minItems": 1},
    "M": {"type": "integer", "minimum": 2},
    "R": {"type": "integer", "minimum": 1},
    "offset": {"type": ["integer", "null"]},
    "share_pupils": {"type": "boolean"},
    "mu_schedule": {"type": "array", "items": _NUM, "minItems": 1},
    "restarts": {"type": "integer", "minimum": 1},
    "seed": {"type": "integer", "minimum": 0},
    "fidelity_floor": {"type": ["number", "null"]},
    "stage1_floor": _NUM,
    "penalty": _NUM,
    "tol": _NUM,
    "nm_maxfev": {"type": "integer", "minimum": 1},
    "init_scale": _NUM,
    "leakage_weight": {"type": "number", "minimum": 0},
}

PROBLEM_SCHEMA = {
    "type": "object",
    "required": ["target", "qubits"],
    "properties": PROBLEM_PROPS,
    "additionalProperties": False,
}

_REF = {"type": ["string", "object"]}

PROFILES_SCHEMA = {
    "oneOf": [
        {"type": "string"},
        {
            "type": "object",
            "required": ["pupil1", "diag"],
            "properties": {"pupil1": _REF, "diag": _REF, "pupil2": _REF},
            "additionalProperties": False,
        },
    ]
}

EVAL_SCHEMA = {
    "type": "object",
    "required": ["profiles"],
    "properties": {"problem": PROBLEM_SCHEMA, "profiles": PROFILES_SCHEMA},
    "additionalProperties": False,
}

_ELEMENT = {
    "type": "object",
    "required": ["type"],
    "properties": {
        "type": {"enum": ["free_space", "thin_lens", "pupil", "modulator"]},
        "dz": {"type": "number", "minimum": 0},
        "f": _NUM,
        "profile": _REF,
        "kappa_x": _NUM,
        "diag": _REF,
    },
    "additionalProperties": False,
}

_QUBIT_SPEC = {
    "oneOf": [
        {"enum": ["+", "-", "up", "down"]},
        {
            "type": "object",
            "required": ["down", "up"],
            "properties": {
                "down": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                "up": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
            },
            "additionalProperties": False,
        },
    ]
}

PROPAGATE_SCHEMA = {
    "type": "object",
    "required": ["scene", "state"],
    "properties": {
        "scene": {
            "type": "object",
            "properties": {
                "preset": {"enum": ["free", "4f", "8f"]},
                "focal_length": {"type": "number", "exclusiveMinimum": 0},
                "distance": {"type": "number", "minimum": 0},
                "tail": {"type": "number", "minimum": 0},
                "elements": {"type": "array", "items": _ELEMENT},
                "grid": {
                    "type": "object",
                    "properties": {"n": {"type": "integer", "minimum": 8}, "extent": {"type": "number", "exclusiveMinimum": 0}},
                    "additionalProperties": False,
                },
                "wavelength": {"type": "number", "exclusiveMinimum": 0},
                "lattice": {"type": "number", "exclusiveMinimum": 0},
                "waist": {"type": "number", "exclusiveMinimum": 0},
                "planes_per_segment": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "M": {"type": "integer", "minimum": 2},
        "offset": {"type": ["integer", "null"]},
        "profiles": PROFILES_SCHEMA,
        "state": {
            "type": "object",
            "oneOf": [{"required": ["qubits"]}, {"required": ["modes"]}],
            "properties": {
                "qubits": {"type": "object", "patternProperties": {"^-?[0-9]+$": _QUBIT_SPEC}, "additionalProperties": False},
                "modes": {
                    "type": "object",
                    "patternProperties": {"^-?[0-9]+$": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}},
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "post_selection": {
            "type": "object",
            "required": ["control", "target", "distance"],
            "properties": {"control": _INT, "target": _INT, "distance": {"type": "number", "exclusiveMinimum": 0}},
            "additionalProperties": False,
        },
        "stride": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}


def _validate(data: Any, schema: Mapping, what: str) -> None:
    try:
        jsonschema.validate(data, schema)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{what}: {where}: {e.message}") from None


def _load(path: Path) -> Any:
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"no such file: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None


# ---------------------------------------------------------------- helpers


def _resolve(ref, base: Path) -> Any:
    return _load(base / ref) if isinstance(ref, str) else ref


def _profiles(ref, base: Path) -> tuple[PupilProfile, DiagonalPhases, PupilProfile, SynthesisProblem | None]:
    """Profiles from a gate report path or from per-layer references."""
    if isinstance(ref, str):
        data = _load(base / ref)
        if "profiles" not in data:
            raise ConfigError(f"{ref} is not a gate report")
        prof, problem = data["profiles"], SynthesisProblem.from_dict(data["problem"])
    else:
        prof, problem = {k: _resolve(v, base) for k, v in ref.items()}, None
    p1 = PupilProfile.from_dict(prof["pupil1"])
    p2 = PupilProfile.from_dict(prof["pupil2"]) if prof.get("pupil2") is not None else p1
    return p1, DiagonalPhases.from_dict(prof["diag"]), p2, problem


def _complex(pair) -> complex:
    return complex(pair[0], pair[1])


_NAMED = {
    "+": (1 / math.sqrt(2), 1 / math.sqrt(2)),
    "-": (-1 / math.sqrt(2), 1 / math.sqrt(2)),
    "up": (0.0, 1.0),
    "down": (1.0, 0.0),
}


def _state(spec: Mapping, window: ModeWindow) -> PhotonicState:
    if "modes" in spec:
        return single_photon(window, {int(k): _complex(v) for k, v in spec["modes"].items()})
    qubits = sorted(int(b) for b in spec["qubits"])
    layout = QubitLayout(window, tuple(qubits))
    factors = []
    for b in qubits:
        q = spec["qubits"][str(b)]
        down, up = _NAMED[q] if isinstance(q, str) else (_complex(q["down"]), _complex(q["up"]))
        factors.append(make_qubit_state(layout, b, down, up))
    return factors[0] if len(factors) == 1 else product_state(factors)


def _scene(cfg: Mapping, window: ModeWindow, base: Path, profiles):
    sc = cfg["scene"]
    preset = sc.get("preset")
    if preset and "elements" in sc:
        raise ConfigError("scene: give either a preset or an element list, not both")
    f = sc.get("focal_length")
    T = None
    if preset == "free" or (preset is None and "elements" not in sc):
        elements = [FreeSpace(sc.get("distance", f or 0.0))]
    elif preset in ("4f", "8f"):
        if f is None:
            raise ConfigError(f"scene: preset {preset} needs focal_length")
        if profiles is None:
            raise ConfigError(f"preset {preset} needs profiles")
        p1, d, p2 = profiles
        if preset == "4f":
            elements, T = four_f(f, p1), circulant_transform(p1, window.M).matrix
        else:
            if d.M != window.M:
                raise ConfigError(f"modulator has {d.M} phases for an {window.M}-mode window")
            elements, T = eight_f(f, p1, d, p2, window), compose_8f(p1, d, p2, window.M).matrix
    else:
        elements = []
        for el in sc["elements"]:
            kind = el["type"]
            if kind == "free_space":
                elements.append(FreeSpace(el["dz"]))
            elif kind == "thin_lens":
                elements.append(ThinLens(el["f"]))
            elif kind == "pupil":
                prof = PupilProfile.from_dict(_resolve(el["profile"], base))
                elements.append(Pupil(prof, f=el.get("f"), kappa_x=el.get("kappa_x")))
            else:
                elements.append(Modulator(DiagonalPhases.from_dict(_resolve(el["diag"], base)), window))
    if sc.get("tail"):
        elements.append(FreeSpace(sc["tail"]))
    kw = {}
    for key in ("wavelength", "lattice", "waist", "planes_per_segment"):
        if key in sc:
            kw[key] = sc[key]
    grid = Grid(**sc.get("grid", {}))
    return PropagationScene(tuple(elements), grid=grid, window=window, **kw), T


# ---------------------------------------------------------------- commands


def cmd_synth(config: Mapping, out: Path, seed: int | None = None, threads: int | None = None) -> int:
    _validate(config, PROBLEM_SCHEMA, "synth config")
    data = dict(config)
    if seed is not None:
        data["seed"] = seed
    problem = SynthesisProblem.from_dict(data)
    report = synthesize(problem, threads=threads)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "gate_report.json", report.to_dict())
    write_json(out / "pupil.json", report.pupil1.to_dict())
    if not problem.share_pupils:
        write_json(out / "pupil2.json", report.pupil2.to_dict())
    write_json(out / "diag.json", report.diag.to_dict())
    if not report.converged:
        log.error("no restart reached the fidelity floor %.12g (best %.12g)", problem.fidelity_floor, report.min_fidelity)
        return EXIT_OPTIMIZATION
    return EXIT_OK


def cmd_eval(config: Mapping, out: Path, base: Path = Path(".")) -> int:
    _validate(config, EVAL_SCHEMA, "eval config")
    p1, d, p2, problem = _profiles(config["profiles"], base)
    if "problem" in config:
        problem = SynthesisProblem.from_dict(config["problem"])
    if problem is None:
        raise ConfigError("eval needs a problem unless the profiles come from a gate report")
    if d.M != problem.M:
        raise ConfigError(f"modulator has {d.M} phases but the problem uses M={problem.M}")
    if p1.R > (problem.M - 1) // 2 or p2.R > (problem.M - 1) // 2:
        raise ConfigError(f"pupil harmonics exceed what M={problem.M} can sample")
    report = evaluate_profiles(p1, d, p2, problem)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "gate_report.json", report.to_dict())
    return EXIT_OK


def cmd_propagate(config: Mapping, out: Path, base: Path = Path(".")) -> int:
    _validate(config, PROPAGATE_SCHEMA, "propagate config")
    window = ModeWindow(config.get("M", 16), config.get("offset"))
    profiles = None
    if "profiles" in config:
        p1, d, p2, _ = _profiles(config["profiles"], base)
        profiles = (p1, d, p2)
    scene, T = _scene(config, window, base, profiles)
    state = _state(config["state"], window)
    imap = propagate_scene(scene, state)
    summary = {"input_photons": state.photon_number}
    if profiles is not None:
        summary["pupil_leakage"] = max(pupil_leakage(p, window.M) for p in (profiles[0], profiles[2]))

    post = config.get("post_selection")
    if post is not None:
        if T is None:
            raise ConfigError("post_selection needs a 4f or 8f preset")
        layout = QubitLayout(window, (post["control"], post["target"]))
        proj = CoincidenceProjector.for_qubits(layout, post["control"], post["target"])
        kept = coincidence_project(evolve(state, T), proj)
        if kept.norm2 == 0:
            raise ConfigError("no amplitude survives the coincidence projection")
        rho = reduced_one_photon_density(kept)
        after = propagate_scene(output_scene(scene, post["distance"]), rho)
        summary["post_selected_norm2"] = kept.norm2
        summary["photons_before_projection"] = float(imap.power[-1])
        summary["photons_after_projection"] = float(after.power[0])
        imap = imap.then(after)

    summary["planes"] = len(imap.z)
    stride = config.get("stride", 1)
    out.mkdir(parents=True, exist_ok=True)
    imap.to_csv(out / "intensity.csv", stride)
    imap.to_pgm(out / "intensity.pgm", stride)
    write_json(out / "summary.json", summary)
    return EXIT_OK


def cmd_show(report_path: Path, digits: int = 3) -> str:
    data = _load(report_path)
    if "operators" not in data:
        raise ConfigError(f"{report_path} is not a gate report")
    report = GateReport.from_dict(data)
    lines = [
        f"target {report.problem.to_dict()['target']}  qubits {list(report.problem.qubits)}  "
        f"converged {report.converged}",
        f"mean F = {report.fidelity:.10f}   min F = {report.min_fidelity:.10f}   mean S = {report.success:.6f}",
    ]
    for op, sc in zip(report.operators, report.scores):
        lines.append("")
        lines.append(f"qubits {list(op.qubits)}  basis {', '.join(op.basis)}  F = {sc.fidelity:.10f}  S = {sc.success:.6f}")
        lines.append(op.format(digits))
    return "\n".join(lines)


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qfo", description="Quantum Fourier-optical gate synthesis and propagation.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("synth", "optimize pupil and modulator profiles for a gate"),
        ("eval", "score stored profiles against a target"),
        ("propagate", "render intensity maps of a scene"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", type=Path, required=True)
        p.add_argument("--out", type=Path, default=Path("."))
        if name == "synth":
            p.add_argument("--seed", type=int)
            p.add_argument("--threads", type=int, help="worker processes (default: $QFO_THREADS or 1)")
    p = sub.add_parser("show", help="print a gate report")
    p.add_argument("report", type=Path, nargs="?")
    p.add_argument("--config", type=Path, help="same as the positional report path")
    p.add_argument("--digits", type=int, default=3)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.command == "show":
            path = args.report or args.config
            if path is None:
                raise ConfigError("show needs a report path")
            print(cmd_show(path, args.digits))
            return EXIT_OK
        config = _load(args.config)
        base = args.config.parent
        if args.command == "synth":
            return cmd_synth(config, args.out, args.seed, args.threads)
        if args.command == "eval":
            return cmd_eval(config, args.out, base)
        return cmd_propagate(config, args.out, base)
    except (ParaxialError, AliasingError) as e:
        log.error("%s", e)
        return EXIT_PHYSICS
    except (ConfigError, ValueError, KeyError, TypeError) as e:
        log.error("%s", e)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
