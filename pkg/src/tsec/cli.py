"""Command-line front end.

Usage::

    tsec <command> --config <path> [--out <dir>] [--resolution N]
         [--truncation K] [--denominator D] [--tolerance t]

Commands: check-invariance, check-harmonic, find-section, build-metric,
return-map, suspend, round-trip.

Verdicts and residuals go to ``report.json`` (floats printed with 17
significant digits, keys sorted, so identical configurations produce
byte-identical reports); bulk numeric data goes to CSV files next to it.
Exit status: 0 on verdict success, 2 on verdict failure (non-harmonic,
infeasible, rejected precondition), 1 on errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import search
from .calculus import (
    harmonic_residuals,
    interior_product,
    lie_derivative_volume,
    star_identity_check,
)
from .config import ConfigError, load_config
from .dynamics import (
    orbit_equivalence_check,
    poincare_map,
    suspension_from_return_data,
)
from .expressions import ExpressionError, PeriodicityError
from .fields import residual_report
from .harmonic import certify_harmonicity

__all__ = ["entry", "main"]

COMMANDS = (
    "check-invariance",
    "check-harmonic",
    "find-section",
    "build-metric",
    "return-map",
    "suspend",
    "round-trip",
)


# ---------------------------------------------------------------------------
# deterministic JSON
# ---------------------------------------------------------------------------


def _json_value(value):
    if value is None:
        return "null"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json_value(v) for v in value) + "]"
    if isinstance(value, dict):
        inner = ", ".join(
            f"{_json_value(str(k))}: {_json_value(v)}" for k, v in sorted(value.items())
        )
        return "{" + inner + "}"
    raise TypeError(f"cannot serialize {type(value)}")


def write_report(out_dir, document):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "report.json"
    path.write_text(_json_value(document) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# command implementations (each returns (verdict_ok, document, artifacts))
# ---------------------------------------------------------------------------


def _cmd_check_invariance(config, out_dir):
    X = config.vector_field()
    volume = config.volume_form()
    residual = residual_report(lie_derivative_volume(X, volume))
    tol = config.option("tolerance")
    ok = residual.sup < tol
    doc = {
        "residual": residual.to_dict(),
        "tolerance": tol,
        "verdict": "invariant" if ok else "not-invariant",
    }
    return ok, doc


def _cmd_check_harmonic(config, out_dir):
    X = config.vector_field()
    volume = config.volume_form()
    metric = config.metric_field()
    theta = interior_product(X, volume)
    d_res, dstar_res = harmonic_residuals(metric, theta)
    tol = config.option("tolerance")
    ok = d_res.sup < tol and dstar_res.sup < tol
    star_doc = None
    mismatch = float(
        np.abs(
            volume.coefficient(range(config.dimension)).values - np.sqrt(metric.det())
        ).max()
    )
    if mismatch <= tol:
        star = star_identity_check(metric, X, volume, volume_tol=tol)
        star_doc = star.to_dict()
    doc = {
        "residuals": {"d_theta": d_res.to_dict(), "d_star_theta": dstar_res.to_dict()},
        "star_identity": star_doc,
        "volume_metric_mismatch": mismatch,
        "tolerance": tol,
        "verdict": "harmonic" if ok else "not-harmonic",
    }
    fields_dir = Path(out_dir) / "fields"
    fields_dir.mkdir(parents=True, exist_ok=True)
    for key, coeff in theta.coefficients.items():
        name = "theta_" + "".join("xyz"[i] for i in key)
        coeff.to_csv(fields_dir / f"{name}.csv")
    return ok, doc


def _cmd_find_section(config, out_dir):
    X = config.vector_field()
    outcome = search.find_transverse_closed_form(
        X, truncation=config.option("truncation")
    )
    doc = {"feasibility": outcome.to_dict()}
    if outcome.verdict != "feasible":
        if outcome.certificate is not None:
            verified, details = search.verify_certificate(X, outcome.certificate)
            doc["certificate_check"] = details
            doc["certificate_verified"] = verified
        doc["verdict"] = outcome.verdict
        return False, doc
    rational = search.rationalize_periods(outcome, config.option("denominator"))
    section = search.build_cross_section(
        rational, level=config.level, resolution=config.option("section_resolution")
    )
    crossings = search.orbit_crossing_check(
        X, section,
        n_orbits=config.option("orbit_count"), seed=config.option("seed"),
    )
    section.to_csv(Path(out_dir) / "section_mesh.csv")
    doc["feasibility"] = rational.to_dict()
    doc["section"] = {
        "margin": section.margin,
        "class": [int(v) for v in section.class_vector],
        "denominator": section.denominator,
        "components": section.components,
        "level": config.level,
    }
    doc["crossings"] = crossings
    ok = crossings["misses"] == 0
    doc["verdict"] = "section-found" if ok else "crossing-check-failed"
    return ok, doc


def _cmd_build_metric(config, out_dir):
    X = config.vector_field()
    volume = config.volume_form()
    angle = config.angle_function()
    report = certify_harmonicity(X, angle, volume, tol=config.option("tolerance"))
    doc = report.to_dict()
    fields_dir = Path(out_dir) / "fields"
    fields_dir.mkdir(parents=True, exist_ok=True)
    metric = report.adapted.metric
    for i in range(config.dimension):
        for j in range(i, config.dimension):
            metric.entry(i, j).to_csv(fields_dir / f"metric_{'xyz'[i]}{'xyz'[j]}.csv")
    report.adapted.scale.to_csv(fields_dir / "conformal_scale.csv")
    return report.success, doc


def _cmd_return_map(config, out_dir):
    X = config.vector_field()
    angle = config.angle_function()
    data = poincare_map(
        X, angle,
        level=config.level,
        section_resolution=config.option("section_resolution"),
        dt=config.option("dt"),
    )
    data.to_csv(Path(out_dir) / "return_map.csv")
    ok = not bool(data.failed.any())
    doc = {
        "section": {
            "class": [int(v) for v in data.section.class_vector],
            "denominator": data.section.denominator,
            "margin": data.section.margin,
        },
        "samples": int(np.asarray(data.return_times).size),
        "tau": {
            "min": float(np.nanmin(data.return_times)),
            "max": float(np.nanmax(data.return_times)),
        },
        "steps": data.steps,
        "refinements": data.refinements,
        "failures": int(data.failed.sum()),
        "verdict": "sampled" if ok else "integration-failures",
    }
    return ok, doc


def _cmd_suspend(config, out_dir):
    X = config.vector_field()
    angle = config.angle_function()
    data = poincare_map(
        X, angle,
        level=config.level,
        section_resolution=config.option("section_resolution"),
        dt=config.option("dt"),
    )
    data.to_csv(Path(out_dir) / "return_map.csv")
    model = suspension_from_return_data(data)
    deviation = orbit_equivalence_check(
        X, angle, model,
        samples=config.option("equivalence_returns"),
        starts=config.option("equivalence_starts"),
        level=config.level,
        dt=config.option("dt"),
        seed=config.option("seed"),
    )
    tol = max(config.option("tolerance"), 1e-8)
    ok = deviation.sup < tol
    doc = {
        "deviation": deviation.to_dict(),
        "roof": {
            "min": float(np.min(data.return_times)),
            "max": float(np.max(data.return_times)),
        },
        "invertibility_defect": model.invertibility_defect,
        "returns": config.option("equivalence_returns"),
        "tolerance": tol,
        "verdict": "orbit-equivalent" if ok else "deviation-too-large",
    }
    return ok, doc


def _cmd_round_trip(config, out_dir):
    X = config.vector_field()
    volume = config.volume_form()
    tol = config.option("tolerance")
    stages = {}

    invariance = residual_report(lie_derivative_volume(X, volume))
    stages["invariance"] = {
        "residual": invariance.to_dict(),
        "ok": invariance.sup < tol,
    }
    if invariance.sup >= tol:
        return False, {"stages": stages, "verdict": "rejected-not-volume-preserving"}

    outcome = search.find_transverse_closed_form(
        X, truncation=config.option("truncation")
    )
    stages["section_search"] = outcome.to_dict()
    if outcome.verdict != "feasible":
        return False, {"stages": stages, "verdict": f"section-search-{outcome.verdict}"}
    rational = search.rationalize_periods(outcome, config.option("denominator"))
    section = search.build_cross_section(
        rational, level=config.level, resolution=config.option("section_resolution")
    )
    section.to_csv(Path(out_dir) / "section_mesh.csv")
    stages["section_search"] = rational.to_dict()
    stages["section"] = {
        "margin": section.margin,
        "class": [int(v) for v in section.class_vector],
        "denominator": section.denominator,
        "components": section.components,
    }

    forward = certify_harmonicity(X, rational.angle_function(), volume, tol=tol)
    stages["forward"] = forward.to_dict()
    if not forward.success:
        return False, {"stages": stages, "verdict": "adapted-metric-not-harmonic"}

    extraction = search.extract_cross_section(
        X, volume, forward.adapted.metric,
        tol=tol,
        denominator_bound=config.option("denominator"),
        truncation=config.option("truncation"),
        n_orbits=min(config.option("orbit_count"), 200),
        section_resolution=config.option("section_resolution"),
        seed=config.option("seed"),
    )
    stages["backward"] = extraction.to_dict()
    ok = extraction.success
    return ok, {"stages": stages, "verdict": "round-trip-closed" if ok else "backward-failed"}


_HANDLERS = {
    "check-invariance": _cmd_check_invariance,
    "check-harmonic": _cmd_check_harmonic,
    "find-section": _cmd_find_section,
    "build-metric": _cmd_build_metric,
    "return-map": _cmd_return_map,
    "suspend": _cmd_suspend,
    "round-trip": _cmd_round_trip,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="tsec",
        description="cross sections of volume-preserving torus flows "
        "via adapted-metric harmonicity of the flux form",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="experiment config file")
    parser.add_argument("--out", default="tsec_out", help="output directory")
    parser.add_argument("--resolution", type=int, default=None)
    parser.add_argument("--truncation", type=int, default=None)
    parser.add_argument("--denominator", type=int, default=None)
    parser.add_argument("--tolerance", type=float, default=None)
    args = parser.parse_args(argv)

    overrides = {
        "resolution": args.resolution,
        "truncation": args.truncation,
        "denominator": args.denominator,
        "tolerance": args.tolerance,
    }
    try:
        config = load_config(args.config, overrides=overrides)
    except (ConfigError, ExpressionError, PeriodicityError, OSError) as exc:
        print(f"tsec: config error: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        ok, doc = _HANDLERS[args.command](config, out_dir)
    except ValueError as exc:
        # a module precondition said "no": a determinate negative verdict
        ok, doc = False, {"verdict": "rejected", "reason": str(exc)}
    except RuntimeError as exc:
        print(f"tsec: {exc}", file=sys.stderr)
        return 1
    document = {
        "command": args.command,
        "config": config.echo(),
        "report": doc,
    }
    path = write_report(out_dir, document)
    print(f"{args.command}: {doc.get('verdict', 'done')} ({path})")
    return 0 if ok else 2


def entry():
    raise SystemExit(main())
