"""Configuration-driven experiment runner and report emission.

One JSON config file describes one experiment; scalar fields can be
overridden on the command line.  Every run writes report.json, one or more
CSV tables and manifest.json (config hash, tool version, timestamps, node
counts, output list) into the output directory.  With --canonical the
reports are byte-reproducible: keys sorted, timestamps zeroed.

Exit codes: 0 when all verdicts pass or the command is informational,
2 on a verdict failure, 1 on input or numerical errors.
"""

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone

import jsonschema
import numpy as np

from . import __version__
from ._backend import BACKEND
from .bounds import (
    TheoremConfig,
    blocki_check,
    run_sweep,
    run_theorem_pair,
    run_truncation,
)
from .errors import BerglabError, ConfigError
from .ideals import compare_ideals, remark_suite
from .projection import HoloPoly
from .quadrature import build_domain, build_quadrature, integrate
from .weights import enforce_negative, weight_from_config, weight_to_config

COMMANDS = ("quad-check", "theorem", "truncation", "sweep", "blocki", "remark", "ideal")

_WEIGHT_SCHEMA = {"type": "object", "required": ["op"]}  # structure checked by the parser

_POLY_SCHEMA = {
    "type": "object",
    "required": ["coeffs"],
    "additionalProperties": False,
    "properties": {
        "coeffs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["alpha"],
                "additionalProperties": False,
                "properties": {
                    "alpha": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                    "re": {"type": "number"},
                    "im": {"type": "number"},
                },
            },
        }
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["command"],
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "seed": {"type": "integer"},
        "domain": {
            "type": "object",
            "required": ["kind", "radii"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["disc", "polydisc", "ball"]},
                "radii": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
            },
        },
        "quadrature": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "radial_n": {"type": "integer", "minimum": 4},
                "angular_n": {"type": "integer", "minimum": 4},
                "levels": {"type": "integer", "minimum": 0},
                "radial_panels": {"type": "integer", "minimum": 1},
                "node_cap": {"type": "integer", "minimum": 1},
            },
        },
        "weights": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"phi": _WEIGHT_SCHEMA, "psi": _WEIGHT_SCHEMA},
        },
        "f": _POLY_SCHEMA,
        "epsilon": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "epsilon_factor": {"type": "number", "exclusiveMinimum": 0},
        "degree": {"type": "integer", "minimum": 0},
        "smoothing": {"type": "number", "minimum": 0},
        "j_list": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "eta_list": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "epsilon_rule": {"enum": ["proportional", "sqrt"]},
        "sweep_atom": _WEIGHT_SCHEMA,
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "smooth_slack": {"type": "number", "exclusiveMinimum": 0},
                "indicator_slack": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "remark": {
            "type": "object",
            "required": ["epsilon", "j"],
            "additionalProperties": False,
            "properties": {
                "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "j": {"type": "integer", "minimum": 1},
                "k_max": {"type": "integer", "minimum": 4},
            },
        },
        "ideal": {
            "type": "object",
            "required": ["c", "generators_a", "weight_a", "generators_b", "weight_b"],
            "additionalProperties": False,
            "properties": {
                "c": {"type": "number", "exclusiveMinimum": 0},
                "generators_a": {"type": "array", "items": _POLY_SCHEMA},
                "weight_a": _WEIGHT_SCHEMA,
                "generators_b": {"type": "array", "items": _POLY_SCHEMA},
                "weight_b": _WEIGHT_SCHEMA,
                "k_max": {"type": "integer", "minimum": 4},
            },
        },
    },
}

DEFAULT_SEED = 20260810


def validate_config(cfg):
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        path = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config field {path}: {e.message}")
    return cfg


def canonical_config_bytes(cfg):
    return json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()


def config_hash(cfg):
    return hashlib.sha256(canonical_config_bytes(cfg)).hexdigest()


def apply_overrides(cfg, pairs):
    """Apply --set key=value overrides; values parse as JSON scalars."""
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set path {key!r} crosses a non-object field")
        node[parts[-1]] = value
    return cfg


def _domain_from(cfg):
    d = cfg.get("domain", {"kind": "disc", "radii": [1.0]})
    return build_domain(d["kind"], d["radii"])


def _theorem_config(cfg, need_negative=True):
    domain = _domain_from(cfg)
    wc = cfg.get("weights", {})
    if "phi" not in wc or "psi" not in wc:
        raise ConfigError("weights.phi and weights.psi are required for this command")
    phi = weight_from_config(wc["phi"])
    psi = weight_from_config(wc["psi"])
    if need_negative:
        if not phi.certified_negative:
            phi = enforce_negative(phi, domain)
        if not psi.certified_negative:
            psi = enforce_negative(psi, domain)
    if "f" not in cfg:
        raise ConfigError("f is required for this command")
    f = HoloPoly.from_config(cfg["f"], domain.n)
    q = cfg.get("quadrature", {})
    tol = cfg.get("tolerances", {})
    return TheoremConfig(
        domain=domain,
        phi=phi,
        psi=psi,
        f=f,
        degree=int(cfg.get("degree", max(8, f.degree))),
        epsilon=cfg.get("epsilon"),
        epsilon_factor=float(cfg.get("epsilon_factor", 1.1)),
        smoothing=float(cfg.get("smoothing", 0.0)),
        radial_n=int(q.get("radial_n", 16)),
        angular_n=q.get("angular_n"),
        levels=int(q.get("levels", 20)),
        radial_panels=int(q.get("radial_panels", 1)),
        node_cap=int(q.get("node_cap", 2 ** 24)),
        smooth_slack=float(tol.get("smooth_slack", 1e-6)),
        indicator_slack=float(tol.get("indicator_slack", 2e-2)),
    )


# ---------------------------------------------------------------------------
# command implementations: each returns (report dict, [(csv name, header, rows)], ok)

def _cmd_quad_check(cfg):
    domain = _domain_from(cfg)
    q = cfg.get("quadrature", {})
    rule = build_quadrature(
        domain,
        radial_n=int(q.get("radial_n", 64)),
        angular_n=int(q.get("angular_n", 64)),
        levels=int(q.get("levels", 0)),
        radial_panels=int(q.get("radial_panels", 1)),
        node_cap=int(q.get("node_cap", 2 ** 24)),
    )
    vol = float(integrate(rule, np.ones(rule.node_count)))
    vol_err = abs(vol - domain.volume) / domain.volume
    rows = []
    ok = vol_err <= (1e-3 if domain.kind == "ball" else 1e-12)
    if domain.kind == "disc":
        R = domain.radii[0]
        for k in range(11):
            val = float(integrate(rule, np.abs(rule.nodes[:, 0]) ** (2 * k)))
            exact = math.pi * R ** (2 * k + 2) / (k + 1)
            err = abs(val - exact) / exact
            rows.append([k, repr(val), repr(exact), repr(err)])
            ok = ok and err <= 1e-10
    report = {
        "command": "quad-check",
        "domain": {"kind": domain.kind, "radii": list(domain.radii)},
        "nodes": rule.node_count,
        "volume": vol,
        "volume_exact": domain.volume,
        "volume_rel_err": vol_err,
        "ok": bool(ok),
    }
    tables = [("moments.csv", ["k", "value", "exact", "rel_err"], rows)]
    return report, tables, bool(ok)


def _cmd_theorem(cfg):
    tcfg = _theorem_config(cfg)
    rep = run_theorem_pair(tcfg)
    d = rep.to_dict()
    d["command"] = "theorem"
    d["ok"] = rep.all_bounds_ok
    header = [
        "M", "l1", "eps", "norm_g_sq", "bound_eM", "delta", "bound_eps",
        "bound_C", "verdict_eM", "verdict_eps", "verdict_C", "d", "nodes",
    ]
    row = [
        repr(rep.M), repr(rep.l1), repr(rep.epsilon), repr(rep.norm_g_psi_sq),
        repr(rep.bound_eM), repr(rep.delta), repr(rep.bound_eps), repr(rep.bound_C),
        rep.verdict_eM, rep.verdict_eps, rep.verdict_C, rep.degree, rep.nodes,
    ]
    return d, [("theorem.csv", header, [row])], rep.all_bounds_ok


def _cmd_truncation(cfg):
    tcfg = _theorem_config(cfg)
    j_list = cfg.get("j_list", [1, 2, 4, 8])
    rep = run_truncation(tcfg, j_list, seed=int(cfg.get("seed", DEFAULT_SEED)))
    d = rep.to_dict()
    d["command"] = "truncation"
    ok = rep.all_rows_ok and rep.monotone_ok
    d["ok"] = bool(ok)
    rows = [
        [r.j, repr(r.l1_j), repr(r.norm_g_psi_sq), repr(r.bound_eM), r.verdict_eM,
         r.contraction_ok, repr(r.coeff_cauchy)]
        for r in rep.rows
    ]
    header = ["j", "l1_j", "norm_g_sq", "bound_eM", "verdict_eM", "contraction_ok", "coeff_cauchy"]
    return d, [("truncation.csv", header, rows)], ok


def _cmd_sweep(cfg):
    tcfg = _theorem_config(cfg)
    atom_cfg = cfg.get("sweep_atom")
    if atom_cfg is None:
        raise ConfigError("sweep requires sweep_atom (a negative bounded atom)")
    atom = weight_from_config(atom_cfg)
    eta_list = cfg.get("eta_list")
    if not eta_list:
        raise ConfigError("sweep requires a nonempty eta_list")
    rep = run_sweep(tcfg, atom, eta_list, epsilon_rule=cfg.get("epsilon_rule", "proportional"))
    d = rep.to_dict()
    d["command"] = "sweep"
    ok = rep.row_bounds_ok
    d["ok"] = bool(ok)
    rows = [
        [r.eta, repr(r.epsilon), repr(r.l1), repr(r.delta), repr(r.bound_C), r.row_ok]
        for r in rep.rows
    ]
    header = ["eta", "epsilon", "l1", "delta", "bound_C", "row_ok"]
    return d, [("sweep.csv", header, rows)], ok


def _cmd_blocki(cfg):
    tcfg = _theorem_config(cfg)
    if tcfg.smoothing <= 0:
        raise ConfigError("blocki requires smoothing > 0")
    res = blocki_check(tcfg)
    d = res.to_dict()
    d["command"] = "blocki"
    d["ok"] = res.verdict
    header = ["lhs", "rhs", "ratio", "verdict"]
    rows = [[repr(res.lhs), repr(res.rhs), repr(res.ratio), res.verdict]]
    return d, [("blocki.csv", header, rows)], res.verdict


def _cmd_remark(cfg):
    r = cfg.get("remark")
    if r is None:
        raise ConfigError("remark requires the remark block")
    rep = remark_suite(float(r["epsilon"]), int(r["j"]), k_max=int(r.get("k_max", 16)))
    d = rep.to_dict()
    d["command"] = "remark"
    d["ok"] = rep.suite_ok
    rows = [
        [it.label, it.description, it.expected, it.result.verdict,
         repr(it.result.fitted_exponent) if it.result.fitted_exponent is not None else ""]
        for it in rep.items
    ]
    header = ["label", "description", "expected", "verdict", "fitted_exponent"]
    return d, [("remark.csv", header, rows)], rep.suite_ok


def _cmd_ideal(cfg):
    blk = cfg.get("ideal")
    if blk is None:
        raise ConfigError("ideal requires the ideal block")
    domain = _domain_from(cfg)
    gens_a = [HoloPoly.from_config(p, domain.n) for p in blk["generators_a"]]
    gens_b = [HoloPoly.from_config(p, domain.n) for p in blk["generators_b"]]
    comp = compare_ideals(
        gens_a,
        weight_from_config(blk["weight_a"]),
        gens_b,
        weight_from_config(blk["weight_b"]),
        float(blk["c"]),
        domain,
        k_max=int(blk.get("k_max", 16)),
    )
    d = comp.to_dict()
    d["command"] = "ideal"
    d["ok"] = comp.conclusion != "undecided"
    rows = []
    for i, m in enumerate(comp.memberships_a_under_b):
        rows.append(["A", i, "under_B", m.verdict, repr(m.fitted_exponent) if m.fitted_exponent is not None else ""])
    for i, m in enumerate(comp.memberships_b_under_a):
        rows.append(["B", i, "under_A", m.verdict, repr(m.fitted_exponent) if m.fitted_exponent is not None else ""])
    header = ["side", "generator", "direction", "verdict", "fitted_exponent"]
    return d, [("ideal.csv", header, rows)], d["ok"]


_DISPATCH = {
    "quad-check": _cmd_quad_check,
    "theorem": _cmd_theorem,
    "truncation": _cmd_truncation,
    "sweep": _cmd_sweep,
    "blocki": _cmd_blocki,
    "remark": _cmd_remark,
    "ideal": _cmd_ideal,
}


def _now(canonical):
    if canonical:
        return "1970-01-01T00:00:00+00:00"
    return datetime.now(timezone.utc).isoformat()


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def run(config_path, overrides=(), out_dir=".", canonical=False):
    """Execute the command named in the config; returns the process exit code."""
    try:
        with open(config_path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        print(f"error: cannot read config: {e}", file=sys.stderr)
        return 1
    try:
        cfg = apply_overrides(cfg, overrides)
        validate_config(cfg)
        command = cfg["command"]
        os.makedirs(out_dir, exist_ok=True)
        started = _now(canonical)
        report, tables, ok = _DISPATCH[command](cfg)
        report["backend"] = BACKEND
        report["canonical"] = bool(canonical)
        if not canonical:
            report["generated_at"] = started
        outputs = []
        report_path = os.path.join(out_dir, "report.json")
        _write_json(report_path, report)
        outputs.append("report.json")
        for name, header, rows in tables:
            path = os.path.join(out_dir, name)
            with open(path, "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(header)
                wr.writerows(rows)
            outputs.append(name)
        manifest = {
            "config_hash": config_hash(cfg),
            "tool_version": __version__,
            "backend": BACKEND,
            "started": started,
            "finished": _now(canonical),
            "outputs": sorted(outputs),
            "nodes": report.get("nodes"),
        }
        _write_json(os.path.join(out_dir, "manifest.json"), manifest)
        return 0 if ok else 2
    except (BerglabError, KeyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def emit_plotdata(report_path, out_path):
    """Flatten a sweep or truncation report into a two-column CSV series."""
    with open(report_path) as fh:
        report = json.load(fh)
    command = report.get("command")
    if command == "sweep":
        header = ["epsilon", "delta"]
        rows = [[repr(r["eps"]), repr(r["delta"])] for r in report.get("rows", [])]
    elif command == "truncation":
        header = ["j", "coeff_cauchy"]
        rows = [
            [repr(r["j"]), repr(r["coeff_cauchy"])]
            for r in report.get("rows", [])
            if not (isinstance(r["coeff_cauchy"], float) and math.isnan(r["coeff_cauchy"]))
        ]
    else:
        raise ConfigError(f"no plot series defined for report type {command!r}")
    with open(out_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        wr.writerows(rows)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="berglab",
        description="Weighted-projection laboratory: quadrature checks, "
        "construction bound verification, closeness sweeps and "
        "integrability classification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment from a config file")
        p.add_argument("--config", required=True)
        p.add_argument("--set", action="append", default=[], dest="overrides", metavar="KEY=VALUE")
        p.add_argument("--out", default=".")
        p.add_argument("--canonical", action="store_true")
    pp = sub.add_parser("plotdata", help="flatten a report into x,y CSV series")
    pp.add_argument("--report", required=True)
    pp.add_argument("--out", default="plotdata.csv")

    args = parser.parse_args(argv)
    if args.command == "plotdata":
        try:
            emit_plotdata(args.report, args.out)
        except (BerglabError, OSError, json.JSONDecodeError) as e:
            print(f"error: {e}", file=sys.stderr)
            return 1
        return 0
    overrides = list(args.overrides)
    overrides.append(f"command={args.command}")
    return run(args.config, overrides=overrides, out_dir=args.out, canonical=args.canonical)


if __name__ == "__main__":
    sys.exit(main())
