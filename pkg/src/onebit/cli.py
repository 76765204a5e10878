"""Command-line front end: ``onebit {simulate,solve,sweep,singularity,spread}``.

Every run reads one JSON config (validated against
``schema/config.schema.json``), writes CSV/JSON into ``--out`` and stamps
each file with the master seed and the SHA-256 of the config file.
Exit status: 0 on success, 1 for a config problem, 2 for a runtime failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from importlib import resources

import jsonschema

from . import experiments as E
from . import models as M
from .polyhedron import build
from .quantizer import generate_thresholds, quantize, write_sign_csv
from .solvers import SolverConfig, solve

log = logging.getLogger("onebit")

SUBCOMMANDS = ("simulate", "solve", "sweep", "singularity", "spread")
REQUIRED = {
    "simulate": ["L"],
    "solve": ["L"],
    "sweep": ["L_values"],
    "singularity": ["L_values", "structure"],
    "spread": ["L_values"],
}


class ConfigError(Exception):
    pass


def load_schema():
    text = resources.files("onebit").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def load_config(path, subcommand):
    """Read and validate a config file; returns ``(config, sha256_hex)``."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    schema = load_schema()
    schema["required"] = schema["required"] + REQUIRED[subcommand]
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config field {where}: {exc.message}") from exc
    return cfg, hashlib.sha256(raw).hexdigest()


def plan_from_config(cfg, master_seed, L_values=None):
    solver = SolverConfig(**cfg.get("solver", {}))
    structure = M.structure_from_dict(cfg.get("structure"))
    plan = E.SweepPlan(
        model=dict(cfg["model"]),
        L_values=list(L_values if L_values is not None else cfg["L_values"]),
        trials=int(cfg.get("trials", 20)),
        structure=structure,
        thresholds=dict(cfg.get("thresholds", {"kind": "covering", "width": 3.0})),
        solver=solver,
        error_metric=cfg.get("error_metric", "frobenius" if cfg["model"]["kind"] in ("quadratic", "trace") else "l2"),
        project=bool(cfg.get("project_structure", False)),
        fixed_truth=bool(cfg.get("fixed_truth", False)),
        master_seed=int(master_seed),
    )
    return plan


def _write_json(path, obj, provenance):
    with open(path, "w") as fh:
        json.dump({"provenance": provenance, **obj}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _stamp(provenance):
    return f"onebit master_seed={provenance['master_seed']} config_sha256={provenance['config_sha256']}"


def cmd_simulate(cfg, plan, out, prov, threads):
    inst = E.make_instance(plan, 0, int(cfg["L"]))
    signdata = quantize(inst.y, generate_thresholds(inst.scheme, inst.model.m))
    write_sign_csv(signdata, out, comment=_stamp(prov))
    _write_json(os.path.join(out, "model.json"), {"model": M.model_to_dict(inst.model)}, prov)
    _write_json(os.path.join(out, "truth.json"), {
        "value": inst.truth.value.tolist(),
        "structure": M.structure_to_dict(inst.truth.structure),
        "thresholds": inst.scheme.to_dict(),
    }, prov)


def cmd_solve(cfg, plan, out, prov, threads):
    inst = E.make_instance(plan, 0, int(cfg["L"]))
    p = build(inst.model, quantize(inst.y, generate_thresholds(inst.scheme, inst.model.m)))
    solver = plan.solver
    solver.seed = E.derive_seed(plan.master_seed, "solver", 0)
    if plan.project:
        solver.structure = plan.structure
    rep = solve(p, solver, truth=inst.truth.flat())
    err = E.recovery_error(plan.error_metric, rep.final_iterate, inst.truth)
    _write_json(os.path.join(out, "report.json"),
                {"report": rep.to_dict(include_timing=False), "error": err, "N": p.N, "D": p.D}, prov)
    rep.write_history_csv(os.path.join(out, "history.csv"), comment=_stamp(prov))
    log.info("solve: N=%d converged=%s iterations=%d error=%.4g", p.N, rep.converged, rep.iterations_run, err)


def cmd_sweep(cfg, plan, out, prov, threads):
    res = E.run_sweep(plan, threads=threads)
    res.write_csv(os.path.join(out, "sweep.csv"), comment=_stamp(prov),
                  timings_path=os.path.join(out, "timings.csv"))
    _write_json(os.path.join(out, "summary.json"), res.summary(), prov)
    log.info("sweep: slope %.3f (CI %.3f..%.3f)", res.fit.slope, *res.fit.ci)


def cmd_singularity(cfg, plan, out, prov, threads):
    rows = E.singularity_gap(plan, threads=threads)
    with open(os.path.join(out, "singularity.csv"), "w") as fh:
        fh.write(f"# {_stamp(prov)}\n")
        fh.write("L,N,trial,error_plain,error_projected,gap,truth_norm\n")
        for r in rows:
            fh.write(f"{r.L},{r.N},{r.trial},{r.error_plain!r},{r.error_projected!r},{r.gap!r},{r.truth_norm!r}\n")
    _write_json(os.path.join(out, "summary.json"), E.gap_summary(plan, rows), prov)


def cmd_spread(cfg, plan, out, prov, threads):
    rows = E.spread_table(plan, K=int(cfg.get("K", 8)), radius=float(cfg.get("radius", 1.0)), threads=threads)
    with open(os.path.join(out, "spread.csv"), "w") as fh:
        fh.write(f"# {_stamp(prov)}\n")
        fh.write("L,N,trial,spread,excluded\n")
        for r in rows:
            fh.write(f"{r['L']},{r['N']},{r['trial']},{r['spread']!r},{r['excluded']}\n")
    Ls = list(plan.L_values)
    tests = []
    for a, b in zip(Ls, Ls[1:]):
        before = [r["spread"] for r in rows if r["L"] == a]
        after = [r["spread"] for r in rows if r["L"] == b]
        ok, pval, inc, dec = E.sign_test_nonincreasing(before, after)
        tests.append({"from_L": a, "to_L": b, "passed": ok, "p_value": pval, "increases": inc, "decreases": dec})
    _write_json(os.path.join(out, "summary.json"), {"sign_tests": tests}, prov)


COMMANDS = {
    "simulate": cmd_simulate,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "singularity": cmd_singularity,
    "spread": cmd_spread,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="onebit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", required=True, help="output directory (created if missing)")
        sp.add_argument("--seed", type=int, default=None, help="master seed; overrides master_seed in the config")
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads for sweep cells")
        sp.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        cfg, digest = load_config(args.config, args.subcommand)
        seed = args.seed if args.seed is not None else int(cfg.get("master_seed", 0))
        if not 0 <= seed < 2**64:
            raise ConfigError(f"config field master_seed: {seed} is not a 64-bit unsigned integer")
        L_values = [cfg["L"]] if "L_values" not in cfg else None
        try:
            plan = plan_from_config(cfg, seed, L_values)
            if args.subcommand in ("sweep", "singularity", "spread"):
                plan.validate()
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"config: {exc}") from exc
    except ConfigError as exc:
        print(f"onebit: {exc}", file=sys.stderr)
        return 1
    try:
        os.makedirs(args.out, exist_ok=True)
        prov = {"master_seed": seed, "config_sha256": digest}
        COMMANDS[args.subcommand](cfg, plan, args.out, prov, args.threads)
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"onebit: {args.subcommand} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
