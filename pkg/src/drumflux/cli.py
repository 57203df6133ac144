"""Command-line interface: eval, profile, optimize, gradient-check, semidisk-verify.

Domain specs are JSON objects (inline text or a file path) or one of the
shorthands ``circle``, ``semidisk``, ``square``, ``rectangle``. Schemas:

  {"type": "circle", "radius": 1.0, "panels": 32}
  {"type": "ellipse", "a": 1.5, "b": 1.0, "panels": 48}
  {"type": "star", "radius": 1.0, "amplitudes": {"3": 0.1}, "panels": 48}
  {"type": "polar", "radii": [...], "alpha": 0.1}
  {"type": "semidisk", "N": 101, "alpha": 0.02}
  {"type": "polygon", "vertices": [[x, y], ...], "alpha": 0.1}
  {"type": "rectangle", "width": 1.732, "height": 1.0, "alpha": 0.05}

Polygons are counterclockwise with the anchor (0, 0) on the closing edge
[v_N, v_1]. Exit codes: 0 success, 2 configuration error, 3 solver error,
4 audit failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_AUDIT = 0, 2, 3, 4

SHORTHANDS = {
    "circle": {"type": "circle", "radius": 1.0, "panels": 32},
    "semidisk": {"type": "semidisk", "N": 101, "alpha": 0.02},
    "square": {"type": "polygon", "vertices": [[1, 0], [1, 2], [-1, 2], [-1, 0]], "alpha": 0.1},
    "rectangle": {"type": "rectangle", "width": math.sqrt(3.0), "height": 1.0, "alpha": 0.05},
}

_SCHEMA = {
    "circle": {"radius": (float, False), "panels": (int, False), "nodes_per_panel": (int, False)},
    "ellipse": {"a": (float, True), "b": (float, True), "panels": (int, False), "nodes_per_panel": (int, False)},
    "star": {"radius": (float, False), "amplitudes": (dict, True), "panels": (int, False),
             "nodes_per_panel": (int, False)},
    "polar": {"radii": (list, True), "alpha": (float, False), "nodes_per_panel": (int, False)},
    "semidisk": {"N": (int, False), "alpha": (float, False), "nodes_per_panel": (int, False)},
    "polygon": {"vertices": (list, True), "alpha": (float, False), "nodes_per_panel": (int, False)},
    "rectangle": {"width": (float, True), "height": (float, True), "alpha": (float, False),
                  "nodes_per_panel": (int, False)},
}


class ConfigError(ValueError):
    pass


class AuditFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def load_json_arg(text: str):
    """Parse inline JSON, a path to a JSON file, or a shorthand name."""
    if text in SHORTHANDS:
        return dict(SHORTHANDS[text])
    p = Path(text)
    try:
        if p.suffix == ".json" or (p.exists() and p.is_file()):
            return json.loads(p.read_text())
        return json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read JSON from {text!r}: {exc}") from None


def validate_domain(spec) -> dict:
    if not isinstance(spec, dict):
        raise ConfigError("domain spec must be a JSON object")
    kind = spec.get("type")
    if kind not in _SCHEMA:
        raise ConfigError(f"unknown domain type {kind!r}; expected one of {sorted(_SCHEMA)}")
    schema = _SCHEMA[kind]
    for key, val in spec.items():
        if key == "type":
            continue
        if key not in schema:
            raise ConfigError(f"unexpected key {key!r} for domain type {kind!r}")
        typ = schema[key][0]
        ok = isinstance(val, (int, float)) and not isinstance(val, bool) if typ is float else isinstance(val, typ)
        if typ is int:
            ok = isinstance(val, int) and not isinstance(val, bool)
        if not ok:
            raise ConfigError(f"key {key!r} must be of type {typ.__name__}")
    for key, (_, required) in schema.items():
        if required and key not in spec:
            raise ConfigError(f"domain type {kind!r} requires key {key!r}")
    return spec


def build_domain(spec: dict):
    """PanelizedCurve (with registered anchor) from a validated spec."""
    import numpy as np

    from .geometry import curve as gc
    from .geometry import polygon as gp

    spec = validate_domain(spec)
    kind = spec["type"]
    p = spec.get("nodes_per_panel", 16)
    if kind == "circle":
        return gc.build_circle(float(spec.get("radius", 1.0)), spec.get("panels", 32), p)
    if kind == "ellipse":
        return gc.build_ellipse(float(spec["a"]), float(spec["b"]), spec.get("panels", 48), p)
    if kind == "star":
        amps = {int(m): float(a) for m, a in spec["amplitudes"].items()}
        return gc.build_star(float(spec.get("radius", 1.0)), amps, spec.get("panels", 48), p)
    if kind == "polar":
        pp = gp.PolarPolygon(np.asarray(spec["radii"], float), float(spec.get("alpha", 0.1)), p)
        return gp.build_rounded_polygon(pp)
    if kind == "semidisk":
        pp = gp.PolarPolygon(np.ones(spec.get("N", 101)), float(spec.get("alpha", 0.02)), p)
        return gp.build_rounded_polygon(pp)
    if kind == "polygon":
        V = np.asarray(spec["vertices"], float)
        if V.ndim != 2 or V.shape[1] != 2:
            raise ConfigError("vertices must be a list of [x, y] pairs")
        return gp.build_from_polygon(gp.RoundedPolygon(V, float(spec.get("alpha", 0.1)), nodes_per_panel=p))
    if kind == "rectangle":
        w, h = float(spec["width"]), float(spec["height"])
        return gp.build_from_polygon(gp.rectangle_polygon(w, h, float(spec.get("alpha", 0.05)), nodes_per_panel=p))
    raise ConfigError(kind)


def _write_json(path, data):
    text = json.dumps(data, indent=2)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_eval(args) -> int:
    from .eigensolve import objective, write_profile_csv

    curve = build_domain(load_json_arg(args.domain))
    res = objective(curve, bracket=tuple(args.bracket) if args.bracket else None)
    out = res.to_dict()
    out["gauss_bonnet_error"] = curve.gauss_bonnet() - 2 * math.pi
    _write_json(args.out, out)
    if args.profile:
        write_profile_csv(res, args.profile)
    if args.curve_csv:
        curve.to_csv(args.curve_csv)
    return EXIT_OK


def cmd_profile(args) -> int:
    from .eigensolve import objective, write_profile_csv

    curve = build_domain(load_json_arg(args.domain))
    res = objective(curve)
    write_profile_csv(res, args.out)
    print(json.dumps({"F": res.F, "G": res.G, "k1": res.k1, "rows": curve.n + 1}))
    return EXIT_OK


def _optimizer_config(args):
    cfg = load_json_arg(args.config) if args.config else {}
    if not isinstance(cfg, dict):
        raise ConfigError("run configuration must be a JSON object")
    allowed = {"init", "N0", "N_target", "eta", "K", "alpha", "h", "K_schedule", "backtracking"}
    extra = set(cfg) - allowed
    if extra:
        raise ConfigError(f"unknown run configuration keys {sorted(extra)}")
    for key in ("init", "N0", "N_target", "eta", "K", "alpha", "h"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    cfg.setdefault("init", "circle")
    cfg.setdefault("N0", 16)
    cfg.setdefault("N_target", cfg["N0"])
    cfg.setdefault("eta", 5e-6)
    cfg.setdefault("K", 500)
    cfg.setdefault("alpha", 0.1)
    cfg.setdefault("h", 1e-2)
    init = cfg["init"]
    if not (isinstance(init, list) or init in ("circle", "square", "triangle", "semidisk")):
        raise ConfigError("init must be circle, square, triangle, semidisk or a list of radii")
    if cfg["N_target"] < cfg["N0"] or cfg["N0"] < 3:
        raise ConfigError("need 3 <= N0 <= N_target")
    return cfg


def cmd_optimize(args) -> int:
    import numpy as np

    from .geometry.polygon import PolarPolygon
    from .optimize import (OptimizerConfig, OptimizerState, gradient_ascent, initial_radii, insert_vertices,
                           write_trajectory_csv)

    cfg = _optimizer_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = out_dir / "checkpoints.jsonl"
    ocfg = OptimizerConfig(h=cfg["h"], eta=cfg["eta"], K=cfg["K"], checkpoint=str(ckpt),
                           backtracking=bool(cfg.get("backtracking", False)))
    sched = {int(k): int(v) for k, v in cfg.get("K_schedule", {}).items()}
    if args.resume:
        lines = Path(args.resume).read_text().strip().splitlines()
        if not lines:
            raise ConfigError("checkpoint file is empty")
        last = json.loads(lines[-1])
        params = PolarPolygon(np.asarray(last["radii"]), cfg["alpha"])
        st = OptimizerState(params, iteration=last["iter"], level=last.get("level", 0))
        st.k1 = last.get("k1")
    else:
        ckpt.write_text("")
        init = cfg["init"]
        r0 = np.asarray(init, float) if isinstance(init, list) else initial_radii(init, cfg["N0"])
        params = PolarPolygon(r0, cfg["alpha"])
        st = OptimizerState(params)

    def log_iter(state, rec):
        if args.verbose:
            print(f"iter {rec['iter']:4d} N={rec['N']:3d} F={rec['F']:.12f} |g|={rec['grad_norm']:.3e} {rec['step']}",
                  flush=True)

    while True:
        K = sched.get(params.N, cfg["K"])
        st = gradient_ascent(params, cfg["eta"], K, ocfg, st, log_iter)
        params = st.params
        if params.N >= cfg["N_target"]:
            break
        params = insert_vertices(params)
        st.level += 1
        st.params = params
    write_trajectory_csv(st, out_dir / "trajectory.csv")
    from .geometry.polygon import build_rounded_polygon
    build_rounded_polygon(st.params).to_csv(out_dir / "final_curve.csv")
    report = st.to_dict()
    report["config"] = cfg
    _write_json(out_dir / "report.json", report)
    print(json.dumps({"F": report["F"], "N": report["N"], "iterations": report["iterations"],
                      "converged": report["converged"]}))
    return EXIT_OK


def cmd_gradient_check(args) -> int:
    import numpy as np

    from .eigensolve import objective
    from .geometry.fields import normal_field
    from .geometry.polygon import radial_fields, rebuild_with_vertices, vertex_velocity_field
    from .shapegrad import ShapeContext, fd_audit, radial_gradient

    if not args.eps:
        raise ConfigError("--eps needs at least one value")
    spec = validate_domain(load_json_arg(args.domain))
    curve = build_domain(spec)
    eig = objective(curve)
    ctx = ShapeContext(eig)
    report = {"F": eig.F, "k1": eig.k1}
    worst = {}
    if spec["type"] in ("circle", "star", "ellipse"):
        # radial trig field r -> r + e cos(m t) about the origin
        from .geometry import curve as gc
        m = args.mode
        t = np.angle(curve.x)
        if spec["type"] != "circle":
            raise ConfigError("trig-field audits are supported on circles")
        R = float(spec.get("radius", 1.0))
        fld = normal_field(curve, np.cos(m * t), -m * np.sin(m * t) / R)
        sd = ctx.derivative(fld)
        rows = fd_audit(eig, sd, lambda e: gc.build_star(R, {m: e}, spec.get("panels", 32)), args.eps)
        report["field"] = f"normal cos({m} theta)"
        report["delta"] = {"dk": sd.dk, "dN": sd.dN, "dF": sd.dF}
        report["fd_audit"] = [vars(r) for r in rows]
        worst = {key: min(getattr(r, key) for r in rows) for key in ("dk", "dsigma", "dN", "dF")}
    else:
        poly = curve._cache["polygon"]
        V0 = poly.vertices
        if "polar" in curve._cache:
            g = radial_gradient(curve, eig)
            report["grad"] = g.grad.tolist()
            fields = list(enumerate(radial_fields(curve)))
            th = curve._cache["polar"].angles
            dirs = {i: np.array([math.cos(th[i]), math.sin(th[i])]) for i in range(len(th))}
        else:
            fields = [(i, vertex_velocity_field(curve, i + 1, "radial")) for i in range(len(V0))]
            dirs = {i: V0[i] / np.linalg.norm(V0[i]) for i in range(len(V0))}
        if args.vertices:
            fields = [(i, f) for i, f in fields if i + 1 in args.vertices]
        audits = []
        for i, fld in fields:
            sd = ctx.derivative(fld)

            def build(e, i=i):
                V = V0.copy()
                V[i] = V[i] + e * dirs[i]
                return rebuild_with_vertices(curve, V)

            rows = fd_audit(eig, sd, build, args.eps)
            audits.append({"vertex": i + 1, "dF": sd.dF, "rows": [vars(r) for r in rows]})
            for key in ("dk", "dsigma", "dN", "dF"):
                worst[key] = max(worst.get(key, 0.0), min(getattr(r, key) for r in rows))
        report["fd_audit"] = audits
    report["max_rel_err"] = worst
    report["eps"] = list(args.eps)
    _write_json(args.out, report)
    if max(worst.values()) > args.tol:
        print(f"audit failed: {worst}", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


def _parse_field(text: str):
    """'sin:a1,a2,...;sincos:b1,b2,...' -> trig field."""
    from .analytic import trig_field

    sin, sincos = [], []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        name, _, vals = part.partition(":")
        try:
            coeffs = [float(v) for v in vals.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"bad coefficient list in {part!r}") from None
        if name == "sin":
            sin = coeffs
        elif name == "sincos":
            sincos = coeffs
        elif name == "const":
            raise ConfigError("constant fields do not vanish at theta = 0, pi")
        else:
            raise ConfigError(f"unknown field term {name!r}")
    return trig_field(sin, sincos)


def cmd_semidisk_verify(args) -> int:
    import numpy as np

    from .analytic import AnalyticError, criticality_residual, random_arc_field, semidisk_solve_perturbation

    if args.field:
        fields = [("custom", _parse_field(args.field))]
    else:
        fields = [(f"random seed {args.seed + i}", random_arc_field(args.seed + i)) for i in range(args.count)]
    out = []
    worst_crit = worst_solv = 0.0
    for name, V in fields:
        try:
            pert = semidisk_solve_perturbation(V, args.L)
        except AnalyticError as exc:
            raise ConfigError(str(exc)) from None
        crit = criticality_residual(pert)
        out.append({"field": name, "lambda_dot": pert.lambda_dot,
                    "c_ell_norms": {"l2": float(np.linalg.norm(pert.c)), "c1": float(pert.c[0]), "tail": pert.tail},
                    "solvability_g1": pert.solvability, "boundary_residual": pert.boundary_residual(),
                    "criticality_residual": crit})
        worst_crit = max(worst_crit, abs(crit))
        worst_solv = max(worst_solv, pert.solvability)
    report = {"fields": out, "max_criticality_residual": worst_crit, "max_solvability_g1": worst_solv}
    _write_json(args.out, report)
    if worst_crit > 1e-10 or worst_solv > 1e-10:
        return EXIT_AUDIT
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="drumflux", description="Peak boundary flux of Dirichlet eigenfunctions")
    ap.add_argument("--threads", type=int, default=None, help="cap on BLAS/numba threads")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eval", help="eigenpair and F for one domain")
    e.add_argument("domain")
    e.add_argument("--out")
    e.add_argument("--profile", help="CSV path for the boundary flux profile")
    e.add_argument("--curve-csv")
    e.add_argument("--bracket", type=float, nargs=2)
    e.set_defaults(func=cmd_eval)

    p = sub.add_parser("profile", help="normalized flux along the boundary (CSV)")
    p.add_argument("domain")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_profile)

    o = sub.add_parser("optimize", help="gradient ascent with vertex refinement")
    o.add_argument("--config")
    o.add_argument("--init")
    o.add_argument("--N0", type=int)
    o.add_argument("--N-target", dest="N_target", type=int)
    o.add_argument("--eta", type=float)
    o.add_argument("--K", type=int)
    o.add_argument("--alpha", type=float)
    o.add_argument("--h", type=float)
    o.add_argument("--out-dir", default="drumflux_run")
    o.add_argument("--resume", help="checkpoint JSON-lines file to continue from")
    o.set_defaults(func=cmd_optimize)

    g = sub.add_parser("gradient-check", help="finite-difference audit of the shape derivatives")
    g.add_argument("domain")
    g.add_argument("--eps", type=float, nargs="*", default=[1e-3, 1e-4, 1e-5])
    g.add_argument("--mode", type=int, default=2, help="trig mode for circle audits")
    g.add_argument("--vertices", type=int, nargs="*", help="1-based vertices to audit (default all)")
    g.add_argument("--tol", type=float, default=1e-4)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gradient_check)

    s = sub.add_parser("semidisk-verify", help="criticality of the semidisk under arc deformations")
    s.add_argument("--field", help="e.g. 'sin:1,0.5;sincos:0.2' (V must vanish at 0 and pi)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=20)
    s.add_argument("--L", type=int, default=64)
    s.add_argument("--out")
    s.set_defaults(func=cmd_semidisk_verify)
    return ap


def _limit_threads(n):
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
        os.environ[var] = str(n)


def main(argv=None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("--threads must be positive", file=sys.stderr)
            return EXIT_CONFIG
        _limit_threads(args.threads)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .eigensolve import EigenError
    from .geometry.curve import GeometryError
    from .layerpot.operators import LayerPotentialError
    from .optimize import OptimizationError, RefinementError

    try:
        return args.func(args)
    except (ConfigError, GeometryError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EigenError, LayerPotentialError, OptimizationError, RefinementError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except AuditFailure as exc:
        print(f"audit failure: {exc}", file=sys.stderr)
        return EXIT_AUDIT


if __name__ == "__main__":
    sys.exit(main())
