"""Time Nystrom assembly with the numba kernels and with the numpy fallback.

Each backend runs in its own interpreter because the switch
(DRUMFLUX_NO_NUMBA) is read at import time. The first call per backend
is a warm-up (JIT compilation or cache load) and is reported separately.

    python3 benchmarks/bench_kernels.py [--panels 48] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json, sys, time
import numpy as np
from drumflux import backend_name
from drumflux.geometry.curve import build_star
from drumflux.geometry.fields import normal_field
from drumflux.geometry.polygon import PolarPolygon, build_rounded_polygon, vertex_velocity_field
from drumflux.layerpot.operators import (apply_delta_sprime, assemble_delta_sprime_general,
                                         assemble_delta_sprime_normal, assemble_dk_sprime, assemble_sprime)

panels, repeat = int(sys.argv[1]), int(sys.argv[2])
star = build_star(1.0, {3: 0.1}, panels)
t = np.angle(star.x)
V = normal_field(star, np.cos(2 * t), -2 * np.sin(2 * t))
poly = build_rounded_polygon(PolarPolygon(np.linspace(1.0, 1.3, 16)))
W = vertex_velocity_field(poly, 5, "radial")
sig = np.ones(poly.n, dtype=complex)
cases = {
    "S'": lambda: assemble_sprime(star, 2.0),
    "dk S'": lambda: assemble_dk_sprime(star, 2.0),
    "delta S' normal": lambda: assemble_delta_sprime_normal(star, 2.0, V),
    "delta S' general": lambda: assemble_delta_sprime_general(star, 2.0, V),
    "delta S' apply (vertex field)": lambda: apply_delta_sprime(poly, 2.0, W, sig),
}


def timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


out = {"backend": backend_name(), "nodes": star.n, "polygon_nodes": poly.n, "cases": {}}
for name, fn in cases.items():
    warm = timed(fn)
    out["cases"][name] = {"first_call_s": warm, "best_s": min(timed(fn) for _ in range(repeat))}
print(json.dumps(out))
"""


def run(disable: bool, panels: int, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("DRUMFLUX_NO_NUMBA", None)
    if disable:
        env["DRUMFLUX_NO_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", _WORKER, str(panels), str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--panels", type=int, default=48)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write raw timings here")
    args = ap.parse_args(argv)
    nb = run(False, args.panels, args.repeat)
    np_ = run(True, args.panels, args.repeat)
    print(f"star curve: {nb['nodes']} nodes, polygon: {nb['polygon_nodes']} nodes")
    print(f"{'kernel':32s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}")
    for name in nb["cases"]:
        a, b = nb["cases"][name]["best_s"], np_["cases"][name]["best_s"]
        print(f"{name:32s} {a:10.4f} {b:10.4f} {b / a:8.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"numba": nb, "numpy": np_}, fh, indent=2)


if __name__ == "__main__":
    main()
