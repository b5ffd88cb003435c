"""Compiled vs pure-Python kernels on the workloads the library generates.

    python3 benchmarks/bench_kernels.py [--repeat N] [--json out.json]

Each row times one call of the kernel on the stated input and checks that
the two backends agree before reporting the speedup.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from betaconv import _kernels_py

try:
    from betaconv import _kernels as _compiled
except ImportError:
    sys.exit("compiled extension not built; run `pip install -e . --no-build-isolation` first")


def _workloads():
    rng = np.random.default_rng(0)
    # the recovery sweeps run over default-sized grids (512 points)
    xs = np.ascontiguousarray(np.geomspace(1e-4, 40.0, 512))
    f = np.ascontiguousarray(np.exp(-xs))
    df = np.ascontiguousarray(-f)
    u = np.ascontiguousarray(rng.random(20_000))
    g = np.ascontiguousarray(rng.gamma(3.0, 2.0, 20_000))
    return [
        ("weyl_integral_hermite", "n=512, beta=0.5", lambda m: m.weyl_integral_hermite(xs, f, df, 0.5)),
        ("weyl_stieltjes_hermite", "n=512, beta=1.5", lambda m: m.weyl_stieltjes_hermite(xs, 1.0 - f, f, 1.5)),
        ("betainc", "20000 points, (2.5, 0.7)", lambda m: m.betainc(2.5, 0.7, u)),
        ("gammainc", "20000 points, a=3", lambda m: m.gammainc(3.0, g)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="timing repeats; the minimum is reported")
    ap.add_argument("--json", help="also write the rows to this file")
    args = ap.parse_args(argv)

    rows = []
    print(f"{'kernel':24} {'input':26} {'python ms':>10} {'compiled ms':>12} {'speedup':>8}")
    for name, desc, call in _workloads():
        a, b = call(_kernels_py), call(_compiled)
        scale = float(np.max(np.abs(a))) + 1e-300
        if float(np.max(np.abs(a - b))) > 1e-12 * scale:
            sys.exit(f"{name}: backends disagree")
        t_py = min(timeit.repeat(lambda: call(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        t_c = min(timeit.repeat(lambda: call(_compiled), number=1, repeat=args.repeat)) * 1e3
        rows.append({"kernel": name, "input": desc, "python_ms": t_py, "compiled_ms": t_c, "speedup": t_py / t_c})
        print(f"{name:24} {desc:26} {t_py:10.2f} {t_c:12.3f} {t_py / t_c:7.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
            fh.write("\n")


if __name__ == "__main__":
    main()
