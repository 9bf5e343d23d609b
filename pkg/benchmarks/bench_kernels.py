"""Compiled core against the numpy fallback on the three hot kernels.

    python3 benchmarks/bench_kernels.py [--sizes 2 7 16] [--repeat 5]

Times are the best of ``--repeat`` runs; the last column is the speed-up of the
compiled backend. Results of both backends are compared before timing.
"""
import argparse
import sys
import timeit
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
from builders import random_density, random_generators  # noqa: E402

from qcurrents.currents import channel_aux_rows  # noqa: E402
from qcurrents.kernels import backends  # noqa: E402
from qcurrents.propagator import _substeps  # noqa: E402


def cases(gen, rho, aux):
    args = gen.kernel_args()
    n, nm = gen.n_sites, gen.n_modes
    times = np.linspace(0.0, 1.0, 21)
    h, nsub = _substeps(times, 1e-3)
    rhos = np.repeat(rho[None], 200, axis=0)
    rows = channel_aux_rows(gen, np.repeat(aux[None], 200, axis=0))

    def rhs(impl):
        return impl.rhs(*args, rho, aux)

    def rk4(impl):
        out_rho = np.zeros((len(times), n, n), complex)
        out_aux = np.zeros((len(times), nm, n, n), complex)
        impl.rk4_run(*args, rho, np.zeros_like(aux), h, nsub, out_rho, out_aux, True, 1e-6)
        return out_rho

    def currents(impl):
        return impl.current_components(gen.H, gen.ch_src, gen.ch_tgt, rhos, rows)

    return {"rhs": rhs, "rk4_run (1000 steps)": rk4, "current_components (T=200)": currents}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[2, 4, 7, 12])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = backends()
    if "compiled" not in impls:
        print("compiled core not built; run `pip install -e . --no-build-isolation` first")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'N':>4}{'modes':>7}{'python [ms]':>14}{'compiled [ms]':>16}{'x':>8}")
    for n in args.sizes:
        gen = random_generators(rng, n, "mixed", "mixed")
        rho = random_density(rng, n)
        aux = 0.1 * (rng.normal(size=(gen.n_modes, n, n)) + 1j * rng.normal(size=(gen.n_modes, n, n)))
        for name, fn in cases(gen, rho, aux).items():
            a, b = fn(impls["python"]), fn(impls["compiled"])
            for x, y in zip(np.atleast_1d(a) if not isinstance(a, tuple) else a,
                            np.atleast_1d(b) if not isinstance(b, tuple) else b):
                np.testing.assert_allclose(x, y, rtol=1e-10, atol=1e-12)
            t = {}
            for key, impl in impls.items():
                number = 1 if name.startswith("rk4") else 20
                best = min(timeit.repeat(lambda: fn(impl), number=number, repeat=args.repeat))
                t[key] = 1e3 * best / number
            print(f"{name:<28}{n:>4}{gen.n_modes:>7}{t['python']:>14.3f}"
                  f"{t['compiled']:>16.3f}{t['python'] / t['compiled']:>8.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
