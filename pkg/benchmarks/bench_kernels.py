"""Time the hot kernels with numba enabled and with the numpy fallback.

Each path runs in its own interpreter because ``SVSDE_DISABLE_JIT`` is read at
import time::

    python benchmarks/bench_kernels.py            # both paths, summary table
    python benchmarks/bench_kernels.py --worker   # current path only, JSON

Compile time is excluded by a warm-up call. Outputs of both paths are hashed
after rounding so the table also reports whether they agree.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def _digest(arr):
    return hashlib.sha1(np.round(np.asarray(arr, dtype=float), 8).tobytes()).hexdigest()[:12]


def worker(n_obs: int, n_steps: int, repeat: int) -> dict:
    from svsde._jit import JIT_DISABLED
    from svsde.data_io import from_simulation
    from svsde.inference import ChainConfig, make_initial_state
    from svsde.inference import _kernels as K
    from svsde.inference import conditionals as C
    from svsde.presets import recovery_preset
    from svsde.sde import simulate, simulate_individuals

    pre = recovery_preset(n_obs=n_obs, n_individuals=1)
    data = from_simulation(simulate_individuals(pre.config, pre.params, 1), 0.1)
    model = ChainConfig(basis=(8, 8)).build_model(data)
    state = make_initial_state(model, ChainConfig())
    rng = np.random.default_rng(0)
    w = rng.uniform(size=model.n_obs)
    coef = rng.normal(size=model.n_coef)
    gram = np.empty((model.n_coef, model.n_coef))
    mv = np.empty(model.n_obs)
    rmv = np.empty(model.n_coef)
    diag, _, off, lin, _ = C.velocity_system(model, state)
    z = rng.standard_normal(model.n_obs)
    vel = np.empty(model.n_obs)
    sim_cfg = pre.config.replace(n_steps=n_steps)

    results = {}

    def record(name, fn, output):
        results[name] = {"seconds": _best(fn, repeat), "digest": _digest(output())}

    record("sparse_matvec", lambda: K.sparse_matvec(model.idx, model.B, coef, mv), lambda: mv)
    record("sparse_rmatvec", lambda: K.sparse_rmatvec(model.idx, model.B, w, rmv), lambda: rmv)
    record("sparse_gram", lambda: K.sparse_gram(model.idx, model.B, w, gram), lambda: gram)
    record("tridiag_sample",
           lambda: K.tridiag_sample(model.seg_start, model.seg_len, diag, off, lin, z, vel),
           lambda: vel)
    sim_out = {}

    def run_sim():
        sim_out["r"] = simulate(sim_cfg, pre.params)

    record("em_simulate", run_sim, lambda: sim_out["r"].x)
    return {"jit_disabled": JIT_DISABLED, "n_obs": model.n_obs, "n_steps": n_steps,
            "kernels": results}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--worker", action="store_true")
    ap.add_argument("--n-obs", type=int, default=30000)
    ap.add_argument("--n-steps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write the combined results here")
    args = ap.parse_args(argv)
    if args.worker:
        print(json.dumps(worker(args.n_obs, args.n_steps, args.repeat)))
        return 0
    runs = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, SVSDE_DISABLE_JIT=flag)
        cmd = [sys.executable, __file__, "--worker", "--n-obs", str(args.n_obs),
               "--n-steps", str(args.n_steps), "--repeat", str(args.repeat)]
        out = subprocess.run(cmd, env=env, check=True, capture_output=True, text=True)
        runs[label] = json.loads(out.stdout.strip().splitlines()[-1])
    print(f"n_obs={args.n_obs} n_steps={args.n_steps} (best of {args.repeat})")
    print(f"{'kernel':<16}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}  outputs")
    for name, a in runs["numba"]["kernels"].items():
        b = runs["numpy"]["kernels"][name]
        same = "match" if a["digest"] == b["digest"] else "differ"
        print(f"{name:<16}{a['seconds'] * 1e3:>12.2f}{b['seconds'] * 1e3:>12.2f}"
              f"{b['seconds'] / a['seconds']:>10.1f}  {same}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(runs, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
