"""Constant 1.4 MHz well carried over 1 mm; reports the curvature-probed deviation per frame."""

import argparse
import math
import time

import numpy as np

from trapwave.fields import assemble_matrix
from trapwave.geometry import TrapConfig, build_trap, trap_grid
from trapwave.probe import probe_scan
from trapwave.waveform import FrequencyProfile, WaveformConstraints, compile_waveform


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--start", type=float, default=3.9e-3)
    p.add_argument("--length", type=float, default=1e-3)
    p.add_argument("--windows", type=float, nargs="+", default=[40e-6, 80e-6, 160e-6], help="target windows, m")
    args = p.parse_args()

    t0 = time.perf_counter()
    trap = build_trap(TrapConfig())
    A = assemble_matrix(trap, trap_grid(trap))
    print(f"matrix {A.shape} in {time.perf_counter() - t0:.2f} s")
    profile = FrequencyProfile(2 * math.pi * 1.4e6)
    print("window_um  frames  mean_dev  max_dev  max_alpha/s_max(A)  max_step_V")
    for window in args.windows:
        w = compile_waveform(A, args.start, args.start + args.length, profile, constraints=WaveformConstraints(window=window))
        s = probe_scan(w, A, method="curvature").summary()
        s_max = np.linalg.svd(A.values, compute_uv=False)[0]
        step = np.abs(np.diff(w.voltages, axis=0)).max()
        alpha = max(f.alpha for f in w.frames) / s_max
        print(f"{window * 1e6:9.0f}  {len(w):6d}  {s['mean_dev_curvature']:.2e}  {s['max_dev_curvature']:.2e}  {alpha:.2e}  {step:.3f}")


if __name__ == "__main__":
    main()
