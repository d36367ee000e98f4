"""Shift of the measured frequency modulation versus wing misalignment."""

import argparse
import math

from trapwave.fields import assemble_matrix
from trapwave.geometry import TrapConfig, build_trap, trap_grid
from trapwave.probe import probe_scan, shift_by_correlation
from trapwave.waveform import FrequencyProfile, compile_waveform


def matrix(offset):
    trap = build_trap(TrapConfig(wing_offset=offset))
    return assemble_matrix(trap, trap_grid(trap))


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--offsets", type=float, nargs="+", default=[5e-6, 10e-6, 15e-6, 20e-6, 30e-6], help="m")
    args = p.parse_args()

    A0 = matrix(0.0)
    w = compile_waveform(A0, 3.9e-3, 4.9e-3, FrequencyProfile(2 * math.pi * 1.4e6, 0.05))
    ref = probe_scan(w, A0)
    print("offset_um  shift_um  shift/offset")
    for dx in args.offsets:
        r = probe_scan(w, matrix(dx))
        s = shift_by_correlation(
            ref.column("z_measured"), ref.column("omega_measured"), r.column("z_measured"), r.column("omega_measured")
        )
        print(f"{dx * 1e6:9.1f}  {s * 1e6:8.2f}  {s / dx:12.3f}")


if __name__ == "__main__":
    main()
