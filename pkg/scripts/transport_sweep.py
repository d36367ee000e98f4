"""Motional energy left after a short transport, over a ladder of frame periods."""

import argparse
import math

from scipy.constants import hbar

from trapwave.fields import assemble_matrix
from trapwave.geometry import TrapConfig, build_trap, trap_grid
from trapwave.probe import transport_energy_gain
from trapwave.waveform import CA40, FrequencyProfile, compile_waveform


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--frames", type=int, default=3, help="frames in the transport (5 um apart)")
    p.add_argument("--periods", type=float, nargs="+", default=[0.02, 0.05, 0.1, 0.2, 0.5, 1, 2, 10, 100],
                   help="frame periods in units of the oscillation period")
    args = p.parse_args()

    omega = 2 * math.pi * 1.4e6
    trap = build_trap(TrapConfig())
    A = assemble_matrix(trap, trap_grid(trap))
    w = compile_waveform(A, 4.0e-3, 4.0e-3 + 5e-6 * (args.frames - 1), FrequencyProfile(omega))
    t_osc = 2 * math.pi / omega
    print("period/T_osc  gain/(hbar omega)  bound 2mu^2/(hbar omega)")
    for x in args.periods:
        gain = transport_energy_gain(w, A, CA40, x * t_osc)
        u = 5e-6 / (x * t_osc)
        print(f"{x:12g}  {gain / (hbar * omega):17.4e}  {2 * CA40.mass * u**2 / (hbar * omega):.4e}")


if __name__ == "__main__":
    main()
