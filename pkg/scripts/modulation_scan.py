"""Probe a modulated-frequency waveform along the trap and plot measured vs target frequency."""

import argparse
import math
from pathlib import Path

from trapwave import formats
from trapwave.fields import assemble_matrix
from trapwave.geometry import TrapConfig, build_trap, trap_grid
from trapwave.plotting import plot_report
from trapwave.probe import probe_scan
from trapwave.waveform import FrequencyProfile, compile_waveform


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--start", type=float, default=1.0e-3, help="m")
    p.add_argument("--end", type=float, default=7.5e-3, help="m")
    p.add_argument("--freq", type=float, default=1.4e6, help="Hz")
    p.add_argument("--amplitude", type=float, default=0.05)
    p.add_argument("--period", type=float, default=280e-6, help="m")
    p.add_argument("--out", default="results/modulation")
    args = p.parse_args()

    trap = build_trap(TrapConfig())
    A = assemble_matrix(trap, trap_grid(trap))
    profile = FrequencyProfile(2 * math.pi * args.freq, args.amplitude, args.period)
    w = compile_waveform(A, args.start, args.end, profile)
    report = probe_scan(w, A)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    formats.write_waveform(w, out.with_suffix(".waveform.csv"))
    formats.write_report(report, out.with_suffix(".report.csv"))
    plot_report(report, out.with_suffix(".svg"))
    for k, v in report.summary().items():
        print(f"{k:>22s}  {v}")


if __name__ == "__main__":
    main()
