"""``trap`` command line: describe, fields, solve, waveform, probe, export, check.

Exit status: 0 ok, 2 configuration/argument error, 3 numerical error,
4 infeasible voltages, 5 I/O error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, formats
from .errors import ArgumentError, ConfigError, TrapError, TrapIOError
from .geometry import TrapConfig, axial_grid, build_trap, load_config, parse_length, parse_quantity, trap_grid

_FREQ_UNITS = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}
_TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9}


def _length(text):
    return parse_length(text, "length argument")


def _frequency(text):
    return parse_quantity(text, _FREQ_UNITS, "frequency argument")


def _time(text):
    return parse_quantity(text, _TIME_UNITS, "time argument")


def _grid_for(args, trap):
    step = _length(args.step)
    if args.z_start is None and args.z_end is None:
        return trap_grid(trap, step)
    lo, hi = trap.z_extent
    start = _length(args.z_start) if args.z_start is not None else lo
    end = _length(args.z_end) if args.z_end is not None else hi
    return axial_grid(start, end, step)


def _matrix(args):
    """PotentialMatrix from --matrix, else from --config through the cache."""
    if getattr(args, "matrix", None):
        return formats.read_matrix(args.matrix), {"matrix": args.matrix}
    config = load_config(args.config) if getattr(args, "config", None) else TrapConfig()
    trap = build_trap(config)
    A, path = formats.cached_matrix(config, _grid_for(args, trap))
    return A, {"matrix": path}


def _finish(args, command, params, inputs, outputs, started, config_hash=None, grid=None):
    main_out = next(iter(outputs.values()))
    manifest = formats.write_manifest(
        Path(str(main_out) + ".manifest.json"),
        args._run_id,
        command,
        params,
        inputs,
        outputs,
        config_hash=config_hash,
        grid=grid,
        started=started,
    )
    return manifest


def cmd_describe(args):
    config = load_config(args.config) if args.config else TrapConfig()
    trap = build_trap(config)
    lo, hi = trap.z_extent
    print(f"# config_hash={config.digest()}")
    print(f"# electrodes={trap.n_electrodes} panels={len(trap.panels)} extent_m={lo:.6g}..{hi:.6g}")
    print("index,wing,center_z_m,width_m,panels")
    for e in trap.electrodes:
        print(f"{e.index},{e.wing},{formats.fmt(e.center_z)},{formats.fmt(config.segment_width)},{len(e.panels)}")
    return 0


def cmd_fields(args, started):
    from .fields import assemble_matrix

    config = load_config(args.config) if args.config else TrapConfig()
    trap = build_trap(config)
    grid = _grid_for(args, trap)
    inputs = {"config": args.config} if args.config else {}
    params = {"grid": grid.spec()}
    args._run_id = formats.run_id("fields", params, inputs)
    A = assemble_matrix(trap, grid)
    formats.write_matrix(A, args.out, extra={"run_id": args._run_id})
    _finish(args, "fields", params, inputs, {"matrix": args.out}, started, config.digest(), grid.spec())
    print(f"wrote {A.shape[0]}x{A.shape[1]} matrix to {args.out}")
    return 0


def cmd_solve(args, started):
    from .solver import continuity_apply, decompose, select_alpha, tikhonov_apply

    A = formats.read_matrix(args.matrix)
    target = formats.read_target(args.target, A.grid)
    v_prev = formats.read_voltages(args.prev).volts if args.prev else np.zeros(A.n_electrodes)
    if v_prev.size != A.n_electrodes:
        raise ArgumentError(f"--prev has {v_prev.size} voltages, matrix has {A.n_electrodes} electrodes")
    inputs = {"matrix": args.matrix, "target": args.target, **({"prev": args.prev} if args.prev else {})}
    params = {"alpha": args.alpha}
    args._run_id = formats.run_id("solve", params, inputs)
    f = decompose(A, rows=target.window)
    if args.alpha == "auto":
        alpha, v = select_alpha(f, target, v_prev, A.config.v_max)
    else:
        try:
            alpha = float(args.alpha)
        except ValueError:
            raise ArgumentError(f"--alpha must be 'auto' or a number, got {args.alpha!r}") from None
        v = continuity_apply(f, target, alpha, v_prev) if alpha > 0 else tikhonov_apply(f, target, alpha)
    header = {"run_id": args._run_id, "alpha": formats.fmt(alpha)}
    if v.dropped:
        header["dropped_directions"] = " ".join(map(str, v.dropped))
    formats.write_voltages(v, args.out, header)
    _finish(args, "solve", params, inputs, {"voltages": args.out}, started, A.config.digest(), A.grid.spec())
    print(f"alpha={alpha:.6g} max|V|={v.max_abs:.6g} V -> {args.out}")
    return 0


def cmd_waveform(args, started):
    from .waveform import FAST_FRAME_PERIOD, CA40, FrequencyProfile, WaveformConstraints, compile_waveform

    A, inputs = _matrix(args)
    if args.config:
        inputs["config"] = args.config
    profile = FrequencyProfile(
        2 * math.pi * _frequency(args.freq), args.mod_amplitude, _length(args.mod_period), _length(args.mod_origin)
    )
    period = FAST_FRAME_PERIOD if args.fast else _time(args.frame_period)
    alpha = None if args.alpha == "auto" else float(args.alpha)
    constraints = WaveformConstraints(
        v_max=A.config.v_max,
        window=_length(args.window),
        frame_spacing=_length(args.spacing),
        frame_period=period,
        alpha=alpha,
        continuity=not args.no_continuity,
        history_radius=None if args.history_radius == "none" else _length(args.history_radius),
        history_decay=args.history_decay,
        dac_bits=A.config.dac_bits,
    )
    z0, z1 = _length(args.z_from), _length(args.z_to)
    params = {
        "from": z0,
        "to": z1,
        "profile": profile.to_dict(),
        "constraints": {k: getattr(constraints, k) for k in constraints.__dataclass_fields__},
    }
    args._run_id = formats.run_id("waveform", params, inputs)
    w = compile_waveform(A, z0, z1, profile, CA40, constraints)
    outputs = {"waveform": args.out}
    formats.write_waveform(w, args.out, {"run_id": args._run_id})
    if args.dac:
        formats.write_dac(w, args.dac, A.config.dac_bits, {"run_id": args._run_id})
        outputs["dac"] = args.dac
    _finish(args, "waveform", params, inputs, outputs, started, A.config.digest(), A.grid.spec())
    print(f"compiled {len(w)} frames, max alpha {max(f.alpha for f in w.frames):.3g} -> {args.out}")
    return 0


def cmd_probe(args, started):
    from .plotting import plot_report
    from .probe import probe_scan

    A, inputs = _matrix(args)
    w = formats.read_waveform(args.waveform)
    inputs["waveform"] = args.waveform
    params = {"method": args.method, "fit_window": args.fit_window}
    args._run_id = formats.run_id("probe", params, inputs)
    report = probe_scan(w, A, method=args.method, fit_window=args.fit_window)
    formats.write_report(report, args.out, {"run_id": args._run_id})
    outputs = {"report": args.out}
    if args.plot:
        plot_report(report, args.plot)
        outputs["plot"] = args.plot
    _finish(args, "probe", params, inputs, outputs, started, A.config.digest(), A.grid.spec())
    s = report.summary()
    print(
        f"probed {s['rows']} frames ({s['failed']} failed): mean deviation {s['mean_deviation']:.3g}, "
        f"max {s['max_deviation']:.3g} -> {args.out}"
    )
    return 0


def cmd_export(args, started):
    w = formats.read_waveform(args.waveform)
    inputs = {"waveform": args.waveform}
    params = {"bits": args.bits}
    args._run_id = formats.run_id("export", params, inputs)
    formats.write_dac(w, args.out, args.bits, {"run_id": args._run_id})
    _finish(args, "export", params, inputs, {"dac": args.out}, started)
    print(f"wrote {len(w)} DAC frames -> {args.out}")
    return 0


def cmd_check(args):
    """Randomized check of the continuity solver against a dense normal-equations solve."""
    from .solver import continuity_apply, decompose

    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.count):
        M, N = int(rng.integers(20, 201)), int(rng.integers(4, 65))
        A = rng.standard_normal((M, N))
        phi, v_prev = rng.standard_normal(M), rng.standard_normal(N)
        f = decompose(A)
        alpha = float(f.s_max * 10 ** rng.uniform(-2, 1))
        v = continuity_apply(f, phi, alpha, v_prev).volts
        ref = np.linalg.solve(A.T @ A + alpha**2 * np.eye(N), A.T @ phi + alpha**2 * v_prev)
        worst = max(worst, float(np.linalg.norm(v - ref) / np.linalg.norm(ref)))
    ok = worst <= 1e-10
    print(f"{'PASS' if ok else 'FAIL'} max relative error {worst:.3g} over {args.count} systems (seed {args.seed})")
    return 0 if ok else 3


def build_parser():
    p = argparse.ArgumentParser(prog="trap", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"trapwave {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def grid_args(sp):
        sp.add_argument("--z-start", help="grid start, e.g. '0 mm' (default: trap extent)")
        sp.add_argument("--z-end", help="grid end (default: trap extent)")
        sp.add_argument("--step", default="5 um", help="grid step (default 5 um)")

    sp = sub.add_parser("describe", help="print the electrode table")
    sp.add_argument("--config")

    sp = sub.add_parser("fields", help="assemble and cache the potential matrix")
    sp.add_argument("--config")
    grid_args(sp)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("solve", help="invert one target potential")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--alpha", default="auto")
    sp.add_argument("--prev")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("waveform", help="compile a shuttling waveform")
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--config")
    src.add_argument("--matrix")
    grid_args(sp)
    sp.add_argument("--from", dest="z_from", required=True)
    sp.add_argument("--to", dest="z_to", required=True)
    sp.add_argument("--freq", default="1.4 MHz", help="mean axial frequency (ordinary, not angular)")
    sp.add_argument("--mod-amplitude", type=float, default=0.0)
    sp.add_argument("--mod-period", default="280 um")
    sp.add_argument("--mod-origin", default="0 m")
    sp.add_argument("--window", default="80 um")
    sp.add_argument("--spacing", default="5 um")
    sp.add_argument("--frame-period", default="3.3 ms")
    sp.add_argument("--fast", action="store_true", help="4 us frame period metadata")
    sp.add_argument("--alpha", default="auto")
    sp.add_argument("--no-continuity", action="store_true")
    sp.add_argument("--history-radius", default="0.5 mm", help="'none' keeps every previous voltage as reference")
    sp.add_argument("--history-decay", type=float, default=0.9)
    sp.add_argument("--out", required=True)
    sp.add_argument("--dac", help="also write DAC codes here")

    sp = sub.add_parser("probe", help="probe every frame of a waveform")
    sp.add_argument("--waveform", required=True)
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--config")
    src.add_argument("--matrix")
    grid_args(sp)
    sp.add_argument("--method", choices=["curvature", "dynamics", "both"], default="both")
    sp.add_argument("--fit-window", type=int, default=7)
    sp.add_argument("--out", required=True)
    sp.add_argument("--plot")

    sp = sub.add_parser("export", help="write DAC codes for a waveform")
    sp.add_argument("--waveform", required=True)
    sp.add_argument("--bits", type=int, default=16)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("check", help="randomized solver self-check")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, default=100)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    try:
        if args.command == "describe":
            return cmd_describe(args)
        if args.command == "check":
            return cmd_check(args)
        handler = {
            "fields": cmd_fields,
            "solve": cmd_solve,
            "waveform": cmd_waveform,
            "probe": cmd_probe,
            "export": cmd_export,
        }[args.command]
        return handler(args, started)
    except TrapError as exc:
        print(f"trap {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"trap {args.command}: {exc}", file=sys.stderr)
        return TrapIOError.exit_code
    except (ValueError, ConfigError) as exc:
        print(f"trap {args.command}: {exc}", file=sys.stderr)
        return ConfigError.exit_code


run_pipeline = main

if __name__ == "__main__":
    sys.exit(main())
