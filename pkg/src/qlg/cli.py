"""Command line entry point ``qlg``.

Exit codes: 0 success, 1 usage, 2 configuration, 3 I/O, 4 numeric invariant
violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from qlg import catmap, diagnostics, initcond, spectral
from qlg.config import ConfigError, RunConfig, parse_config
from qlg.evolution import run
from qlg.io import SnapshotError, atomic_open, load_snapshot, save_snapshot
from qlg.lattice import SpinorField

log = logging.getLogger("qlg")

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3, 4


class CLIError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


class NumericError(CLIError):
    def __init__(self, message: str):
        super().__init__(EXIT_NUMERIC, message)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_config(args) -> RunConfig:
    text = ""
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise CLIError(EXIT_IO, f"cannot read config {args.config}: {exc.strerror}") from None
    overrides = {"n_steps": getattr(args, "steps", None), "output_dir": getattr(args, "out", None)}
    try:
        return parse_config(text, **overrides)
    except ConfigError as exc:
        raise CLIError(EXIT_CONFIG, f"{args.config or '<defaults>'}: {exc}") from None


def _initial_field(cfg: RunConfig) -> SpinorField:
    grid = cfg.grid_spec
    try:
        layout = initcond.load_layout(cfg.layout, grid, cfg.winding, cfg.amplitude_rescale)
        return initcond.compose(grid, layout, cfg.params)
    except OSError as exc:
        raise CLIError(EXIT_IO, f"cannot read layout {cfg.layout}: {exc.strerror}") from None
    except ValueError as exc:
        raise CLIError(EXIT_CONFIG, f"layout {cfg.layout}: {exc}") from None


def _report(field: SpinorField, cfg: RunConfig) -> dict:
    try:
        return initcond.recurrence_class_check(field, cfg.params).as_dict()
    except initcond.UndefinedRatioError as exc:
        return {"error": str(exc)}


def cmd_init(args) -> int:
    cfg = _load_config(args)
    out = Path(cfg.output_dir)
    field = _initial_field(cfg)
    save_snapshot(field, out / "initial.qlg", 0, cfg.params)
    report = _report(field, cfg)
    with atomic_open(out / "recurrence_class.json", "w") as fh:
        json.dump(report, fh, indent=2)
    for k, v in report.items():
        print(f"{k}: {v}")
    return EXIT_OK


class _Checkpointer:
    """Writes step-tagged snapshots, then the sidecar that points at them."""

    def __init__(self, out: Path, cfg: RunConfig, trace: diagnostics.RecurrenceTrace, end: int):
        self.out, self.cfg, self.trace, self.end = out, cfg, trace, end

    def __call__(self, t: int, field: SpinorField) -> None:
        snap = self.out / f"checkpoint_t{t}.qlg"
        rows = self.out / f"checkpoint_t{t}.csv"
        save_snapshot(field, snap, t, self.cfg.params)
        self.trace.write_csv(rows)
        side = {"config_hash": self.cfg.physics_hash(), "step": t, "end": self.end, "snapshot": snap.name, "trace": rows.name}
        previous = _read_sidecar(self.out)
        with atomic_open(self.out / "checkpoint.json", "w") as fh:
            json.dump(side, fh, indent=2)
        if previous and previous["step"] != t:
            for key in ("snapshot", "trace"):
                (self.out / previous[key]).unlink(missing_ok=True)


def _read_sidecar(out: Path):
    path = out / "checkpoint.json"
    if not path.exists():
        return None
    try:
        return json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        raise CLIError(EXIT_IO, f"unreadable checkpoint sidecar {path}: {exc}") from None


def cmd_run(args) -> int:
    cfg = _load_config(args)
    out = Path(cfg.output_dir)
    params = cfg.params
    trace = diagnostics.RecurrenceTrace()
    start = 0
    if args.resume:
        side = _read_sidecar(out)
        if side is None:
            raise CLIError(EXIT_IO, f"--resume: no checkpoint.json in {out}")
        if side["config_hash"] != cfg.physics_hash():
            raise CLIError(EXIT_CONFIG, "--resume: checkpoint was written with different physics settings")
        initial = load_snapshot(out / "initial.qlg").field
        snap = load_snapshot(out / side["snapshot"])
        field, start = snap.field, snap.timestep
        trace = diagnostics.RecurrenceTrace.read_csv(out / side["trace"])
        end = side["end"]
        log.info("resuming from step %d", start)
    else:
        if args.input:
            snap = load_snapshot(args.input)
            field, start = snap.field, snap.timestep
        else:
            field = _initial_field(cfg)
            start = 0
        end = start + cfg.n_steps
        initial = field
        save_snapshot(initial, out / "initial.qlg", start, params)
        with atomic_open(out / "config.txt", "w") as fh:
            fh.write(cfg.to_text())

    n0 = initial.norm2()
    recorder = diagnostics.TraceRecorder(initial, params, cfg.core_fraction, trace)

    def norm_guard(t, f):
        drift = abs(f.norm2() - n0) / n0
        if not math.isfinite(drift) or drift > cfg.norm_tolerance:
            raise NumericError(f"step {t}: spinor norm drift {drift:.3e} exceeds {cfg.norm_tolerance:g}")
        return drift

    hooks = {"trace": recorder, "norm": norm_guard}
    if cfg.snapshot_every:
        def snapshots(t, f):
            if t % cfg.snapshot_every == 0:
                save_snapshot(f, out / f"snap_t{t}.qlg", t, params)
        hooks["snapshot"] = snapshots

    ckpt = _Checkpointer(out, cfg, trace, end) if cfg.checkpoint_every else None
    try:
        final, _ = run(
            field, params, end - start, cfg.hook_every, hooks,
            start_step=start, checkpoint_every=cfg.checkpoint_every, checkpoint=ckpt,
        )
    finally:
        trace.write_csv(out / "trace.csv")
    save_snapshot(final, out / "final.qlg", end, params)
    print(f"steps {start}..{end}  samples {len(trace.timesteps)}  E_tot drift {trace.energy_drift():.3e}")
    peaks = trace.peaks(cfg.recurrence_threshold) if len(trace.timesteps) >= 3 else []
    for t, f in peaks:
        print(f"recurrence peak t={t} fidelity={f:.6f}")
    return EXIT_OK


def cmd_spectra(args) -> int:
    try:
        windows = spectral.parse_windows(args.windows) if args.windows else list(_load_config(args).fit_windows)
    except ValueError as exc:
        raise CLIError(EXIT_USAGE, f"--windows: {exc}") from None
    out = Path(args.out or ".")
    sets = []
    for path in args.input:
        snap = load_snapshot(path)
        flow = diagnostics.madelung(snap.field)
        spectra = spectral.flow_spectra(flow.w, flow.sqrt_rho_grad, snap.params.a, snap.timestep)
        spectral.write_spectra_csv(spectra, out / f"spectra_t{snap.timestep}.csv")
        sets.append(spectra)
    rows = spectral.time_averaged_exponents(sets, windows)
    spectral.write_fit_csv(rows, out / "fits.csv")
    for r in rows:
        note = f"  ({r.error})" if r.error else ""
        print(f"{r.kind:18s} {r.k_lo:4d}:{r.k_hi:<4d} alpha={r.alpha_mean:.4f} +- {r.alpha_std:.4f} n={r.n_snapshots}{note}")
    return EXIT_OK


def measure_recurrence(cfg: RunConfig, n: int, budget: int, threshold: float, every: int = 1):
    """First fidelity peak above ``threshold`` for the configured layout on an n^3 grid."""
    field = _initial_field(_replace_grid(cfg, n))
    phi0 = field.data[0] + field.data[1]

    def fid(t, f):
        return diagnostics.fidelity(phi0, f.data[0] + f.data[1])

    def stop(t, outputs):
        series = outputs["fidelity"]
        if len(series) < 3:
            return False
        return bool(diagnostics.detect_recurrence(tuple(zip(*series[-3:])), threshold))

    _, outputs = run(field, cfg.params, budget, every, {"fidelity": fid}, stop=stop)
    series = outputs["fidelity"]
    peaks = diagnostics.detect_recurrence(tuple(zip(*series)), threshold) if len(series) >= 3 else []
    return (peaks[0] if peaks else None), series


def _replace_grid(cfg: RunConfig, n: int) -> RunConfig:
    return dataclasses.replace(cfg, grid=(n, n, n))


def cmd_recurrence(args) -> int:
    cfg = _load_config(args)
    try:
        grids = sorted(int(x) for x in args.grids.split(","))
    except ValueError:
        raise CLIError(EXIT_USAGE, f"--grids: expected comma-separated integers, got {args.grids!r}") from None
    if len(grids) < 2:
        raise CLIError(EXIT_USAGE, "--grids needs at least two sizes")
    threshold = args.threshold or cfg.recurrence_threshold
    results = []
    for n in grids:
        budget = max(1, round(args.budget_steps * (n / grids[-1]) ** 2 * 1.5)) if args.scale_budget else args.budget_steps
        peak, _ = measure_recurrence(cfg, n, budget, threshold, args.every)
        results.append((n, peak))
        log.info("L=%d peak=%s", n, peak)
    out = Path(cfg.output_dir)
    lines = ["L,T_peak,fidelity,ratio_vs_L2"]
    print(f"{'L':>5} {'T_peak':>8} {'F':>9} {'T/T_prev':>9} {'(L/L_prev)^2':>13} {'ratio':>7}")
    prev = None
    for n, peak in results:
        t, f = peak if peak else (None, None)
        ratio_s = exp_s = meas_s = ""
        ratio = math.nan
        if prev and prev[1] and peak:
            expected = (n / prev[0]) ** 2
            measured = t / prev[1][0]
            ratio = measured / expected
            meas_s, exp_s, ratio_s = f"{measured:.4f}", f"{expected:.4f}", f"{ratio:.4f}"
        print(f"{n:5d} {t if t else 'none':>8} {f'{f:.6f}' if f else '':>9} {meas_s:>9} {exp_s:>13} {ratio_s:>7}")
        lines.append(f"{n},{t if t else ''},{f if f else ''},{'' if math.isnan(ratio) else ratio}")
        prev = (n, peak)
    with atomic_open(out / "recurrence.csv", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    if any(p is None for _, p in results):
        print("inconclusive: no recurrence peak within the step budget on some grid")
    return EXIT_OK


def cmd_catmap(args) -> int:
    if args.image:
        try:
            img = catmap.read_pgm(args.image)
        except ValueError as exc:
            raise CLIError(EXIT_IO, str(exc)) from None
        n = img.shape[0]
        if args.n and args.n != n:
            raise CLIError(EXIT_USAGE, f"--n {args.n} does not match the {n}x{n} image")
    else:
        if not args.n:
            raise CLIError(EXIT_USAGE, "give --n or --image")
        n = args.n
        img = catmap.sample_image(n)
    period, half = catmap.cat_period(n)
    print(f"period={period}, half_inversion={str(half).lower()}")
    if args.steps is not None:
        result = catmap.iterate(img, args.steps)
        dest = args.output or f"catmap_n{n}_t{args.steps}.pgm"
        catmap.write_pgm(result.astype(np.uint8) if result.dtype != np.uint8 else result, dest)
        print(f"wrote {dest}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qlg", description="Quantum lattice gas simulator for the Gross-Pitaevskii equation.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("init", help="build the initial state and report its energy ratios")
    s.add_argument("--config", help="key = value config file; defaults apply when omitted")
    s.add_argument("--out", help="output directory (overrides output_dir)")
    s.set_defaults(func=cmd_init)

    s = sub.add_parser("run", help="evolve and record the energy/fidelity trace")
    s.add_argument("--config", help="key = value config file; defaults apply when omitted")
    s.add_argument("--steps", type=int, help="number of steps (overrides n_steps)")
    s.add_argument("--out", help="output directory (overrides output_dir)")
    s.add_argument("--in", dest="input", help="start from this snapshot instead of the layout")
    s.add_argument("--resume", action="store_true", help="continue from the last checkpoint in the output dir")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("spectra", help="shell spectra and windowed exponent fits of snapshots")
    s.add_argument("--in", dest="input", nargs="+", required=True, help="one or more snapshot files")
    s.add_argument("--windows", help='e.g. "4:12,14:24"')
    s.add_argument("--config", help="only used for its fit_windows")
    s.add_argument("--out", help="output directory (overrides output_dir)")
    s.set_defaults(func=cmd_spectra)

    s = sub.add_parser("recurrence", help="recurrence time on several grids and its L^2 scaling")
    s.add_argument("--grids", required=True, help="e.g. 24,32")
    s.add_argument("--budget-steps", type=int, default=20000, help="maximum steps per grid (default 20000)")
    s.add_argument("--scale-budget", action="store_true", help="scale the budget with L^2 from the largest grid")
    s.add_argument("--every", type=int, default=1, help="fidelity sampling interval")
    s.add_argument("--threshold", type=float, help="fidelity peak threshold (default from config, 0.9)")
    s.add_argument("--config", help="key = value config file; defaults apply when omitted")
    s.add_argument("--out", help="output directory (overrides output_dir)")
    s.set_defaults(func=cmd_recurrence)

    s = sub.add_parser("catmap", help="Arnold cat map period and iteration")
    s.add_argument("--n", type=int, help="grid size N; prints the period and half-period inversion flag")
    s.add_argument("--image", help="square PGM image to iterate (default: a generated test image)")
    s.add_argument("--steps", type=int, help="iterate the image this many times and write the result")
    s.add_argument("--output", help="output PGM path (default catmap_n{N}_t{steps}.pgm)")
    s.set_defaults(func=cmd_catmap)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"qlg {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except (SnapshotError, OSError) as exc:
        print(f"qlg {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"qlg {args.command}: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
