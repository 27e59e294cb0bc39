"""Command-line harness.

Four subcommands drive the library end to end::

    shortpulse simulate  --config run.ini --out runs/a     # evolve + norms
    shortpulse scatter   --config run.ini --traj runs/a    # packet probes
    shortpulse appendix  --config run.ini --out runs/b     # estimate scan
    shortpulse selftest                                     # identity suite

Diagnostics go to standard error; the final machine-readable JSON summary of
every command goes to standard output.  Exit codes: 0 success, 1 usage or
config problems (including missing snapshots and stale trajectory hashes),
2 monitor violations (blow-up, wrap-around, mean drift, step-size collapse,
under-resolved quadrature).  Outputs are deterministic for a fixed config and
code version; the manifest's ``metadata.created_utc`` is the one exception.
"""

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, bands, counterexample, norms, packets, storage
from .config import default_config, load_config
from .errors import (
    BlowUp,
    ConfigError,
    InsufficientData,
    MeanDrift,
    MissingSnapshots,
    QuadratureUnderResolved,
    ShortPulseError,
    StepRejected,
    WrapAround,
)
from .evolve import Trajectory, evolve
from .spectral import (
    Field,
    Grid,
    SpectralField,
    antiderivative,
    derivative,
    forward_transform,
    free_propagate,
    inverse_transform,
    l2_norm,
    linf_norm,
    spectral_l2_norm,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_MONITOR = 2

MONITOR_ERRORS = (BlowUp, WrapAround, MeanDrift, StepRejected, QuadratureUnderResolved)

# canonical rays for the fit summary (criterion-style trio); probes cover
# whatever the config lists, the summary fits these when available
SUMMARY_VELOCITIES = (-1.0, -(2.0 ** -0.5), -(2.0 ** 0.5))


def _log(message):
    print(message, file=sys.stderr)


def _emit(document):
    print(json.dumps(document, sort_keys=True, indent=2))


def _jsonable(value):
    """nan/inf have no strict-JSON encoding; map them to null."""
    if value is None:
        return None
    value = float(value)
    return value if np.isfinite(value) else None


def _map(jobs, fn, items):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _load_experiment(args):
    cfg = load_config(args.config) if args.config else default_config()
    out_dir = Path(args.out) if args.out else Path(cfg.output_dir)
    return cfg, out_dir


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args):
    cfg, out_dir = _load_experiment(args)
    chash = cfg.hash()
    u0 = cfg.initial_field()
    _log(f"simulate: n={cfg.solver.n} L={cfg.solver.length:g} dt={cfg.solver.dt:g} "
         f"T={cfg.solver.t_final:g} [{chash}]")

    status, message, code = "completed", None, EXIT_OK
    try:
        traj = evolve(u0, cfg.solver)
    except MONITOR_ERRORS as exc:
        traj = getattr(exc, "trajectory", None) or Trajectory(config=cfg.solver)
        status, message, code = type(exc).__name__, str(exc), EXIT_MONITOR
        _log(f"simulate: aborted by monitor: {status}: {message}")

    cut = bands.build_cutoff(cfg.delta)

    def monitor_row(snap):
        base = snap.norms.as_row()
        if snap.t >= 1.0:
            mon = norms.decomposition_monitors(snap, cut, s=cfg.sobolev_s)
        else:
            mon = dict.fromkeys(norms.MONITOR_COLUMNS, float("nan"))
        return base + [mon[c] for c in norms.MONITOR_COLUMNS]

    rows = _map(args.jobs, monitor_row, traj.snapshots)

    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if "bin" in cfg.formats:
        storage.save_trajectory(out_dir, traj, experiment=cfg.raw, config_hash=chash)
        written.append(storage.MANIFEST_NAME)
    if "csv" in cfg.formats:
        header = list(norms.NormRecord.COLUMNS) + list(norms.MONITOR_COLUMNS)
        storage.write_csv(out_dir / "norms.csv", header, rows, config_hash=chash)
        written.append("norms.csv")

    last = traj.snapshots[-1].norms if traj.snapshots else None
    summary = {
        "command": "simulate",
        "status": status,
        "error": message,
        "config_hash": chash,
        "code_version": __version__,
        "out_dir": str(out_dir),
        "files": written,
        "snapshots": len(traj.snapshots),
        "final_t": _jsonable(traj.snapshots[-1].t) if traj.snapshots else None,
        "halvings": traj.halvings,
        "final_norms": None
        if last is None
        else {
            "L2": _jsonable(last.L2),
            "Xs": _jsonable(last.Xs),
            "Linf": _jsonable(last.Linf),
            "wrapfrac": _jsonable(last.wrapfrac),
        },
    }
    _emit(summary)
    return code


# ---------------------------------------------------------------------------
# scatter


def _probe_times(cfg, t_max):
    """The cadence the probe stage requires: t0 * r^j up to the stored end."""
    t0 = cfg.solver.snap_t0
    if t0 <= 0.0:
        raise ConfigError("probing needs solver.snap_t0 > 0 (a first probe time)")
    r = cfg.probe.cadence_ratio
    times = []
    t = t0
    while t <= t_max * (1.0 + 1e-9):
        times.append(t)
        t = t0 * r ** len(times)
    return times


def _fit_or_none(fn, degenerate, name):
    try:
        return fn()
    except (InsufficientData, ValueError):
        degenerate.append(name)
        return None


def cmd_scatter(args):
    cfg, out_dir = _load_experiment(args)
    chash = cfg.hash()
    traj_dir = Path(args.traj) if args.traj else out_dir
    traj, manifest = storage.load_trajectory(traj_dir)
    stored_hash = manifest["provenance"]["config_hash"]
    if stored_hash != chash and not args.force:
        raise ConfigError(
            f"trajectory {traj_dir} was produced under config hash {stored_hash}, "
            f"not {chash}; re-simulate or pass --force"
        )
    if not traj.snapshots:
        raise MissingSnapshots(f"trajectory {traj_dir} holds no snapshots")

    times = _probe_times(cfg, traj.times[-1])
    snaps = storage.require_times(traj, times)
    _log(f"scatter: probing {len(snaps)} snapshots x {len(cfg.probe.velocities)} "
         f"velocities from {traj_dir} [{chash}]")

    per_snap = _map(args.jobs, lambda s: packets.probe_snapshot(s, cfg.probe), snaps)
    records = [rec for group in per_snap for rec in group]
    for v in cfg.probe.velocities:
        try:
            packets.attach_residuals(records, v)
        except InsufficientData:
            pass

    t_max = snaps[-1].t
    degenerate = []

    def linf_slope():
        ts = np.array([s.t for s in snaps])
        ys = np.array([linf_norm(s.u) + linf_norm(s.u_x) for s in snaps])
        return norms.decay_fit(ts, ys, window=(10.0, t_max))[0]

    fit_vs = [v for v in SUMMARY_VELOCITIES if v in cfg.probe.velocities]
    if not fit_vs:
        fit_vs = sorted(cfg.probe.velocities)

    def residual_slope():
        slopes = []
        for v in fit_vs:
            series = [
                r for r in records
                if r.v == v and r.ode_residual is not None and 20.0 <= r.t <= t_max
            ]
            if len(series) < 8:
                continue
            ts = np.array([r.t for r in series])
            ys = np.array([abs(r.ode_residual) for r in series])
            slopes.append(norms.decay_fit(ts, ys)[0])
        if not slopes:
            raise InsufficientData("no velocity had enough residual samples")
        return max(slopes)

    def w_slope():
        ts, sups = packets.w_stability_series(records)
        return norms.decay_fit(ts, sups)[0]

    def phase_relerr():
        errs = []
        for v in fit_vs:
            series = sorted(
                (r for r in records if r.v == v and 20.0 <= r.t <= t_max),
                key=lambda r: r.t,
            )
            if len(series) < 8:
                continue
            ts = [r.t for r in series]
            gams = [r.gamma for r in series]
            errs.append(packets.phase_drift_fit(ts, gams, v)[2])
        if not errs:
            raise InsufficientData("no velocity had enough phase samples")
        return max(errs)

    def remainder_slope():
        ts, sups = packets.profile_remainder_series(records)
        return norms.decay_fit(ts, sups, window=(20.0, t_max))[0]

    summary = {
        "command": "scatter",
        "config_hash": chash,
        "code_version": __version__,
        "trajectory": str(traj_dir),
        "records": len(records),
        "velocities": sorted({r.v for r in records}),
        "linf_slope": _jsonable(_fit_or_none(linf_slope, degenerate, "linf_slope")),
        "ode_residual_slope": _jsonable(
            _fit_or_none(residual_slope, degenerate, "ode_residual_slope")
        ),
        "W_stability_slope": _jsonable(_fit_or_none(w_slope, degenerate, "W_stability_slope")),
        "phase_drift_relerr": _jsonable(
            _fit_or_none(phase_relerr, degenerate, "phase_drift_relerr")
        ),
        "profile_remainder_slope": _jsonable(
            _fit_or_none(remainder_slope, degenerate, "profile_remainder_slope")
        ),
        "degenerate": degenerate,
    }

    out_dir.mkdir(parents=True, exist_ok=True)
    probe_rows = [
        (
            rec.t,
            rec.v,
            rec.gamma.real,
            rec.gamma.imag,
            rec.w.real,
            rec.w.imag,
            abs(rec.ode_residual) if rec.ode_residual is not None else float("nan"),
            rec.approx_err_u,
            rec.approx_err_ux,
            rec.in_window,
        )
        for rec in sorted(records, key=lambda r: (r.t, r.v))
    ]
    storage.write_csv(
        out_dir / "probes.csv",
        ("t", "v", "re_gamma", "im_gamma", "re_W", "im_W",
         "abs_res", "err_u", "err_ux", "in_window"),
        probe_rows,
        config_hash=chash,
    )
    w_rows = [
        (rec.v, rec.t, rec.w.real, rec.w.imag, abs(rec.w), float(np.angle(rec.w)))
        for rec in sorted(records, key=lambda r: (r.v, r.t))
        if rec.in_window
    ]
    storage.write_csv(
        out_dir / "wtable.csv",
        ("v", "t", "re_W", "im_W", "abs_W", "arg_W"),
        w_rows,
        config_hash=chash,
    )
    storage.write_json(out_dir / "scatter_summary.json", summary)

    _emit(summary)
    return EXIT_OK


# ---------------------------------------------------------------------------
# appendix


def cmd_appendix(args):
    cfg, out_dir = _load_experiment(args)
    rho = args.rho if args.rho is not None else cfg.rho
    n_min = args.n_min if args.n_min is not None else cfg.n_min
    n_max = args.n_max if args.n_max is not None else cfg.n_max
    if not 0.0 < rho < 0.5:
        raise ConfigError(f"appendix.rho: must lie in (0, 1/2), got {rho}")
    for name, value in (("N_min", n_min), ("N_max", n_max)):
        if value < counterexample.MIN_SCALE or value & (value - 1):
            raise ConfigError(
                f"appendix.{name}: must be a power of two >= "
                f"{counterexample.MIN_SCALE}, got {value}"
            )
    if n_min > n_max:
        raise ConfigError(f"appendix.N_min: {n_min} exceeds N_max = {n_max}")
    scales = []
    n = n_min
    while n <= n_max:
        scales.append(n)
        n *= 2

    chash = cfg.hash()
    _log(f"appendix: rho={rho:g}, N in {scales} [{chash}]")
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows, verdict = counterexample.failure_scan(rho, scales, mapper=pool.map)
    else:
        rows, verdict = counterexample.failure_scan(rho, scales)

    out_dir.mkdir(parents=True, exist_ok=True)
    storage.write_csv(
        out_dir / "scan.csv",
        counterexample.SCAN_COLUMNS,
        [[row[c] for c in counterexample.SCAN_COLUMNS] for row in rows],
        config_hash=chash,
    )
    summary = {
        "command": "appendix",
        "config_hash": chash,
        "code_version": __version__,
        "rho": rho,
        "scales": scales,
        "original_exponent": _jsonable(verdict["original_exponent"]),
        "corrected_exponent": _jsonable(verdict["corrected_exponent"]),
        "original_unbounded": bool(verdict["original_unbounded"]),
        "first_crossing_N": verdict["first_crossing_N"],
        "predicted_exponent": _jsonable(verdict["predicted_exponent"]),
        "near_degenerate": bool(verdict["near_degenerate"]),
    }
    storage.write_json(out_dir / "verdict.json", summary)
    _emit(summary)
    return EXIT_OK


# ---------------------------------------------------------------------------
# selftest


def _selftest_checks(corrupt=""):
    """The identity suite: (name, max_err, tol) triples on small grids."""
    rng = np.random.default_rng(20240811)
    checks = []

    g = Grid(n=1 << 12, length=256.0)
    noise = Field(g, rng.standard_normal(g.n), real=True)
    x = g.x
    u = Field(g, 0.5 * (-2.0 * x / 9.0) * np.exp(-((x / 3.0) ** 2)), real=True)

    back = inverse_transform(forward_transform(noise), real=True)
    checks.append((
        "transform_round_trip",
        float(np.max(np.abs(back.values - noise.values)) / np.max(np.abs(noise.values))),
        1e-12,
    ))

    checks.append((
        "parseval",
        abs(spectral_l2_norm(forward_transform(noise)) - l2_norm(noise)) / l2_norm(noise),
        1e-12,
    ))

    v37 = free_propagate(u, 3.7)
    checks.append((
        "propagator_unitarity",
        abs(l2_norm(v37) - l2_norm(u)) / l2_norm(u),
        1e-12,
    ))

    two_leg = free_propagate(free_propagate(u, 2.4), 1.3)
    checks.append((
        "propagator_group_law",
        float(np.max(np.abs(two_leg.values - v37.values)) / np.max(np.abs(v37.values))),
        1e-11,
    ))

    gc = Grid(n=1 << 13, length=400.0)
    fh = 0.1 * (1j * gc.xi) ** 8 * np.exp(-gc.xi ** 2 / 4.0) / np.sqrt(2.0)
    f = inverse_transform(SpectralField(gc, fh), real=True)
    t_c = 10.0
    gt = free_propagate(f, t_c)
    anti2 = antiderivative(antiderivative(gt))
    lhs_vals = gc.x * gt.values - t_c * anti2.values
    rhs = free_propagate(Field(gc, gc.x * f.values, real=True), t_c)
    checks.append((
        "vector_field_conjugation",
        float(np.max(np.abs(lhs_vals - rhs.values)) / np.max(np.abs(rhs.values))),
        1e-6,
    ))

    checks.append((
        "scaling_selftest",
        max(abs(norms.scaling_selftest(u, 7.0, lam)[0] - 1.0) for lam in (2, 4)),
        1e-10,
    ))

    cut = bands.build_cutoff(1.0)
    r = np.linspace(0.0, 100.0, 4001)
    total = cut.sigma_le(r, 1.0)
    for scale in cut.lattice(2.0, 256.0):
        total = total + cut.sigma_band(r, scale)
    if corrupt == "cutoff":
        total = total + 1e-3  # test hook: simulate sigma(0) != 1
    checks.append((
        "lp_partition_of_unity",
        float(np.max(np.abs(total - 1.0))),
        1e-10,
    ))

    dec = bands.hyp_ell_decompose(u, 30.0, cut)
    recon_real = dec.hyp_real().values + dec.ell_real(u).values
    recon_plus = 2.0 * np.real(dec.hyp_plus.values + dec.ell_plus.values)
    scale_u = float(np.max(np.abs(u.values)))
    checks.append((
        "hyp_ell_recomposition",
        float(max(np.max(np.abs(recon_real - u.values)),
                  np.max(np.abs(recon_plus - u.values))) / scale_u),
        1e-12,
    ))

    round_anti = derivative(antiderivative(u))
    checks.append((
        "antiderivative_inverse",
        float(np.max(np.abs(round_anti.values - u.values)) / scale_u),
        1e-11,
    ))

    from ._kernels import phi123

    worst = 0.0
    for radius in (0.49, 0.51):  # both sides of the series/closed-form switch
        z = radius * np.exp(1j * np.linspace(0.0, 2.0 * np.pi, 33))
        p1, p2, p3 = phi123(z)
        ez = np.exp(z)
        worst = max(
            worst,
            float(np.max(np.abs(z * p1 + 1.0 - ez) / np.abs(ez))),
            float(np.max(np.abs(z ** 2 * p2 + 1.0 + z - ez) / np.abs(ez))),
            float(np.max(np.abs(z ** 3 * p3 + 1.0 + z + z ** 2 / 2.0 - ez) / np.abs(ez))),
        )
    checks.append(("phi_function_identities", worst, 1e-13))

    return checks


def cmd_selftest(args):
    if args.corrupt not in ("", "cutoff"):
        raise ConfigError(f"unknown corruption token {args.corrupt!r}")
    results = []
    failed = []
    for name, err, tol in _selftest_checks(args.corrupt):
        ok = bool(err <= tol)
        results.append({"name": name, "ok": ok, "max_err": err, "tol": tol})
        if not ok:
            failed.append(name)
    report = {
        "command": "selftest",
        "code_version": __version__,
        "passed": len(results) - len(failed),
        "failed": len(failed),
        "failed_names": failed,
        "checks": results,
    }
    _emit(report)
    return EXIT_OK if not failed else EXIT_CONFIG


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    parser = argparse.ArgumentParser(
        prog="shortpulse",
        description="Pseudospectral simulation and long-time diagnostics "
        "for a nonlocal dispersive wave equation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="experiment config file (INI)")
    common.add_argument("--out", metavar="DIR", help="output directory (default: config output.dir)")
    common.add_argument("--jobs", type=int, default=1, metavar="K",
                        help="worker threads for independent probes/bands/cases")
    common.add_argument("--force", action="store_true",
                        help="ignore config-hash mismatches on stored trajectories")

    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    p = sub.add_parser("simulate", parents=[common],
                       help="evolve the configured initial data, store trajectory + norms")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("scatter", parents=[common],
                       help="run wave-packet probes over a stored trajectory")
    p.add_argument("--traj", metavar="DIR",
                   help="trajectory directory (default: the output directory)")
    p.set_defaults(func=cmd_scatter)
    p = sub.add_parser("appendix", parents=[common],
                       help="scan the endpoint estimate family over dyadic scales")
    p.add_argument("--rho", type=float, help="interpolation parameter in (0, 1/2)")
    p.add_argument("--N-min", type=int, dest="n_min", help="first dyadic scale")
    p.add_argument("--N-max", type=int, dest="n_max", help="last dyadic scale")
    p.set_defaults(func=cmd_appendix)
    p = sub.add_parser("selftest", parents=[common],
                       help="run the identity suite and report pass/fail")
    p.add_argument("--_corrupt", dest="corrupt", default="", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors; the contract says 1
        return EXIT_OK if not exc.code else EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, MissingSnapshots, storage.CorruptSnapshot) as exc:
        _log(f"error: {exc}")
        _emit({"command": args.command, "status": type(exc).__name__, "error": str(exc)})
        return EXIT_CONFIG
    except MONITOR_ERRORS as exc:
        _log(f"monitor violation: {exc}")
        _emit({"command": args.command, "status": type(exc).__name__, "error": str(exc)})
        return EXIT_MONITOR
    except ShortPulseError as exc:
        _log(f"error: {exc}")
        _emit({"command": args.command, "status": type(exc).__name__, "error": str(exc)})
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
