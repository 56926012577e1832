"""Command-line front end.

Subcommands: ingest, velocities, resolution, orbit, stamp encode|decode,
locate, epoch recover, simulate.  Exit codes: 0 success, 1 usage error,
2 data error, 3 numerical failure.  Every output file embeds the tool
version, the sha256 of the effective configuration, and the seed as '#'
comment lines; identical seeded invocations are byte-identical.
"""

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import __version__, catalog, config, dynamics, epoch, stamp
from .catalog import load_reference_snapshot, parse_catalog, serialize_catalog, validate
from .errors import (
    Degenerate,
    GstampError,
    NoConvergence,
    NonFinite,
    WindowTooNarrow,
)
from .frames import PhaseState, Vec3, catalog_phase_space

_NUMERICAL_ERRORS = (NonFinite, NoConvergence, Degenerate, WindowTooNarrow)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _header_lines(cfg, seed=None):
    lines = [f"# gstamp {__version__}",
             f"# config_sha256 = {config.config_hash(cfg)}"]
    lines.append(f"# seed = {seed}" if seed is not None else "# seed = none")
    for line in config.dump(cfg).splitlines():
        lines.append("# " + line)
    return lines


def _write_text(path, lines):
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _unit_value(text, suffix):
    """Parse '0.5' or '0.5Myr' style values (case-insensitive suffix)."""
    t = text.strip()
    if t.lower().endswith(suffix.lower()):
        t = t[: -len(suffix)]
    try:
        return float(t)
    except ValueError:
        raise _UsageError(f"cannot parse {text!r} as a number with optional {suffix!r}") from None


def _load_catalog(args, cfg):
    if getattr(args, "catalog", None):
        with open(args.catalog, encoding="utf-8") as fh:
            return parse_catalog(fh.read())
    return load_reference_snapshot()


def _build_parser():
    top = _Parser(prog="gstamp", description=__doc__)
    top.add_argument("--config", metavar="PATH", help="configuration file")
    top.add_argument("--seed", type=int, default=None, help="seed for any randomness")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="fetch/convert/validate a catalog")
    p.add_argument("--in", dest="infile", metavar="PATH", help="local catalog CSV")
    p.add_argument("--url", help="remote catalog to fetch through the cache")
    p.add_argument("--cache", metavar="DIR", help="cache directory for --url")
    p.add_argument("--offline", action="store_true", help="never touch the network")
    p.add_argument("--epoch", type=float, default=None, help="observation epoch, Julian year")
    p.add_argument("--out", metavar="PATH", help="write canonical CSV here")

    p = sub.add_parser("velocities", help="speed distribution of the catalog")
    p.add_argument("--catalog", metavar="PATH")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--vmax", type=float, default=1000.0)
    p.add_argument("--out", metavar="PATH")

    p = sub.add_parser("resolution", help="time-resolution surface CSV")
    p.add_argument("--out", metavar="PATH")

    p = sub.add_parser("orbit", help="integrate one cluster's orbit")
    p.add_argument("--name", required=True, help="cluster name in the catalog")
    p.add_argument("--catalog", metavar="PATH")
    p.add_argument("--t-end", dest="t_end", type=float, default=1000.0, help="Myr")
    p.add_argument("--every", type=int, default=1, help="output every Nth sample")
    p.add_argument("--out", metavar="PATH")

    p = sub.add_parser("stamp", help="encode or decode stamp files")
    ssub = p.add_subparsers(dest="stamp_command", required=True)
    pe = ssub.add_parser("encode", help="build a stamp from a catalog")
    pe.add_argument("--catalog", metavar="PATH")
    pe.add_argument("--out", metavar="PATH", required=True)
    pd = ssub.add_parser("decode", help="dump a stamp file")
    pd.add_argument("--in", dest="infile", metavar="PATH", required=True)
    pd.add_argument("--out", metavar="PATH")

    p = sub.add_parser("locate", help="fit the sender position from a stamp")
    p.add_argument("--stamp", metavar="PATH", required=True)
    p.add_argument("--catalog", metavar="PATH")
    p.add_argument("--out", metavar="PATH")

    p = sub.add_parser("epoch", help="epoch tools")
    esub = p.add_subparsers(dest="epoch_command", required=True)
    pr = esub.add_parser("recover", help="recover elapsed time from a stamp")
    pr.add_argument("--stamp", metavar="PATH", required=True)
    pr.add_argument("--catalog", metavar="PATH")
    pr.add_argument("--window", type=float, default=None, help="half-width, Myr")
    pr.add_argument("--mode", choices=("linear", "orbit"), default=None)
    pr.add_argument("--out", metavar="PATH")

    p = sub.add_parser("simulate", help="end-to-end stamp/drift/recovery demo")
    p.add_argument("--dt", default="0.5", help="injected elapsed time, e.g. 0.5Myr")
    p.add_argument("--noise", default="0", help="distance noise sigma, e.g. 0.1kpc")
    p.add_argument("--catalog", metavar="PATH")
    p.add_argument("--k", type=int, default=None, help="anchor count")
    p.add_argument("--mode", choices=("linear", "orbit"), default=None)
    p.add_argument("--window", type=float, default=None, help="half-width, Myr")
    p.add_argument("--out", metavar="PATH")

    return top


def _cmd_ingest(args, cfg):
    if args.url:
        text = catalog.fetch_snapshot(args.url, cache_dir=args.cache,
                                      offline=True if args.offline else None)
        cat = parse_catalog(text, epoch_jyear=args.epoch)
    elif args.infile:
        with open(args.infile, encoding="utf-8") as fh:
            cat = parse_catalog(fh.read(), epoch_jyear=args.epoch)
    else:
        cat = load_reference_snapshot()
    report = validate(cat)
    out_lines = _header_lines(cfg, args.seed)
    out_lines.append(serialize_catalog(cat).rstrip("\n"))
    if args.out:
        _write_text(args.out, out_lines)
    print(f"{len(cat)} records, {report.count()} warnings")
    for w in report.warnings:
        print(f"warning: {w}")
    return EXIT_OK


def _cmd_velocities(args, cfg):
    cat = _load_catalog(args, cfg)
    total = dynamics.velocity_distribution(cat, cfg.frame, bins=args.bins,
                                           v_max_kms=args.vmax)
    tang = dynamics.velocity_distribution(cat, cfg.frame, bins=args.bins,
                                          v_max_kms=args.vmax,
                                          component="tangential")
    lines = _header_lines(cfg, args.seed)
    lines.append("v_lo_kms,v_hi_kms,count_total,count_tangential")
    for i in range(len(total.counts)):
        lines.append(f"{float(total.edges_kms[i])!r},{float(total.edges_kms[i + 1])!r},"
                     f"{int(total.counts[i])},{int(tang.counts[i])}")
    _write_text(args.out, lines)
    return EXIT_OK


def _cmd_resolution(args, cfg):
    e = cfg.epoch
    curve = epoch.resolution_curves(e.dd_cases_kpc, e.v_min_kms, e.v_max_kms,
                                    e.n_points)
    lines = _header_lines(cfg, args.seed)
    lines.append(epoch.resolution_to_csv(curve).rstrip("\n"))
    _write_text(args.out, lines)
    return EXIT_OK


def _cmd_orbit(args, cfg):
    cat = _load_catalog(args, cfg)
    idx = cat.index_of(args.name)
    pos, vel = catalog_phase_space(cat, cfg.frame)
    st0 = PhaseState(Vec3.from_array(pos[idx]), Vec3.from_array(vel[idx]))
    traj = dynamics.integrate_orbit(st0, cfg.potential, cfg.integrator.dt_myr,
                                    args.t_end, scheme=cfg.integrator.scheme)
    lines = _header_lines(cfg, args.seed)
    lines.append(f"# name = {args.name}")
    lines.append(f"# energy_drift = {dynamics.energy_drift(traj)!r}")
    lines.append("t_myr,x_kpc,y_kpc,z_kpc,vx_kms,vy_kms,vz_kms,energy_kms2")
    for i in range(0, len(traj), max(1, args.every)):
        p, v = traj.pos_kpc[i], traj.vel_kms[i]
        cells = [traj.times_myr[i], p[0], p[1], p[2], v[0], v[1], v[2],
                 traj.energy_kms2[i]]
        lines.append(",".join(repr(float(c)) for c in cells))
    _write_text(args.out, lines)
    return EXIT_OK


def _cmd_stamp_encode(args, cfg):
    cat = _load_catalog(args, cfg)
    anchors = stamp.select_anchors(cat, cfg.frame, cfg.stamp.k,
                                   cfg.stamp.min_sep_kpc)
    lmap = stamp.build_location_map(cat, cfg.frame, anchors,
                                    cfg.stamp.pos_quantum_pc)
    blob = stamp.encode_stamp(lmap, cfg.stamp.pos_quantum_pc)
    with open(args.out, "wb") as fh:
        fh.write(blob)
    print(f"wrote {args.out}: k={lmap.k} epoch={lmap.epoch_jyear} "
          f"({len(blob)} bytes)")
    return EXIT_OK


def _cmd_stamp_decode(args, cfg):
    with open(args.infile, "rb") as fh:
        blob = fh.read()
    lmap = stamp.decode_stamp(blob)
    lines = _header_lines(cfg, args.seed)
    lines.append(f"stamp_version = {stamp.VERSION}")
    lines.append(f"k = {lmap.k}")
    lines.append(f"epoch_jyear = {lmap.epoch_jyear!r}")
    lines.append("anchor,mv_q,feh_q,mv_abs,feh_dex,x_kpc,y_kpc,z_kpc,range_kpc")
    for i, (sig, p) in enumerate(lmap.anchors):
        lines.append(f"{i},{sig.mv_q},{sig.feh_q},{sig.mv_abs()!r},"
                     f"{sig.feh_dex()!r},{p.x!r},{p.y!r},{p.z!r},{p.norm()!r}")
    _write_text(args.out, lines)
    return EXIT_OK


def _cmd_locate(args, cfg):
    with open(args.stamp, "rb") as fh:
        lmap = stamp.decode_stamp(fh.read())
    cat = _load_catalog(args, cfg)
    corr = stamp.match_anchors(lmap, cat, cfg.frame, cfg.stamp.match_tol_kpc)
    pos, rms = stamp.locate_sender(corr, lmap, cat, cfg.frame)
    lines = _header_lines(cfg, args.seed)
    lines.append(f"matched = {len(corr.pairs)}")
    lines.append(f"match_rms_kpc = {corr.rms_residual_kpc!r}")
    lines.append(f"sender_x_kpc = {pos.x!r}")
    lines.append(f"sender_y_kpc = {pos.y!r}")
    lines.append(f"sender_z_kpc = {pos.z!r}")
    lines.append(f"fit_rms_kpc = {rms!r}")
    _write_text(args.out, lines)
    return EXIT_OK


def _cmd_epoch_recover(args, cfg):
    with open(args.stamp, "rb") as fh:
        lmap = stamp.decode_stamp(fh.read())
    cat = _load_catalog(args, cfg)
    half = args.window if args.window is not None else cfg.epoch.window_myr
    mode = args.mode if args.mode is not None else cfg.epoch.mode
    est = epoch.recover_epoch(lmap, cat, cfg.frame, window_myr=(-half, half),
                              tol_kpc=cfg.stamp.match_tol_kpc,
                              coarse_samples=cfg.epoch.coarse_samples,
                              mode=mode, pp=cfg.potential,
                              step_myr=cfg.integrator.dt_myr)
    lines = _header_lines(cfg, args.seed)
    lines.append(f"dt_myr = {est.dt_myr!r}")
    lines.append(f"residual_kpc = {est.residual_kpc!r}")
    lines.append(f"bound_myr = {est.bound_myr!r}")
    _write_text(args.out, lines)
    return EXIT_OK


def run_simulation(cfg, dt_myr, noise_kpc, seed, k=None, mode=None,
                   window_half_myr=None):
    """End-to-end pipeline; returns a dict of deterministic result fields."""
    cat0 = load_reference_snapshot()
    k = k if k is not None else cfg.stamp.k
    mode = mode if mode is not None else cfg.epoch.mode
    half = window_half_myr if window_half_myr is not None else cfg.epoch.window_myr
    fp = cfg.frame

    anchor_idx = stamp.select_anchors(cat0, fp, k, cfg.stamp.min_sep_kpc)
    lmap = stamp.build_location_map(cat0, fp, anchor_idx, cfg.stamp.pos_quantum_pc)
    blob = stamp.encode_stamp(lmap, cfg.stamp.pos_quantum_pc)
    lmap = stamp.decode_stamp(blob)

    cat_now = epoch.propagate_catalog(cat0, fp, dt_myr, mode=mode,
                                      pp=cfg.potential,
                                      step_myr=cfg.integrator.dt_myr)
    if noise_kpc > 0:
        rng = np.random.default_rng(seed)
        noisy = []
        for rec in cat_now.records:
            jitter = float(rng.normal(0.0, noise_kpc))
            noisy.append(replace(rec, dist_kpc=max(rec.dist_kpc + jitter, 1e-3)))
        cat_now = catalog.with_records(cat_now, noisy)

    corr = stamp.match_anchors(lmap, cat_now, fp, cfg.stamp.match_tol_kpc)
    est = epoch.recover_epoch(lmap, cat_now, fp, window_myr=(-half, half),
                              tol_kpc=cfg.stamp.match_tol_kpc,
                              coarse_samples=cfg.epoch.coarse_samples,
                              corr=corr, mode=mode, pp=cfg.potential,
                              step_myr=cfg.integrator.dt_myr)
    cat_back = epoch.propagate_catalog(cat_now, fp, -est.dt_myr, mode="linear")
    sender, fit_rms = stamp.locate_sender(corr, lmap, cat_back, fp)

    sun = fp.sun_pos()
    err = ((sender.x - sun.x) ** 2 + (sender.y - sun.y) ** 2
           + (sender.z - sun.z) ** 2) ** 0.5
    matched = [r for _, r in sorted(corr.pairs)]
    return {
        "seed": seed,
        "k": k,
        "mode": mode,
        "noise_kpc": noise_kpc,
        "stamp_bytes": len(blob),
        "dt_true_myr": dt_myr,
        "dt_recovered_myr": est.dt_myr,
        "dt_error_myr": est.dt_myr - dt_myr,
        "bound_myr": est.bound_myr,
        "epoch_within_bound": abs(est.dt_myr - dt_myr) <= est.bound_myr,
        "match_correct": matched == list(anchor_idx),
        "match_rms_kpc": corr.rms_residual_kpc,
        "sender_x_kpc": sender.x,
        "sender_y_kpc": sender.y,
        "sender_z_kpc": sender.z,
        "sender_error_kpc": err,
        "fit_rms_kpc": fit_rms,
    }


def _cmd_simulate(args, cfg):
    dt_myr = _unit_value(args.dt, "Myr")
    noise_kpc = _unit_value(args.noise, "kpc")
    seed = args.seed if args.seed is not None else 0
    result = run_simulation(cfg, dt_myr, noise_kpc, seed, k=args.k,
                            mode=args.mode, window_half_myr=args.window)
    lines = _header_lines(cfg, seed)
    for key, value in result.items():
        lines.append(f"{key} = {value!r}")
    _write_text(args.out, lines)
    return EXIT_OK


_COMMANDS = {
    "ingest": _cmd_ingest,
    "velocities": _cmd_velocities,
    "resolution": _cmd_resolution,
    "orbit": _cmd_orbit,
    "locate": _cmd_locate,
    "simulate": _cmd_simulate,
}


def run(argv) -> int:
    """Run the CLI on argv (excluding the program name); returns the exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = config.load_config(args.config)
        if args.command == "stamp":
            handler = (_cmd_stamp_encode if args.stamp_command == "encode"
                       else _cmd_stamp_decode)
        elif args.command == "epoch":
            handler = _cmd_epoch_recover
        else:
            handler = _COMMANDS[args.command]
        return handler(args, cfg)
    except _UsageError as exc:
        print(f"gstamp: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _NUMERICAL_ERRORS as exc:
        print(f"gstamp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except GstampError as exc:
        print(f"gstamp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyError as exc:
        print(f"gstamp: unknown name {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"gstamp: {exc}", file=sys.stderr)
        return EXIT_DATA


def main():
    raise SystemExit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
