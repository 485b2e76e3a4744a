"""Command-line front end.

Subcommands: ``phase-diagram``, ``critical``, ``disorder``, ``kerr``,
``validate``.  All numerical inputs come from an INI-style configuration
file (``--config``); any value can be overridden on the command line with
``--set section.key=value``.  Every run writes a ``config_snapshot.json``
with the fully resolved configuration and the package version, and all
result files embed the same snapshot (JSON) or its values (PGM comments),
so runs are reproducible from their outputs alone.

Exit codes: 0 success, 2 configuration/input error, 3 numerical failure,
4 validation failure.

Environment: ``POLARLAT_SEED`` and ``POLARLAT_WORKERS`` override the seed
and worker count when the corresponding flags are absent (precedence:
flag > environment > config file > default).

Reported t and mu are in units of g and mu is relative to omega_ex;
``--physical-units`` switches the phase-diagram and critical CSVs to rad/s.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__, meanfield, observables
from .disorder import iso_surface
from .errors import ConfigError, FieldFormatError, PolarlatError, ValidationFailure
from .fields import read_field
from .kerr import MaterialMaps, effective_bhm
from .model import SystemParams, coupling_from_ghz
from .observables import LossParams
from .validate import format_report, run_checks

_BOOL = object()
_INT_LIST = object()
_FLOAT_LIST = object()

#: section -> key -> (converter, default); unknown keys are rejected.
SCHEMA = {
    "system": {
        "big_n": (int, 8),
        "z": (int, 4),
        "detuning_g": (float, 0.0),
        "g_ghz": (float, 33.3),
        "g_angular": (_BOOL, False),
        "wavelength_nm": (float, 817.0),
    },
    "loss": {
        "q_cavity": (float, 1e6),
        "tau_e_s": (float, 1e-9),
        "purcell_f": (float, 0.2),
        "eta": (float, 1.0),
    },
    "phase_diagram": {
        "t_min_g": (float, 0.0),
        "t_max_g": (float, 0.02),
        "t_points": (int, 48),
        "mu_min_g": (float, -3.0),
        "mu_max_g": (float, -2.2),
        "mu_points": (int, 48),
        "pgm": (_BOOL, False),
    },
    "critical": {
        "big_n_list": (_INT_LIST, (1, 3, 8, 20, 50)),
        "detuning_g_list": (_FLOAT_LIST, (0.0,)),
    },
    "disorder": {
        "n_mean": (float, 3.0),
        "sigma_omega_max_g": (float, 1.6),
        "delta_g_max": (float, 0.45),
        "n_sigma_max": (float, 1.05),
        "points": (int, 16),
        "sample_count": (int, 10_000),
        "quantile": (float, 0.005),
        "method": (str, "collective"),
        "n_dist": (str, "auto"),
        "safety_factor": (float, 1.0),
    },
    "kerr": {
        "phi_file": (str, ""),
        "k_c_file": (str, ""),
        "chi3_file": (str, ""),
        "d_x_m": (float, 0.0),
        "d_y_m": (float, 0.0),
        "d_z_m": (float, 0.0),
    },
    "run": {
        "outdir": (str, "polarlat-out"),
        "seed": (int, 12345),
        "workers": (int, 1),
        "physical_units": (_BOOL, False),
    },
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(section, key, conv, raw):
    raw = raw.strip()
    try:
        if conv is _BOOL:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if conv is _INT_LIST:
            return tuple(int(x) for x in raw.replace(",", " ").split())
        if conv is _FLOAT_LIST:
            return tuple(float(x) for x in raw.replace(",", " ").split())
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from exc


class RunConfig:
    """Fully resolved configuration: schema defaults, file values, overrides."""

    def __init__(self, values):
        self._values = values

    def __getitem__(self, section):
        return self._values[section]

    def get(self, section, key):
        return self._values[section][key]

    def snapshot(self):
        snap = {sec: dict(keys) for sec, keys in self._values.items()}
        # execution environment, not configuration: these cannot influence
        # results, and omitting them keeps outputs byte-identical across
        # output locations and worker counts
        snap["run"].pop("outdir", None)
        snap["run"].pop("workers", None)
        for sec in snap.values():
            for k, v in sec.items():
                if isinstance(v, tuple):
                    sec[k] = list(v)
        snap["version"] = __version__
        return snap


def load_config(path=None, overrides=()):
    values = {sec: {k: d for k, (_c, d) in keys.items()}
              for sec, keys in SCHEMA.items()}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"malformed config file {path}: {exc}") from exc
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                conv, _default = SCHEMA[section][key]
                values[section][key] = _convert(section, key, conv, raw)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        target, raw = item.split("=", 1)
        section, key = target.split(".", 1)
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown config entry {section}.{key}")
        conv, _default = SCHEMA[section][key]
        values[section][key] = _convert(section, key, conv, raw)
    return RunConfig(values)


def _coupling(cfg):
    return coupling_from_ghz(cfg.get("system", "g_ghz"),
                             angular=cfg.get("system", "g_angular"))


def _system_params(cfg, big_n=None, detuning_g=None, physical=True):
    big_n = cfg.get("system", "big_n") if big_n is None else big_n
    detuning_g = (cfg.get("system", "detuning_g") if detuning_g is None
                  else detuning_g)
    if physical:
        return SystemParams.physical(
            big_n=big_n, detuning_g=detuning_g, z=cfg.get("system", "z"),
            g=_coupling(cfg), wavelength_nm=cfg.get("system", "wavelength_nm"))
    return SystemParams.dimensionless(big_n, detuning_g, cfg.get("system", "z"))


def _loss_params(cfg, eta=None):
    return LossParams(q_cavity=cfg.get("loss", "q_cavity"),
                      tau_e=cfg.get("loss", "tau_e_s"),
                      purcell_f=cfg.get("loss", "purcell_f"),
                      eta=cfg.get("loss", "eta") if eta is None else eta)


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path, payload):
    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_pgm(path, matrix, comments=()):
    finite = matrix[np.isfinite(matrix)]
    top = float(finite.max()) if finite.size and finite.max() > 0 else 1.0
    scaled = np.where(np.isfinite(matrix), matrix, top)
    gray = np.clip(np.rint(255.0 * scaled / top), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n")
        for comment in comments:
            fh.write(b"# " + comment.encode("ascii") + b"\n")
        fh.write(f"{gray.shape[1]} {gray.shape[0]}\n255\n".encode("ascii"))
        fh.write(gray.tobytes())


def _ensure_outdir(cfg):
    outdir = cfg.get("run", "outdir")
    os.makedirs(outdir, exist_ok=True)
    _write_json(os.path.join(outdir, "config_snapshot.json"), cfg.snapshot())
    return outdir


def cmd_phase_diagram(cfg):
    outdir = _ensure_outdir(cfg)
    pd = cfg["phase_diagram"]
    t_axis = np.linspace(pd["t_min_g"], pd["t_max_g"], pd["t_points"])
    mu_axis = np.linspace(pd["mu_min_g"], pd["mu_max_g"], pd["mu_points"])
    params = _system_params(cfg, physical=False)
    started = time.perf_counter()
    grid = meanfield.phase_diagram(params, t_axis, mu_axis,
                                   workers=cfg.get("run", "workers"))
    elapsed = time.perf_counter() - started
    unit = _coupling(cfg) if cfg.get("run", "physical_units") else 1.0
    rows = [(p.t * unit, p.mu * unit, p.psi_star, p.phase.value, p.filling)
            for row in grid.points for p in row]
    _write_csv(os.path.join(outdir, "phase_diagram.csv"),
               ["t", "mu", "psi", "phase", "filling"], rows)
    _write_json(os.path.join(outdir, "phase_diagram.json"), {
        "config": cfg.snapshot(),
        "params": {"big_n": params.big_n, "z": params.z,
                   "detuning_g": params.detuning / params.g},
        "t_axis_g": [float(t) for t in t_axis],
        "mu_axis_g": [float(m) for m in mu_axis],
        "unit": "rad/s" if cfg.get("run", "physical_units") else "g",
        "n_max_final": grid.n_max_final.tolist(),
        "runaway_cells": int(sum(p.runaway for row in grid.points for p in row)),
    })
    if pd["pgm"]:
        psi = grid.psi  # rows t, cols mu; image rows = mu descending
        _write_pgm(os.path.join(outdir, "phase_diagram.pgm"),
                   psi.T[::-1, :],
                   comments=[f"polarlat {__version__} order parameter",
                             f"t axis {pd['t_min_g']}..{pd['t_max_g']} g, "
                             f"mu axis {pd['mu_min_g']}..{pd['mu_max_g']} g"])
    print(f"phase-diagram: {t_axis.size}x{mu_axis.size} cells -> {outdir} "
          f"({elapsed:.1f}s)", file=sys.stderr)
    return 0


def cmd_critical(cfg):
    outdir = _ensure_outdir(cfg)
    unit = _coupling(cfg) if cfg.get("run", "physical_units") else 1.0
    g = _coupling(cfg)
    rows = []
    any_ok = False
    for big_n in cfg.get("critical", "big_n_list"):
        for det in cfg.get("critical", "detuning_g_list"):
            try:
                params = _system_params(cfg, big_n=big_n, detuning_g=det,
                                        physical=False)
                t_c, _mu_tip = meanfield.critical_tunneling(params, 1)
                u_g = observables.interaction_energy(params) / params.g
                comp = observables.polariton_fractions(params)
                ratio = u_g / (comp.c_ph_sq * t_c)
                phys = _system_params(cfg, big_n=big_n, detuning_g=det)
                q1 = observables.required_q(phys, _loss_params(cfg, eta=1.0),
                                            t_c * g)
                q10 = observables.required_q(phys, _loss_params(cfg, eta=10.0),
                                             t_c * g)
                rows.append((big_n, det, t_c * unit, u_g * unit, comp.c_ph_sq,
                             ratio, q1, q10, "ok"))
                any_ok = True
            except PolarlatError as exc:
                rows.append((big_n, det, math.nan, math.nan, math.nan,
                             math.nan, math.nan, math.nan,
                             type(exc).__name__))
    _write_csv(os.path.join(outdir, "critical.csv"),
               ["big_n", "detuning_g", "t_c", "u", "c_ph_sq", "ratio",
                "q_r_eta1", "q_r_eta10", "status"], rows)
    _write_json(os.path.join(outdir, "critical.json"), {
        "config": cfg.snapshot(),
        "unit": "rad/s" if cfg.get("run", "physical_units") else "g",
        "rows": len(rows),
    })
    print(f"critical: {len(rows)} rows -> {outdir}", file=sys.stderr)
    return 0 if any_ok else 3


def cmd_disorder(cfg):
    outdir = _ensure_outdir(cfg)
    dis = cfg["disorder"]
    g = _coupling(cfg)
    params = _system_params(cfg, big_n=int(round(dis["n_mean"])))
    loss = _loss_params(cfg)
    points = dis["points"]
    sig_ax = np.linspace(0.0, dis["sigma_omega_max_g"] * g, points)
    dg_ax = np.linspace(0.0, dis["delta_g_max"], points)
    ns_ax = np.linspace(0.0, dis["n_sigma_max"], points)
    started = time.perf_counter()
    scan = iso_surface(params, loss, sig_ax, dg_ax, ns_ax,
                       n_mean=dis["n_mean"], sample_count=dis["sample_count"],
                       seed=cfg.get("run", "seed"), n_dist=dis["n_dist"],
                       method=dis["method"], quantile=dis["quantile"],
                       safety_factor=dis["safety_factor"])
    elapsed = time.perf_counter() - started
    rows = []
    for a, sig in enumerate(sig_ax):
        for b, dg in enumerate(dg_ax):
            for c, ns in enumerate(ns_ax):
                rows.append((sig, dg, ns, scan.delta_e[a, b, c],
                             scan.delta_u[a, b, c], scan.u_mean[a, b, c],
                             scan.t_c_disordered[a, b, c], scan.f[a, b, c],
                             int(scan.f[a, b, c] >= 0)))
    _write_csv(os.path.join(outdir, "disorder_grid.csv"),
               ["sigma_omega", "delta_g", "n_sigma", "delta_e", "delta_u",
                "u_mean", "t_c_disordered_g", "f", "observable"], rows)
    _write_csv(os.path.join(outdir, "disorder_boundary.csv"),
               ["sigma_omega", "delta_g", "n_sigma"],
               [tuple(p) for p in scan.boundary_points])
    ghz = 2.0 * math.pi * 1e9
    _write_json(os.path.join(outdir, "disorder_summary.json"), {
        "config": cfg.snapshot(),
        "intercepts": {
            "sigma_omega_rad_s": scan.intercepts["sigma_omega"]["value"],
            "sigma_omega_ghz": scan.intercepts["sigma_omega"]["value"] / ghz,
            "sigma_omega_g": scan.intercepts["sigma_omega"]["value"] / g,
            "delta_g_g": scan.intercepts["delta_g"]["value"],
            "n_sigma": scan.intercepts["n_sigma"]["value"],
            "n_sigma_over_mean": scan.intercepts["n_sigma"]["value"] / dis["n_mean"],
            "censored": {k: v["censored"] for k, v in scan.intercepts.items()},
        },
        "clean": {"t_c_g": scan.t_c_clean, "u": scan.u_clean,
                  "loss_rate": scan.loss_rate,
                  "safety_factor": scan.safety_factor},
        "uniform_sign": scan.uniform_sign,
        "boundary_points": int(scan.boundary_points.shape[0]),
    })
    if scan.uniform_sign:
        print("disorder: warning: marker f has uniform sign over the whole "
              "grid; the boundary surface lies outside the scanned ranges",
              file=sys.stderr)
    print(f"disorder: {points}^3 grid x {dis['sample_count']} samples -> "
          f"{outdir} ({elapsed:.1f}s)", file=sys.stderr)
    return 0


def cmd_kerr(cfg):
    outdir = _ensure_outdir(cfg)
    ker = cfg["kerr"]
    for key in ("phi_file", "k_c_file", "chi3_file"):
        if not ker[key]:
            raise ConfigError(f"kerr.{key} must point to a field file")
    phi = read_field(ker["phi_file"])
    maps = MaterialMaps(k_c=read_field(ker["k_c_file"]),
                        chi3=read_field(ker["chi3_file"]))
    d = (ker["d_x_m"], ker["d_y_m"], ker["d_z_m"])
    res = effective_bhm(maps.k_c, maps.chi3, phi, d)

    # quadrature error estimate from one refinement step: re-evaluate on the
    # stride-2 subgrid (the only refinement available for fixed input data)
    def coarsen(f):
        return type(f)(values=f.values[::2, ::2, ::2],
                       spacing=tuple(2.0 * s for s in f.spacing),
                       origin=f.origin)

    if min(phi.shape) >= 5:
        coarse = effective_bhm(coarsen(maps.k_c), coarsen(maps.chi3),
                               coarsen(phi), d)
        err_t = abs(res.t - coarse.t)
        err_u = abs(res.u - coarse.u)
    else:
        err_t = err_u = math.nan
    _write_json(os.path.join(outdir, "kerr.json"), {
        "config": cfg.snapshot(),
        "t_self_energy_units": res.t,
        "u_self_energy_units": res.u,
        "norm_constant": res.norm_constant,
        "quadrature_error_t": err_t,
        "quadrature_error_u": err_u,
        "displacement_m": list(d),
        "grid": list(phi.shape),
    })
    print(f"kerr: t={res.t:.6g}, u={res.u:.6g} -> {outdir}", file=sys.stderr)
    return 0


def cmd_validate(cfg, inject_failure=False):
    checks = run_checks(inject_failure=inject_failure)
    print(format_report(checks))
    if not all(c.passed for c in checks):
        raise ValidationFailure(
            f"{sum(not c.passed for c in checks)} oracle check(s) failed")
    return 0


def _parse_args(argv):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--outdir", help="output directory (overrides run.outdir)")
    common.add_argument("--seed", type=int, help="random seed (overrides run.seed)")
    common.add_argument("--workers", type=int,
                        help="worker processes (overrides run.workers)")
    common.add_argument("--physical-units", action="store_true",
                        help="report t and mu in rad/s instead of units of g")
    common.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL",
                        help="override any config entry; repeatable")

    parser = argparse.ArgumentParser(
        prog="polarlat",
        description="Mean-field phase analysis of polaritons in doped "
                    "microcavity lattices")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("phase-diagram", parents=[common],
                   help="order-parameter scan over the (t, mu) plane")
    sub.add_parser("critical", parents=[common],
                   help="critical tunneling, interaction energy and required Q")
    sub.add_parser("disorder", parents=[common],
                   help="disorder-width scan for insulator accessibility")
    sub.add_parser("kerr", parents=[common],
                   help="dispersive-limit lattice parameters from field files")
    val = sub.add_parser("validate", parents=[common],
                         help="run the built-in oracle suite")
    val.add_argument("--inject-failure", action="store_true",
                     help=argparse.SUPPRESS)  # exercises the failure path
    return parser.parse_args(argv)


def _apply_cli_overrides(cfg, args):
    if args.outdir is not None:
        cfg["run"]["outdir"] = args.outdir
    if args.seed is not None:
        cfg["run"]["seed"] = args.seed
    elif "POLARLAT_SEED" in os.environ:
        cfg["run"]["seed"] = _convert("run", "seed", int,
                                      os.environ["POLARLAT_SEED"])
    if args.workers is not None:
        cfg["run"]["workers"] = args.workers
    elif "POLARLAT_WORKERS" in os.environ:
        cfg["run"]["workers"] = _convert("run", "workers", int,
                                         os.environ["POLARLAT_WORKERS"])
    if args.physical_units:
        cfg["run"]["physical_units"] = True


def main(argv=None):
    try:
        args = _parse_args(argv)
        cfg = load_config(args.config, args.set)
        _apply_cli_overrides(cfg, args)
        if args.command == "phase-diagram":
            return cmd_phase_diagram(cfg)
        if args.command == "critical":
            return cmd_critical(cfg)
        if args.command == "disorder":
            return cmd_disorder(cfg)
        if args.command == "kerr":
            return cmd_kerr(cfg)
        if args.command == "validate":
            return cmd_validate(cfg, inject_failure=args.inject_failure)
        raise ConfigError(f"unknown command {args.command!r}")
    except FieldFormatError as exc:
        offset = "unknown" if exc.offset is None else exc.offset
        print(f"polarlat: input error: {exc} (byte offset {offset})",
              file=sys.stderr)
        return 2
    except (ConfigError, ValueError, OSError) as exc:
        print(f"polarlat: config error: {exc}", file=sys.stderr)
        return 2
    except ValidationFailure as exc:
        print(f"polarlat: validation failed: {exc}", file=sys.stderr)
        return 4
    except PolarlatError as exc:
        print(f"polarlat: numerical failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
