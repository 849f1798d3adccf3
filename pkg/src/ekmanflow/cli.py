"""Command-line entry point: check, ekman, simulate, spectrum, verify.

Configuration is a plain text file of `section.key = value` lines (full key
list in the README). Outputs are CSV series with 17-significant-digit floats
(lossless float64 round trip), raw binary field snapshots, and a plain-text
run manifest written last so its presence marks a completed run.

Exit codes: 0 success / PASS, 1 configuration or usage error, 2 runtime
error, 3 eigenvalue iteration not converged.
"""

from __future__ import annotations

import argparse
import datetime
import os
import struct
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import CSV_COLUMNS, check_energy_monotone
from .field import Field, Grid, PHYSICAL, l2_norm, lp_norm, random_field
from .hydrostatics import baroclinic_part, project_keep_bc, vertical_average
from .model import (
    ParameterError,
    PhysicalParams,
    ekman_coefficients,
    layer_thickness,
    smallness_constant,
    sup_derivative_bound,
)
from .operator import LinearizedOp, estimate_spectral_bound
from .solver import SimConfig, SolverError, simulate

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_NOT_CONVERGED = 3

SNAPSHOT_MAGIC = b"PESN"
SNAPSHOT_VERSION = 1


class ConfigError(ValueError):
    pass


PHYSICS_KEYS = ("nu_h", "nu_z", "f", "rho0", "g", "h",
                "tau_x", "tau_y", "v_g_x", "v_g_y", "L_x", "L_y")
SIM_FLOAT_KEYS = ("dt", "t_end", "amplitude", "slope")
SIM_INT_KEYS = ("n_x", "n_y", "n_z", "cadence", "seed")
SIM_STR_KEYS = ("mode", "snapshot")


def parse_config_text(text: str, origin: str = "<config>") -> dict:
    """key = value lines with dotted sections; '#' starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if not key or not val:
            raise ConfigError(f"{origin}:{lineno}: empty key or value")
        if key in values:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        values[key] = val
    return values


def _parse_float(values: dict, key: str) -> float:
    try:
        return float(values[key])
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: not a number ({values[key]!r})") from exc


def _parse_int(values: dict, key: str) -> int:
    try:
        return int(values[key])
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: not an integer ({values[key]!r})") from exc


def load_config(path) -> tuple[PhysicalParams, SimConfig, dict]:
    """Parse and validate a config file; returns (params, sim config, raw echo)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    values = parse_config_text(text, origin=str(path))

    known = {f"physics.{k}" for k in PHYSICS_KEYS}
    known |= {f"sim.{k}" for k in SIM_FLOAT_KEYS + SIM_INT_KEYS + SIM_STR_KEYS}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r}")
    missing = sorted(known - set(values)
                     - {"sim.snapshot", "sim.amplitude", "sim.slope",
                        "sim.cadence", "sim.seed", "sim.mode"})
    if missing:
        raise ConfigError(f"missing config key {missing[0]!r}")

    phys = {k: _parse_float(values, f"physics.{k}") for k in PHYSICS_KEYS}
    try:
        params = PhysicalParams(
            nu_h=phys["nu_h"], nu_z=phys["nu_z"], f=phys["f"], rho0=phys["rho0"],
            g=phys["g"], h=phys["h"], tau=(phys["tau_x"], phys["tau_y"]),
            v_g=(phys["v_g_x"], phys["v_g_y"]), L_x=phys["L_x"], L_y=phys["L_y"])
    except ParameterError as exc:
        raise ConfigError(f"physics: {exc}") from exc

    kw = {}
    for k in SIM_FLOAT_KEYS:
        if f"sim.{k}" in values:
            kw[k] = _parse_float(values, f"sim.{k}")
    for k in SIM_INT_KEYS:
        if f"sim.{k}" in values:
            kw[k] = _parse_int(values, f"sim.{k}")
    for k in SIM_STR_KEYS:
        if f"sim.{k}" in values:
            kw[k] = values[f"sim.{k}"]
    try:
        cfg = SimConfig(**kw)
        cfg.make_grid(params)  # grid-size validation
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"sim: {exc}") from exc
    return params, cfg, values


def fmt(x: float) -> str:
    """17 significant digits: enough to round-trip any float64."""
    return format(x, ".17g")


# ---------------------------------------------------------------------------
# snapshot persistence

def write_snapshot(fld: Field, t: float, path) -> None:
    """Raw little-endian snapshot; see README for the exact layout."""
    g = fld.grid
    for n in (g.n_x, g.n_y, g.n_z):
        if not 0 < n < 2**32:
            raise ValueError(f"dimension {n} out of range for the snapshot format")
    phys = fld.to_physical()
    header = SNAPSHOT_MAGIC + struct.pack(
        "<IIIIdddd", SNAPSHOT_VERSION, g.n_x, g.n_y, g.n_z, g.L_x, g.L_y, g.h, t)
    arr = np.ascontiguousarray(phys.data, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr[0].tobytes())
        fh.write(arr[1].tobytes())


def read_snapshot(path) -> tuple[Field, float]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a PESN file")
    head_size = 4 + struct.calcsize("<IIIIdddd")
    if len(blob) < head_size:
        raise ValueError(f"{path}: truncated header")
    version, n_x, n_y, n_z, L_x, L_y, h, t = struct.unpack(
        "<IIIIdddd", blob[4:head_size])
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    count = n_x * n_y * (n_z + 1)
    expected = head_size + 2 * count * 8
    if len(blob) != expected:
        raise ValueError(f"{path}: truncated file ({len(blob)} bytes, want {expected})")
    grid = Grid(n_x=n_x, n_y=n_y, n_z=n_z, L_x=L_x, L_y=L_y, h=h)
    data = np.frombuffer(blob, dtype="<f8", offset=head_size, count=2 * count)
    data = data.reshape(2, n_x, n_y, n_z + 1).copy()
    return Field(grid, data, PHYSICAL), t


# ---------------------------------------------------------------------------
# subcommands

def cmd_check(args) -> int:
    params, _, _ = load_config(args.config)
    sol = ekman_coefficients(params)
    report = smallness_constant(params)
    print(f"d      = {fmt(sol.d)}")
    for name in ("k1", "k2", "k3", "k4"):
        print(f"{name}     = {fmt(getattr(sol, name))}")
    print(f"sup|dz v_E|^2 bound = {fmt(sup_derivative_bound(sol))}")
    print(f"C_E    = {fmt(report.value)}")
    print(f"regime = {'PASS (C_E < 1)' if report.stable else 'FAIL (C_E >= 1)'}")
    return EXIT_OK if report.stable else EXIT_RUNTIME


def cmd_ekman(args) -> int:
    params, _, _ = load_config(args.config)
    if args.samples < 2:
        raise ConfigError("--samples must be >= 2")
    sol = ekman_coefficients(params)
    zs = np.linspace(-params.h, 0.0, args.samples)
    prof = sol.profile(zs)
    shear = sol.derivative(zs)
    out = Path(args.out)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("z,v1,v2,dv1dz,dv2dz\n")
        for i, z in enumerate(zs):
            row = (z, prof[0, i], prof[1, i], shear[0, i], shear[1, i])
            fh.write(",".join(fmt(v) for v in row) + "\n")
    print(f"wrote {args.samples} samples to {out}")
    return EXIT_OK


def _manifest_lines(echo: dict, extra: dict) -> list[str]:
    lines = [f"config.{k} = {v}" for k, v in sorted(echo.items())]
    lines += [f"{k} = {v}" for k, v in extra.items()]
    return lines


def cmd_simulate(args) -> int:
    params, cfg, echo = load_config(args.config)
    if args.seed is not None:
        cfg = SimConfig(**{**cfg.__dict__, "seed": args.seed})
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise RuntimeError(f"{out_dir} is locked by another run (remove {lock} if stale)")
    os.close(fd)

    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    series_path = out_dir / "series.csv"
    status = "completed"
    error_note = None
    result = None
    try:
        initial = None
        if cfg.snapshot:
            initial, _ = read_snapshot(cfg.snapshot)

        with open(series_path, "w", encoding="utf-8", newline="\n") as series:
            series.write(",".join(CSV_COLUMNS) + "\n")

            def on_record(rec):
                series.write(",".join(fmt(v) for v in rec.csv_row()) + "\n")
                series.flush()

            def on_snapshot(v, t, step_index):
                write_snapshot(v, t, out_dir / f"snapshot_{step_index:08d}.pesn")

            try:
                result = simulate(cfg, params, initial=initial,
                                  on_record=on_record, on_snapshot=on_snapshot)
            except SolverError as exc:
                status = "failed"
                error_note = f"{exc} (step {exc.step_index})"

        if result is not None:
            write_snapshot(result.state.v, result.state.t, out_dir / "final.pesn")

        report = smallness_constant(params)
        extra = {
            "version": __version__,
            "seed": cfg.seed,
            "smallness_C_E": fmt(report.value),
            "stable_regime": str(report.stable),
            "status": status,
            "started_utc": started,
            "finished_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        }
        if error_note:
            extra["error"] = error_note
        manifest = out_dir / "manifest.txt"
        manifest.write_text("\n".join(_manifest_lines(echo, extra)) + "\n",
                            encoding="utf-8")
    finally:
        lock.unlink(missing_ok=True)

    if status != "completed":
        print(f"simulation failed: {error_note}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {series_path} ({len(result.records)} records)")
    monotone = check_energy_monotone(result.energy)
    if result.meta["stable_regime"] and not monotone.passed:
        print(f"note: energy uptick at step {monotone.first_violation}", file=sys.stderr)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    params, cfg, _ = load_config(args.config)
    if args.krylov < 2:
        raise ConfigError("--krylov must be >= 2")
    grid = cfg.make_grid(params)
    op = LinearizedOp.build(params, grid)
    horizon = args.horizon if args.horizon is not None else 1.0 / abs(params.f)
    res = estimate_spectral_bound(op, horizon=horizon, krylov_dim=args.krylov,
                                  tol=args.tol, dt=cfg.dt, seed=args.seed or 0)
    print(f"omega0        = {fmt(res.omega0)}")
    print(f"|lambda|      = {fmt(res.dominant_modulus)}")
    print(f"ritz_residual = {fmt(res.ritz_residual)}")
    print(f"horizon       = {fmt(res.horizon)}  dt = {fmt(res.dt)}  krylov = {res.krylov_dim}")
    print(f"complex_pair  = {res.complex_pair}")
    if res.message:
        print(res.message)
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_verify(args) -> int:
    """Run the built-in invariant suite on the configured scenario."""
    params, cfg, _ = load_config(args.config)
    grid = cfg.make_grid(params)
    op = LinearizedOp.build(params, grid)
    sol = op.ekman
    checks: list[tuple[str, bool, str]] = []

    def add(name, ok, detail):
        checks.append((name, ok, detail))

    # closed-form spiral satisfies the steady balance on the grid
    from . import chebyshev as cheb
    prof = sol.profile(grid.z)
    c = cheb.vals_to_coeffs(prof, axis=-1)
    d2 = cheb.deriv_coeffs(cheb.deriv_coeffs(c, scale=grid.dz_scale), scale=grid.dz_scale)
    d2v = cheb.coeffs_to_vals(d2, axis=-1)
    perp = np.stack([-prof[1], prof[0]])
    resid = np.abs(params.nu_z * d2v - params.f * perp).max()
    tol = 1e-8 * (1.0 + np.abs(prof).max())
    add("equilibrium_residual", resid <= tol, f"{resid:.3e} <= {tol:.3e}")

    bc_bot = np.abs(sol.profile(-params.h) - np.array(params.v_g)).max()
    bc_top = np.abs(sol.derivative(0.0) - np.array(params.tau)).max()
    add("bottom_bc", bc_bot <= 1e-10 * (1.0 + abs(max(params.v_g, key=abs))),
        f"{bc_bot:.3e}")
    add("surface_bc", bc_top <= 1e-10 * (1.0 + abs(max(params.tau, key=abs))),
        f"{bc_top:.3e}")

    report = smallness_constant(params)
    ident = abs(report.value - sup_derivative_bound(sol) * params.h**4
                / (2.0 * params.nu_h * params.nu_z))
    add("smallness_identity", ident <= 1e-12 * max(report.value, 1.0), f"{ident:.3e}")

    from .hydrostatics import project
    from .field import inner as f_inner
    rng_checks = []
    for seed in range(5):
        v = random_field(grid, seed, amplitude=1.0, slope=2.0)
        pv = project(v)
        ppv = project(pv)
        idem = np.abs(ppv.data - pv.data).max()
        ortho = abs(f_inner(v - pv, pv))
        rng_checks.append(idem <= 1e-12 * (1.0 + np.abs(pv.data).max())
                          and ortho <= 1e-10 * max(l2_norm(v) ** 2, 1.0))
    add("projection_idempotent_orthogonal", all(rng_checks), f"{len(rng_checks)} samples")

    from .diagnostics import record as make_record
    slacks_ok = True
    for seed in range(5):
        v = project_keep_bc(random_field(grid, 100 + seed, amplitude=1.0, slope=2.0))
        rec = make_record(v, 0.0, op)
        slacks_ok &= rec.jensen_slack >= -1e-10 and rec.poincare_slack >= -1e-10
    add("jensen_poincare_slacks", slacks_ok, "5 samples")

    ok_all = True
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name} ({detail})")
        ok_all &= ok
    return EXIT_OK if ok_all else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ekmanflow",
                                description="Wind-driven rotating layer simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def add_config(sp):
        sp.add_argument("--config", required=True, help="path to config file")

    sp = sub.add_parser("check", help="print spiral data and the regime verdict")
    add_config(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("ekman", help="sample the spiral profile to CSV")
    add_config(sp)
    sp.add_argument("--samples", type=int, default=101)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_ekman)

    sp = sub.add_parser("simulate", help="run the time integration")
    add_config(sp)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("spectrum", help="estimate the spectral bound omega0")
    add_config(sp)
    sp.add_argument("--horizon", type=float, default=None)
    sp.add_argument("--krylov", type=int, default=20)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("verify", help="run the invariant suite")
    add_config(sp)
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
