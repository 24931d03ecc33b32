"""Command-line pipeline: fom, basis, rom, compare, dlr.

Exit codes: 0 success, 2 configuration/validation error, 3 numerical
failure.  All outputs land in the configured output directory; reruns with
the same config and seed are byte-identical.
"""

import argparse
import os
import sys
import time

import numpy as np

from . import basis as basis_mod
from . import dlr as dlr_mod
from . import rom as rom_mod
from .config import BASIS_METHODS, load_config
from .errors import ConfigError, NumericalError, ValidationError
from .integrators import hamiltonian_series, integrate
from .models import ParameterSet, build_model, congruence_factor
from .snapio import append_csv_row, read_snapshot, write_csv, write_snapshot
from .symplectic import is_symplectic

DIAG_HEADER = ("t", "state_err", "H_fom", "H_rom", "H_gap")
COMPARE_HEADER = ("method", "k", "offline_s", "online_s",
                  "max_state_error", "max_H_drift")
REPORT_HEADER = ("method", "k", "rows", "cols", "projection_error",
                 "discarded_energy", "status")


def _prepare(cfg):
    model = build_model(cfg.model)
    params = ParameterSet(samples=cfg.samples, time_grid=cfg.time_grid())
    os.makedirs(cfg.output_dir, exist_ok=True)
    return model, params


def _out(cfg, name):
    return os.path.join(cfg.output_dir, name)


def cmd_fom(cfg):
    """Integrate the full model for every parameter; write trajectories,
    the assembled snapshot matrix and the energy CSV."""
    model, params = _prepare(cfg)
    snaps = basis_mod.assemble_snapshots(model, params, scheme=cfg.scheme)
    write_snapshot(_out(cfg, "snapshots.psds"), snaps.data, snaps.provenance)

    n_t = params.time_grid.size
    energy_rows = []
    for j, mu in enumerate(params.samples):
        cols = slice(j * n_t, (j + 1) * n_t)
        states = snaps.data[:, cols]
        prov = snaps.provenance[cols]
        write_snapshot(_out(cfg, f"fom_traj_p{j:03d}.psds"), states, prov)
        for i, t in enumerate(params.time_grid):
            energy_rows.append(
                (str(j), t, model.hamiltonian(states[:, i], mu))
            )
    write_csv(_out(cfg, "fom_energy.csv"), ("param_index", "t", "H"), energy_rows)

    if model.kind == "noncanonical":
        write_snapshot(_out(cfg, "structure_K.psds"),
                       congruence_factor(model.n, int(cfg.model.get("seed", 0))))
    print(f"fom: {params.n_samples} trajectories x {n_t} instants "
          f"-> {cfg.output_dir}")
    return 0


def _build_basis(cfg, model, params, method, k):
    if method == "greedy":
        report = basis_mod.greedy_symplectic_basis(
            model, params, k_max=k, tol=cfg.greedy_tol,
            indicator=cfg.greedy_indicator, scheme=cfg.scheme,
        )
        return report, report.basis.matrix
    snap_path = _out(cfg, "snapshots.psds")
    if not os.path.exists(snap_path):
        raise ConfigError(f"snapshot file not found: {snap_path} (run 'fom' first)")
    data, provenance = read_snapshot(snap_path)
    M = basis_mod.SnapshotMatrix(data=data, provenance=provenance or
                                 [(np.zeros(1), 0.0)] * data.shape[1])
    if method == "cotangent":
        report = basis_mod.cotangent_lift(M, k)
    elif method == "complexsvd":
        report = basis_mod.complex_svd_basis(M, k, complex_order=cfg.complex_order)
    elif method == "svdlike":
        report = basis_mod.psd_svd_like_basis(M, k)
    elif method == "pod":
        U = basis_mod.pod_basis(M, 2 * k)
        err = float(np.linalg.norm(M.data - U @ (U.T @ M.data)))
        svals = np.linalg.svd(M.data, compute_uv=False)
        report = basis_mod.BasisReport(
            method="pod", basis=None, projection_error=err,
            spectrum_retained=svals[: 2 * k], spectrum_discarded=svals[2 * k:],
        )
        return report, U
    else:
        raise ConfigError(f"unknown basis method '{method}'")
    return report, report.basis.matrix


def cmd_basis(cfg, method=None, k=None):
    """Generate a reduced basis and append its report row."""
    method = method or cfg.basis_method
    k = int(k) if k is not None else cfg.basis_k
    if method not in BASIS_METHODS:
        raise ConfigError(f"'{method}' is not one of {BASIS_METHODS}")
    model, params = _prepare(cfg)
    if not 1 <= k <= model.n:
        raise ConfigError(f"need 1 <= k <= n = {model.n}, got k = {k}")
    report, mat = _build_basis(cfg, model, params, method, k)
    write_snapshot(_out(cfg, f"basis_{method}_k{k}.psds"), mat)
    append_csv_row(
        _out(cfg, "basis_report.csv"),
        REPORT_HEADER,
        (method, str(k), str(mat.shape[0]), str(mat.shape[1]),
         report.projection_error,
         float(np.sum(np.square(report.spectrum_discarded))),
         report.status),
    )
    print(f"basis: {method} k={k} projection error "
          f"{report.projection_error:.6e}")
    return 0


def _reduce_for(model, mat):
    """Pick the reduction matching the model kind and basis structure:
    symplectic bases get the structure-preserving Galerkin reductions,
    plain orthonormal ones the POD baseline (or the congruence reduction
    for non-canonical models)."""
    scale = max(1.0, float(np.sum(mat * mat)))
    if model.kind == "noncanonical":
        return rom_mod.noncanonical_reduce(model, mat)
    symplectic = mat.shape[1] % 2 == 0 and is_symplectic(mat, tol=1e-8 * scale)
    if symplectic:
        if model.kind == "dissipative":
            return rom_mod.dissipative_reduce(model, mat)
        return rom_mod.galerkin_reduce(model, mat)
    orth = float(np.max(np.abs(mat.T @ mat - np.eye(mat.shape[1]))))
    if orth <= 1e-8 * scale:
        return rom_mod.pod_galerkin_reduce(model, mat)
    raise ValidationError("basis is neither symplectic nor orthonormal")


def _initial_coefficients(rm, y0):
    if rm.kind in ("noncanonical", "projected"):
        return rm.basis.T @ y0
    return rom_mod.reduced_initial_condition(rm.basis, y0)


def cmd_rom(cfg, basis_path):
    """Run the reduced model for every parameter and emit diagnostics."""
    if not os.path.exists(basis_path):
        raise ConfigError(f"basis file not found: {basis_path}")
    model, params = _prepare(cfg)
    mat, _ = read_snapshot(basis_path)
    if mat.shape[0] != model.dim:
        raise ConfigError(
            f"basis rows {mat.shape[0]} do not match model dimension {model.dim}"
        )
    rm = _reduce_for(model, mat)
    worst_drift = 0.0
    for j, mu in enumerate(params.samples):
        y0 = model.initial_state(mu)
        fom = integrate(model, y0, mu, params.time_grid, scheme=cfg.scheme)
        z0 = _initial_coefficients(rm, y0)
        red = rom_mod.simulate_rom(rm, z0, mu, params.time_grid)
        record = rom_mod.diagnostics(fom, red, rm.basis, model)
        write_snapshot(_out(cfg, f"rom_traj_p{j:03d}.psds"), red.states)
        write_csv(
            _out(cfg, f"rom_diag_p{j:03d}.csv"),
            DIAG_HEADER,
            zip(record.times, record.state_error, record.hamiltonian_fom,
                record.hamiltonian_rom, record.hamiltonian_gap),
        )
        worst_drift = max(worst_drift, record.gap_drift)
    print(f"rom: {params.n_samples} runs, max |gap - gap(0)| = {worst_drift:.6e}")
    return 0


def cmd_compare(cfg, methods=None):
    """Offline/online timing and accuracy summary across basis methods."""
    methods = methods or list(BASIS_METHODS)
    for m in methods:
        if m not in BASIS_METHODS:
            raise ConfigError(f"'{m}' is not one of {BASIS_METHODS}")
    model, params = _prepare(cfg)
    k = cfg.basis_k
    snaps = basis_mod.assemble_snapshots(model, params, scheme=cfg.scheme)
    write_snapshot(_out(cfg, "snapshots.psds"), snaps.data, snaps.provenance)
    rows = []
    for method in methods:
        t0 = time.perf_counter()
        _, mat = _build_basis(cfg, model, params, method, k)
        offline = time.perf_counter() - t0
        rm = _reduce_for(model, mat)
        max_err = 0.0
        max_drift = 0.0
        t0 = time.perf_counter()
        for j, mu in enumerate(params.samples):
            y0 = model.initial_state(mu)
            z0 = _initial_coefficients(rm, y0)
            red = rom_mod.simulate_rom(rm, z0, mu, params.time_grid)
            n_t = params.time_grid.size
            fom_states = snaps.data[:, j * n_t : (j + 1) * n_t]
            lifted = rm.basis @ red.states
            max_err = max(max_err, float(
                np.max(np.linalg.norm(fom_states - lifted, axis=0))
            ))
            h_rom = hamiltonian_series(rm.dynamics, red, mu)
            max_drift = max(max_drift, float(np.max(np.abs(h_rom - h_rom[0]))))
        online = time.perf_counter() - t0
        rows.append((method, str(k), offline, online, max_err, max_drift))
    write_csv(_out(cfg, "compare_summary.csv"), COMPARE_HEADER, rows)
    for row in rows:
        print(f"compare: {row[0]:<10s} k={row[1]} offline {row[2]:.3f}s "
              f"online {row[3]:.3f}s err {row[4]:.3e} drift {row[5]:.3e}")
    return 0


def cmd_dlr(cfg):
    """Evolve the time-dependent basis and report structure drift."""
    if cfg.dlr_k is None:
        raise ConfigError("the [dlr] table with field 'k' is required for 'dlr'")
    model, params = _prepare(cfg)
    A0, Z0 = dlr_mod.dlr_initialize(model, params, cfg.dlr_k)
    result = dlr_mod.dlr_integrate(A0, Z0, model, params)
    write_csv(
        _out(cfg, "dlr_structure.csv"),
        ("t", "symplectic_residual", "orthonormality_residual"),
        zip(result.times, result.symplectic_drift, result.orthonormality_drift),
    )
    err_header = ("t",) + tuple(f"err_p{j:03d}" for j in range(len(params.samples)))
    write_csv(
        _out(cfg, "dlr_errors.csv"),
        err_header,
        (tuple(row) for row in np.column_stack(
            [result.times, result.reconstruction_errors.T]
        )),
    )
    for j in range(len(params.samples)):
        write_snapshot(_out(cfg, f"dlr_traj_p{j:03d}.psds"),
                       result.reconstructions[:, j, :])
    print(f"dlr: k={cfg.dlr_k} max symplectic residual "
          f"{result.symplectic_drift.max():.3e}, max orthonormality residual "
          f"{result.orthonormality_drift.max():.3e}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hamred",
        description="Structure-preserving model reduction pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn_help in (
        ("fom", "integrate the full-order model"),
        ("basis", "generate a reduced basis from snapshots"),
        ("rom", "run the reduced-order model and diagnostics"),
        ("compare", "compare basis methods"),
        ("dlr", "run the dynamical low-rank method"),
    ):
        p = sub.add_parser(name, help=fn_help)
        p.add_argument("--config", required=True, help="TOML config file")
        if name == "basis":
            p.add_argument("--method", choices=BASIS_METHODS)
            p.add_argument("--k", type=int)
        if name == "rom":
            p.add_argument("--basis", required=True, help="basis .psds file")
        if name == "compare":
            p.add_argument("--methods", help="comma-separated method list")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "fom":
            return cmd_fom(cfg)
        if args.command == "basis":
            return cmd_basis(cfg, method=args.method, k=args.k)
        if args.command == "rom":
            return cmd_rom(cfg, args.basis)
        if args.command == "compare":
            methods = args.methods.split(",") if args.methods else None
            return cmd_compare(cfg, methods=methods)
        if args.command == "dlr":
            return cmd_dlr(cfg)
        raise ConfigError(f"unknown command {args.command}")
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
