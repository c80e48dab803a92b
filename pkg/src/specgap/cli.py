"""Command line interface.

Subcommands bind the pipeline stages:

    specgap hill      --config cfg --out DIR     spectrum + discriminant
    specgap kerr      --config cfg --out DIR     full invariant bundle
    specgap compare   --config cfg --out DIR     equivalence verdict
    specgap collapse  --config cfg --out DIR     oscillator + signature
    specgap evaporate --config cfg --out DIR     operator algebra run

Config files are plain "key = value" text; `--print-defaults` shows every
knob.  Exit codes: 0 success, 1 usage/config error, 2 numeric failure.
Outputs are deterministic for a fixed config and seed; figures are rendered
next to the CSVs unless --no-plots is given.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import curves, dynamics, hill, kerr, report
from .gridfield import write_csv

DEFAULTS = {
    "hill": {
        "potential": "mathieu",      # mathieu | free | constant | cos2 | samples
        "constant": "0.0",
        "n_pairs": "4",
        "n_disc_samples": "400",
        "seed": "0",
    },
    "kerr": {
        "mass": "1.0",
        "spin": "0.5",
        "eps": "0.05",
        "m_trunc": "2",
        "coefficient": "0,0",
        "n_points": "6",
        "radius": "0.3",
        "res_t": "4", "res_x": "6", "res_z": "33", "res_y": "6",
        "seed": "0",
    },
    "compare": {
        "mass_a": "1.0", "spin_a": "0.5",
        "mass_b": "1.0", "spin_b": "0.5",
        "eps": "0.05",
        "m_trunc": "2",
        "coefficient": "0,0",
        "n_points": "4",
        "radius": "0.3",
        "tol": "1e-6",
        "seed": "0",
    },
    "collapse": {
        "damping": "0.2",            # constant damping preset
        "damping_slope": "0.0",
        "u0": "1.0", "du0": "0.0",
        "t_max": "40.0", "dt": "0.02",
        "signature_degree": "1",
        "seed": "0",
    },
    "evaporate": {
        "dim": "9",
        "n_ops": "4",
        "kind": "E",
        "sigma": "2.0",
        "strength": "0.05",
        "spacing": "0.01",
        "planck": "1e-3",
        "seed": "0",
    },
}


class ConfigError(ValueError):
    pass


def parse_config(path) -> dict:
    out = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("line %d: expected 'key = value'" % ln)
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


def merged_config(sub: str, path) -> dict:
    cfg = dict(DEFAULTS[sub])
    if path:
        user = parse_config(path)
        unknown = set(user) - set(cfg)
        if unknown:
            raise ConfigError("unknown keys for %s: %s"
                              % (sub, sorted(unknown)))
        cfg.update(user)
    return cfg


def write_manifest(outdir, sub, cfg, seed, extra=None):
    lines = ["subcommand %s" % sub, "seed %d" % seed]
    for key in sorted(cfg):
        lines.append("%s %s" % (key, cfg[key]))
    for line in extra or []:
        lines.append(line)
    with open(os.path.join(outdir, "manifest.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _potential(cfg):
    kind = cfg["potential"]
    if kind == "free":
        return hill.HillPotential.from_callable(lambda x: 0.0 * np.asarray(x))
    if kind == "constant":
        c = float(cfg["constant"])
        return hill.HillPotential.from_callable(
            lambda x: c + 0.0 * np.asarray(x))
    if kind == "mathieu":
        return hill.HillPotential.from_callable(
            lambda x: 2.0 * np.cos(2 * np.pi * np.asarray(x)))
    if kind == "cos2":
        return hill.HillPotential.from_callable(
            lambda x: 2.0 * np.cos(2 * np.pi * np.asarray(x))
            + np.cos(4 * np.pi * np.asarray(x)))
    raise ConfigError("unknown potential %r" % kind)


def cmd_hill(cfg, outdir, seed, plots=True) -> int:
    q = _potential(cfg)
    n = int(cfg["n_pairs"])
    bundle = hill.periodic_spectrum(q, n)
    hill.spectrum_to_csv(os.path.join(outdir, "spectrum.csv"), bundle)
    lo = float(bundle.lams[0]) - 2.0
    hi = float(bundle.lams[-1]) + 2.0
    ls = np.linspace(lo, hi, int(cfg["n_disc_samples"]))
    ds = np.array([hill.discriminant(q, l) for l in ls])
    write_csv(os.path.join(outdir, "discriminant.csv"),
              ["lambda", "discriminant"],
              [[float(a), float(b)] for a, b in zip(ls, ds)])
    if plots:
        report.spectrum_figure(os.path.join(outdir, "spectrum.png"),
                               bundle, (ls, ds))
        report.gap_width_figure(os.path.join(outdir, "gap_widths.png"),
                                bundle)
    write_manifest(outdir, "hill", cfg, seed)
    return 0


def cmd_kerr(cfg, outdir, seed, plots=True) -> int:
    m, a = float(cfg["mass"]), float(cfg["spin"])
    if not (0.0 < a < m):
        raise ConfigError("require 0 < spin < mass")
    p = kerr.KerrParams(m=m, a=a, eps=float(cfg["eps"]))
    res = (int(cfg["res_t"]), int(cfg["res_x"]),
           int(cfg["res_z"]), int(cfg["res_y"]))
    chart = kerr.representative_set(p, res)
    kerr.loci_to_csv(os.path.join(outdir, "loci.csv"), p)
    kerr.index_table_csv(os.path.join(outdir, "index_table.csv"))
    forms = kerr.kerr_normal_forms(p, chart)
    got = {ij: nf.s_index for ij, nf in forms.items()}
    if got != kerr.DESIGNATED_INDEX:
        raise kerr.IndexTableMismatch(str(got))
    ij = tuple(int(v) for v in cfg["coefficient"].split(","))
    n_pts = int(cfg["n_points"])
    radius = float(cfg["radius"])
    angles = np.linspace(0.1, np.pi / 2 - 0.1, n_pts)
    points = [(radius * np.cos(t), radius * np.sin(t)) for t in angles]
    entries = kerr.kerr_invariants(p, points, int(cfg["m_trunc"]),
                                   coefficient=ij, chart=chart)
    curves.period_matrices_to_csv(
        os.path.join(outdir, "period_matrices.csv"),
        [((x, y), pm) for x, y, pm, _ in entries])
    rows = []
    for x, y, pm, T in entries:
        rows.append([float(x), float(y),
                     float(T) if T is not None else float("nan"), pm.m])
    write_csv(os.path.join(outdir, "optimized_potentials.csv"),
              ["x", "y", "T", "genus"], rows)
    spec_rows = []
    for idx, (x, y, pm, T) in enumerate(entries):
        spec_rows.append([idx, float(x), float(y), pm.m])
    write_csv(os.path.join(outdir, "points.csv"),
              ["index", "x", "y", "genus"], spec_rows)
    if plots:
        report.locus_figure(os.path.join(outdir, "loci.png"), p)
        report.period_matrix_figure(
            os.path.join(outdir, "period_matrices.png"), entries)
    write_manifest(outdir, "kerr", cfg, seed,
                   ["index_table " + " ".join(
                       "%d%d:%d" % (i, j, kerr.DESIGNATED_INDEX[(i, j)])
                       for (i, j) in sorted(kerr.DESIGNATED_INDEX))])
    return 0


def cmd_compare(cfg, outdir, seed, plots=True) -> int:
    eps = float(cfg["eps"])
    pa = kerr.KerrParams(float(cfg["mass_a"]), float(cfg["spin_a"]), eps)
    pb = kerr.KerrParams(float(cfg["mass_b"]), float(cfg["spin_b"]), eps)
    ij = tuple(int(v) for v in cfg["coefficient"].split(","))
    n_pts = int(cfg["n_points"])
    radius = float(cfg["radius"])
    angles = np.linspace(0.1, np.pi / 2 - 0.1, n_pts)
    points = [(radius * np.cos(t), radius * np.sin(t)) for t in angles]
    m_trunc = int(cfg["m_trunc"])
    ea = kerr.kerr_invariants(pa, points, m_trunc, coefficient=ij)
    eb = kerr.kerr_invariants(pb, points, m_trunc, coefficient=ij)
    seta = [pm for _, _, pm, _ in ea]
    setb = [pm for _, _, pm, _ in eb]
    equal, dev = curves.compare_invariants(seta, setb, float(cfg["tol"]))
    with open(os.path.join(outdir, "verdict.txt"), "w") as fh:
        fh.write("equivalent %s\n" % ("yes" if equal else "no"))
        fh.write("max_deviation %.17g\n" % dev)
        fh.write("ordering lexicographic in (coefficient, point index, "
                 "row-major matrix entries)\n")
    write_manifest(outdir, "compare", cfg, seed)
    return 0


def cmd_collapse(cfg, outdir, seed, plots=True) -> int:
    F0 = float(cfg["damping"])
    F1 = float(cfg["damping_slope"])
    F = lambda t: F0 + F1 * t
    traj = dynamics.simulate_collapse(F, float(cfg["u0"]), float(cfg["du0"]),
                                      float(cfg["dt"]), float(cfg["t_max"]))
    dynamics.trajectory_to_csv(os.path.join(outdir, "trajectory.csv"), traj)
    table = dynamics.fit_damping(traj)
    write_csv(os.path.join(outdir, "damping_table.csv"),
              ["amplitude", "damping", "t"],
              [[float(a), float(f), float(t)] for a, f, t in table])
    sig = dynamics.polynomial_signature(table, int(cfg["signature_degree"]))
    dynamics.signature_manifest(os.path.join(outdir, "signature.txt"), sig)
    accepted, msg = dynamics.no_go_test(sig, sig)
    with open(os.path.join(outdir, "no_go.txt"), "w") as fh:
        fh.write("self_test %s\n%s\n" % (accepted, msg))
    if plots:
        report.trajectory_figure(os.path.join(outdir, "trajectory.png"), traj)
    write_manifest(outdir, "collapse", cfg, seed)
    return 0


def cmd_evaporate(cfg, outdir, seed, plots=True) -> int:
    dim = int(cfg["dim"])
    if dim % 2 == 0:
        raise ConfigError("dim must be odd (band-edge vector 2n+1)")
    spacing = float(cfg["spacing"])
    planck = float(cfg["planck"])
    if spacing < planck:
        raise ConfigError("operator spacing below the Planck bound")
    kind = cfg["kind"]
    n_ops = int(cfg["n_ops"])
    ops = [dynamics.make_operator(kind, (i + 1) * spacing, dim,
                                  sigma=float(cfg["sigma"]),
                                  strength=float(cfg["strength"]),
                                  seed=seed + i)
           for i in range(n_ops)]
    edges = np.sort(np.concatenate([[0.0],
                                    np.arange(1, dim // 2 + 1) ** 2 * 9.87
                                    + np.linspace(0.2, 0.4, dim // 2),
                                    np.arange(1, dim // 2 + 1) ** 2 * 9.87]))
    state = dynamics.SpectralState(edges)
    log = []
    widths = [state.gap_widths()]
    st = state
    for op in ops:
        st = dynamics.apply(op, st, log)
        widths.append(st.gap_widths())
    write_csv(os.path.join(outdir, "gap_widths.csv"),
              ["step"] + ["gap%d" % (i + 1) for i in range(state.n_gaps)],
              [[float(i)] + [float(w) for w in ws]
               for i, ws in enumerate(widths)])
    _, fro = dynamics.commutator(ops[0], ops[-1])
    with open(os.path.join(outdir, "operators.txt"), "w") as fh:
        fh.write("kind %s\nn_ops %d\ncommutator_fro %.17g\n"
                 % (kind, n_ops, fro))
        for entry in log:
            fh.write("projection %s gap=%d raw=%.17g applied=%.17g\n" % entry)
    if plots:
        report.gap_evolution_figure(os.path.join(outdir, "gap_widths.png"),
                                    widths)
    write_manifest(outdir, "evaporate", cfg, seed)
    return 0


COMMANDS = {
    "hill": cmd_hill,
    "kerr": cmd_kerr,
    "compare": cmd_compare,
    "collapse": cmd_collapse,
    "evaporate": cmd_evaporate,
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="specgap",
                                 description="Hill-operator spectral "
                                 "invariants of singular metric data")
    ap.add_argument("subcommand", choices=sorted(COMMANDS))
    ap.add_argument("--config", default=None, help="key = value config file")
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("--jobs", type=int, default=1,
                    help="job-level parallelism (outputs are serialized)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--print-defaults", action="store_true")
    ap.add_argument("--no-plots", action="store_true",
                    help="skip figure rendering")
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    if args.print_defaults:
        for key, val in sorted(DEFAULTS[args.subcommand].items()):
            print("%s = %s" % (key, val))
        return 0
    if args.out is None:
        print("error: --out is required", file=sys.stderr)
        return 1
    try:
        cfg = merged_config(args.subcommand, args.config)
    except (ConfigError, OSError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 1
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as exc:
        print("output error: %s" % exc, file=sys.stderr)
        return 1
    np.random.seed(args.seed)
    try:
        return COMMANDS[args.subcommand](cfg, args.out, args.seed,
                                         plots=not args.no_plots)
    except (ConfigError, ValueError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 1
    except (hill.SpectrumError, curves.CurveError, dynamics.DynamicsError,
            kerr.IndexTableMismatch, np.linalg.LinAlgError) as exc:
        print("numeric failure: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
