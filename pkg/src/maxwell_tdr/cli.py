"""Command-line front end: ``maxwell-tdr {forward,invert,pipeline,study,basis}``.

Every run is driven by one JSON document (:class:`RunConfig`); the config is
copied into every report (minus the output location) so that a result can be
traced back to its inputs.
Errors raised by the package map to category-specific exit codes.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import tempfile
import time
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .basis import BasisSet, TimeGrid, stiffness, weighted_gram
from .data import NoiseSpec, add_noise, load_record, project_record, save_record
from .errors import ConfigurationError, MaxwellTDRError
from .fields import Grid3
from .forward import DomainReachWarning, ForwardConfig, simulate
from .inverse import QRConfig, invert
from .phantoms import TEST_IDS, reference_medium, phantom, phantom_regions, region_peak_error
from .vtk import write_vtk


@dataclass
class RunConfig:
    test_id: int = 1
    grid_n: int = 20
    T: float = 2.5
    num_samples: int = 73
    padded_extent: float = 2.5
    N: int = 15
    epsilon_reg: float = 1e-6
    delta: float = 0.10
    seed: int = 0
    cg_tol: float = 1e-8
    cg_max_iter: int = 5000
    preconditioner: str = "identity"
    trace_variant: str = "normal-derivative"
    time_rule: str = "trapezoid"
    amplitude_scale: float = 1.0
    output_dir: str = "out"

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            want = {"int": int, "float": float, "str": str}[f.type]
            if want is float and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
                setattr(self, f.name, value)
            if not isinstance(value, want) or isinstance(value, bool):
                raise ConfigurationError(f"config key {f.name!r} must be {f.type}, got {value!r}")
        if self.test_id not in TEST_IDS:
            raise ConfigurationError(f"config key 'test_id' must be one of {TEST_IDS}, got {self.test_id}")
        if self.grid_n < 4:
            raise ConfigurationError("config key 'grid_n' must be >= 4")
        if self.num_samples < 2 or not self.T > 0:
            raise ConfigurationError("config keys 'T' and 'num_samples' must describe a time grid")
        if not self.delta >= 0:
            raise ConfigurationError("config key 'delta' must be >= 0")
        if self.time_rule not in ("trapezoid", "gregory"):
            raise ConfigurationError("config key 'time_rule' must be 'trapezoid' or 'gregory'")
        # delegate the solver keys to their own validation
        self.qr_config()
        self.forward_config()

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigurationError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigurationError(f"unknown config key(s): {', '.join(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path):
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigurationError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    def to_dict(self):
        return asdict(self)

    def grid(self):
        return Grid3.cube(self.grid_n)

    def time_grid(self):
        return TimeGrid(self.T, self.num_samples)

    def forward_config(self):
        return ForwardConfig(self.grid(), self.padded_extent, self.time_grid())

    def qr_config(self):
        return QRConfig(
            N=self.N,
            epsilon_reg=self.epsilon_reg,
            cg_tol=self.cg_tol,
            cg_max_iter=self.cg_max_iter,
            preconditioner=self.preconditioner,
            trace_variant=self.trace_variant,
            time_rule=self.time_rule,
        )


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_config(args):
    doc = {}
    if getattr(args, "config", None):
        doc = json.loads(Path(args.config).read_text()) if Path(args.config).is_file() else None
        if doc is None:
            raise ConfigurationError(f"config file not found: {args.config}")
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        doc[key.strip()] = _parse_value(value)
    for key in ("test_id", "delta", "seed", "output_dir"):
        value = getattr(args, key, None)
        if value is not None:
            doc[key] = value
    return RunConfig.from_dict(doc)


# ---------------------------------------------------------------------------
# reports


def error_report(E_comp, cfg, solve=None, extra=None):
    """Per-region peak errors plus the Omega-wide L2 error of ``E_comp``."""
    truth = phantom(cfg.test_id, E_comp.grid, cfg.amplitude_scale)
    rows = []
    for reg in phantom_regions(cfg.test_id):
        peak, rel = region_peak_error(E_comp, reg, cfg.test_id)
        rows.append({
            "region": reg.label,
            "component": reg.component + 1,
            "amplitude": reg.amplitude,
            "peak": peak,
            "relative_error": rel,
            "published_peak": reg.published_peak,
            "published_error": reg.published_error,
        })
    diff = E_comp.values - truth.values
    h3 = E_comp.grid.cell_volume
    l2 = float(np.sqrt(h3 * np.sum(diff * diff)))
    ref = float(np.sqrt(h3 * np.sum(truth.values ** 2)))
    # the output location is not part of the run; leave it out so reruns elsewhere match
    config = {k: v for k, v in cfg.to_dict().items() if k != "output_dir"}
    report = {
        "regions": rows,
        "l2_error": l2,
        "l2_relative": l2 / ref if ref else float("nan"),
        "metadata": {"config": config, "seed": cfg.seed},
    }
    if solve is not None:
        s = solve.to_dict()
        s.pop("residual_history")
        # timings vary between runs; reports must be reproducible byte for byte
        s.pop("wall_time")
        s["final_residual"] = solve.residual_history[-1]
        report["solve"] = s
    if extra:
        report["metadata"].update(extra)
    return report


def write_report(report, out_dir, stem="report"):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jpath = out_dir / f"{stem}.json"
    jpath.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    cpath = out_dir / f"{stem}.csv"
    with cpath.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["region", "component", "amplitude", "peak", "relative_error", "published_peak", "published_error"])
        for r in report["regions"]:
            w.writerow([r["region"], r["component"], r["amplitude"], repr(r["peak"]),
                        repr(r["relative_error"]), r["published_peak"], r["published_error"]])
        w.writerow(["omega-l2", "", "", "", repr(report["l2_relative"]), "", ""])
    return jpath, cpath


def format_table(report):
    lines = ["%-20s %9s %9s %9s %9s %9s" % ("region", "amplitude", "peak", "error", "pub. pk", "pub. err")]
    for r in report["regions"]:
        lines.append("%-20s %9.4g %9.4f %8.2f%% %9.4g %8.2f%%" % (
            r["region"], r["amplitude"], r["peak"], 100 * r["relative_error"],
            r["published_peak"], 100 * r["published_error"]))
    lines.append("Omega-wide relative L2 error: %.4f" % report["l2_relative"])
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# commands


def run_forward(cfg, out_dir=None):
    """Simulate the configured test; returns ``(record, truth)``."""
    fc = cfg.forward_config()
    truth = phantom(cfg.test_id, fc.omega, cfg.amplitude_scale)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DomainReachWarning)
        record = simulate(truth.values, fc, trace_variant=cfg.trace_variant)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        save_record(record, out_dir / "record.mxtdr")
        write_vtk(truth, out_dir / "phantom.vtk", title=f"true initial field, test {cfg.test_id}")
    return record, truth


def run_invert(record, cfg, out_dir=None):
    """Noise, projection and inversion of ``record``; returns ``(E_comp, report)``."""
    if record.trace_variant != cfg.trace_variant:
        raise ConfigurationError(
            f"record carries the {record.trace_variant!r} trace, config key 'trace_variant' says {cfg.trace_variant!r}")
    noisy = add_noise(record, NoiseSpec(cfg.delta, cfg.seed))
    basis = BasisSet(cfg.N, record.time_grid.T)
    modes = project_record(noisy, basis, cfg.time_rule)
    grid = record.grid
    E_comp, _, solve = invert(modes, reference_medium(grid), basis, cfg.qr_config())
    report = error_report(E_comp, cfg, solve)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_vtk(E_comp, out_dir / "E_comp.vtk", title=f"reconstructed initial field, test {cfg.test_id}")
        write_report(report, out_dir)
    return E_comp, report


def solve_line(report, seconds):
    # wall time goes to the console only; reports stay reproducible
    s = report["solve"]
    state = "converged" if s["converged"] else "stopped"
    return f"CG {state} after {s['iterations']} iterations, residual {s['final_residual']:.2e}, {seconds:.1f} s"


def cmd_forward(args):
    cfg = build_config(args)
    run_forward(cfg, cfg.output_dir)
    print(f"wrote {Path(cfg.output_dir) / 'record.mxtdr'} and {Path(cfg.output_dir) / 'phantom.vtk'}")
    return 0


def cmd_invert(args):
    cfg = build_config(args)
    record = load_record(args.record)
    t0 = time.perf_counter()
    _, report = run_invert(record, cfg, cfg.output_dir)
    print(format_table(report))
    print(solve_line(report, time.perf_counter() - t0))
    return 0


def cmd_pipeline(args):
    cfg = build_config(args)
    t0 = time.perf_counter()
    if args.workspace:
        ws = Path(args.workspace)
        record, _ = run_forward(cfg, ws)
        _, report = run_invert(load_record(ws / "record.mxtdr"), cfg, ws)
    else:
        with tempfile.TemporaryDirectory() as tmp:
            record, _ = run_forward(cfg, tmp)
            _, report = run_invert(load_record(Path(tmp) / "record.mxtdr"), cfg, None)
        write_report(report, cfg.output_dir)
    print(f"test {cfg.test_id}, delta = {cfg.delta:g}, seed = {cfg.seed}")
    print(format_table(report))
    print(solve_line(report, time.perf_counter() - t0))
    return 0


def parse_schedule(text):
    """``"0.10:1e-6,0.05:5e-7"`` into ``[(0.1, 1e-6), (0.05, 5e-7)]``."""
    out = []
    for item in text.split(","):
        try:
            d, e = item.split(":")
            out.append((float(d), float(e)))
        except ValueError:
            raise ConfigurationError(f"bad schedule entry {item!r}; expected delta:epsilon") from None
    return out


def check_schedule(schedule):
    """Warn unless ``delta^2 / epsilon`` shrinks along the noisy part of the schedule."""
    ratios = [d * d / e for d, e in schedule if d > 0]
    if any(b >= a for a, b in zip(ratios, ratios[1:])):
        warnings.warn("schedule does not drive delta^2/epsilon to zero", UserWarning, stacklevel=2)


def run_study(cfg, schedule, seeds, out_csv=None, progress=None):
    """One inversion per (delta, epsilon, seed); the record is simulated once."""
    check_schedule(schedule)
    record, _ = run_forward(cfg)
    rows = []
    for delta, eps in schedule:
        for seed in (seeds if delta > 0 else seeds[:1]):
            c = RunConfig.from_dict({**cfg.to_dict(), "delta": delta, "epsilon_reg": eps, "seed": seed})
            _, rep = run_invert(record, c)
            row = {"delta": delta, "epsilon_reg": eps, "seed": seed,
                   "l2_error": rep["l2_error"], "l2_relative": rep["l2_relative"],
                   "iterations": rep["solve"]["iterations"]}
            for r in rep["regions"]:
                row[r["region"]] = r["relative_error"]
            rows.append(row)
            if progress:
                progress(row)
    if out_csv is not None:
        out_csv = Path(out_csv)
        out_csv.parent.mkdir(parents=True, exist_ok=True)
        with out_csv.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            for row in rows:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return rows


def cmd_study(args):
    cfg = build_config(args)
    schedule = parse_schedule(args.schedule)
    seeds = [int(s) for s in args.seeds.split(",")]
    out = Path(cfg.output_dir) / "study.csv"
    run_study(cfg, schedule, seeds, out, progress=lambda r: print(
        "delta=%g eps=%g seed=%d L2=%.4f" % (r["delta"], r["epsilon_reg"], r["seed"], r["l2_relative"])))
    print(f"wrote {out}")
    return 0


def basis_tables(N, T, num_times=101):
    """Psi table on a uniform time grid, Gram residual and stiffness matrix."""
    b = BasisSet(N, T)
    t = np.linspace(0.0, T, num_times)
    psi = b.values_at(t)
    gram = weighted_gram(b)
    return t, psi, np.abs(gram - np.eye(N + 1)), stiffness(b)


def cmd_basis(args):
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t, psi, gres, s = basis_tables(args.N, args.T, args.num_times)
    with (out / "psi.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"psi_{n}" for n in range(args.N + 1)])
        for k in range(t.size):
            w.writerow([repr(float(t[k]))] + [repr(float(v)) for v in psi[:, k]])
    for name, mat in (("gram_residual", gres), ("stiffness", s)):
        np.savetxt(out / f"{name}.csv", mat, delimiter=",", fmt="%.17g")
    print(f"max |Gram - I| = {gres.max():.3e}; wrote psi.csv, gram_residual.csv, stiffness.csv to {out}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="maxwell-tdr", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON RunConfig document")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        sp.add_argument("--output-dir", dest="output_dir")

    sp = sub.add_parser("forward", help="simulate a test and write its boundary record")
    common(sp)
    sp.add_argument("--test-id", dest="test_id", type=int)
    sp.set_defaults(func=cmd_forward)

    sp = sub.add_parser("invert", help="reconstruct the initial field from a record")
    common(sp)
    sp.add_argument("record")
    sp.add_argument("--test-id", dest="test_id", type=int)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_invert)

    sp = sub.add_parser("pipeline", help="forward + invert, with a table against the published numbers")
    common(sp)
    sp.add_argument("--test-id", dest="test_id", type=int)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workspace", help="keep intermediate files here instead of a temp dir")
    sp.set_defaults(func=cmd_pipeline)

    sp = sub.add_parser("study", help="noise/regularization sweep written as CSV")
    common(sp)
    sp.add_argument("--test-id", dest="test_id", type=int)
    sp.add_argument("--schedule", default="0.10:1e-6,0.05:5e-7,0.02:2e-7",
                    help="comma separated delta:epsilon pairs")
    sp.add_argument("--seeds", default="0,1,2")
    sp.set_defaults(func=cmd_study)

    sp = sub.add_parser("basis", help="dump basis tables")
    sp.add_argument("--N", type=int, default=15)
    sp.add_argument("--T", type=float, default=2.5)
    sp.add_argument("--num-times", dest="num_times", type=int, default=101)
    sp.add_argument("--output-dir", dest="output_dir", default="basis_out")
    sp.set_defaults(func=cmd_basis)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MaxwellTDRError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
