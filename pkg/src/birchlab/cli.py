"""Command-line surface: one binary exposing the experiments, with JSON
config + flag overrides (flags win), reproducible seeded runs, and
machine-readable reports.

Exit codes: 0 all checks pass, 1 check failure, 2 usage/config error,
3 budget refusal.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .arith import congruence_count, weyl_decay_scan, weyl_inversion_check, weyl_sum, WeylTable
from .forms import (
    CutoffFunction,
    cutoff_from_spec,
    constants,
    load_form,
    probe_phi_regularity,
)
from .gridops import GridFunction, apply_average, make_sequence, maximal
from .lattice import ShellCache, enumerate_shell, scan_regular_values
from .multiplier import (
    exact_multiplier,
    kernel_of_s,
    kernel_of_s_bruteforce,
    main_term,
    piece,
    reconstruction_report,
)
from .sparse import improving_ratio, region, region_svg, sparse_form_value
from .surface import SurfaceMeasure
from .util import BudgetError, InvalidConfigError, fmt_float, stable_hash, write_csv

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


@dataclass
class ExperimentConfig:
    """Everything a run needs; hashable so outputs embed their provenance."""

    experiment: str
    form: str = "sphere-5"
    phi: str = "bump:2.0"
    lam: int | None = None
    lambdas: list = field(default_factory=list)
    lam_range: str = ""
    band: str = "0.1:100"
    q: int | None = None
    q_max: int | None = None
    L: int | None = None
    N: int | None = None
    grid: int | None = None
    label: str = ""
    sequence: str = ""
    region_name: str = ""
    p: float | None = None
    qq: float | None = None
    trials: int = 200
    seed: int = 0
    workers: int = 1
    budget: float = 2.0e8
    mesh: float = 0.05
    paths: dict = field(default_factory=dict)

    def content_hash(self) -> str:
        d = asdict(self)
        d.pop("paths")
        return stable_hash(d)


class RunReport:
    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.checks = []
        self.measured = {}
        self.t0 = time.time()

    def check(self, name: str, passed: bool, **measured):
        self.checks.append({"name": name, "passed": bool(passed), **measured})

    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def emit(self, path=None) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "tool_version": __version__,
            "config": asdict(self.config),
            "config_hash": self.config.content_hash(),
            "seed": self.config.seed,
            "checks": self.checks,
            "measured": self.measured,
            "timings": {"elapsed_s": time.time() - self.t0},
        }
        text = json.dumps(doc, indent=2, sort_keys=True, default=_json_default)
        if path:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return doc


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x)}")


def _print_checks(report: RunReport):
    for c in report.checks:
        status = "PASS" if c["passed"] else "FAIL"
        extra = {k: v for k, v in c.items() if k not in ("name", "passed")}
        print(f"[{status}] {c['name']} {extra if extra else ''}")


def default_cache_root() -> str:
    return os.environ.get("BIRCHLAB_CACHE", os.path.join(os.getcwd(), "cache"))


# -- experiment runners ---------------------------------------------------------------


def run_lattice_enumerate(cfg: ExperimentConfig, report: RunReport):
    form = load_form(cfg.form)
    phi = cutoff_from_spec(cfg.phi)
    cache = ShellCache(default_cache_root())
    shell = cache.get(form, phi, cfg.lam, box_budget=cfg.budget, workers=cfg.workers)
    report.measured.update(
        {"lambda": cfg.lam, "points": shell.size, "r_value": shell.r_value}
    )
    report.check("shell-enumerated", True, points=shell.size)
    if "csv" in cfg.paths:
        header = [f"y{i}" for i in range(form.dimension)] + ["weight"]
        rows = [list(map(int, p)) + [float(w)] for p, w in zip(shell.points, shell.weights)]
        write_csv(cfg.paths["csv"], header, rows)
    print(f"lambda={cfg.lam}: {shell.size} points, r={fmt_float(shell.r_value)}")


def run_lattice_scan(cfg: ExperimentConfig, report: RunReport):
    form = load_form(cfg.form)
    phi = cutoff_from_spec(cfg.phi)
    lo, hi = (int(x) for x in cfg.lam_range.split(":"))
    c_lo, c_hi = (float(x) for x in cfg.band.split(":"))
    rep = scan_regular_values(
        form, phi, range(lo, hi + 1), band=(c_lo, c_hi), box_budget=cfg.budget
    )
    report.measured.update(
        {
            "flagged": len(rep.flagged),
            "progressions": rep.progressions[:32],
            "scanned": len(rep.lambdas),
        }
    )
    report.check("scan-complete", True, flagged=len(rep.flagged))
    if "csv" in cfg.paths:
        write_csv(
            cfg.paths["csv"],
            ["lambda", "ratio", "flagged"],
            [
                (lam, float(r), int(lam in set(rep.flagged)))
                for lam, r in zip(rep.lambdas, rep.ratios)
            ],
        )
    print(f"scanned {len(rep.lambdas)}, flagged {len(rep.flagged)}, "
          f"progressions {len(rep.progressions)}")


def run_weyl(cfg: ExperimentConfig, report: RunReport):
    form = load_form(cfg.form)
    q = cfg.q
    table = WeylTable(form, q)
    rows = []
    n = form.dimension
    if float(q) ** n <= 1e5:
        for a in range(q):
            sl = table.slice(a)
            for b in np.ndindex(*(q,) * n):
                v = sl[b]
                rows.append([q, a] + list(b) + [v.real, v.imag])
    maxima = max(table.max_abs(a) for a in range(q))
    report.measured.update({"q": q, "max_abs": maxima})
    report.check("weyl-table", True, max_abs=maxima)
    if "csv" in cfg.paths and rows:
        header = ["q", "a"] + [f"b{i}" for i in range(n)] + ["re", "im"]
        write_csv(cfg.paths["csv"], header, rows)
    print(f"q={q}: max |F_q| over a,b = {fmt_float(maxima)}")


def run_weyl_scan(cfg: ExperimentConfig, report: RunReport):
    form = load_form(cfg.form)
    c_R = float(constants(form).c_R)
    rep = weyl_decay_scan(form, cfg.q_max, c_R, budget=cfg.budget)
    report.measured.update(
        {
            "maxima": {str(q): m for q, m in rep.maxima.items()},
            "slope": rep.slope,
            "flagged": rep.flagged,
        }
    )
    report.check("decay-scan", True, slope=rep.slope, flagged=len(rep.flagged))
    if "csv" in cfg.paths:
        write_csv(
            cfg.paths["csv"],
            ["q", "max_abs"],
            [(q, float(m)) for q, m in sorted(rep.maxima.items())],
        )
    print(f"slope over primes: {rep.slope:.4f} (flagged: {rep.flagged})")


def run_congruence(cfg: ExperimentConfig, report: RunReport):
    form = load_form(cfg.form)
    val = congruence_count(form, cfg.L, budget=cfg.budget)
    report.measured.update({"L": cfg.L, "count": val})
    report.check("congruence-count", True, value=val)
    print(f"L={cfg.L}: normalized solution count = {fmt_float(val)}")


def run_average(cfg: ExperimentConfig, report: RunReport):
    form = load_form(cfg.form)
    phi = cutoff_from_spec(cfg.phi)
    f = GridFunction.load(cfg.paths["in"])
    g = apply_average(form, phi, cfg.lam, f, mode=cfg.label or "direct",
                      box_budget=cfg.budget)
    g.save(cfg.paths["out"])
    report.check("average-applied", True)
    print(f"wrote {cfg.paths['out']}")


def run_maximal(cfg: ExperimentConfig, report: RunReport):
    form = load_form(cfg.form)
    phi = cutoff_from_spec(cfg.phi)
    f = GridFunction.load(cfg.paths["in"])
    kind, _, rest = cfg.sequence.partition(":")
    if kind == "explicit":
        seq = make_sequence("explicit", [int(x) for x in rest.split(",")], 64)
    elif kind == "lacunary":
        c, lam1, count = rest.split(",")
        seq = make_sequence("lacunary", (float(c), int(lam1)), int(count))
    else:
        raise InvalidConfigError(f"unknown sequence spec {cfg.sequence!r}")
    out, arg = maximal(form, phi, seq, f, box_budget=cfg.budget)
    out.save(cfg.paths["out"])
    report.measured["argmax_counts"] = {
        str(seq.values[i]): int(c) for i, c in zip(*np.unique(arg, return_counts=True))
    }
    report.check("maximal-applied", True)
    print(f"wrote {cfg.paths['out']}")


def run_mult_piece(cfg: ExperimentConfig, report: RunReport):
    form = load_form(cfg.form)
    phi = cutoff_from_spec(cfg.phi)
    if cfg.label in ("what", "w"):
        mg = exact_multiplier(form, phi, cfg.lam, cfg.grid, budget=cfg.budget)
    elif cfg.label == "c":
        mg = main_term(form, phi, cfg.lam, cfg.grid, N=cfg.N, budget=cfg.budget)
    else:
        mg = piece(cfg.label, form, phi, cfg.lam, cfg.grid, cfg.N, L=cfg.L,
                   budget=cfg.budget)
    report.measured.update(
        {"label": cfg.label, "sup": mg.sup_norm(), "l2_mean": mg.l2_mean(),
         "at_zero": complex(mg.value_at_zero())}
    )
    report.check("piece-sampled", True, sup=mg.sup_norm())
    if "csv" in cfg.paths:
        n, G = mg.grid.n, mg.grid.G
        rows = []
        for start in range(0, mg.grid.total, 1 << 16):
            stop = min(start + (1 << 16), mg.grid.total)
            xi = mg.grid.xi_block(start, stop)
            vals = mg.samples[start:stop]
            for row, v in zip(xi, vals):
                rows.append(list(map(float, row)) + [v.real, v.imag])
        write_csv(cfg.paths["csv"], [f"xi{i}" for i in range(n)] + ["re", "im"], rows)
    if "json" in cfg.paths:
        report.emit(cfg.paths["json"])
    print(f"{cfg.label}: sup={fmt_float(mg.sup_norm())} at0={mg.value_at_zero():.6f}")


def run_mult_recon(cfg: ExperimentConfig, report: RunReport):
    form = load_form(cfg.form)
    phi = cutoff_from_spec(cfg.phi)
    rep = reconstruction_report(form, phi, cfg.lam, cfg.N, cfg.grid,
                                workers=cfg.workers)
    report.measured.update(rep)
    report.check("partition", rep["partition_error"] < 1e-8,
                 error=rep["partition_error"])
    report.check("reconstruction", rep["reconstruction_error"] < 1e-8,
                 error=rep["reconstruction_error"])
    print(f"partition err {rep['partition_error']:.2e}, "
          f"reconstruction err {rep['reconstruction_error']:.2e}, "
          f"sup m21 {rep['sup']['m21']:.4f}")


def run_kernel_s(cfg: ExperimentConfig, report: RunReport):
    form = load_form(cfg.form)
    half = cfg.grid or 16
    box = ([-half] * form.dimension, [half] * form.dimension)
    pts, vals, l1 = kernel_of_s(form, cfg.N, box, L=cfg.L)
    report.measured.update({"l1_mass": l1})
    report.check("kernel-sampled", True, l1=l1)
    if "csv" in cfg.paths:
        rows = [list(map(int, p)) + [float(v)] for p, v in zip(pts, vals)]
        write_csv(cfg.paths["csv"],
                  [f"x{i}" for i in range(form.dimension)] + ["value"], rows)
    print(f"kernel l1 mass over box: {fmt_float(l1)}")


def run_sparse_certify(cfg: ExperimentConfig, report: RunReport):
    form = load_form(cfg.form)
    phi = cutoff_from_spec(cfg.phi)
    rep = improving_ratio(form, phi, cfg.lam, cfg.p, cfg.qq,
                          trials=cfg.trials, seed=cfg.seed, box_budget=cfg.budget)
    report.measured.update(
        {"max_ratio": rep.max_ratio, "families": rep.family_ratios}
    )
    report.check("improving-ratio", math.isfinite(rep.max_ratio),
                 max_ratio=rep.max_ratio)
    if "json" in cfg.paths:
        report.emit(cfg.paths["json"])
    print(f"lambda={cfg.lam} (1/p,1/q)=({1/cfg.p:.4f},{1/cfg.qq:.4f}): "
          f"max ratio {rep.max_ratio:.6f}")


def run_regions(cfg: ExperimentConfig, report: RunReport):
    form = load_form(cfg.form)
    names = [cfg.region_name] if cfg.region_name else ["KLM-polygon", "Sn", "Pn", "Vn"]
    regs = []
    vertices = {}
    for name in names:
        reg = region(name, form if name in ("Sn", "Vn", "Dn") else form.dimension)
        regs.append(reg)
        vertices[name] = [[str(v[0]), str(v[1])] for v in reg.vertices]
    report.measured["vertices"] = vertices
    report.check("regions-built", True)
    if "svg" in cfg.paths:
        region_svg(regs, cfg.paths["svg"])
    if "json" in cfg.paths:
        with open(cfg.paths["json"], "w") as fh:
            json.dump(vertices, fh, indent=2, sort_keys=True)
    for name in names:
        print(f"{name}: {vertices[name]}")


def run_cont_split(cfg: ExperimentConfig, report: RunReport):
    from .continuous import gaussian_field, low_high_split

    form = load_form(cfg.form)
    phi = cutoff_from_spec(cfg.phi)
    measure = SurfaceMeasure(form, phi)
    c_R = float(constants(form).c_R)
    f = gaussian_field(form.dimension, 2.0, cfg.mesh, sigma=3 * cfg.mesh)
    _, _, rep = low_high_split(f, float(cfg.N), measure, c_R)
    report.measured.update(
        {
            "K1": rep.K1,
            "K2": rep.K2,
            "parseval_gap": abs(rep.high_l2_spatial - rep.high_l2_fourier),
            "recombine_error": rep.recombine_error,
        }
    )
    report.check("parseval", abs(rep.high_l2_spatial - rep.high_l2_fourier) < 1e-6)
    report.check("recombine", rep.recombine_error < 1e-10)
    if "json" in cfg.paths:
        report.emit(cfg.paths["json"])
    print(f"N={cfg.N}: K1={rep.K1:.5f} K2={rep.K2:.5f}")


def run_selftest(cfg: ExperimentConfig, report: RunReport):
    """The exact-identity suite: finite inversion, kernel closed form,
    multiplier partition/reconstruction, congruence counts."""
    from .forms import parse_preset

    phi = cutoff_from_spec(cfg.phi)
    fast = cfg.label == "fast"
    forms_l = [("sphere-2", (1, 2, 3, 4, 6)), ("sphere-3", (1, 2, 3) if fast else (1, 2, 3, 4, 6)),
               ("cubes-2", (1, 2, 3) if fast else (1, 2, 3, 4, 6))]
    for name, Ls in forms_l:
        form = parse_preset(name)
        worst = 0.0
        for L in Ls:
            for x in np.ndindex(*(L,) * form.dimension):
                lhs, rhs = weyl_inversion_check(form, L, x)
                worst = max(worst, abs(lhs - rhs))
        report.check(f"inversion-{name}", worst < 1e-8, worst=worst)

    form2 = parse_preset("sphere-2")
    for L in (2, 6):
        half = 2 * L
        box = ([-half, -half], [half, half])
        pts, vals, _ = kernel_of_s(form2, N=2, box=box, L=L)
        bf = kernel_of_s_bruteforce(form2, L, pts)
        worst = float(np.max(np.abs(vals - bf)))
        report.check(f"kernel-s-L{L}", worst < 1e-8, worst=worst)

    form3 = parse_preset("sphere-3")
    rep = reconstruction_report(form3, phi, 9, 2, 9)
    report.check("mult-partition", rep["partition_error"] < 1e-8,
                 error=rep["partition_error"])
    report.check("mult-reconstruction", rep["reconstruction_error"] < 1e-8,
                 error=rep["reconstruction_error"])

    s5 = parse_preset("sphere-5")
    worst = max(congruence_count(s5, L) for L in (1, 2, 3, 4, 6))
    report.check("congruence-bounded", worst <= 4.0, max=worst)

    from fractions import Fraction
    reg = region("Sn", s5)
    report.check(
        "region-S2", (Fraction(25, 49), Fraction(25, 49)) in reg.vertices
    )
    _print_checks(report)


def run_cache_admin(cfg: ExperimentConfig, report: RunReport):
    cache = ShellCache(default_cache_root())
    action = cfg.label
    if action == "list":
        entries = cache.entries()
        for h, lam, path in entries:
            print(f"{h}  lambda={lam}  {path}")
        print(f"{len(entries)} cached shells")
        report.check("cache-list", True, entries=len(entries))
    elif action == "purge":
        removed = cache.purge()
        print(f"removed {removed} shells")
        report.check("cache-purge", True, removed=removed)
    elif action == "verify":
        from .forms import cutoff_from_descriptor, form_from_json

        entries = cache.entries()
        rng = np.random.default_rng(cfg.seed)
        sample = entries if len(entries) <= 8 else [
            entries[i] for i in rng.choice(len(entries), 8, replace=False)
        ]
        corrupt = []
        for _, lam, path in sample:
            try:
                header, stored = ShellCache.load_file(path)
                form = form_from_json(header["form"])
                phi = cutoff_from_descriptor(header["phi"])
                fresh = enumerate_shell(form, phi, lam, box_budget=cfg.budget)
                same = np.array_equal(stored.points, fresh.points) and np.array_equal(
                    stored.weights, fresh.weights
                )
            except Exception:
                same = False
            if not same:
                corrupt.append(path)
        report.check("cache-verify", not corrupt, corrupt=corrupt)
        print("all verified" if not corrupt else f"CORRUPT: {corrupt}")
    else:
        raise InvalidConfigError(f"unknown cache action {action!r}")


RUNNERS = {
    "lattice-enumerate": run_lattice_enumerate,
    "lattice-scan": run_lattice_scan,
    "weyl": run_weyl,
    "weyl-scan": run_weyl_scan,
    "congruence": run_congruence,
    "average": run_average,
    "maximal": run_maximal,
    "mult-piece": run_mult_piece,
    "mult-recon": run_mult_recon,
    "kernel-s": run_kernel_s,
    "sparse-certify": run_sparse_certify,
    "regions": run_regions,
    "cont-split": run_cont_split,
    "selftest": run_selftest,
    "cache": run_cache_admin,
}


def run(cfg: ExperimentConfig) -> RunReport:
    if cfg.experiment not in RUNNERS:
        raise InvalidConfigError(f"unknown experiment {cfg.experiment!r}")
    report = RunReport(cfg)
    RUNNERS[cfg.experiment](cfg, report)
    if "report" in cfg.paths:
        report.emit(cfg.paths["report"])
    return report


# -- argument parsing -------------------------------------------------------------------


def _add_common(sp):
    sp.add_argument("--form", default=None)
    sp.add_argument("--phi", default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--budget", type=float, default=None)
    sp.add_argument("--report", default=None, help="write a JSON run report")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="birchlab",
        description="numerical laboratory for discrete hypersurface averages",
    )
    ap.add_argument("--config", default=None, help="JSON config file (flags win)")
    sub = ap.add_subparsers(dest="command", required=True)

    lat = sub.add_parser("lattice").add_subparsers(dest="sub", required=True)
    p = lat.add_parser("enumerate")
    _add_common(p)
    p.add_argument("--lambda", dest="lam", type=int, required=True)
    p.add_argument("--csv")
    p = lat.add_parser("scan")
    _add_common(p)
    p.add_argument("--range", dest="lam_range", required=True, help="a:b")
    p.add_argument("--band", default="0.1:100")
    p.add_argument("--csv")

    ar = sub.add_parser("arith").add_subparsers(dest="sub", required=True)
    p = ar.add_parser("weyl")
    _add_common(p)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--csv")
    p = ar.add_parser("decay")
    _add_common(p)
    p.add_argument("--qmax", dest="q_max", type=int, required=True)
    p.add_argument("--csv")
    p = ar.add_parser("congruence")
    _add_common(p)
    p.add_argument("--L", type=int, required=True)

    ops = sub.add_parser("ops").add_subparsers(dest="sub", required=True)
    p = ops.add_parser("average")
    _add_common(p)
    p.add_argument("--lambda", dest="lam", type=int, required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", default="direct", choices=["direct", "fft"])
    p = ops.add_parser("maximal")
    _add_common(p)
    p.add_argument("--seq", required=True, help="explicit:1,2,4 or lacunary:2,1,5")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)

    mu = sub.add_parser("mult").add_subparsers(dest="sub", required=True)
    p = mu.add_parser("piece")
    _add_common(p)
    p.add_argument("--label", required=True)
    p.add_argument("--lambda", dest="lam", type=int, required=True)
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--L", type=int, default=None)
    p.add_argument("--grid", type=int, required=True)
    p.add_argument("--csv")
    p.add_argument("--json", dest="json_path")
    p = mu.add_parser("recon")
    _add_common(p)
    p.add_argument("--lambda", dest="lam", type=int, required=True)
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--grid", type=int, required=True)
    p = mu.add_parser("kernel-s")
    _add_common(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--L", type=int, default=None)
    p.add_argument("--half-range", dest="grid", type=int, default=12)
    p.add_argument("--csv")

    sp = sub.add_parser("sparse").add_subparsers(dest="sub", required=True)
    p = sp.add_parser("certify")
    _add_common(p)
    p.add_argument("--lambda", dest="lam", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", dest="qq", type=float, required=True)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--json", dest="json_path")
    p = sp.add_parser("region")
    _add_common(p)
    p.add_argument("--name", dest="region_name", required=True)
    p.add_argument("--svg")
    p.add_argument("--json", dest="json_path")

    p = sub.add_parser("regions")
    _add_common(p)
    p.add_argument("--svg")
    p.add_argument("--json", dest="json_path")

    co = sub.add_parser("cont").add_subparsers(dest="sub", required=True)
    p = co.add_parser("split")
    _add_common(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--mesh", type=float, default=0.05)
    p.add_argument("--json", dest="json_path")

    p = sub.add_parser("selftest")
    _add_common(p)
    p.add_argument("--fast", action="store_true")

    p = sub.add_parser("cache")
    _add_common(p)
    p.add_argument("action", choices=["list", "purge", "verify"])
    return ap


def config_from_args(args) -> ExperimentConfig:
    base = {}
    if args.config:
        with open(args.config) as fh:
            base = json.load(fh)
    cmd = args.command
    sub = getattr(args, "sub", None)
    experiment = {
        ("lattice", "enumerate"): "lattice-enumerate",
        ("lattice", "scan"): "lattice-scan",
        ("arith", "weyl"): "weyl",
        ("arith", "decay"): "weyl-scan",
        ("arith", "congruence"): "congruence",
        ("ops", "average"): "average",
        ("ops", "maximal"): "maximal",
        ("mult", "piece"): "mult-piece",
        ("mult", "recon"): "mult-recon",
        ("mult", "kernel-s"): "kernel-s",
        ("sparse", "certify"): "sparse-certify",
        ("sparse", "region"): "regions",
        ("regions", None): "regions",
        ("cont", "split"): "cont-split",
        ("selftest", None): "selftest",
        ("cache", None): "cache",
    }[(cmd, sub)]
    cfg = ExperimentConfig(experiment=experiment)
    for k, v in base.items():
        if hasattr(cfg, k) and k != "paths":
            setattr(cfg, k, v)
    cfg.paths = dict(base.get("paths", {}))

    def take(attr, key=None):
        v = getattr(args, attr, None)
        if v is not None:
            setattr(cfg, key or attr, v)

    for attr in ("form", "phi", "seed", "workers", "budget", "lam", "lam_range",
                 "band", "q", "q_max", "L", "N", "grid", "region_name", "p",
                 "qq", "trials", "mesh"):
        take(attr)
    if getattr(args, "label", None):
        cfg.label = args.label
    if getattr(args, "seq", None):
        cfg.sequence = args.seq
    if getattr(args, "mode", None):
        cfg.label = args.mode
    if getattr(args, "fast", False):
        cfg.label = "fast"
    if getattr(args, "action", None):
        cfg.label = args.action
    for key, attr in (("csv", "csv"), ("json", "json_path"), ("svg", "svg"),
                      ("report", "report"), ("in", "inp"), ("out", "out")):
        v = getattr(args, attr, None)
        if v:
            cfg.paths[key] = v
    return cfg


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = config_from_args(args)
        report = run(cfg)
    except BudgetError as ex:
        print(json.dumps({"error": "budget", "detail": str(ex)}), file=sys.stderr)
        return EXIT_BUDGET
    except InvalidConfigError as ex:
        print(json.dumps({"error": "config", "detail": str(ex)}), file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as ex:
        print(json.dumps({"error": "io", "detail": str(ex)}), file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK if report.passed() else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
