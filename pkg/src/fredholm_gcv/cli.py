"""Command line interface.

Subcommands::

    fredholm-gcv simulate   write a synthetic dataset (CSV + JSON sidecar)
    fredholm-gcv invert     search discretization and alpha, write solutions
    fredholm-gcv gcv-map    GCV over a (t_min, t_max) grid at fixed n
    fredholm-gcv pair-check validate the forward oracle on the analytic pair

Exit codes: 0 success, 1 numerical failure, 2 input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (DEFAULT_PROMINENCE_FRAC, DEFAULT_THRESHOLD_FRAC, disagreement,
                          find_peaks, interp_log, residual_stats)
from .discretization import KernelKind, StabilizerKind
from .errors import DataFormatError, DomainError, FredholmError
from .optimizer import SearchSpace, evaluate_candidate, scan_pairs, search
from .problems import (NOISE_ALGORITHM, MixtureSpec, SampledData, add_noise, levy_pair,
                       levy_transform, forward_transform, log_s_grid)
from .regularization import discretize

log = logging.getLogger("fredholm_gcv")

EXIT_OK, EXIT_NUMERICAL, EXIT_INPUT = 0, 1, 2

# Sub-seed offsets derived from the single CLI seed.
NOISE_SEED_OFFSET = 0

RECIPES = {
    "levy": {"kernel": "laplace", "analytic": "levy", "sigma": 1e-3},
    "laplace-3peak": {"kernel": "laplace", "a": [1, 2, 6], "theta": [0.1, 1, 10], "S": [10, 13, 15],
             "sigma": 1e-2},
    "laplace-2peak": {"kernel": "laplace", "a": [1, 6], "theta": [0.2, 1], "S": [10, 5], "sigma": 1e-2},
    "nmr-3peak": {"kernel": "nmr", "a": [1, 4, 10], "theta": [0.1, 3, 10], "S": [10, 13, 15],
             "sigma": 1e-2},
    "nmr-overlap": {"kernel": "nmr", "a": [2, 15, 50], "theta": [0.1, 0.4, 1.5], "S": [3, 3, 3],
             "sigma": 1e-2},
}


def fmt(x) -> str:
    """17 significant digits: lossless for doubles."""
    return f"{float(x):.17g}"


# ----------------------------------------------------------------------------
# dataset files

def write_dataset(path, data: SampledData, comments=()) -> None:
    path = Path(path)
    with_sigma = isinstance(data.sigma, np.ndarray)
    lines = [f"# {c}" for c in comments]
    lines.append("s,g,sigma" if with_sigma else "s,g")
    for j in range(data.m):
        row = [fmt(data.s_points[j]), fmt(data.g[j])]
        if with_sigma:
            row.append(fmt(data.sigma[j]))
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_dataset(path) -> SampledData:
    """Parse an ``s,g[,sigma]`` CSV.

    Raises
    ------
    DataFormatError
        With the 1-based line number and column name of the offending cell.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    header = None
    cols: dict[str, list[float]] = {}
    for lineno, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        row = [c.strip() for c in row]
        if header is None:
            if row not in (["s", "g"], ["s", "g", "sigma"]):
                raise DataFormatError(f"header must be 's,g' or 's,g,sigma', got {','.join(row)!r}",
                                      row=lineno)
            header = row
            cols = {name: [] for name in header}
            continue
        if len(row) != len(header):
            raise DataFormatError(f"expected {len(header)} fields, got {len(row)}", row=lineno)
        for name, cell in zip(header, row):
            try:
                value = float(cell)
            except ValueError:
                raise DataFormatError(f"not a number: {cell!r}", row=lineno, column=name) from None
            if not math.isfinite(value):
                raise DataFormatError(f"non-finite value {cell!r}", row=lineno, column=name)
            cols[name].append(value)
    if header is None or not cols["s"]:
        raise DataFormatError(f"{path} holds no data rows")
    try:
        return SampledData(cols["s"], cols["g"], cols.get("sigma"))
    except DomainError as exc:
        raise DataFormatError(str(exc)) from exc


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8", newline="\n")


def write_columns(path, names, columns) -> None:
    lines = [",".join(names)]
    for row in zip(*columns):
        lines.append(",".join(fmt(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


# ----------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class RunConfig:
    """Settings of an inversion run.

    ``search_space`` of ``None`` derives the ranges from the data.  ``sigma``
    is ``"column"`` (use a sigma column if the file has one), ``"none"``
    (ignore it) or a number (recorded noise level, fit unweighted).
    """

    kernel: KernelKind = KernelKind.LAPLACE
    stabilizers: tuple = (StabilizerKind.IDENTITY, StabilizerKind.L2)
    search_space: SearchSpace | None = None
    sigma: str | float = "column"
    seed: int = 0
    out_dir: str = "out"
    workers: int = 1
    threshold_frac: float = DEFAULT_THRESHOLD_FRAC
    min_prominence_frac: float = DEFAULT_PROMINENCE_FRAC
    timing: bool = False

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.value,
            "stabilizers": [s.value for s in self.stabilizers],
            "search_space": None if self.search_space is None else self.search_space.to_dict(),
            "sigma": self.sigma,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "workers": self.workers,
            "threshold_frac": self.threshold_frac,
            "min_prominence_frac": self.min_prominence_frac,
            "timing": self.timing,
        }

    @classmethod
    def from_dict(cls, d: dict, base: "RunConfig | None" = None) -> "RunConfig":
        cfg = base or cls()
        known = set(cls().to_dict())
        unknown = set(d) - known
        if unknown:
            raise DataFormatError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        try:
            if "kernel" in d:
                kw["kernel"] = KernelKind.parse(d["kernel"])
            if "stabilizers" in d:
                kw["stabilizers"] = _parse_stabilizers(d["stabilizers"])
            if "search_space" in d:
                ss = d["search_space"]
                kw["search_space"] = None if ss is None else SearchSpace.from_dict(ss)
            if "sigma" in d:
                kw["sigma"] = _parse_sigma_mode(d["sigma"])
            for key, conv in (("seed", int), ("out_dir", str), ("workers", int),
                              ("threshold_frac", float), ("min_prominence_frac", float),
                              ("timing", bool)):
                if key in d:
                    kw[key] = conv(d[key])
        except (TypeError, ValueError) as exc:
            raise DataFormatError(f"invalid config: {exc}") from exc
        return replace(cfg, **kw)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"config is not valid JSON: {exc}", row=exc.lineno) from exc
        if not isinstance(d, dict):
            raise DataFormatError("config must be a JSON object")
        return cls.from_dict(d)


def _parse_stabilizers(value) -> tuple:
    if isinstance(value, str):
        if value == "both":
            return (StabilizerKind.IDENTITY, StabilizerKind.L2)
        value = [value]
    stabs = tuple(StabilizerKind.parse(v) for v in value)
    if not stabs or len(set(stabs)) != len(stabs):
        raise DomainError("stabilizers must be a non-empty set")
    return tuple(sorted(stabs, key=lambda s: s.value))


def _parse_sigma_mode(value):
    if value in ("column", "none"):
        return value
    sigma = float(value)
    if not (math.isfinite(sigma) and sigma >= 0):
        raise DomainError("sigma must be 'column', 'none' or a nonnegative number")
    return sigma


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _pair(text: str) -> tuple[float, float]:
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}")
    return vals[0], vals[1]


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--kernel", choices=[k.value for k in KernelKind])
    p.add_argument("--stabilizer", choices=["identity", "l2", "both"])
    p.add_argument("--n-ladder", type=_ints, help="comma-separated node counts")
    p.add_argument("--tmin-range", type=_pair, help="lo,hi range of t_min")
    p.add_argument("--tmax-range", type=_pair, help="lo,hi range of t_max")
    p.add_argument("--min-decades", type=float)
    p.add_argument("--sigma", help="'column', 'none' or a noise level")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--workers", type=int)


def build_config(args, data: SampledData | None = None) -> RunConfig:
    """Defaults, then ``--config``, then explicit flags."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise DataFormatError(f"cannot read config {args.config}: {exc}") from exc
        cfg = RunConfig.loads(text)
    kw = {}
    if args.kernel:
        kw["kernel"] = KernelKind.parse(args.kernel)
    if args.stabilizer:
        kw["stabilizers"] = _parse_stabilizers(args.stabilizer)
    if args.sigma is not None:
        kw["sigma"] = _parse_sigma_mode(args.sigma)
    for name in ("seed", "out_dir", "workers"):
        if getattr(args, name, None) is not None:
            kw[name] = getattr(args, name)
    if getattr(args, "timing", False):
        kw["timing"] = True
    cfg = replace(cfg, **kw)

    space_flags = {k: getattr(args, k) for k in ("n_ladder", "tmin_range", "tmax_range",
                                                  "min_decades")
                   if getattr(args, k, None) is not None}
    if space_flags:
        base = cfg.search_space
        if base is None and data is not None:
            base = SearchSpace.for_data(data.s_points, cfg.kernel)
        base_dict = (base or SearchSpace()).to_dict()
        base_dict.update({k: (list(v) if isinstance(v, (list, tuple)) else v)
                          for k, v in space_flags.items()})
        cfg = replace(cfg, search_space=SearchSpace.from_dict(base_dict))
    return cfg


def _apply_sigma_mode(data: SampledData, cfg: RunConfig) -> SampledData:
    if cfg.sigma == "column":
        return data
    if cfg.sigma == "none":
        return SampledData(data.s_points, data.g)
    return SampledData(data.s_points, data.g, float(cfg.sigma))


# ----------------------------------------------------------------------------
# commands

def cmd_simulate(args) -> int:
    recipe = dict(RECIPES[args.recipe]) if args.recipe else {}
    kernel = KernelKind.parse(args.kernel or recipe.get("kernel", "laplace"))
    sigma = args.sigma if args.sigma is not None else recipe.get("sigma", 0.0)
    seed = args.seed if args.seed is not None else 0
    s = log_s_grid(args.m, args.s_min, args.s_max)
    analytic = args.analytic or recipe.get("analytic")

    sidecar = {
        "kernel": kernel.value,
        "m": int(args.m),
        "s_min": args.s_min,
        "s_max": args.s_max,
        "sigma": sigma,
        "seed": seed,
        "noise_seed": seed + NOISE_SEED_OFFSET,
        "noise_algorithm": NOISE_ALGORITHM,
        "recipe": args.recipe,
        "generator": f"fredholm_gcv {__version__}",
    }
    if analytic:
        if kernel is not KernelKind.LAPLACE:
            raise DomainError("the analytic Levy pair is a Laplace transform pair")
        _, g_exact = levy_pair()
        g = g_exact(s)
        sidecar["analytic"] = "levy"
    else:
        a = args.a if args.a is not None else recipe.get("a")
        theta = args.theta if args.theta is not None else recipe.get("theta")
        S = args.S if args.S is not None else recipe.get("S")
        if a is None or theta is None or S is None:
            raise DomainError("a mixture needs --a, --theta and --S (or --recipe)")
        spec = MixtureSpec.from_lists(a, theta, S)
        g = forward_transform(spec, kernel, s)
        sidecar["mixture"] = {"a": list(spec.amplitudes), "theta": list(spec.thetas),
                              "S": list(spec.sharpness)}
    if sigma > 0:
        g = add_noise(g, sigma, seed + NOISE_SEED_OFFSET)
    sig_col = np.full(s.size, sigma) if (args.write_sigma and sigma > 0) else None
    data = SampledData(s, g, sig_col, seed, NOISE_ALGORITHM)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(out, data, comments=["generated by fredholm_gcv simulate; parameters in the .json sidecar"])
    write_json(out.with_name(out.name + ".json"), sidecar)
    log.info("wrote %d rows to %s", data.m, out)
    return EXIT_OK


def _solution_summary(result, data, cfg) -> dict:
    sol = result.solution
    stats = residual_stats(sol.kernel, sol.f, data.g)
    best = result.best
    return {
        "n": best.n,
        "t_min": best.t_min,
        "t_max": best.t_max,
        "alpha": sol.alpha,
        "alpha_status": sol.alpha_status,
        "gcv": sol.gcv,
        "residual_norm": sol.residual_norm,
        "seminorm": sol.seminorm,
        "effective_dof": sol.effective_dof,
        "evaluations": result.evaluations,
        "stage_best": [{"stage": c.stage, "n": c.n, "t_min": c.t_min, "t_max": c.t_max,
                        "alpha": c.alpha, "gcv": c.score} for c in result.stage_best],
        "peaks": [list(p) for p in find_peaks(sol.f, sol.grid, cfg.min_prominence_frac)],
        "residuals": {"mean": stats.mean, "std": stats.std, "lag1_autocorr": stats.lag1_autocorr},
    }


def cmd_invert(args) -> int:
    started = time.perf_counter()
    data = read_dataset(args.dataset)
    cfg = build_config(args, data)
    data = _apply_sigma_mode(data, cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    space = cfg.search_space or SearchSpace.for_data(data.s_points, cfg.kernel)
    results = {}
    for stab in cfg.stabilizers:
        log.info("searching with %s stabilizer", stab.value)
        results[stab] = search(data, cfg.kernel, stab, space, workers=cfg.workers)

    # only settings that change results; output location and worker count do not
    settings = {k: v for k, v in cfg.to_dict().items()
                if k not in ("out_dir", "workers", "timing")}
    settings["search_space"] = space.to_dict()
    report = {
        "dataset": Path(args.dataset).name,
        "m": data.m,
        "kernel": cfg.kernel.value,
        "settings": settings,
        "stabilizers": {s.value: _solution_summary(r, data, cfg) for s, r in results.items()},
    }

    for stab, r in results.items():
        sol = r.solution
        fit = sol.fit()
        write_columns(out / f"residuals_{stab.value}.csv", ["s", "g", "fit", "residual"],
                      [data.s_points, data.g, fit, fit - data.g])
        write_columns(out / f"solution_{stab.value}_grid.csv", ["t", "f"], [sol.t, sol.f])

    if len(results) == 2:
        si, sl = results[StabilizerKind.IDENTITY].solution, results[StabilizerKind.L2].solution
        rep = disagreement(si, sl, cfg.threshold_frac)
        write_columns(out / "solution.csv", ["t", "f_identity", "f_l2"],
                      [rep.reference_grid, rep.f_identity, rep.f_l2])
        report["disagreement"] = {
            "sum_sq": rep.sum_sq,
            "threshold": rep.threshold,
            "flagged_regions": [list(r) for r in rep.flagged_regions],
        }
    else:
        (stab, r), = results.items()
        sol = r.solution
        ref = np.geomspace(sol.grid.t_min, sol.grid.t_max, 200)
        write_columns(out / "solution.csv", ["t", f"f_{stab.value}"],
                      [ref, interp_log(ref, sol.t, sol.f)])

    if cfg.timing:
        report["wall_time_s"] = time.perf_counter() - started
    write_json(out / "report.json", report)
    print(f"wrote {out / 'report.json'}")
    return EXIT_OK


def cmd_gcv_map(args) -> int:
    data = read_dataset(args.dataset)
    cfg = build_config(args, data)
    data = _apply_sigma_mode(data, cfg)
    if len(cfg.stabilizers) != 1:
        if args.stabilizer is None:
            cfg = replace(cfg, stabilizers=(StabilizerKind.L2,))
        else:
            raise DomainError("gcv-map needs a single stabilizer")
    stab = cfg.stabilizers[0]
    space = cfg.search_space or SearchSpace.for_data(data.s_points, cfg.kernel)
    rows = []
    for t_min, t_max in scan_pairs(space, args.size):
        if args.alpha == "auto":
            alpha, score = evaluate_candidate(data, cfg.kernel, stab, args.n, t_min, t_max, space)
        else:
            try:
                alpha = float(args.alpha)
            except ValueError:
                raise DomainError(f"--alpha must be 'auto' or a number, got {args.alpha!r}") from None
            try:
                score = discretize(data, cfg.kernel, stab, args.n, t_min, t_max).gcv(alpha)
            except FredholmError as exc:
                if isinstance(exc, DomainError):
                    raise
                score = math.inf
        rows.append((t_min, t_max, alpha, score))
    out = Path(args.out) if args.out else Path(cfg.out_dir) / "gcv_map.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_columns(out, ["t_min", "t_max", "alpha_star", "gcv"], list(zip(*rows)) if rows else [[]] * 4)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


PAIR_CHECK_TOL = 1e-5


def pair_check_rows(points: int = 10):
    """``(s, oracle, analytic, relative error)`` for the analytic Laplace pair."""
    s = log_s_grid(points, 1e-2, 1e2)
    _, g = levy_pair()
    exact = g(s)
    numeric = levy_transform(s)
    rel = np.abs(numeric - exact) / np.abs(exact)
    return list(zip(s, numeric, exact, rel))


def cmd_pair_check(args) -> int:
    try:
        rows = pair_check_rows()
    except FredholmError as exc:
        print(f"forward oracle failed: {exc}")
        return EXIT_NUMERICAL
    print(f"{'s':>12} {'oracle':>22} {'analytic':>22} {'rel_err':>10}")
    for s, num, ex, rel in rows:
        print(f"{s:12.5g} {num:22.15e} {ex:22.15e} {rel:10.2e}")
    worst = max(r[3] for r in rows)
    ok = bool(np.isfinite(worst) and worst < PAIR_CHECK_TOL)
    print(f"max relative error {worst:.3e} ({'ok' if ok else 'FAIL'}, tolerance {PAIR_CHECK_TOL:g})")
    return EXIT_OK if ok else EXIT_NUMERICAL


# ----------------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fredholm-gcv", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic dataset")
    p.add_argument("--recipe", choices=sorted(RECIPES))
    p.add_argument("--analytic", choices=["levy"])
    p.add_argument("--kernel", choices=[k.value for k in KernelKind])
    p.add_argument("--a", type=_floats, help="amplitudes, comma-separated")
    p.add_argument("--theta", type=_floats, help="peak locations, comma-separated")
    p.add_argument("--S", type=_floats, help="sharpness values, comma-separated")
    p.add_argument("--m", type=int, default=64)
    p.add_argument("--s-min", type=float, default=1e-2)
    p.add_argument("--s-max", type=float, default=1e2)
    p.add_argument("--sigma", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--write-sigma", action="store_true", help="add a per-point sigma column")
    p.add_argument("--out", required=True, help="dataset CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("invert", help="invert a dataset")
    p.add_argument("dataset")
    _add_run_flags(p)
    p.add_argument("--timing", action="store_true", help="record wall time in the report")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("gcv-map", help="GCV surface over (t_min, t_max) at fixed n")
    p.add_argument("dataset")
    _add_run_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", default="auto", help="'auto' or a fixed alpha")
    p.add_argument("--size", type=int, default=6, help="scan points per axis")
    p.add_argument("--out", help="output CSV (default OUT_DIR/gcv_map.csv)")
    p.set_defaults(func=cmd_gcv_map)

    p = sub.add_parser("pair-check", help="check the forward oracle on the analytic pair")
    p.set_defaults(func=cmd_pair_check)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DataFormatError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FredholmError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
