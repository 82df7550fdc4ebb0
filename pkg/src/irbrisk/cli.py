"""Command-line interface.

Subcommands share one set of flags.  Data-driven commands read ``--input``
(or ``--synthetic SEED`` for a fixture panel); capital commands fall back to
the published moments of the chosen grade when no panel is given.

Exit codes: 0 success, 2 validation error, 3 numeric/domain error, 4 I/O error.
"""

import argparse
import csv
import datetime as dt
import hashlib
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asrf import PointEstimates, naive_capital
from .data_io import PUBLISHED, RunConfig, load_config, load_panel, normalize_grade, synthesize_panel
from .engine import SCENARIOS, SimulationConfig, loss_histogram, scenario_addons, write_histogram_csv
from .estimators import ParameterUncertaintyEstimator
from .exceptions import DomainError, IRBRiskError, ResourceError, ValidationError
from .stats import describe, linear_fit, pearson, probit_transform, qq_points, royston_bivariate, shapiro_wilk
from .uncertainty import UncertaintyModel, infer_k_hat

log = logging.getLogger("irbrisk")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
RHO_MODE_FLAGS = {"realized": "of_realized_pd", "mean": "of_mean_pd"}
COMMANDS = ("describe", "normality", "correlate", "qq", "naive", "capital", "addon", "report")


def q(value, unit):
    """A numeric cell tagged with its unit."""
    return {"value": float(value) if unit != "count" else int(value), "unit": unit}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _nsim(text):
    v = float(text)
    if v != int(v) or v < 1:
        raise argparse.ArgumentTypeError(f"--nsim must be a positive integer, got {text}")
    return int(v)


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("--seed must be an unsigned 64-bit integer")
    return v


def _obligors(text):
    if text.lower() == "asymptotic":
        return "asymptotic"
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("--obligors must be positive or 'asymptotic'")
    return v


def _common_flags():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--config", help="flat key = value file with RunConfig defaults")
    g.add_argument("--input", help="CSV panel: year,lgd_rate,pd_all_ratings,pd_speculative")
    g.add_argument("--synthetic", type=int, metavar="SEED", help="use a synthesized fixture panel")
    g.add_argument("--grade", choices=("ar", "sg"))
    g.add_argument("--alpha", type=float)
    g.add_argument("--nsim", type=_nsim, dest="n_sim")
    g.add_argument("--seed", type=_seed)
    g.add_argument("--obligors", type=_obligors)
    g.add_argument("--rho-mode", choices=tuple(RHO_MODE_FLAGS))
    g.add_argument("--clamp-lgd", action="store_true", default=None, dest="lgd_clamp")
    g.add_argument("--threads", type=int)
    g.add_argument("--format", choices=("table", "json", "csv"))
    g.add_argument("--out", help="output file (qq: output directory)")
    m = p.add_argument_group("explicit moments (override the published ones)")
    m.add_argument("--pd-hat", type=float)
    m.add_argument("--lgd-hat", type=float)
    m.add_argument("--k-hat", type=float)
    m.add_argument("--sigma-k", type=float)
    m.add_argument("--sigma-lgd", type=float)
    m.add_argument("--rho-lgd-k", type=float)
    m.add_argument("--k-method", choices=("quadrature", "taylor3"), default="quadrature")
    c = p.add_argument_group("capital options")
    c.add_argument("--scenarios", help=f"comma-separated subset of {','.join(SCENARIOS)}")
    c.add_argument("--compare-alpha", type=float, help="add a side-by-side add-on column at this alpha")
    c.add_argument("--histogram", help="write a CSV loss histogram of the correlated scenario")
    c.add_argument("--no-timestamp", action="store_true", help="omit the timestamp from metadata")
    return p


def build_parser():
    parser = argparse.ArgumentParser(prog="irbrisk", description="Model risk in IRB credit capital requirements.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_flags()
    helps = {
        "describe": "descriptive statistics of LGD and PD",
        "normality": "Shapiro-Wilk and Royston bivariate normality tests",
        "correlate": "Pearson correlation of LGD and k with regression fit",
        "qq": "write normal Q-Q plot data",
        "naive": "closed-form naive regulatory capital",
        "capital": "naive and correct capital with the add-on table",
        "addon": "the four-scenario add-on table",
        "report": "every section in one report",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def resolve_config(args) -> RunConfig:
    base = {}
    if args.config:
        base = load_config(args.config)
    obligors = args.obligors
    overrides = dict(
        alpha=args.alpha, n_sim=args.n_sim, seed=args.seed, grade=args.grade, lgd_clamp=args.lgd_clamp,
        rho_mode=RHO_MODE_FLAGS.get(args.rho_mode) if args.rho_mode else None,
        threads=args.threads, input=args.input, out=args.out, format=args.format,
        scenarios=tuple(s.strip() for s in args.scenarios.split(",")) if args.scenarios else None,
    )
    if obligors == "asymptotic":
        base["obligors"] = None
    elif obligors is not None:
        overrides["obligors"] = obligors
    cfg = RunConfig(**base) if base else RunConfig()
    return cfg.updated(**overrides)


# ---------------------------------------------------------------------------
# inputs
# ---------------------------------------------------------------------------


class Inputs:
    """Resolved panel and/or parameter law, plus a digest for the report."""

    def __init__(self, args, cfg):
        self.panel = None
        self.digest_src = b""
        if cfg.input:
            self.panel = load_panel(cfg.input)
            self.digest_src = Path(cfg.input).read_bytes()
        elif args.synthetic is not None:
            self.panel = synthesize_panel(seed=args.synthetic)
            self.digest_src = f"synthetic:{args.synthetic}".encode()
        self.args = args
        self.cfg = cfg

    def require_panel(self):
        if self.panel is None:
            raise ValidationError("this command needs --input (or --synthetic SEED)")
        return self.panel

    def grade_arrays(self):
        return self.require_panel().grade_arrays(self.cfg.grade)

    def model(self):
        """(UncertaintyModel, PointEstimates, source) for the capital commands."""
        a = self.args
        if self.panel is not None:
            _, lgd, pd = self.grade_arrays()
            est = ParameterUncertaintyEstimator(k_method=a.k_method).fit(np.column_stack([lgd, pd]))
            model, pe, src = est.uncertainty_model(), est.point_estimates(), "panel"
        else:
            pub = PUBLISHED[self.cfg.grade]
            pd_hat = a.pd_hat if a.pd_hat is not None else pub["pd_hat"]
            sigma_k = a.sigma_k if a.sigma_k is not None else pub["sigma_k"]
            if a.k_hat is not None:
                k_hat = a.k_hat
            elif a.pd_hat is None and a.sigma_k is None:
                k_hat = pub["k_hat"]
            else:
                k_hat = infer_k_hat(pd_hat, sigma_k, a.k_method)
            lgd_hat = a.lgd_hat if a.lgd_hat is not None else pub["lgd_hat"]
            model = UncertaintyModel(
                k_hat=k_hat, sigma_k=sigma_k, lgd_hat=lgd_hat,
                sigma_lgd=a.sigma_lgd if a.sigma_lgd is not None else pub["sigma_lgd"],
                rho_lgd_k=a.rho_lgd_k if a.rho_lgd_k is not None else pub["rho_lgd_k"],
            )
            pe, src = PointEstimates(pd_hat, lgd_hat), "moments"
            self.digest_src = json.dumps(
                {"model": model.__dict__, "pd_hat": pd_hat, "grade": self.cfg.grade}, sort_keys=True
            ).encode()
        return model, pe, src

    @property
    def digest(self):
        return hashlib.sha256(self.digest_src).hexdigest()


# ---------------------------------------------------------------------------
# sections
# ---------------------------------------------------------------------------


def section_describe(inp):
    years, lgd, pd = inp.grade_arrays()
    grade = inp.cfg.grade.upper()
    rows = {}
    for label, series in (("LGD", lgd), (f"PD_{grade}", pd), (f"k_{grade}", probit_transform(pd))):
        unit = "real" if label.startswith("k_") else "fraction"
        rows[label] = {key: q(v, unit) for key, v in describe(series).items()}
        rows[label]["n"] = q(series.size, "count")
    return rows


def section_normality(inp):
    _, lgd, pd = inp.grade_arrays()
    k = probit_transform(pd)
    grade = inp.cfg.grade.upper()
    out = {}
    for label, res in (("LGD", shapiro_wilk(lgd)), (f"k_{grade}", shapiro_wilk(k)),
                       (f"composite LGD-k_{grade}", royston_bivariate(lgd, k))):
        row = {"W": q(res.w_stat, "statistic"), "p_value": q(res.p_value, "probability"), "n": q(res.n, "count")}
        if res.h_stat is not None:
            row["H"] = q(res.h_stat, "statistic")
            row["edf"] = q(res.edf, "statistic")
        out[label] = row
    return out


def section_correlate(inp):
    _, lgd, pd = inp.grade_arrays()
    k = probit_transform(pd)
    c = pearson(lgd, k)
    f = linear_fit(lgd, k)
    return {
        "pearson": {"r": q(c.r, "correlation"), "ci_low": q(c.ci_low, "correlation"),
                    "ci_high": q(c.ci_high, "correlation"), "p_value": q(c.p_value, "probability"),
                    "n": q(c.n, "count")},
        "regression k~LGD": {"slope": q(f.slope, "real"), "intercept": q(f.intercept, "real"),
                             "r2": q(f.r2, "ratio"), "adj_r2": q(f.adj_r2, "ratio"),
                             "slope_p": q(f.slope_p, "probability")},
    }


def _model_section(model, pe, src):
    return {
        "source": src,
        "pd_hat": q(pe.pd_hat, "fraction"), "lgd_hat": q(pe.lgd_hat, "fraction"),
        "k_hat": q(model.k_hat, "real"), "sigma_k": q(model.sigma_k, "real"),
        "sigma_lgd": q(model.sigma_lgd, "fraction"), "rho_lgd_k": q(model.rho_lgd_k, "correlation"),
    }


def section_naive(pe, alpha):
    r = naive_capital(pe, alpha)
    return {"alpha": q(alpha, "probability"), "var": q(r.var, "fraction"),
            "expected_loss": q(r.expected_loss, "fraction"), "rc": q(r.rc, "fraction")}


def _sim_config(cfg, alpha=None):
    return SimulationConfig(n_sim=cfg.n_sim, seed=cfg.seed, alpha=cfg.alpha if alpha is None else alpha,
                            obligors=cfg.obligors, lgd_clamp=cfg.lgd_clamp, rho_mode=cfg.rho_mode,
                            n_workers=cfg.threads)


def _addon_rows(reports):
    return {
        name: {
            "add_on": q(r.add_on, "fraction"), "add_on_se": q(r.add_on_se, "fraction"),
            "rc_correct": q(r.rc_correct, "fraction"), "rc_naive": q(r.rc_naive, "fraction"),
            "el_correct": q(r.el_correct, "fraction"), "el_naive": q(r.el_naive, "fraction"),
            "excess_el": q(r.excess_el, "fraction"),
        }
        for name, r in reports.items()
    }


def section_addons(inp, model, pe, with_capital):
    cfg = inp.cfg
    samples = {}
    keep = inp.args.histogram is not None

    def grab(name, s):
        if keep and name == "correlated":
            samples[name] = s

    reports = scenario_addons(model, pe, _sim_config(cfg), cfg.scenarios, on_sample=grab)
    out = {"addon": _addon_rows(reports)}
    if inp.args.compare_alpha is not None:
        alt = scenario_addons(model, pe, _sim_config(cfg, inp.args.compare_alpha), cfg.scenarios)
        out[f"addon_alpha_{inp.args.compare_alpha}"] = _addon_rows(alt)
    if with_capital:
        naive = naive_capital(pe, cfg.alpha)
        head = {"naive_rc": q(naive.rc, "fraction"), "naive_el": q(naive.expected_loss, "fraction")}
        if "correlated" in reports:
            r = reports["correlated"]
            head.update(correct_rc=q(r.rc_correct, "fraction"), correct_el=q(r.el_correct, "fraction"),
                        excess_el=q(r.excess_el, "fraction"), rc_se=q(r.var_se, "fraction"))
        out = {"capital": head, **out}
    if keep:
        if "correlated" not in samples:
            raise ValidationError("--histogram needs the correlated scenario")
        edges, counts = loss_histogram(samples["correlated"].losses)
        write_histogram_csv(inp.args.histogram, edges, counts)
    return out


def write_qq(inp, outdir):
    _, lgd, pd = inp.grade_arrays()
    grade = inp.cfg.grade
    d = Path(outdir)
    d.mkdir(exist_ok=True)
    written = {}
    for label, series in (("lgd", lgd), (f"k_{grade}", probit_transform(pd))):
        pts = qq_points(series)
        path = d / f"qq_{label}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["theoretical", "empirical"])
            w.writerows([repr(float(a)), repr(float(b))] for a, b in pts)
        written[label] = {"path": str(path), "rows": q(len(pts), "count")}
    return written


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def _fmt(cell):
    v, unit = cell["value"], cell["unit"]
    if unit == "count":
        return str(v)
    if unit == "fraction":
        return f"{100 * v:.2f}%"
    if unit == "probability" and 0 < abs(v) < 1e-3:
        return f"{v:.3g}"
    return f"{v:.4f}"


def _is_cell(x):
    return isinstance(x, dict) and set(x) == {"value", "unit"}


def render_table(report):
    buf = io.StringIO()
    meta = report["metadata"]
    buf.write("# " + ", ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    buf.write("# fractions are shown as percentages with 2 decimals\n")
    for name, sec in report["sections"].items():
        buf.write(f"\n== {name} ==\n")
        _render_block(buf, sec)
    return buf.getvalue()


def _render_block(buf, sec):
    flat = {k: v for k, v in sec.items() if _is_cell(v) or not isinstance(v, dict)}
    nested = {k: v for k, v in sec.items() if k not in flat}
    for k, v in flat.items():
        buf.write(f"  {k:<14} {_fmt(v) if _is_cell(v) else v}\n")
    rows = {k: v for k, v in nested.items() if all(_is_cell(c) or not isinstance(c, dict) for c in v.values())}
    if rows:
        cols = list(dict.fromkeys(c for r in rows.values() for c in r))
        width = max(len(k) for k in rows) + 2
        buf.write(" " * width + "".join(f"{c:>14}" for c in cols) + "\n")
        for k, r in rows.items():
            cells = [(_fmt(r[c]) if _is_cell(r[c]) else str(r[c])) if c in r else "" for c in cols]
            buf.write(f"{k:<{width}}" + "".join(f"{c:>14}" for c in cells) + "\n")
    for k, v in nested.items():
        if k not in rows:
            buf.write(f"\n-- {k} --\n")
            _render_block(buf, v)


def _flatten(prefix, node, out):
    if _is_cell(node):
        out.append((prefix, node["value"], node["unit"]))
    elif isinstance(node, dict):
        for k, v in node.items():
            _flatten(f"{prefix}/{k}" if prefix else k, v, out)
    else:
        out.append((prefix, node, "text"))


def render_csv(report):
    rows = []
    _flatten("", report["sections"], rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value", "unit"])
    for k, v, u in rows:
        w.writerow([k, repr(v) if isinstance(v, float) else v, u])
    return buf.getvalue()


def render_json(report):
    return json.dumps(report, indent=2, sort_keys=False) + "\n"


def report_digest(report):
    """sha256 of the report without its timestamp."""
    body = {"metadata": {k: v for k, v in report["metadata"].items() if k not in ("timestamp", "digest")},
            "sections": report["sections"]}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def run(args, cfg=None) -> dict:
    cfg = cfg or resolve_config(args)
    inp = Inputs(args, cfg)
    cmd = args.command
    sections = {}
    if cmd in ("describe", "report") and (cmd == "describe" or inp.panel is not None):
        sections["descriptives"] = section_describe(inp)
    if cmd in ("normality", "report") and (cmd == "normality" or inp.panel is not None):
        sections["normality"] = section_normality(inp)
    if cmd in ("correlate", "report") and (cmd == "correlate" or inp.panel is not None):
        sections["correlation"] = section_correlate(inp)
    if cmd == "qq":
        if not cfg.out:
            raise ValidationError("qq needs --out DIRECTORY")
        sections["qq"] = write_qq(inp, cfg.out)
    if cmd in ("naive", "capital", "addon", "report"):
        model, pe, src = inp.model()
        sections["model"] = _model_section(model, pe, src)
        sections["naive_capital"] = section_naive(pe, cfg.alpha)
        if cmd != "naive":
            sections.update(section_addons(inp, model, pe, with_capital=cmd != "addon"))

    meta = {"command": cmd, "grade": cfg.grade, "alpha": cfg.alpha, "n_sim": cfg.n_sim, "seed": cfg.seed,
            "granularity": "asymptotic" if cfg.obligors is None else f"finite({cfg.obligors})",
            "rho_mode": cfg.rho_mode, "lgd_clamp": cfg.lgd_clamp, "input_digest": inp.digest}
    if not args.no_timestamp:
        meta["timestamp"] = dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")
    report = {"metadata": meta, "sections": sections}
    meta["digest"] = report_digest(report)
    return report


def render(report, fmt):
    return {"table": render_table, "json": render_json, "csv": render_csv}[fmt](report)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        report = run(args, cfg)
        text = render(report, cfg.format)
        if cfg.out and args.command != "qq":
            Path(cfg.out).write_text(text)
        else:
            sys.stdout.write(text)
    except (ValidationError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DomainError, ResourceError, ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except IRBRiskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
