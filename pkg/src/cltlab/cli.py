"""Single entry point exposing every verification as a subcommand.

Reports carry a header echoing the full run configuration (seed included)
so any output can be reproduced from the file alone. JSON is the
structured format, CSV the plot-ready table; both are emitted
canonically, so re-running a configuration yields byte-identical output
and emit -> parse -> emit is the identity.

Exit codes: 0 pass or informational, 1 an assertion in the report body
failed, 2 usage error, 3 I/O failure. A detected hypothesis failure
(e.g. a non-vanishing Lindeberg tail sum) is a correct finding, not a
tool failure, and exits 0.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .exchange import (
    ChainSpec,
    NamedTestFn,
    estimate_expectation,
    swap_chain_scan,
)
from .lindeberg import (
    decay_verdict,
    fixed_row_family,
    iid_family,
    lindeberg_report,
    parse_family,
)
from .sampling import make_rng, normal, parse_dist, sample_block
from .specfun import (
    Direction,
    TransitionFn,
    phi_density,
    normal_cdf,
    transition_bounds,
    transition_eval,
)
from .stats import (
    EXACT_ORACLE_MAX_N,
    KOLMOGOROV_99,
    clt_convergence_scan,
    exact_ks_rademacher,
    family_convergence_scan,
)

PASS, FAIL, INFO = "pass", "fail", "informational"

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

DIST_GRAMMAR = (
    "distribution strings are kind[:param][*scale] with kinds rademacher, "
    "uniform, expcentered, twopoint:<p>, normal:<v>; e.g. rademacher, "
    "twopoint:0.1, normal:0.5, uniform*0.25"
)


@dataclass
class RunConfig:
    """A validated subcommand invocation: everything a run needs."""

    subcommand: str
    params: dict = field(default_factory=dict)

    def header(self) -> dict:
        # workers (execution width) and out (delivery target) never change
        # the computed results, so they stay out of the echo: reports
        # compare byte-identical across worker counts and destinations.
        echo = {
            k: _echo_value(v)
            for k, v in sorted(self.params.items())
            if not k.startswith("_") and k not in ("workers", "out")
        }
        return {"subcommand": self.subcommand, "version": __version__, **echo}


@dataclass
class Report:
    """Run output: config echo, subcommand-specific body, verdict."""

    header: dict
    body: object
    verdict: str
    columns: tuple[str, ...] = ()
    rows: tuple[tuple, ...] = ()

    def to_text(self, fmt: str) -> str:
        if fmt == "json":
            doc = {"header": self.header, "body": self.body, "verdict": self.verdict}
            return json.dumps(doc, sort_keys=True, indent=2) + "\n"
        out = io.StringIO()
        for key in sorted(self.header):
            out.write(f"# {key}={self.header[key]}\n")
        out.write(f"# verdict={self.verdict}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow(["" if v is None else _fmt_cell(v) for v in row])
        return out.getvalue()


def _fmt_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _echo_value(v):
    if isinstance(v, (list, tuple)):
        return ",".join(str(x) for x in v)
    return str(v)


@dataclass
class ParsedReport:
    """A report read back from text; re-emits byte-identically."""

    fmt: str
    json_doc: dict | None = None
    comments: tuple[tuple[str, str], ...] = ()
    columns: tuple[str, ...] = ()
    rows: tuple[tuple[str, ...], ...] = ()

    def to_text(self) -> str:
        if self.fmt == "json":
            return json.dumps(self.json_doc, sort_keys=True, indent=2) + "\n"
        out = io.StringIO()
        for key, val in self.comments:
            out.write(f"# {key}={val}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow(row)
        return out.getvalue()


def parse_report(text: str) -> ParsedReport:
    """Read a report emitted by this tool, JSON or CSV."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return ParsedReport(fmt="json", json_doc=json.loads(text))
    comments = []
    table_lines = []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, val = line[2:].partition("=")
            comments.append((key, val))
        else:
            table_lines.append(line)
    reader = csv.reader(table_lines)
    rows = [tuple(r) for r in reader if r]
    if not rows:
        raise ValueError("CSV report has no table")
    return ParsedReport(
        fmt="csv",
        comments=tuple(comments),
        columns=rows[0],
        rows=tuple(rows[1:]),
    )


# ---------------------------------------------------------------------------
# argument parsing


def _int_ish(text: str) -> int:
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"{text!r} is not a number; use e.g. 100000 or 1e5"
        ) from None
    if val < 1 or val != int(val):
        raise argparse.ArgumentTypeError(f"{text!r} must be a positive integer")
    return int(val)


def _int_list(text: str) -> list[int]:
    return [_int_ish(part) for part in text.split(",") if part]


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"{text!r} is not a comma-separated number list, e.g. 0.5,0.1"
        ) from None


def _range_spec(text: str) -> tuple[float, float, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"{text!r} must be min,max,points, e.g. -4,4,81"
        )
    lo, hi, npts = float(parts[0]), float(parts[1]), int(float(parts[2]))
    if npts < 2 or hi <= lo:
        raise argparse.ArgumentTypeError(f"{text!r} must satisfy min < max, points >= 2")
    return lo, hi, npts


def _dist_arg(text: str):
    try:
        return parse_dist(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{exc}; {DIST_GRAMMAR}") from None


def _test_fn_arg(text: str):
    body = text.strip().lower()
    if body in ("cos", "sin"):
        return NamedTestFn(body)
    for prefix, direction in (
        ("dropbefore:", Direction.DROP_BEFORE),
        ("dropafter:", Direction.DROP_AFTER),
    ):
        if body.startswith(prefix):
            try:
                x_part, eta_part = body[len(prefix):].split(",")
                return TransitionFn(float(x_part), float(eta_part), direction)
            except ValueError as exc:
                raise argparse.ArgumentTypeError(
                    f"bad test function {text!r}: {exc}; use dropbefore:<x>,<eta>"
                ) from None
    raise argparse.ArgumentTypeError(
        f"unknown test function {text!r}; use dropbefore:<x>,<eta>, "
        "dropafter:<x>,<eta>, cos, or sin"
    )


def _add_common(sub: argparse.ArgumentParser, default_fmt: str) -> None:
    sub.add_argument(
        "--seed",
        type=_int_ish,
        default=None,
        help="RNG seed; falls back to CLT_LAB_SEED, then 0",
    )
    sub.add_argument(
        "--workers", type=_int_ish, default=1, help="parallel width (never changes results)"
    )
    sub.add_argument(
        "--format", choices=("json", "csv"), default=default_fmt, help="output format"
    )
    sub.add_argument("--out", default=None, help="output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clt-lab",
        description=(
            "Monte Carlo laboratory for the swap-based route to the central "
            "limit theorem: hybrid-sum chains, per-swap error bounds, "
            "Lindeberg tail sums, and Kolmogorov-distance convergence scans. "
            + DIST_GRAMMAR
        ),
    )
    subs = parser.add_subparsers(dest="subcommand", required=True)

    p = subs.add_parser("phi", help="standard normal density and CDF table")
    p.add_argument("--t-range", type=_range_spec, default=(-4.0, 4.0, 81))
    _add_common(p, "json")

    p = subs.add_parser("transition", help="transition function and derivatives table")
    p.add_argument("--x", type=float, default=0.0, help="drop location")
    p.add_argument("--eta", type=float, default=0.5, help="drop width (> 0)")
    p.add_argument("--direction", choices=("before", "after"), default="before")
    p.add_argument("--t-range", type=_range_spec, default=None, help="default spans the drop")
    _add_common(p, "csv")

    p = subs.add_parser("swap-chain", help="hybrid-sum scan with per-swap bounds")
    p.add_argument("--dist", type=_dist_arg, required=True, help=DIST_GRAMMAR)
    p.add_argument("--n", type=_int_ish, default=32, help="number of summands")
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--samples", type=_int_ish, default=100_000, help="draws per chain point")
    p.add_argument(
        "--f",
        type=_test_fn_arg,
        default=None,
        help="test function (default dropbefore:0,0.5)",
    )
    _add_common(p, "json")

    p = subs.add_parser("lindeberg", help="tail-sum table over a row-size grid")
    p.add_argument(
        "--array",
        required=True,
        help="iid:<dist>, spike:<dist>, or custom:<path.json>",
    )
    p.add_argument("--n", type=_int_list, default=[10, 100, 1000], help="row sizes, comma list")
    p.add_argument("--delta", type=_float_list, default=[0.5, 0.1], help="thresholds, comma list")
    _add_common(p, "csv")

    p = subs.add_parser("clt-verify", help="KS distance of normalized sums to the normal")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--dist", type=_dist_arg, default=None, help=DIST_GRAMMAR)
    g.add_argument("--array", default=None, help="iid:<dist> or spike:<dist> family")
    p.add_argument("--n", type=_int_list, default=[4, 16, 64], help="sum lengths, comma list")
    p.add_argument("--samples", type=_int_ish, default=100_000)
    _add_common(p, "csv")

    p = subs.add_parser("moments", help="Monte Carlo second/fourth normal moments")
    p.add_argument("--samples", type=_int_ish, default=1_000_000)
    _add_common(p, "json")

    return parser


def parse_args(argv: list[str]) -> RunConfig:
    """Validate argv into a RunConfig; raises SystemExit(2) on usage errors."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    params = {k: v for k, v in vars(ns).items() if k != "subcommand" and v is not None}
    if "seed" not in params:
        env = os.environ.get("CLT_LAB_SEED")
        params["seed"] = int(env) if env else 0
    sub = ns.subcommand
    if sub == "lindeberg" or (sub == "clt-verify" and params.get("array")):
        text = params["array"]
        try:
            if text.startswith("custom:"):
                # OSError (unreadable file) propagates: that is an I/O
                # failure, not a usage error.
                params["_family"] = _load_custom_family(text[len("custom:"):])
            else:
                params["_family"] = parse_family(text)
        except ValueError as exc:
            parser.error(f"--array {text!r}: {exc}")
    if sub == "swap-chain" and "f" not in params:
        params["f"] = TransitionFn(0.0, 0.5, Direction.DROP_BEFORE)
    if sub == "transition" and not params["eta"] > 0:
        parser.error(f"--eta must be positive, got {params['eta']}")
    return RunConfig(subcommand=sub, params=params)


def _load_custom_family(path: str):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, list):
        raise ValueError("custom array file must be a JSON list of entries")
    entries = []
    for item in doc:
        entries.append(
            parse_dist(
                item["kind"]
                + (f":{item['param']}" if item.get("param") is not None else "")
                + (f"*{item['scale']}" if item.get("scale") is not None else "")
            )
        )
    return fixed_row_family(entries, name=f"custom:{path}")


# ---------------------------------------------------------------------------
# subcommand runners


def _run_phi(params: dict) -> Report:
    lo, hi, npts = params["t_range"]
    ts = np.linspace(lo, hi, npts)
    dens = phi_density(ts)
    cdf = normal_cdf(ts)
    rows = [(float(t), float(d), float(c)) for t, d, c in zip(ts, dens, cdf)]
    body = {"rows": [{"t": t, "density": d, "cdf": c} for t, d, c in rows]}
    return Report(
        header={},
        body=body,
        verdict=INFO,
        columns=("t", "density", "cdf"),
        rows=tuple(rows),
    )


def _run_transition(params: dict) -> Report:
    direction = (
        Direction.DROP_BEFORE if params["direction"] == "before" else Direction.DROP_AFTER
    )
    fn = TransitionFn(params["x"], params["eta"], direction)
    cert = transition_bounds(fn)
    t_range = params.get("t_range")
    if t_range is None:
        pad = fn.eta
        t_range = (fn.drop_start - pad, fn.drop_start + fn.eta + pad, 101)
    ts = np.linspace(*t_range)
    cols = [transition_eval(fn, ts, k) for k in range(4)]
    rows = [
        (float(t), float(f0), float(f1), float(f2), float(f3))
        for t, f0, f1, f2, f3 in zip(ts, *cols)
    ]
    body = {
        "cert": {"sup_f1": cert.sup_f1, "sup_f2": cert.sup_f2, "sup_f3": cert.sup_f3},
        "rows": [
            {"t": r[0], "f": r[1], "d1": r[2], "d2": r[3], "d3": r[4]} for r in rows
        ],
    }
    return Report(
        header={
            "sup_f1": cert.sup_f1,
            "sup_f2": cert.sup_f2,
            "sup_f3": cert.sup_f3,
        },
        body=body,
        verdict=INFO,
        columns=("t", "f", "d1", "d2", "d3"),
        rows=tuple(rows),
    )


def _run_swap_chain(params: dict) -> Report:
    family = iid_family(params["dist"])
    row = family.row(params["n"])
    chain = ChainSpec(
        row=row, f=params["f"], n_samples=params["samples"], seed=params["seed"]
    )
    report = swap_chain_scan(chain, params["epsilon"], workers=params["workers"])
    ses_total = math.fsum(report.per_swap_ses)
    ok = not report.flagged and abs(report.total_gap) <= report.total_bound + 4.0 * ses_total
    rows = [(0, report.estimates[0].mean, report.estimates[0].std_error, None, None)]
    for i in range(1, len(report.estimates)):
        rows.append(
            (
                i,
                report.estimates[i].mean,
                report.estimates[i].std_error,
                report.per_swap_gaps[i - 1],
                report.per_swap_bounds[i - 1],
            )
        )
    return Report(
        header={},
        body=report.to_dict(),
        verdict=PASS if ok else FAIL,
        columns=("i", "estimate", "se", "gap", "bound"),
        rows=tuple(rows),
    )


def _run_lindeberg(params: dict) -> Report:
    family = params["_family"]
    is_custom = family.name.startswith("custom:")
    n_grid = [family.row(1).n_index] if is_custom else params["n"]
    table = []
    decay = {}
    for delta in params["delta"]:
        tail_sums = []
        for n in n_grid:
            rep = lindeberg_report(family.row(n), delta)
            tail_sums.append(rep.tail_sum)
            table.append(rep)
        decay[f"{delta:g}"] = decay_verdict(tail_sums)
    rows = [
        (
            r.n_index,
            r.delta,
            r.tail_sum,
            r.max_variance,
            r.normal_tail_sum,
            r.normal_tail_bound,
        )
        for r in table
    ]
    header = {f"decay_{k}": v for k, v in decay.items()}
    header["decay_rule"] = "heuristic: >=10x drop across grid => vanishing"
    body = {"rows": [r.to_dict() for r in table], "decay": decay}
    return Report(
        header=header,
        body=body,
        verdict=INFO,
        columns=(
            "n",
            "delta",
            "tail_sum",
            "max_variance",
            "normal_tail_sum",
            "normal_tail_bound",
        ),
        rows=tuple(rows),
    )


def _run_clt_verify(params: dict) -> Report:
    seed, workers = params["seed"], params["workers"]
    if params.get("dist") is not None:
        dist = params["dist"]
        report = clt_convergence_scan(
            dist, params["n"], params["samples"], seed, workers=workers
        )
        has_oracle = (
            dist.kind == "rademacher" and dist.scale == 1.0
        )
    else:
        report = family_convergence_scan(
            params["_family"], params["n"], params["samples"], seed, workers=workers
        )
        has_oracle = False
    band = 2.0 * KOLMOGOROV_99 / math.sqrt(params["samples"])
    rows = []
    oracle_checked = False
    ok = True
    for r in report.rows:
        exact = None
        if has_oracle and r.n <= EXACT_ORACLE_MAX_N:
            exact = exact_ks_rademacher(r.n)
            oracle_checked = True
            ok = ok and abs(r.ks_distance - exact) <= band
        rows.append((r.n, r.ks_distance, r.n_samples, r.seed, exact))
    body = report.to_dict()
    if oracle_checked:
        body["oracle_band"] = band
        verdict = PASS if ok else FAIL
    else:
        verdict = INFO
    return Report(
        header={"dist": report.dist},
        body=body,
        verdict=verdict,
        columns=("n", "ks", "n_samples", "seed", "exact_ks"),
        rows=tuple(rows),
    )


def _run_moments(params: dict) -> Report:
    seed, n, workers = params["seed"], params["samples"], params["workers"]
    std_normal = normal(1.0)

    def sampler(rng, count):
        return sample_block(std_normal, rng, count)

    m2 = estimate_expectation(sampler, lambda z: z * z, n, seed, workers=workers)
    m4 = estimate_expectation(
        sampler, lambda z: z**4, n, seed, stream_base=1 << 32, workers=workers
    )
    ok = abs(m2.mean - 1.0) <= 4 * m2.std_error and abs(m4.mean - 3.0) <= 4 * m4.std_error
    body = {"second_moment": m2.to_dict(), "fourth_moment": m4.to_dict(), "expected": [1.0, 3.0]}
    rows = [("second", m2.mean, m2.std_error, 1.0), ("fourth", m4.mean, m4.std_error, 3.0)]
    return Report(
        header={},
        body=body,
        verdict=PASS if ok else FAIL,
        columns=("moment", "estimate", "se", "exact"),
        rows=tuple(rows),
    )


_RUNNERS = {
    "phi": _run_phi,
    "transition": _run_transition,
    "swap-chain": _run_swap_chain,
    "lindeberg": _run_lindeberg,
    "clt-verify": _run_clt_verify,
    "moments": _run_moments,
}


def run(config: RunConfig) -> tuple[Report, int]:
    """Execute a validated config; returns the report and the exit code."""
    report = _RUNNERS[config.subcommand](config.params)
    report.header = {**config.header(), **report.header}
    code = EXIT_FAIL if report.verdict == FAIL else EXIT_OK
    return report, code


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        config = parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except OSError as exc:
        print(f"cannot read {getattr(exc, 'filename', '?')}: {exc}", file=sys.stderr)
        return EXIT_IO
    report, code = run(config)
    text = report.to_text(config.params.get("format", "json"))
    out_path = config.params.get("out")
    if out_path:
        try:
            with open(out_path, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"cannot write {out_path}: {exc}", file=sys.stderr)
            return EXIT_IO
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
