"""Command line entry point.

    bosefeed fig2|fig3|validate|single [--config PATH] [--out PATH] [--print-config]

Exit codes: 0 ok, 2 config error, 3 numerical tolerance failure, 4 capacity cap.
"""

import argparse
import csv
import io
import json
import sys

from .config import EXPERIMENTS, load_config
from .corrdyn import bec_initial, feedback_reduced, sadm
from .errors import CapacityError, ConfigError, ToleranceError
from .observables import moments

EXIT_OK, EXIT_CONFIG, EXIT_TOLERANCE, EXIT_CAPACITY = 0, 2, 3, 4
BACKACTION_TOL = 1e-3

FIG2_HEADER = ["N", "sigma_over_dp0", "var_p_scaled"]
FIG3_HEADER = ["N", "sigma_over_dp0", "uncertainty_product_scaled"]
SINGLE_HEADER = [
    "N", "sigma_over_dp0", "mean_p", "mean_q", "var_p_scaled", "var_q_scaled",
    "uncertainty_product_scaled", "n_atoms_mean",
]


def fmt(x):
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def to_csv(header, rows):
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _bec_feedback(cfg, N, st, basis):
    """Pre- and post-feedback moment reports for a condensate of ``N`` atoms."""
    fb = cfg.feedback(N, st, basis)
    D0 = bec_initial(N, basis, N_e=fb.N_e)
    try:
        post = feedback_reduced(D0, fb, basis)
    except ToleranceError as exc:
        raise type(exc)(f"N={N}, sigma_over_dp0={st}: {exc}") from None
    return moments(sadm(D0), basis), moments(post, basis), fb


def _grid(cfg):
    for N in cfg.n_atoms:
        for st in cfg.sigma_over_dp0:
            yield int(N), float(st)


def run_fig2(cfg):
    basis = cfg.trap()
    rows = []
    for N, st in _grid(cfg):
        _, post, _ = _bec_feedback(cfg, N, st, basis)
        rows.append((N, st, post.var_p_scaled))
    return to_csv(FIG2_HEADER, rows)


def run_fig3(cfg):
    """Uncertainty product rows; the kernel ``var_q`` is cross-checked against the back-action shift."""
    basis = cfg.trap()
    rows = []
    for N, st in _grid(cfg):
        pre, post, fb = _bec_feedback(cfg, N, st, basis)
        expected = pre.var_q + 1 / (4 * fb.sigma**2)
        gap = abs(post.var_q - expected) / basis.dq0**2
        if gap > BACKACTION_TOL:
            raise ToleranceError(
                f"N={N}, sigma_over_dp0={st}: kernel var_q differs from back-action shift by {gap:.2e}"
            )
        rows.append((N, st, post.uncertainty_product_scaled))
    return to_csv(FIG3_HEADER, rows)


def run_single(cfg):
    basis = cfg.trap()
    rows = []
    for N, st in _grid(cfg):
        _, m, _ = _bec_feedback(cfg, N, st, basis)
        rows.append((N, st, m.mean_p, m.mean_q, m.var_p_scaled, m.var_q_scaled,
                     m.uncertainty_product_scaled, m.n_atoms_mean))
    return to_csv(SINGLE_HEADER, rows)


def run_validate(cfg):
    """Returns ``(report_json, all_passed)``."""
    from .validation import run_checks

    report = run_checks(cfg)
    ok = all(r["status"] == "pass" for r in report)
    return json.dumps(report, indent=2) + "\n", ok


def _write(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def build_parser():
    parser = argparse.ArgumentParser(prog="bosefeed", description="Feedback cooling of trapped bosons.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="JSON run configuration (defaults when omitted)")
    parser.add_argument("--out", help="output file; stdout when omitted")
    parser.add_argument("--print-config", action="store_true", help="print the effective configuration and exit")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.experiment)
        if args.print_config:
            _write(json.dumps(cfg.to_dict(), indent=2) + "\n", args.out)
            return EXIT_OK
        out = args.out or cfg.out_path
        if args.experiment == "validate":
            text, ok = run_validate(cfg)
            _write(text, out)
            return EXIT_OK if ok else EXIT_TOLERANCE
        runner = {"fig2": run_fig2, "fig3": run_fig3, "single": run_single}[args.experiment]
        _write(runner(cfg), out)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except ToleranceError as exc:
        print(f"tolerance failure: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE


if __name__ == "__main__":
    sys.exit(main())
