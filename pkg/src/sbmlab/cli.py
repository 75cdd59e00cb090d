"""Command-line entry point ``sbm-lab``."""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from . import bernstein, green, heatkernel, invariants, subordinator
from .config import COMMANDS, RunConfig, load_config
from .errors import ConfigError, DiagnosticError, DomainError, NumericError, PreconditionError
from .reports import jsonable, write_csv, write_json

EXIT_PASS, EXIT_FAIL, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2, 3

PHI_COLUMNS = ("lam", "phi", "phi_prime", "phi_second", "H")
BLOWUP_COLUMNS = ("r", "p", "scaled")

EPILOG = """\
artifacts (CSV: UTF-8, LF line ends, '.' decimal, header always written)
  phi-table  phi_table.csv   lam,phi,phi_prime,phi_second,H
               lam: grid point; phi_prime, phi_second: derivatives;
               H: phi - lam*phi_prime
  scaling    scaling.json    scaling fits for phi and H plus ratio statistics
  tails      tails.csv       t,r,regime_lhs,tail_prob,tH,ratio,stderr
               regime_lhs: t*phi(1/r); tail_prob: P(S_t >= r);
               tH: t*H(1/r); ratio: tail_prob/tH;
               stderr: binomial error of an n-sample estimate
             tails.json      upper, lower, interval and two-sided checks
  kernel     kernel.csv      t,r,d,regime,p_fourier,p_subord,p_stderr,
                             env_lower,env_upper,ratio_lo,ratio_hi
               regime: near_diagonal (t*phi(r^-2) >= 1) or off_diagonal;
               p_fourier: Fourier inversion (empty when unusable);
               p_subord: subordination estimate; p_stderr: its Monte
               Carlo standard error (0 for quadrature); env_lower,
               env_upper: calibrated envelope; ratio_lo = p/env_lower,
               ratio_hi = p/env_upper
  verify     kernel.csv, calibration.json {C, a_L, a_U, grid, pass,
             worst_point}; with --all also invariants.json
  green      green.csv       r,d,G,envelope,refined_envelope,ratio
               G: Green function; envelope: 1/(r^d phi(r^-2));
               refined_envelope: r^(2-d) log(1/r) form (conjugate_gamma,
               d >= 3); ratio: G/envelope
             green.json      envelope check
  blowup     blowup.csv      r,p,scaled   (scaled = p * r^(d-beta))
             blowup.json     probe report

exit codes: 0 all checks pass, 1 a bound check fails, 2 numeric error
(details in error.json), 3 configuration or precondition error
"""


def build_parser():
    ap = argparse.ArgumentParser(
        prog="sbm-lab",
        description="Heat kernel estimates for subordinate Brownian motion.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON run configuration")
    ap.add_argument("--seed", type=int, help="random seed (overrides the config)")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--d", type=int, help="dimension (overrides the config)")
    ap.add_argument("--all", action="store_true", default=None, help="verify: also run every invariant suite")
    return ap


def _grid(cfg):
    return heatkernel.KernelGrid.log(cfg.t_range, cfg.r_range, cfg.n_t, cfg.n_r)


def _rows_for_csv(rows):
    out = []
    for row in rows:
        row = dict(row)
        row.setdefault("p_stderr", 0.0 if row.get("p_subord") is not None else None)
        out.append(row)
    return out


def cmd_phi_table(cfg, out):
    lam = np.geomspace(*cfg.lambda_range, cfg.n_lambda)
    ev = bernstein.evaluate(cfg.spec, lam)
    rows = [
        {"lam": float(a), "phi": float(b), "phi_prime": float(c), "phi_second": float(e), "H": float(h)}
        for a, b, c, e, h in zip(lam, ev.phi, ev.phi_prime, ev.phi_second, ev.H)
    ]
    write_csv(out / "phi_table.csv", PHI_COLUMNS, rows)
    return True


def cmd_scaling(cfg, out):
    payload = {"spec": cfg.spec.to_dict()}
    for target in ("phi", "H"):
        payload[target] = bernstein.scaling_indices(cfg.spec, target, cfg.lambda_range, cfg.n_lambda).to_dict()
    payload["comparability"] = bernstein.comparability(cfg.spec, cfg.lambda_range).to_dict()
    write_json(out / "scaling.json", payload)
    return True


def cmd_tails(cfg, out):
    spec = cfg.spec
    t_values = np.geomspace(*cfg.t_range, cfg.n_t)
    r_values = np.geomspace(*cfg.r_range, cfg.n_r)
    grid = subordinator.tail_grid(spec, t_values, r_values, cfg.epsilon, cfg.n_samples, cfg.seed)
    reports = [
        subordinator.check_upper_tail(spec, grid),
        subordinator.check_lower_tail(spec, grid),
        subordinator.check_interval_prob(spec, grid),
        subordinator.check_two_sided(spec, grid),
    ]
    write_csv(out / "tails.csv", subordinator.TAIL_COLUMNS, reports[-1].rows)
    write_json(out / "tails.json", {"reports": [r.to_dict(include_rows=False) for r in reports]})
    return all(r.passed for r in reports)


def _kernel_rows(cfg, grid):
    rows = heatkernel.kernel_rows(cfg.spec, grid, cfg.d, cfg.estimator)
    if cfg.monte_carlo:
        for k, row in enumerate(rows):
            est = heatkernel.p_subordinate(cfg.spec, row["t"], row["r"], cfg.d, "monte_carlo",
                                           seed=cfg.seed, stream=k)
            row["p_subord"], row["p_stderr"] = est.value, est.stderr
    return rows


def cmd_kernel(cfg, out):
    grid = _grid(cfg)
    rows = _kernel_rows(cfg, grid)
    rep = heatkernel._calibrated_report("kernel", cfg.spec, rows, cfg.d, "main")
    write_csv(out / "kernel.csv", heatkernel.KERNEL_COLUMNS, _rows_for_csv(rep.rows))
    return True


def cmd_verify(cfg, out):
    ok = True
    if cfg.spec is not None:
        grid = _grid(cfg)
        # gates before the (possibly expensive or ill-defined) kernel values
        heatkernel.check_gates(cfg.spec, grid, cfg.envelope)
        rows = _kernel_rows(cfg, grid)
        rep = heatkernel.verify_main_theorem(cfg.spec, grid, cfg.d, cfg.envelope, rows=rows)
        write_csv(out / "kernel.csv", heatkernel.KERNEL_COLUMNS, _rows_for_csv(rep.rows))
        c = rep.constants
        write_json(out / "calibration.json", {
            "C": c["C"], "a_L": c["a_L"], "a_U": c["a_U"],
            "grid": grid.to_dict() | {"d": cfg.d},
            "pass": rep.passed, "worst_point": rep.worst_point,
            "slope_t": c["slope_t"], "slope_r": c["slope_r"],
            "margins": {"kappa": cfg.envelope.kappa, "eta": cfg.envelope.eta, "theta": cfg.envelope.theta},
        })
        ok &= rep.passed
    if cfg.all:
        reports = invariants.run_all()
        write_json(out / "invariants.json", {"suites": [r.to_dict(include_rows=False) for r in reports]})
        for r in reports:
            print(r.summary())
        ok &= all(r.passed for r in reports)
    return ok


def cmd_green(cfg, out):
    r_grid = np.geomspace(*cfg.r_range, cfg.n_r)
    rep = green.verify_green(cfg.spec, r_grid, cfg.d)
    write_csv(out / "green.csv", green.GREEN_COLUMNS, rep.rows)
    write_json(out / "green.json", rep.to_dict(include_rows=False))
    return rep.passed


def cmd_blowup(cfg, out):
    rep = heatkernel.blowup_probe(cfg.spec, cfg.d, cfg.t, cfg.r_sequence)
    write_csv(out / "blowup.csv", BLOWUP_COLUMNS, rep.rows)
    write_json(out / "blowup.json", rep.to_dict())
    return rep.passed


HANDLERS = {
    "phi-table": cmd_phi_table,
    "scaling": cmd_scaling,
    "tails": cmd_tails,
    "kernel": cmd_kernel,
    "verify": cmd_verify,
    "green": cmd_green,
    "blowup": cmd_blowup,
}


def run(cfg: RunConfig):
    """Execute one configured command; returns the exit code."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        ok = HANDLERS[cfg.command](cfg, out)
    except NumericError as exc:
        write_json(out / "error.json", {"error": str(exc), "type": "NumericError",
                                        "diagnostics": jsonable(exc.diagnostics)})
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PreconditionError as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        if exc.offending:
            print(json.dumps(jsonable(exc.offending[:20])), file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, DiagnosticError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_PASS if ok else EXIT_FAIL


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            cfg = load_config(args.config)
            if cfg.command != args.command:
                cfg = cfg.override(command=args.command)
        elif args.command == "verify" and args.all:
            cfg = RunConfig(command="verify", all=True)
        else:
            raise ConfigError(f"command {args.command!r} needs --config")
        cfg = cfg.override(seed=args.seed, out=args.out, d=args.d, all=args.all)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cfg)
    except Exception as exc:  # pragma: no cover - last-resort diagnostics
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "error.json", {"error": str(exc), "type": type(exc).__name__,
                                        "traceback": traceback.format_exc()})
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
