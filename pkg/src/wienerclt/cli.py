"""Command-line front end: ``wienerclt {solve,variance,simulate,report} CONFIG``."""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import equilibrium as eq
from . import fluctuations as fl
from . import simulator as sim
from .scenario import ConfigError, ScenarioConfig, build_profile, load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VARIANCE = 4
EXIT_SIMULATION = 5

OUT_DIR_ENV = "WIENERCLT_OUT_DIR"


@dataclass
class Analysis:
    """Deterministic side of a scenario: profile, fixed point and variance."""

    config: ScenarioConfig
    profile: object
    solution: eq.FixedPointSolution
    separable: eq.SeparableSolution | None
    beta_bar: float
    clt: fl.CltQuantities | None = None
    omega2: float | None = None
    extras: dict | None = None


def solve_step(cfg: ScenarioConfig) -> Analysis:
    profile, extras = build_profile(cfg)
    s = cfg.solver
    sol = eq.solve_general(profile, cfg.rho, tol=s.tol, max_iter=s.max_iter, damping=s.damping)
    sep = None
    if profile.is_separable:
        sep = eq.solve_profile_separable(profile, cfg.rho, tol=s.tol, max_iter=s.max_iter,
                                         damping=s.damping)
    return Analysis(cfg, profile, sol, sep, eq.deterministic_snr(sol, profile), extras=extras)


def variance_step(an: Analysis) -> Analysis:
    kappa = fl.fourth_moment(an.config.law)
    an.clt = fl.theta_squared(an.profile, an.solution, kappa)
    if an.separable is not None:
        an.omega2 = fl.omega_squared(an.separable, kappa)
    return an


def analyze(cfg: ScenarioConfig) -> Analysis:
    return variance_step(solve_step(cfg))


def simulate_step(an: Analysis, workers: int | None = None):
    """Run the campaign; returns ``(trials, moments, normality report or None)``."""
    cfg = an.config
    trials = sim.run_trials(an.profile, cfg.rho, cfg.law, cfg.trials, cfg.seed,
                            workers or cfg.workers)
    moments = sim.empirical_moments(trials, an.beta_bar) if trials.R >= 2 else None
    report = None
    if trials.R >= 100 and an.clt.theta2 > 0:
        z = sim.standardize(trials, an.beta_bar, math.sqrt(an.clt.theta2))
        report = sim.ks_normality(z)
    return trials, moments, report


def _write_rows(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["quantity", "value"])
        for k, v in rows:
            w.writerow([k, _num(v)])


def _num(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return v


def _summary(an: Analysis, trials, moments, report) -> dict:
    cfg = an.config
    out = {
        "model": cfg.model, "N": cfg.N, "K": cfg.K, "rho": cfg.rho, "law": cfg.law,
        "trials": trials.R, "seed": trials.seed,
        "fingerprint": trials.scenario_fingerprint,
        "streams": trials.per_trial_streams,
        "beta_bar": an.beta_bar, "theta2": an.clt.theta2,
    }
    if moments is not None:
        mean, var, dev = moments
        out.update(mean=mean, variance=var, K_variance=cfg.K * var,
                   deviation_second_moment=dev, K_deviation_second_moment=cfg.K * dev)
    if report is not None:
        out.update(ks_statistic=report.ks_statistic, ks_pvalue=report.ks_pvalue,
                   standardized_mean=report.mean, standardized_variance=report.variance)
    return out


def cmd_solve(cfg: ScenarioConfig, out_dir: Path) -> int:
    an = solve_step(cfg)
    _write_rows(out_dir / "equilibrium.csv", eq.solution_rows(an.solution, an.profile, an.separable))
    line = f"beta_bar={an.beta_bar:.17g} iterations={an.solution.iterations} residual={an.solution.residual:.3g}"
    if an.separable is not None:
        line += f" delta={an.separable.delta:.17g}"
    print(line)
    return EXIT_OK


def cmd_variance(cfg: ScenarioConfig, out_dir: Path) -> int:
    an = analyze(cfg)
    _write_rows(out_dir / "variance.csv",
                fl.variance_rows(an.clt, an.separable, an.omega2))
    line = f"kappa={an.clt.kappa:g} theta2={an.clt.theta2:.17g} radius={an.clt.spectral_radius:.6g}"
    if an.omega2 is not None:
        line += f" omega2={an.omega2:.17g}"
    print(line)
    return EXIT_OK


def cmd_simulate(cfg: ScenarioConfig, out_dir: Path) -> int:
    an = analyze(cfg)
    _write_rows(out_dir / "equilibrium.csv", eq.solution_rows(an.solution, an.profile, an.separable))
    _write_rows(out_dir / "variance.csv", fl.variance_rows(an.clt, an.separable, an.omega2))
    trials, moments, report = simulate_step(an)
    trials.to_csv(out_dir / "trials.csv")
    if report is not None:
        report.histogram_to_csv(out_dir / "histogram.csv")
    else:
        print(f"normality test skipped: needs >= 100 trials and theta2 > 0 "
              f"(R={trials.R}, theta2={an.clt.theta2:g})", file=sys.stderr)
    sim.write_summary(out_dir / "summary.json", _summary(an, trials, moments, report))
    parts = [f"beta_bar={an.beta_bar:.6g}"]
    if moments is not None:
        parts += [f"mean={moments[0]:.6g}", f"K*Var={cfg.K * moments[1]:.6g}"]
    parts.append(f"theta2={an.clt.theta2:.6g}")
    if report is not None:
        parts.append(f"KS_p={report.ks_pvalue:.4g}")
    print(" ".join(parts))
    return EXIT_OK


def sweep(cfg: ScenarioConfig, k_values) -> list[dict]:
    """Second moment of ``beta - beta_bar`` against ``theta2 / K`` for each K."""
    if not k_values:
        raise ConfigError("report: k_values must be non-empty")
    rows = []
    for K in k_values:
        sub = cfg.with_K(int(K))
        an = analyze(sub)
        trials, moments, _ = simulate_step(an)
        if moments is None:
            raise ConfigError("report: needs trials >= 2")
        dev = moments[2]
        predicted = an.clt.theta2 / sub.K
        rows.append({
            "K": sub.K, "N": sub.N, "beta_bar": an.beta_bar, "theta2_over_K": predicted,
            "deviation_second_moment": dev,
            "relative_gap": abs(dev - predicted) / predicted if predicted > 0 else math.inf,
        })
    return rows


def cmd_report(cfg: ScenarioConfig, out_dir: Path, k_values=None) -> int:
    rows = sweep(cfg, k_values if k_values else cfg.k_values)
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _num(v) for k, v in r.items()})
    for r in rows:
        print(f"K={r['K']} theta2/K={r['theta2_over_K']:.6g} "
              f"E(beta-beta_bar)^2={r['deviation_second_moment']:.6g} gap={r['relative_gap']:.3f}")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "variance": cmd_variance,
            "simulate": cmd_simulate, "report": cmd_report}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wienerclt",
        description="Deterministic SNR, CLT variance and Monte Carlo checks for the Wiener receiver.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("config", help="scenario config file")
    parser.add_argument("--seed", type=int, default=None, help="override [scenario] seed")
    parser.add_argument("--out-dir", default=None,
                        help=f"output directory (default: ${OUT_DIR_ENV} or the current directory)")
    args = parser.parse_args(argv)

    out_dir = Path(args.out_dir or os.environ.get(OUT_DIR_ENV, "."))
    try:
        cfg = load_config(args.config, {"seed": args.seed})
        out_dir.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except eq.ConvergenceError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except eq.WellPosednessError as exc:
        print(f"variance error: {exc}", file=sys.stderr)
        return EXIT_VARIANCE
    except (sim.SimulationError, ValueError) as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION


if __name__ == "__main__":
    sys.exit(main())
