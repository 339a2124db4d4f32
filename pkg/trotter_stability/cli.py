"""
Command line for schedules, error campaigns and closed-form bounds.

Every subcommand writes its results under --out. Exit codes:
0 when all requested outputs were written, 1 for invalid input,
2 for an internal or numerical failure.
"""

import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
import yaml

from .campaigns import (
    NOISE_CHECKS,
    CampaignConfig,
    NoiseSimOutcome,
    apply_overrides,
    check_hubbard,
    check_order_scaling,
    grid,
    hubbard_params,
    hubbard_report,
    ideal_error_table,
    load_config,
    noise_campaign,
    schedule_document,
)
from .models import HubbardParams
from .stability_analysis import theorem_bounds
from .utils import RunWriter

logger = logging.getLogger(__name__)

CAMPAIGNS_DIR = Path(__file__).parent / "resources" / "campaigns"


# =============================================================================
# HELPERS
# =============================================================================

def run_options(f):
    """--config, --seed, --trials, --out, --threads."""
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
                     default=None, help="Campaign file (YAML or JSON)"),
        click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None, help="Override the master seed"),
        click.option("--trials", type=click.IntRange(min=1), default=None, help="Override the trial count"),
        click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None,
                     help="Output directory"),
        click.option("--threads", type=click.IntRange(min=1), default=None,
                     help="Worker threads; results do not depend on it"),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _config(config_path: Optional[Path], **overrides: Any) -> CampaignConfig:
    config = load_config(config_path) if config_path else CampaignConfig()
    return apply_overrides(config, **overrides)


def write_noise_outcome(writer: RunWriter, outcome: NoiseSimOutcome, prefix: str = "") -> None:
    if len(outcome.points) == 1:
        writer.write_csv(f"{prefix}trials.csv", outcome.points[0].trial_frame())
    else:
        for point in outcome.points:
            writer.write_csv(f"{prefix}trials_{point.label}.csv", point.trial_frame())
        writer.write_csv(f"{prefix}sweep.csv", outcome.sweep_frame())
    writer.write_json(f"{prefix}summary.json", outcome.summary())


def bundled_campaigns() -> List[Path]:
    return sorted(CAMPAIGNS_DIR.glob("*.yaml"))


# =============================================================================
# COMMANDS
# =============================================================================

@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Log progress at DEBUG level")
def cli(verbose: bool):
    """Stability of Trotter-Suzuki product formulas under element-wise machine error."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@run_options
@click.option("--order", type=int, default=None, help="1 for Trotter, even 2k for Suzuki")
@click.option("--r", "r", type=click.IntRange(min=1), default=None, help="Number of segments")
@click.option("--lambda", "lam", type=float, default=None, help="Total time λ")
@click.option("--merge/--no-merge", default=None, help="Merge adjacent equal-index terms")
def schedule(config_path, seed, trials, out, threads, order, r, lam, merge):
    """Build a schedule and count its exponentials."""
    config = _config(config_path, seed=seed, out=out, order=order, r=r, lam=lam, merge=merge)
    sched, cost = schedule_document(config)
    with RunWriter(config.out) as writer:
        path = writer.write_json("schedule.json", {"schedule": sched, "cost": cost})
    click.echo(
        f"✓ Schedule with N={sched.N} factors: "
        f"{cost.raw_exponentials} raw, {cost.merged_exponentials} merged exponentials"
    )
    click.echo(f"✅ Wrote {path}")


@cli.command("ideal-error")
@run_options
def ideal_error_cmd(config_path, seed, trials, out, threads):
    """Tabulate the noiseless product-formula error over the λ, r and order sweeps."""
    config = _config(config_path, seed=seed, out=out)
    table = ideal_error_table(config)
    with RunWriter(config.out) as writer:
        path = writer.write_csv("ideal_error.csv", table)
    click.echo(f"✓ {len(table)} ideal-error point(s)")
    click.echo(f"✅ Wrote {path}")


@cli.command("noise-sim")
@run_options
def noise_sim(config_path, seed, trials, out, threads):
    """Monte Carlo campaign of the machine error ε over trials."""
    config = _config(config_path, seed=seed, trials=trials, out=out, threads=threads)
    outcome = noise_campaign(config)
    with RunWriter(config.out) as writer:
        write_noise_outcome(writer, outcome)
    for point in outcome.points:
        stats = point.result.stats
        click.echo(f"✓ N={point.N} ℓ={point.dim} ε_m={point.epsilon_m!r}: mean={stats.mean:.6g} std={stats.std:.6g}")
    for key, fit in outcome.growth.items():
        click.echo(f"✓ {key}: {fit.model} growth, rate={fit.rate:.4g}, r²={fit.r_squared:.4f}")
    click.echo(f"✅ Wrote {len(writer.written)} file(s) to {config.out}")


@cli.command()
@click.option("--n", "N", type=click.IntRange(min=1), required=True, help="Number of factors N")
@click.option("--dim", type=click.IntRange(min=1), required=True, help="Matrix dimension ℓ")
@click.option("--epsilon-m", type=click.FloatRange(min=0), required=True, help="Machine epsilon ε_m")
@click.option("--epsilon-t", type=click.FloatRange(min=0, min_open=True), default=None, help="Error budget ε_t")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=Path("runs"))
def bounds(N, dim, epsilon_m, epsilon_t, out):
    """Evaluate the closed-form bounds for one (N, ℓ, ε_m, ε_t)."""
    report = theorem_bounds(N, dim, epsilon_m, epsilon_t)
    with RunWriter(out) as writer:
        path = writer.write_json("bounds.json", report)
    click.echo(f"✓ σ upper bound {report.thm3_upper:.6g}, unitary {report.cor5_upper:.6g}")
    click.echo(f"✅ Wrote {path}")


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.option("--t-h", type=float, default=None, help="Hopping amplitude t_H")
@click.option("--u-h", type=float, default=None, help="On-site interaction U_H")
@click.option("--eta", type=int, default=None, help="Lattice side η")
@click.option("--sim-time", type=float, default=None, help="Simulation time t")
@click.option("--epsilon-t", type=float, default=None, help="Target error ε_t")
@click.option("--boundary", type=click.Choice(["open", "periodic"]), default=None)
@click.option("--m", "m", type=click.IntRange(min=1), default=None, help="Term count; defaults to the bond count")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None)
def hubbard(config_path, t_h, u_h, eta, sim_time, epsilon_t, boundary, m, out):
    """Cost and machine-epsilon budget of a 2-D Hubbard simulation."""
    source: Dict[str, Any] = {"kind": "hubbard"}
    out_dir = out or Path("runs")
    if config_path:
        config = load_config(config_path)
        grid(config, (), "hubbard")
        source = dict(config.source)
        out_dir = out or config.out
    flags = {"t_H": t_h, "U_H": u_h, "eta": eta, "sim_time": sim_time, "epsilon_t": epsilon_t, "boundary": boundary}
    source.update({k: v for k, v in flags.items() if v is not None})
    params: HubbardParams = hubbard_params(source)

    report = hubbard_report(params, m if m is not None else source.get("m"))
    with RunWriter(out_dir) as writer:
        path = writer.write_json("hubbard.json", report)
    click.echo(f"✓ τ={report['tau']:.6g}, N_exp={report['N_exp']:.6g}, ε_m budget={report['epsilon_m_budget']:.6g}")
    click.echo(f"✅ Wrote {path}")


@cli.command()
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None, help="Override every master seed")
@click.option("--trials", type=click.IntRange(min=1), default=None, help="Override every trial count")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=Path("runs/repro"))
@click.option("--threads", type=click.IntRange(min=1), default=None)
@click.option("--only", multiple=True, help="Run only the named campaign(s)")
def repro(seed, trials, out, threads, only):
    """Run the bundled campaigns and check their expected outcomes."""
    paths = bundled_campaigns()
    if only:
        known = {p.stem for p in paths}
        unknown = set(only) - known
        if unknown:
            raise click.BadParameter(f"unknown campaign(s): {', '.join(sorted(unknown))}", param_hint="--only")
        paths = [p for p in paths if p.stem in only]

    results = []
    with RunWriter(out) as writer:
        for path in paths:
            config = apply_overrides(load_config(path), seed=seed, trials=trials, threads=threads)
            name = path.stem
            click.echo(f"→ {name}: {config.description}")
            if config.command == "ideal-error":
                table = ideal_error_table(config)
                writer.write_csv(f"{name}/ideal_error.csv", table)
                checks = check_order_scaling(table)
            elif config.command == "hubbard":
                grid(config, (), "hubbard")
                report = hubbard_report(hubbard_params(config.source), config.source.get("m"))
                writer.write_json(f"{name}/hubbard.json", report)
                checks = check_hubbard(report)
            else:
                outcome = noise_campaign(config)
                write_noise_outcome(writer, outcome, prefix=f"{name}/")
                checks = NOISE_CHECKS[name](outcome) if name in NOISE_CHECKS else []
            for check in checks:
                mark = "✓" if check["passed"] else "✗"
                click.echo(f"  {mark} {check['check']}")
            results.append({"campaign": name, "checks": checks})
        writer.write_json("repro_summary.json", {"campaigns": results})

    passed = sum(c["passed"] for r in results for c in r["checks"])
    total = sum(len(r["checks"]) for r in results)
    click.echo(f"✅ {passed}/{total} checks passed; outputs in {out}")


# =============================================================================
# ENTRY POINT
# =============================================================================

def main(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and map failures to exit codes instead of tracebacks."""
    try:
        result = cli.main(args=argv, prog_name="trotter-stability", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return 1
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except (ValueError, ZeroDivisionError, OverflowError, FileNotFoundError, yaml.YAMLError) as e:
        click.echo(f"Error: {e}", err=True)
        return 1
    except Exception as e:  # noqa: BLE001
        logger.debug("Internal failure", exc_info=True)
        click.echo(f"Error: {type(e).__name__}: {e}", err=True)
        return 2
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(main())
