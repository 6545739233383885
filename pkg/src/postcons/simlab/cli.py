"""Command line entry point ``postcons``.

Exit codes: 0 when every certificate or criterion passes, 1 when a named
condition fails, 2 on configuration errors.
"""

import sys
from pathlib import Path

import click
import tomli

from ..exceptions import ConfigurationError, DegenerateInputError
from ..rng import make_generator
from .config import load_config
from .experiment import run_experiment
from .factory import build_scenario
from .oracle import check_instance, random_instance
from .report import CSV_NAME, PLOT_NAME, SUMMARY_NAME, plot_masses, read_csv, summary_text

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _config_or_exit(path):
    try:
        return load_config(path)
    except ConfigurationError as e:
        click.echo(f"configuration error: {e}", err=True)
        sys.exit(EXIT_CONFIG)


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Posterior consistency certificates and simulations."""


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
def check(config):
    """Run the scenario's certificate only."""
    cfg = _config_or_exit(config)
    try:
        cert = build_scenario(cfg).certify()
    except ConfigurationError as e:
        click.echo(f"configuration error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(cert.to_text())
    if not cert.passed:
        click.echo(f"FAILED: {cert.failing_condition}", err=True)
        sys.exit(EXIT_FAIL)


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Output directory.")
@click.option("--reps", type=click.IntRange(min=1), default=None, help="Replications.")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Master seed.")
@click.option("--workers", type=click.IntRange(min=1), default=None,
              help="Worker processes (output does not depend on it).")
@click.option("--svg", is_flag=True, help="Also plot mass against n.")
@click.option("--no-certify", is_flag=True, help="Skip the certificate.")
def simulate(config, out_dir, reps, seed, workers, svg, no_certify):
    """Certify, then simulate replications and write the CSV report."""
    from .report import emit_report

    cfg = _config_or_exit(config)
    try:
        res = run_experiment(cfg, workers=workers, replications=reps, master_seed=seed,
                             certify=not no_certify)
    except ConfigurationError as e:
        click.echo(f"configuration error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        paths = emit_report(res, out_dir, svg=svg)
    except OSError as e:
        click.echo(f"cannot write report: {e}", err=True)
        sys.exit(EXIT_FAIL)
    click.echo(paths["summary"].read_text(), nl=False)
    failed = []
    if res.certificate is not None and not res.certificate.passed:
        failed.append(f"certificate: {res.certificate.failing_condition}")
    if res.breaches:
        failed.append("domination")
    if failed:
        click.echo("FAILED: " + ", ".join(failed), err=True)
        sys.exit(EXIT_FAIL)


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
def oracle(config):
    """Compare exact enumeration with the implemented bounds.

    CONFIG is a TOML file with an ``[oracle]`` table holding ``instances``,
    ``seed`` and optionally ``alphas``.
    """
    try:
        data = tomli.loads(Path(config).read_text(encoding="utf-8"))
        tab = data["oracle"]
        count, seed = int(tab.get("instances", 50)), int(tab.get("seed", 0))
        alphas = tuple(float(a) for a in tab.get("alphas", (0.25, 0.5, 0.75)))
    except (OSError, KeyError, TypeError, ValueError, tomli.TOMLDecodeError) as e:
        click.echo(f"configuration error: {e!r}", err=True)
        sys.exit(EXIT_CONFIG)
    rng = make_generator(seed)
    worst, bad = float("inf"), 0
    for i in range(count):
        chk = check_instance(random_instance(rng), alphas)
        worst = min(worst, chk.min_slack)
        bad += not chk.passed
        click.echo(f"instance {i}: n={chk.instance.n} exact={chk.exact!r} "
                   f"min_slack={chk.min_slack!r} {'ok' if chk.passed else 'VIOLATED'}")
    click.echo(f"instances={count} violations={bad} worst_slack={worst!r}")
    if bad:
        sys.exit(EXIT_FAIL)


@main.command()
@click.argument("directory", type=click.Path(file_okay=False, exists=True))
@click.option("--svg", is_flag=True, help="Also plot mass against n.")
@click.option("--threshold", type=float, default=0.05, show_default=True,
              help="Mass threshold for the replication-fraction column.")
def report(directory, svg, threshold):
    """Summarize a simulation directory."""
    d = Path(directory)
    try:
        rows = read_csv(d / CSV_NAME)
        if not rows:
            raise DegenerateInputError("empty trajectory table")
    except (OSError, DegenerateInputError) as e:
        click.echo(f"cannot read {d / CSV_NAME}: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    text = summary_text(rows, threshold)
    (d / SUMMARY_NAME).write_text(text, encoding="utf-8")
    click.echo(text, nl=False)
    if svg:
        plot_masses(rows, d / PLOT_NAME)
        click.echo(f"wrote {d / PLOT_NAME}")


if __name__ == "__main__":  # pragma: no cover
    main()
