"""Command-line interface: ``maddaudit ingest|mi|audit|plot|report``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 training error.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from .config import ConfigError, load_config
from .density import EmptyGroupError
from .models import TrainingError
from .pipeline import load_bundle, render_plots, run_audit, run_ingest, run_mi, write_reports
from .tabular import DataError

EXIT_USAGE, EXIT_DATA, EXIT_TRAINING = 1, 2, 3


def _source_options(fn):
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="TOML config file."),
        click.option("--data-dir", help="OULAD directory, or a directory of ingested datasets."),
        click.option("--csv", help="Generic CSV with a 0/1 target column and 0/1 sensitive columns."),
        click.option("--target-col", help="Target column of the generic CSV."),
        click.option("--sensitive", multiple=True, help="Sensitive feature (repeatable)."),
        click.option("--course", "courses", multiple=True, help="Course id to process (repeatable)."),
        click.option("--e", type=float, help="Probability step (1/e must be an integer)."),
        click.option("--threshold", type=float, help="Classification threshold t."),
        click.option("--split", type=float, help="Training fraction of the stratified split."),
        click.option("--seed", type=int, help="Random seed."),
        click.option("--models", help="Comma-separated model kinds among LR,KN,DT,NB."),
        click.option("--out", help="Output directory."),
    ]
    for opt in reversed(options):
        fn = opt(fn)
    return fn


def _config(config_path, data_dir, csv, target_col, sensitive, courses, e, threshold, split, seed, models, out):
    try:
        return load_config(
            config_path,
            data_dir=data_dir,
            csv=csv,
            target_col=target_col,
            sensitive=list(sensitive) or None,
            courses=list(courses) or None,
            e=e,
            threshold=threshold,
            split=split,
            seed=seed,
            models=models.split(",") if models else None,
            out=out,
        )
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from None


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress.")
def cli(verbose):
    """Fairness audit of binary classifiers with MADD and ABROCA."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@_source_options
def ingest(**kw):
    """Preprocess the data and write per-course datasets and an ingestion report."""
    report = run_ingest(_config(**kw))
    click.echo(f"ingested {report['total_rows']} rows in {len(report['courses'])} course(s)")


@cli.command()
@_source_options
def mi(**kw):
    """Mutual information between sensitive and other features, with a bar chart."""
    cfg = _config(**kw)
    scores = run_mi(cfg)
    for c in scores.courses():
        avgs = ", ".join(f"{s}={scores.average(c, s):.4f}" for s in cfg.sensitive)
        click.echo(f"{c}: {avgs}")


@cli.command()
@_source_options
def audit(**kw):
    """Train the models and compute MADD and ABROCA for every course x model x feature."""
    cfg = _config(**kw)
    bundle = run_audit(cfg)
    for cid, course in bundle["courses"].items():
        s = course["summary"]
        click.echo(f"{cid}: fairest model by MADD {s['fairest_model']['MADD']}, "
                   f"by ABROCA {s['fairest_model']['ABROCA']}; "
                   f"most sensitive feature (MADD) {s['most_sensitive_feature']['MADD']}")
    click.echo(f"wrote {Path(cfg.out) / 'bundle.json'}")


@cli.command()
@click.option("--bundle", "bundle_path", required=True, type=click.Path(), help="bundle.json or its directory.")
@click.option("--out", type=click.Path(file_okay=False), help="Output directory (default: next to the bundle).")
def plot(bundle_path, out):
    """Re-render the SVG figures from a saved audit bundle."""
    bundle = load_bundle(Path(bundle_path))
    out = Path(out) if out else _bundle_dir(bundle_path)
    click.echo(f"wrote {len(render_plots(bundle, out))} SVG files")


@cli.command()
@click.option("--bundle", "bundle_path", required=True, type=click.Path(), help="bundle.json or its directory.")
@click.option("--out", type=click.Path(file_okay=False), help="Output directory (default: next to the bundle).")
def report(bundle_path, out):
    """Re-render the Markdown reports from a saved audit bundle."""
    bundle = load_bundle(Path(bundle_path))
    out = Path(out) if out else _bundle_dir(bundle_path)
    for p in write_reports(bundle, out):
        click.echo(str(p))


def _bundle_dir(path) -> Path:
    p = Path(path)
    return p if p.is_dir() else p.parent


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="maddaudit", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except (DataError, EmptyGroupError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return EXIT_DATA
    except TrainingError as exc:
        click.echo(f"training error: {exc}", err=True)
        return EXIT_TRAINING
    return 0


if __name__ == "__main__":
    sys.exit(main())
