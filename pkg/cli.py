#!/usr/bin/env python3
"""
Command-line entry point for the correlation network toolkit.

    python cli.py ingest  --config run.yaml
    python cli.py analyze --config run.yaml --horizons 15,60 --filters MST,TMFG
    python cli.py synth   --spec synth.yaml --out data/
    python cli.py export  --manifest output/ --formats dot
"""

import functools
import logging
import sys
from typing import Any, Callable, Optional

import click

from config import PipelineConfig, load_config
from errors import NetworkAnalysisError
from pipeline import ingest, reexport, run_pipeline
from synth import load_synth_spec, synthesize_to_dir

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

logger = logging.getLogger(__name__)


def banner(title: str) -> None:
    click.echo("=" * 60)
    click.echo(f"📈 {title}")
    click.echo("=" * 60)


def run_options(command: Callable) -> Callable:
    """Options shared by the commands that read a pipeline config."""
    options = [
        click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
                     help='Flat YAML config file'),
        click.option('--seed', type=int, help='Master seed'),
        click.option('--horizons', help='Comma separated horizons in seconds'),
        click.option('--filters', help='Comma separated subset of MST,PMFG,TMFG'),
        click.option('--out', 'output_dir', type=click.Path(file_okay=False), help='Output directory'),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def handle_errors(command: Callable) -> Callable:
    """Report library errors as a failed command, log anything else as critical."""
    @functools.wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return command(*args, **kwargs)
        except NetworkAnalysisError as e:
            logger.error(f"{type(e).__name__}: {e}")
            raise click.ClickException(str(e)) from e
        except click.ClickException:
            raise
        except Exception as e:
            logger.critical(f"Unexpected failure: {e}")
            raise
    return wrapper


def resolve_config(ctx: click.Context, config_path: Optional[str], seed: Optional[int],
                   horizons: Optional[str], filters: Optional[str], output_dir: Optional[str]) -> PipelineConfig:
    cfg = load_config(config_path, master_seed=seed, horizons_s=horizons, filters=filters, output_dir=output_dir)
    if not ctx.obj.get('verbose'):
        logging.getLogger().setLevel(cfg.log_level.upper())
    return cfg


@click.group()
@click.option('--verbose', '-v', is_flag=True, help='Debug logging')
@click.pass_context
def cli(ctx: click.Context, verbose: bool) -> None:
    """Correlation networks across sampling horizons."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT)
    ctx.ensure_object(dict)
    ctx.obj['verbose'] = verbose


@cli.command('ingest')
@run_options
@click.pass_context
@handle_errors
def ingest_command(ctx: click.Context, config_path, seed, horizons, filters, output_dir) -> None:
    """Validate, resample and gap-fill the inputs; write one return panel per horizon."""
    cfg = resolve_config(ctx, config_path, seed, horizons, filters, output_dir)
    banner('Ingest')
    written = ingest(cfg)
    click.echo(f"✅ Wrote {len(written)} files under {cfg.output_dir}")


@cli.command('analyze')
@run_options
@click.pass_context
@handle_errors
def analyze_command(ctx: click.Context, config_path, seed, horizons, filters, output_dir) -> None:
    """Run the full pipeline and write reports, tables and graph exports."""
    cfg = resolve_config(ctx, config_path, seed, horizons, filters, output_dir)
    banner('Analyze')
    click.echo(f"Horizons: {', '.join(str(h) for h in cfg.horizons_s)}")
    click.echo(f"Filters: {', '.join(k.value for k in cfg.filters)}")
    click.echo(f"Bootstrap replicas: {cfg.bootstrap_replicas}, shuffles: {cfg.shuffle_count}, seed: {cfg.master_seed}")
    manifest = run_pipeline(cfg)
    click.echo("=" * 60)
    click.echo(f"✅ Run complete: {len(manifest.horizons)} horizons, {len(manifest.files())} files in {cfg.output_dir}")
    click.echo("=" * 60)


@cli.command('synth')
@click.option('--spec', 'spec_path', required=True, type=click.Path(exists=True, dir_okay=False),
              help='YAML generator spec')
@click.option('--seed', type=int, help='Overrides the seed in the spec')
@click.option('--out', 'output_dir', required=True, type=click.Path(file_okay=False),
              help='Directory for the CSV files')
@click.pass_context
@handle_errors
def synth_command(ctx: click.Context, spec_path: str, seed: Optional[int], output_dir: str) -> None:
    """Emit synthetic OHLCV files and a taxonomy from a generator spec."""
    spec = load_synth_spec(spec_path)
    if seed is not None:
        spec.seed = seed
    banner(f"Synth ({type(spec).__name__})")
    written = synthesize_to_dir(spec, output_dir)
    click.echo(f"✅ Wrote {len(written)} files under {output_dir}")


@cli.command('export')
@click.option('--manifest', 'manifest_path', required=True, type=click.Path(exists=True),
              help='manifest.json or the run directory holding it')
@click.option('--formats', default='graphml,dot', show_default=True, help='Comma separated export formats')
@click.option('--taxonomy', 'taxonomy_path', type=click.Path(exists=True, dir_okay=False),
              help='Taxonomy file, defaults to the one the run used')
@click.pass_context
@handle_errors
def export_command(ctx: click.Context, manifest_path: str, formats: str, taxonomy_path: Optional[str]) -> None:
    """Re-export the graphs of a finished run."""
    banner('Export')
    written = reexport(manifest_path, [f.strip().lower() for f in formats.split(',') if f.strip()], taxonomy_path)
    click.echo(f"✅ Re-exported {len(written)} graph files")


def main() -> None:
    try:
        cli(obj={})
    except Exception as e:
        logger.critical(f"Failed to run command: {e}")
        sys.exit(1)


if __name__ == '__main__':
    main()
