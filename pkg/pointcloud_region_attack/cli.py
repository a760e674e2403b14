"""Command-line interface for the point cloud region attack pipeline.

Flags mirror RunConfig fields. ``--config`` loads a JSON RunConfig first; any
flag given on the command line overrides the file value.
"""

import json
import typer
from loguru import logger
from pathlib import Path
from pointcloud_region_attack.helpers.commands import (
    RunConfig,
    cmd_attack,
    cmd_gen_data,
    cmd_report,
    cmd_saliency,
    cmd_train,
)
from pointcloud_region_attack.helpers.utils import configure_logging, configure_torch
from typing import Any, Callable, Dict, List, Optional, TypeVar


T = TypeVar('T')

app = typer.Typer(
    name='pointcloud-attack',
    help='Region-saliency guided adversarial attacks on point cloud classifiers.',
    no_args_is_help=True,
    add_completion=False,
)

ConfigOption = typer.Option(None, '--config', help='JSON RunConfig file; flags override it.')
SeedOption = typer.Option(None, '--seed', help='Global seed.')
OutputOption = typer.Option(None, '--output', '-o', help='Output directory.')


@app.callback()
def _setup(
    verbose: bool = typer.Option(False, '--verbose', '-v', help='Log at DEBUG level.'),
) -> None:
    configure_logging('DEBUG' if verbose else None)
    configure_torch()


def build_config(config_file: Optional[Path], overrides: Dict[str, Any]) -> RunConfig:
    """Merge a JSON config file with dotted-key flag overrides.

    Args:
        config_file (Path): Optional RunConfig JSON file.
        overrides (Dict[str, Any]): Keys like ``attack.epsilon``; None values are ignored.

    Returns:
        RunConfig: The validated effective configuration.
    """
    data: Dict[str, Any] = json.loads(config_file.read_text()) if config_file else {}
    for key, value in overrides.items():
        if value is None:
            continue
        node = data
        *parents, leaf = key.split('.')
        for parent in parents:
            node = node.setdefault(parent, {})
        node[leaf] = str(value) if isinstance(value, Path) else value
    return RunConfig.model_validate(data)


def _run(step: Callable[[RunConfig], T], config_file: Optional[Path], overrides: Dict) -> T:
    try:
        config = build_config(config_file, overrides)
        return step(config)
    except Exception as e:
        logger.error(f'{step.__name__} failed: {e}')
        typer.echo(f'Error: {e}', err=True)
        raise typer.Exit(code=1)


def _region_count(m: Optional[int]) -> Dict[str, Optional[int]]:
    return {'shapley.m': m, 'attack.m': m}


@app.command('gen-data')
def gen_data(
    output: Optional[Path] = OutputOption,
    classes: Optional[str] = typer.Option(None, help='Comma-separated shape classes.'),
    train_per_class: Optional[int] = typer.Option(None, help='Training clouds per class.'),
    test_per_class: Optional[int] = typer.Option(None, help='Test clouds per class.'),
    points: Optional[int] = typer.Option(None, help='Points per cloud.'),
    jitter: Optional[float] = typer.Option(None, help='Gaussian coordinate noise.'),
    fmt: Optional[str] = typer.Option(None, '--format', help='pcad or xyz.'),
    seed: Optional[int] = SeedOption,
    config: Optional[Path] = ConfigOption,
) -> None:
    """Generate the synthetic shape dataset and its manifest."""
    class_list = [name.strip() for name in classes.split(',') if name.strip()] if classes else None
    manifest = _run(
        cmd_gen_data,
        config,
        {
            'output': output,
            'seed': seed,
            'data.classes': class_list,
            'data.train_per_class': train_per_class,
            'data.test_per_class': test_per_class,
            'data.points': points,
            'data.jitter': jitter,
            'data.fmt': fmt,
        },
    )
    typer.echo(f'{len(manifest.entries)} clouds in {len(manifest.classes)} classes')


@app.command()
def train(
    dataset: Optional[Path] = typer.Option(None, help='Dataset manifest.'),
    output: Optional[Path] = OutputOption,
    epochs: Optional[int] = typer.Option(None),
    batch_size: Optional[int] = typer.Option(None),
    learning_rate: Optional[float] = typer.Option(None),
    augment_rotation: Optional[bool] = typer.Option(
        None, '--augment-rotation/--no-augment-rotation'
    ),
    augment_jitter: Optional[float] = typer.Option(None),
    seed: Optional[int] = SeedOption,
    config: Optional[Path] = ConfigOption,
) -> None:
    """Train the victim classifier."""
    report = _run(
        cmd_train,
        config,
        {
            'dataset': dataset,
            'output': output,
            'seed': seed,
            'train.epochs': epochs,
            'train.batch_size': batch_size,
            'train.learning_rate': learning_rate,
            'train.augment_rotation': augment_rotation,
            'train.augment_jitter': augment_jitter,
        },
    )
    typer.echo(f'final test accuracy {report.final_test_accuracy:.4f}')


@app.command()
def saliency(
    model: Optional[Path] = typer.Option(None, help='Victim model file.'),
    dataset: Optional[Path] = typer.Option(None, help='Dataset manifest.'),
    cloud: Optional[Path] = typer.Option(None, help='Single cloud file instead of a split.'),
    split: Optional[str] = typer.Option(None, help='train or test.'),
    limit: Optional[int] = typer.Option(None, help='Clouds to process.'),
    output: Optional[Path] = OutputOption,
    m: Optional[int] = typer.Option(None, '--m', help='Region count.'),
    k: Optional[int] = typer.Option(None, '--k', help='Top regions reported.'),
    estimator: Optional[str] = typer.Option(None, help='auto, exact or monte-carlo.'),
    permutations: Optional[int] = typer.Option(None, help='Monte Carlo permutations.'),
    exact_threshold: Optional[int] = typer.Option(None),
    seeding: Optional[str] = typer.Option(None, help='fps or random.'),
    occlusion: Optional[str] = typer.Option(None, help='remove or centroid.'),
    readout: Optional[str] = typer.Option(None, help='logit or probability.'),
    compare_seed: Optional[int] = typer.Option(None, help='Second seed for a stability check.'),
    seed: Optional[int] = SeedOption,
    config: Optional[Path] = ConfigOption,
) -> None:
    """Compute per-region Shapley saliency."""
    summaries = _run(
        cmd_saliency,
        config,
        {
            'model': model,
            'dataset': dataset,
            'cloud': cloud,
            'split': split,
            'limit': limit,
            'output': output,
            'seed': seed,
            'compare_seed': compare_seed,
            'attack.k': k,
            'shapley.estimator': estimator,
            'shapley.permutations': permutations,
            'shapley.exact_threshold': exact_threshold,
            'shapley.seeding': seeding,
            'shapley.occlusion': occlusion,
            'shapley.readout': readout,
            **_region_count(m),
        },
    )
    for summary in summaries:
        line = f'{summary.cloud_id}: {summary.estimator} top {summary.top_regions}'
        if summary.efficiency_gap is not None:
            line += f' efficiency gap {summary.efficiency_gap:.3e}'
        if summary.compare_overlap is not None:
            line += f' overlap {summary.compare_overlap}'
        typer.echo(line)


@app.command()
def attack(
    model: Optional[Path] = typer.Option(None, help='Victim model file.'),
    dataset: Optional[Path] = typer.Option(None, help='Dataset manifest.'),
    split: Optional[str] = typer.Option(None, help='train or test.'),
    mode: Optional[str] = typer.Option(None, help='local or global.'),
    limit: Optional[int] = typer.Option(None, help='Correctly classified clouds to attack.'),
    output: Optional[Path] = OutputOption,
    epsilon: Optional[float] = typer.Option(None),
    lambda2: Optional[float] = typer.Option(None),
    k: Optional[int] = typer.Option(None, '--k', help='Regions attacked.'),
    m: Optional[int] = typer.Option(None, '--m', help='Region count.'),
    iterations: Optional[int] = typer.Option(None),
    learning_rate: Optional[float] = typer.Option(None),
    search_rounds: Optional[int] = typer.Option(None),
    tau: Optional[float] = typer.Option(None),
    ratio_mode: Optional[str] = typer.Option(None, help='per-point, global or uniform.'),
    region_selection: Optional[str] = typer.Option(None, help='top, bottom or random.'),
    estimator: Optional[str] = typer.Option(None, help='auto, exact or monte-carlo.'),
    permutations: Optional[int] = typer.Option(None, help='Monte Carlo permutations.'),
    seed: Optional[int] = SeedOption,
    config: Optional[Path] = ConfigOption,
) -> None:
    """Attack every correctly classified cloud of a split."""
    summary = _run(
        cmd_attack,
        config,
        {
            'model': model,
            'dataset': dataset,
            'split': split,
            'mode': mode,
            'limit': limit,
            'output': output,
            'seed': seed,
            'attack.epsilon': epsilon,
            'attack.lambda2': lambda2,
            'attack.k': k,
            'attack.iterations': iterations,
            'attack.learning_rate': learning_rate,
            'attack.search_rounds': search_rounds,
            'attack.tau': tau,
            'attack.ratio_mode': ratio_mode,
            'attack.region_selection': region_selection,
            'shapley.estimator': estimator,
            'shapley.permutations': permutations,
            **_region_count(m),
        },
    )
    typer.echo(json.dumps(summary.model_dump(mode='json'), indent=2, sort_keys=True))


@app.command()
def report(
    runs: List[Path] = typer.Argument(..., help='Attack output directories.'),
    output: Optional[Path] = OutputOption,
    config: Optional[Path] = ConfigOption,
) -> None:
    """Compare attack runs against the same victim."""
    _, table = _run(cmd_report, config, {'runs': [str(run) for run in runs], 'output': output})
    typer.echo(table, nl=False)


def main():
    """Run the point cloud attack CLI."""
    app()


if __name__ == '__main__':
    main()
