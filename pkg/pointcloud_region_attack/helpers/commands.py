"""Helper Functions implementing the pipeline steps shared by the CLI and the MCP server.

Every step takes a RunConfig, echoes it into its output directory and writes
machine-readable results that depend only on the config and the input files.
"""

import json
import numpy as np
import time
from dataclasses import dataclass
from joblib import Parallel, delayed
from loguru import logger
from pathlib import Path
from pointcloud_region_attack.helpers.attack import (
    AttackConfig,
    AttackResult,
    MisclassifiedInputError,
    adaptive_local_attack,
    global_baseline_attack,
)
from pointcloud_region_attack.helpers.classifier import (
    ClassifierArchitecture,
    PointClassifier,
    TrainConfig,
    TrainingReport,
    forward,
    load_model,
    model_hash,
    save_model,
    train,
)
from pointcloud_region_attack.helpers.evaluation import (
    CONFIG_FILE,
    SAMPLES_FILE,
    SUMMARY_FILE,
    TIMINGS_FILE,
    AggregateSummary,
    AttackMode,
    ComparisonReport,
    SampleRecord,
    TimingRecord,
    aggregate,
    append_record,
    compare_runs,
    load_run,
    read_records,
    render_table,
    write_records,
    write_summary,
)
from pointcloud_region_attack.helpers.geometry import (
    SHAPE_CLASSES,
    DatasetManifest,
    ManifestEntry,
    PointCloud,
    gen_synthetic,
    load_cloud,
    load_manifest,
    save_cloud,
    save_manifest,
)
from pointcloud_region_attack.helpers.regions import RegionPartition, partition, save_partition
from pointcloud_region_attack.helpers.shapley import (
    SaliencyMap,
    ShapleyConfig,
    cloud_saliency,
    save_saliency,
    top_k_overlap,
)
from pointcloud_region_attack.helpers.utils import derive_seed, get_num_workers
from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Iterator, List, Literal, Optional, Tuple


MODEL_FILE = 'model.pmdl'
MANIFEST_FILE = 'manifest.json'
TRAINING_FILE = 'training.json'
SALIENCY_SUMMARY_FILE = 'saliency.summary'
REPORT_TEXT_FILE = 'report.txt'
REPORT_JSON_FILE = 'report.json'


class DataOptions(BaseModel):
    """Shape of the synthetic dataset written by ``gen-data``."""

    model_config = ConfigDict(extra='forbid')

    classes: List[str] = Field(default_factory=lambda: list(SHAPE_CLASSES))
    train_per_class: int = Field(default=200, ge=0)
    test_per_class: int = Field(default=25, ge=0)
    points: int = Field(default=1024, ge=1)
    jitter: float = Field(default=0.0, ge=0)
    fmt: Literal['pcad', 'xyz'] = 'pcad'


class RunConfig(BaseModel):
    """Everything needed to rerun one pipeline step identically.

    The global ``seed`` overrides the seeds of the nested training and attack
    configs so that a single flag controls the whole run.
    """

    model_config = ConfigDict(extra='forbid')

    seed: int = 0
    dataset: Optional[Path] = Field(default=None, description='Dataset manifest')
    model: Optional[Path] = Field(default=None, description='Victim model file')
    output: Path = Path('out')
    split: Literal['train', 'test'] = 'test'
    cloud: Optional[Path] = Field(default=None, description='Single cloud for saliency')
    limit: Optional[int] = Field(default=None, ge=1, description='Clouds to process')
    mode: AttackMode = 'local'
    compare_seed: Optional[int] = None
    runs: List[Path] = Field(default_factory=list)
    data: DataOptions = Field(default_factory=DataOptions)
    train: TrainConfig = Field(default_factory=TrainConfig)
    shapley: ShapleyConfig = Field(default_factory=ShapleyConfig)
    attack: AttackConfig = Field(default_factory=AttackConfig)

    @model_validator(mode='after')
    def _sync_nested(self) -> 'RunConfig':
        if self.shapley.m != self.attack.m:
            raise ValueError(
                f'Region counts disagree: shapley.m={self.shapley.m}, attack.m={self.attack.m}.'
            )
        if self.train.seed != self.seed:
            self.train = self.train.model_copy(update={'seed': self.seed})
        if self.attack.seed != self.seed:
            self.attack = self.attack.model_copy(update={'seed': self.seed})
        return self


def config_text(config: RunConfig) -> str:
    """Canonical JSON rendering of a config, as echoed to output directories."""
    return json.dumps(config.model_dump(mode='json'), indent=2, sort_keys=True) + '\n'


def load_run_config(path: str | Path) -> RunConfig:
    """Load a JSON run config (a ``config.echo`` file is one)."""
    return RunConfig.model_validate_json(Path(path).read_text())


def _prepare_output(config: RunConfig) -> Path:
    output = Path(config.output)
    output.mkdir(parents=True, exist_ok=True)
    (output / CONFIG_FILE).write_text(config_text(config))
    return output


def _require(value: Optional[Path], flag: str) -> Path:
    if value is None:
        raise ValueError(f'This command needs {flag}.')
    return value


def _load_victim(config: RunConfig) -> Tuple[PointClassifier, Path]:
    path = _require(config.model, '--model')
    if not path.exists():
        raise FileNotFoundError(f'Model file {path} does not exist.')
    model = load_model(path)
    # input gradients only; parameters stay frozen and shareable across threads
    model.requires_grad_(False)
    return model, path


def cmd_gen_data(config: RunConfig) -> DatasetManifest:
    """Generate the synthetic shape dataset and its manifest.

    Args:
        config (RunConfig): ``data`` options, ``seed`` and ``output``.

    Returns:
        DatasetManifest: The manifest written to ``output/manifest.json``.
    """
    options = config.data
    if not options.classes:
        raise ValueError('gen-data needs at least one class.')
    output = _prepare_output(config)
    logger.info(
        f'Generating {len(options.classes)} classes x ({options.train_per_class} train + '
        f'{options.test_per_class} test) clouds of {options.points} points into {output}'
    )
    entries: List[ManifestEntry] = []
    for split_index, (split, count) in enumerate(
        (('train', options.train_per_class), ('test', options.test_per_class))
    ):
        (output / split).mkdir(exist_ok=True)
        for label, class_name in enumerate(options.classes):
            for i in range(count):
                seed = derive_seed(config.seed, split_index, label, i)
                sample = gen_synthetic(class_name, options.points, seed, options.jitter)
                name = f'{class_name}_{i:04d}'
                relative = f'{split}/{name}.{options.fmt}'
                save_cloud(PointCloud(sample.points, label=label, name=name), output / relative)
                entries.append(ManifestEntry(path=relative, label=label, split=split))
    manifest = DatasetManifest(classes=list(options.classes), entries=entries)
    save_manifest(manifest, output / MANIFEST_FILE)
    logger.info(f'Wrote manifest with {len(entries)} entries')
    return manifest


def cmd_train(config: RunConfig) -> TrainingReport:
    """Train the victim classifier and save it with its per-epoch log."""
    manifest = load_manifest(_require(config.dataset, '--dataset'))
    output = _prepare_output(config)
    model = PointClassifier(
        ClassifierArchitecture(num_classes=len(manifest.classes)), seed=config.train.seed
    )
    model, report = train(model, manifest, config.train)
    save_model(model, output / MODEL_FILE)
    (output / TRAINING_FILE).write_text(report.model_dump_json(indent=2) + '\n')
    logger.info(f'Final test accuracy {report.final_test_accuracy:.4f}')
    return report


def _split_clouds(config: RunConfig) -> Iterator[PointCloud]:
    manifest = load_manifest(_require(config.dataset, '--dataset'))
    for entry in manifest.split(config.split):
        cloud = load_cloud(manifest.resolve(entry))
        yield PointCloud(cloud.points, label=entry.label, name=cloud.name)


class SaliencySummary(BaseModel):
    """Per-cloud diagnostics of a saliency run."""

    cloud_id: str
    label: int
    estimator: str
    top_regions: List[int]
    region_sizes: List[int]
    efficiency_gap: Optional[float] = None
    compare_overlap: Optional[int] = None


def _region_saliency(
    model: PointClassifier,
    cloud: PointCloud,
    label: int,
    index: int,
    config: RunConfig,
    seed: int,
) -> Tuple[RegionPartition, SaliencyMap]:
    """Partition sample ``index`` and score its regions; ``seed`` drives the permutations."""
    region_partition = partition(
        cloud,
        config.shapley.m,
        seed=derive_seed(config.seed, index, 1),
        method=config.shapley.seeding,
    )
    saliency = cloud_saliency(
        model,
        cloud,
        region_partition,
        label,
        config.shapley,
        seed=derive_seed(seed, index, 2),
    )
    return region_partition, saliency


@dataclass
class _SaliencyOutcome:
    cloud: PointCloud
    summary: SaliencySummary
    saliency: SaliencyMap
    region_partition: RegionPartition


def _saliency_job(
    model: PointClassifier, cloud: PointCloud, index: int, config: RunConfig
) -> _SaliencyOutcome:
    label = cloud.label if cloud.label is not None else forward(model, cloud).predicted
    region_partition, saliency = _region_saliency(model, cloud, label, index, config, config.seed)
    gap = None
    if saliency.estimator == 'exact':
        gap = float(np.sum(saliency.phi) - (saliency.full_value - saliency.empty_value))
        logger.info(f'{cloud.name}: efficiency sum(phi) - (g(M) - g(0)) = {gap:.3e}')
    overlap = None
    if config.compare_seed is not None and saliency.estimator == 'monte-carlo':
        _, second = _region_saliency(model, cloud, label, index, config, config.compare_seed)
        overlap = top_k_overlap(saliency, second, config.attack.k)
        logger.info(
            f'{cloud.name}: top-{config.attack.k} overlap between seeds {config.seed} and '
            f'{config.compare_seed}: {overlap}'
        )
    summary = SaliencySummary(
        cloud_id=cloud.name,
        label=label,
        estimator=saliency.estimator,
        top_regions=saliency.rank[: config.attack.k].tolist(),
        region_sizes=region_partition.sizes.tolist(),
        efficiency_gap=gap,
        compare_overlap=overlap,
    )
    return _SaliencyOutcome(cloud, summary, saliency, region_partition)


def cmd_saliency(config: RunConfig) -> List[SaliencySummary]:
    """Compute region saliency for one cloud or a manifest split.

    Writes ``saliency/<cloud>.json``, ``partitions/<cloud>.txt`` and a
    region-colored copy of each cloud under ``clouds/`` (region index as flag).
    """
    model, _ = _load_victim(config)
    if config.cloud is not None:
        clouds = [load_cloud(config.cloud)]
    else:
        clouds = list(_split_clouds(config))[: config.limit]
    output = _prepare_output(config)
    for sub in ('saliency', 'partitions', 'clouds'):
        (output / sub).mkdir(exist_ok=True)
    workers = get_num_workers()
    logger.info(
        f'Saliency for {len(clouds)} cloud(s), m={config.shapley.m}, '
        f'estimator={config.shapley.estimator}, workers={workers}'
    )
    outcomes = Parallel(n_jobs=workers, prefer='threads', return_as='generator')(
        delayed(_saliency_job)(model, cloud, index, config) for index, cloud in enumerate(clouds)
    )
    summaries = []
    for outcome in outcomes:
        name = outcome.cloud.name
        save_saliency(outcome.saliency, output / 'saliency' / f'{name}.json')
        save_partition(outcome.region_partition, output / 'partitions' / f'{name}.txt')
        assignment = outcome.region_partition.assignment
        save_cloud(outcome.cloud, output / 'clouds' / f'{name}.pcad', flags=assignment)
        summaries.append(outcome.summary)
    (output / SALIENCY_SUMMARY_FILE).write_text(
        json.dumps([s.model_dump(mode='json') for s in summaries], indent=2, sort_keys=True)
        + '\n'
    )
    return summaries


@dataclass
class _SampleOutcome:
    cloud: PointCloud
    record: SampleRecord
    timing: TimingRecord
    result: Optional[AttackResult] = None


def _sample_record(index: int, cloud: PointCloud, result: AttackResult) -> SampleRecord:
    return SampleRecord(
        sample_index=index,
        cloud_id=cloud.name,
        true_class=result.label,
        status='ok',
        success=result.success,
        adversarial_class=result.adversarial_class,
        chamfer=result.chamfer,
        hausdorff=result.hausdorff,
        points_modified=result.points_modified,
        masked_points=result.masked_points,
        lambda1=result.lambda1,
        attacked_regions=result.attacked_regions,
    )


def _attack_sample(
    model: PointClassifier, cloud: PointCloud, label: int, index: int, config: RunConfig
) -> AttackResult:
    attack_config = config.attack.model_copy(update={'seed': derive_seed(config.seed, index)})
    if config.mode == 'global':
        return global_baseline_attack(model, cloud, label, attack_config)
    region_partition, saliency = _region_saliency(model, cloud, label, index, config, config.seed)
    return adaptive_local_attack(model, cloud, label, saliency, region_partition, attack_config)


def _attack_job(
    model: PointClassifier, cloud: PointCloud, index: int, correct: bool, config: RunConfig
) -> _SampleOutcome:
    """Attack one sample; failures become ``skipped`` or ``error`` rows, never exceptions."""
    start = time.perf_counter()
    label = int(cloud.label)
    result = None
    status, message = 'skipped', 'misclassified by the victim'
    if correct:
        try:
            result = _attack_sample(model, cloud, label, index, config)
        except MisclassifiedInputError as e:
            message = str(e)
        except Exception as e:
            logger.warning(f'{cloud.name}: attack failed: {e}')
            status, message = 'error', str(e)
    if result is not None:
        record = _sample_record(index, cloud, result)
    else:
        record = SampleRecord(
            sample_index=index,
            cloud_id=cloud.name,
            true_class=label,
            status=status,
            message=message,
        )
    seconds = time.perf_counter() - start
    timing = TimingRecord(sample_index=index, cloud_id=cloud.name, seconds=seconds)
    return _SampleOutcome(cloud, record, timing, result)


def _select_samples(
    model: PointClassifier, config: RunConfig
) -> List[Tuple[int, PointCloud, bool]]:
    """Walk the split in order until ``limit`` correctly classified clouds are found."""
    selected = []
    correct = 0
    for index, cloud in enumerate(_split_clouds(config)):
        if config.limit is not None and correct >= config.limit:
            break
        is_correct = forward(model, cloud).predicted == cloud.label
        if not is_correct:
            logger.warning(f'{cloud.name}: misclassified by the victim, skipped')
        correct += is_correct
        selected.append((index, cloud, is_correct))
    return selected


def cmd_attack(config: RunConfig) -> AggregateSummary:
    """Attack every correctly classified cloud of a split and aggregate the results.

    Rows already present in ``samples.records`` (from an interrupted run with the
    same config) are kept and not recomputed. New rows are appended by a single
    writer in sample order.

    Args:
        config (RunConfig): Model, dataset, split, mode and attack settings.

    Returns:
        AggregateSummary: The summary written to ``aggregate.summary``.
    """
    model, model_path = _load_victim(config)
    output = Path(config.output)
    echo = output / CONFIG_FILE
    if echo.exists() and echo.read_text() != config_text(config):
        raise ValueError(f'{output} holds a run with a different configuration.')
    output = _prepare_output(config)
    (output / 'clouds').mkdir(exist_ok=True)
    samples_path = output / SAMPLES_FILE

    existing = read_records(samples_path)
    write_records(samples_path, existing)
    done = {record.sample_index for record in existing}
    if done:
        logger.info(f'Resuming: {len(done)} sample(s) already recorded')

    samples = _select_samples(model, config)
    workers = get_num_workers()
    logger.info(
        f'Attacking {sum(ok for _, _, ok in samples)} correctly classified cloud(s) of '
        f'{len(samples)} in {config.mode} mode with {workers} worker(s)'
    )
    outcomes = Parallel(n_jobs=workers, prefer='threads', return_as='generator')(
        delayed(_attack_job)(model, cloud, index, ok, config)
        for index, cloud, ok in samples
        if index not in done
    )
    for outcome in outcomes:
        if outcome.result is not None:
            original = outcome.cloud
            moved = np.any(outcome.result.adversarial.points != original.points, axis=1)
            save_cloud(
                outcome.result.adversarial,
                output / 'clouds' / f'{original.name}.pcad',
                perturbed_mask=moved,
            )
        append_record(samples_path, outcome.record)
        append_record(output / TIMINGS_FILE, outcome.timing)

    summary = aggregate(read_records(samples_path), config.mode, model_hash(model_path))
    write_summary(output / SUMMARY_FILE, summary)
    logger.info(
        f'Success rate {summary.success_rate:.4f} over {summary.attacked} attacked sample(s)'
    )
    return summary


def cmd_report(config: RunConfig) -> Tuple[ComparisonReport, str]:
    """Merge attack runs into one comparison table.

    Returns:
        Tuple[ComparisonReport, str]: The machine-readable report and its text table.
    """
    if not config.runs:
        raise ValueError('report needs at least one run directory.')
    runs = [load_run(run) for run in config.runs]
    report = compare_runs(runs)
    table = render_table(report)
    output = _prepare_output(config)
    (output / REPORT_TEXT_FILE).write_text(table)
    (output / REPORT_JSON_FILE).write_text(
        json.dumps(report.model_dump(mode='json'), indent=2, sort_keys=True) + '\n'
    )
    logger.info(f'Report over {len(runs)} run(s) written to {output}')
    return report, table
