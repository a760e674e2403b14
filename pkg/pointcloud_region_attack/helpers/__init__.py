"""Point Cloud Region Attack Helpers and Utilities"""

from pointcloud_region_attack.helpers.attack import (
    AttackConfig,
    AttackResult,
    MisclassifiedInputError,
    ObjectiveTerms,
    adaptive_local_attack,
    adaptive_ratio,
    adversarial_loss,
    apply_update,
    global_baseline_attack,
    margin_loss,
    masked_attack,
    region_objective,
    region_objective_function,
)
from pointcloud_region_attack.helpers.classifier import (
    ClassifierArchitecture,
    LogitsRecord,
    ModelFormatError,
    PointClassifier,
    TrainConfig,
    TrainingReport,
    evaluate_accuracy,
    forward,
    input_gradient,
    load_model,
    model_hash,
    save_model,
    train,
)
from pointcloud_region_attack.helpers.commands import (
    RunConfig,
    cmd_attack,
    cmd_gen_data,
    cmd_report,
    cmd_saliency,
    cmd_train,
)
from pointcloud_region_attack.helpers.evaluation import (
    AggregateSummary,
    IncompatibleReportsError,
    SampleRecord,
    aggregate,
    compare_runs,
    load_run,
    render_table,
)
from pointcloud_region_attack.helpers.geometry import (
    SHAPE_CLASSES,
    DatasetManifest,
    PointCloud,
    PointCloudParseError,
    gen_synthetic,
    load_cloud,
    load_manifest,
    load_mesh,
    normalize_unit_sphere,
    sample_mesh,
    save_cloud,
    save_manifest,
)
from pointcloud_region_attack.helpers.metrics import chamfer_distance, hausdorff_distance
from pointcloud_region_attack.helpers.regions import (
    RegionGame,
    RegionPartition,
    partition,
    save_partition,
    subset_cloud,
    value_function,
)
from pointcloud_region_attack.helpers.shapley import (
    SaliencyMap,
    ShapleyConfig,
    cloud_saliency,
    compute_saliency,
    save_saliency,
    shapley_exact,
    shapley_monte_carlo,
    top_k_overlap,
    top_k_regions,
)

__all__ = [
    'AggregateSummary',
    'AttackConfig',
    'AttackResult',
    'ClassifierArchitecture',
    'DatasetManifest',
    'IncompatibleReportsError',
    'LogitsRecord',
    'MisclassifiedInputError',
    'ModelFormatError',
    'ObjectiveTerms',
    'PointClassifier',
    'PointCloud',
    'PointCloudParseError',
    'RegionGame',
    'RegionPartition',
    'RunConfig',
    'SHAPE_CLASSES',
    'SaliencyMap',
    'SampleRecord',
    'ShapleyConfig',
    'TrainConfig',
    'TrainingReport',
    'adaptive_local_attack',
    'adaptive_ratio',
    'adversarial_loss',
    'aggregate',
    'apply_update',
    'chamfer_distance',
    'cloud_saliency',
    'cmd_attack',
    'cmd_gen_data',
    'cmd_report',
    'cmd_saliency',
    'cmd_train',
    'compare_runs',
    'compute_saliency',
    'evaluate_accuracy',
    'forward',
    'gen_synthetic',
    'global_baseline_attack',
    'hausdorff_distance',
    'input_gradient',
    'load_cloud',
    'load_manifest',
    'load_mesh',
    'load_model',
    'load_run',
    'margin_loss',
    'masked_attack',
    'model_hash',
    'normalize_unit_sphere',
    'partition',
    'region_objective',
    'region_objective_function',
    'render_table',
    'sample_mesh',
    'save_cloud',
    'save_manifest',
    'save_model',
    'save_partition',
    'save_saliency',
    'shapley_exact',
    'shapley_monte_carlo',
    'subset_cloud',
    'top_k_overlap',
    'top_k_regions',
    'train',
    'value_function',
]
