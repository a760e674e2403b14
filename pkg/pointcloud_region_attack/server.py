"""The MCP server exposing the point cloud region attack pipeline."""

import anyio
from loguru import logger
from mcp.server.fastmcp import FastMCP
from pointcloud_region_attack.helpers.commands import (
    RunConfig,
    cmd_attack,
    cmd_gen_data,
    cmd_report,
    cmd_saliency,
    cmd_train,
)
from pointcloud_region_attack.helpers.geometry import load_cloud
from pointcloud_region_attack.helpers.metrics import chamfer_distance, hausdorff_distance
from pointcloud_region_attack.helpers.utils import configure_torch
from pydantic import Field
from typing import Annotated, Any, Dict, List, Literal, Optional


SERVER_INSTRUCTIONS = """
# Point Cloud Region Attack MCP Server

This server runs a region-saliency guided adversarial attack pipeline against a
point cloud classifier. All steps run locally and write their results to an
output directory that also receives the effective configuration (config.echo).

## Typical workflow
1. generate_dataset_pointcloud: write the synthetic shape dataset and manifest
2. train_classifier_pointcloud: train the victim classifier on the manifest
3. compute_saliency_pointcloud: score cloud regions with Shapley values
4. run_attack_pointcloud: attack the test split in local or global mode
5. build_report_pointcloud: compare attack runs against the same victim

## Other tools
- measure_distance_pointcloud (Chamfer and Hausdorff distance between two cloud files)

Steps are long running; prefer small limits (limit, permutations, iterations)
when exploring.
"""

mcp = FastMCP(
    'pointcloud-region-attack',
    instructions=SERVER_INSTRUCTIONS,
    dependencies=[
        'pydantic',
        'loguru',
        'numpy',
        'scipy',
        'torch',
        'joblib',
    ],
)


def _config(base: Dict[str, Any], **sections: Optional[Dict[str, Any]]) -> RunConfig:
    data = {key: value for key, value in base.items() if value is not None}
    for name, section in sections.items():
        if section:
            data[name] = section
    return RunConfig.model_validate(data)


@mcp.tool(
    name='generate_dataset_pointcloud',
    description='Generate the synthetic shape point cloud dataset',
)
async def generate_dataset_pointcloud(
    output: Annotated[str, Field(description='Directory that receives clouds and manifest')],
    train_per_class: Annotated[int, Field(description='Training clouds per class')] = 200,
    test_per_class: Annotated[int, Field(description='Test clouds per class')] = 25,
    points: Annotated[int, Field(description='Points per cloud')] = 1024,
    jitter: Annotated[float, Field(description='Gaussian coordinate noise')] = 0.0,
    classes: Annotated[
        Optional[List[str]], Field(description='Shape classes; all eight when omitted')
    ] = None,
    seed: Annotated[int, Field(description='Global seed')] = 0,
) -> Dict[str, Any]:
    """Generate a labeled synthetic dataset of normalized shape surface samples.

    ## Usage

    Use this tool first to create the dataset that the victim classifier is
    trained and attacked on. Generation is deterministic for a given seed.

    ## Example

    ```python
    result = await generate_dataset_pointcloud(output='data', test_per_class=8)
    print(result['manifest'])
    ```

    ## Returns
    A dictionary with the manifest path, class names and entry count.
    """
    data = {
        'train_per_class': train_per_class,
        'test_per_class': test_per_class,
        'points': points,
        'jitter': jitter,
    }
    if classes is not None:
        data['classes'] = classes
    try:
        config = _config({'output': output, 'seed': seed}, data=data)
        manifest = await anyio.to_thread.run_sync(cmd_gen_data, config)
        return {
            'manifest': f'{output}/manifest.json',
            'classes': manifest.classes,
            'entries': len(manifest.entries),
        }
    except Exception as e:
        logger.error(f'Error generating dataset in {output}: {e}')
        raise ValueError(f'Failed to generate dataset in {output}: {e}')


@mcp.tool(name='train_classifier_pointcloud', description='Train the victim classifier')
async def train_classifier_pointcloud(
    dataset: Annotated[str, Field(description='Path of the dataset manifest')],
    output: Annotated[str, Field(description='Directory that receives the model file')],
    epochs: Annotated[int, Field(description='Training epochs')] = 30,
    batch_size: Annotated[int, Field(description='Mini-batch size')] = 32,
    learning_rate: Annotated[float, Field(description='Adam learning rate')] = 1e-3,
    seed: Annotated[int, Field(description='Global seed')] = 0,
) -> Dict[str, Any]:
    """Train the permutation-invariant victim classifier.

    ## Usage

    Use this tool after generate_dataset_pointcloud. The trained model is saved
    as model.pmdl in the output directory together with training.json.

    ## Returns
    A dictionary with the model path, final test accuracy and per-epoch stats.
    """
    try:
        config = _config(
            {'dataset': dataset, 'output': output, 'seed': seed},
            train={'epochs': epochs, 'batch_size': batch_size, 'learning_rate': learning_rate},
        )
        report = await anyio.to_thread.run_sync(cmd_train, config)
        return {
            'model': f'{output}/model.pmdl',
            'final_test_accuracy': report.final_test_accuracy,
            'epochs': [stats.model_dump() for stats in report.epochs],
        }
    except Exception as e:
        logger.error(f'Error training classifier on {dataset}: {e}')
        raise ValueError(f'Failed to train classifier on {dataset}: {e}')


@mcp.tool(name='compute_saliency_pointcloud', description='Compute region Shapley saliency')
async def compute_saliency_pointcloud(
    model: Annotated[str, Field(description='Path of the victim model file')],
    output: Annotated[str, Field(description='Directory that receives saliency exports')],
    dataset: Annotated[Optional[str], Field(description='Dataset manifest')] = None,
    cloud: Annotated[Optional[str], Field(description='Single cloud file')] = None,
    split: Annotated[Literal['train', 'test'], Field(description='Manifest split')] = 'test',
    limit: Annotated[Optional[int], Field(description='Clouds to process')] = None,
    m: Annotated[int, Field(description='Region count')] = 32,
    estimator: Annotated[
        Literal['auto', 'exact', 'monte-carlo'], Field(description='Shapley estimator')
    ] = 'auto',
    permutations: Annotated[int, Field(description='Monte Carlo permutations')] = 200,
    compare_seed: Annotated[
        Optional[int], Field(description='Second seed for a top-k stability check')
    ] = None,
    seed: Annotated[int, Field(description='Global seed')] = 0,
) -> Dict[str, Any]:
    """Score the regions of one cloud or a manifest split with Shapley values.

    ## Usage

    Pass either a single cloud file or a dataset manifest. Regions with high
    values are the ones the model relies on most.

    ## Returns
    A dictionary with one summary per cloud (top regions, efficiency gap for
    the exact estimator, top-k overlap when compare_seed is given).
    """
    try:
        config = _config(
            {
                'model': model,
                'output': output,
                'dataset': dataset,
                'cloud': cloud,
                'split': split,
                'limit': limit,
                'compare_seed': compare_seed,
                'seed': seed,
            },
            shapley={'m': m, 'estimator': estimator, 'permutations': permutations},
            attack={'m': m, 'k': min(5, m)},
        )
        summaries = await anyio.to_thread.run_sync(cmd_saliency, config)
        return {'clouds': [summary.model_dump() for summary in summaries]}
    except Exception as e:
        logger.error(f'Error computing saliency with {model}: {e}')
        raise ValueError(f'Failed to compute saliency with {model}: {e}')


@mcp.tool(name='run_attack_pointcloud', description='Run the region-masked adversarial attack')
async def run_attack_pointcloud(
    model: Annotated[str, Field(description='Path of the victim model file')],
    dataset: Annotated[str, Field(description='Path of the dataset manifest')],
    output: Annotated[str, Field(description='Run directory for records and clouds')],
    mode: Annotated[
        Literal['local', 'global'], Field(description='Attack top-k regions or all points')
    ] = 'local',
    split: Annotated[Literal['train', 'test'], Field(description='Manifest split')] = 'test',
    limit: Annotated[
        Optional[int], Field(description='Correctly classified clouds to attack')
    ] = None,
    attack: Annotated[
        Optional[Dict[str, Any]],
        Field(description='AttackConfig overrides such as epsilon, k, m or iterations'),
    ] = None,
    shapley: Annotated[
        Optional[Dict[str, Any]], Field(description='ShapleyConfig overrides')
    ] = None,
    seed: Annotated[int, Field(description='Global seed')] = 0,
) -> Dict[str, Any]:
    """Attack every correctly classified cloud of a split.

    ## Usage

    Runs are resumable: calling the tool again with the same arguments and
    output directory continues an interrupted run.

    ## Returns
    A dictionary with the aggregate summary of the run.
    """
    try:
        attack_section = dict(attack or {})
        shapley_section = dict(shapley or {})
        if 'm' in attack_section:
            shapley_section.setdefault('m', attack_section['m'])
        config = _config(
            {
                'model': model,
                'dataset': dataset,
                'output': output,
                'mode': mode,
                'split': split,
                'limit': limit,
                'seed': seed,
            },
            attack=attack_section,
            shapley=shapley_section,
        )
        summary = await anyio.to_thread.run_sync(cmd_attack, config)
        return {'summary': summary.model_dump()}
    except Exception as e:
        logger.error(f'Error attacking {dataset} with {model}: {e}')
        raise ValueError(f'Failed to attack {dataset} with {model}: {e}')


@mcp.tool(name='build_report_pointcloud', description='Compare attack runs in one table')
async def build_report_pointcloud(
    runs: Annotated[List[str], Field(description='Attack run directories')],
    output: Annotated[str, Field(description='Directory that receives the report')],
) -> Dict[str, Any]:
    """Merge attack runs against the same victim into a comparison table.

    ## Returns
    A dictionary with the text table and the machine-readable rows.
    """
    try:
        config = _config({'runs': runs, 'output': output})
        report, table = await anyio.to_thread.run_sync(cmd_report, config)
        return {'table': table, 'report': report.model_dump()}
    except Exception as e:
        logger.error(f'Error building report for {runs}: {e}')
        raise ValueError(f'Failed to build report for {runs}: {e}')


@mcp.tool(
    name='measure_distance_pointcloud',
    description='Chamfer and Hausdorff distance between two clouds',
)
async def measure_distance_pointcloud(
    first: Annotated[str, Field(description='First cloud file')],
    second: Annotated[str, Field(description='Second cloud file')],
) -> Dict[str, float]:
    """Measure how far apart two point clouds are.

    ## Returns
    A dictionary with the chamfer and hausdorff distances.
    """
    try:
        first_cloud, second_cloud = load_cloud(first), load_cloud(second)
        return {
            'chamfer': chamfer_distance(first_cloud, second_cloud),
            'hausdorff': hausdorff_distance(first_cloud, second_cloud),
        }
    except Exception as e:
        logger.error(f'Error measuring distance between {first} and {second}: {e}')
        raise ValueError(f'Failed to measure distance between {first} and {second}: {e}')


def main():
    """Run the Point Cloud Region Attack MCP Server."""
    configure_torch()
    logger.info('Welcome to the Point Cloud Region Attack MCP Server!')
    mcp.run()


if __name__ == '__main__':
    main()
