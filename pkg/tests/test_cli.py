"""Tests for the pointcloud-attack command-line interface."""

import json
import pytest
from pathlib import Path
from pointcloud_region_attack.cli import app, build_config
from pointcloud_region_attack.helpers.evaluation import AggregateSummary, ComparisonReport
from pointcloud_region_attack.helpers.geometry import DatasetManifest
from typer.testing import CliRunner
from unittest.mock import patch


runner = CliRunner()


@pytest.fixture(autouse=True)
def quiet_setup():
    """Keep the CLI callback from reconfiguring loguru and torch."""
    with (
        patch('pointcloud_region_attack.cli.configure_logging') as mock_logging,
        patch('pointcloud_region_attack.cli.configure_torch'),
    ):
        yield mock_logging


class TestBuildConfig:
    """Tests for build_config."""

    def test_dotted_overrides(self):
        """Test that dotted keys land in nested sections and None is ignored."""
        config = build_config(
            None,
            {'output': Path('run'), 'attack.epsilon': 0.3, 'attack.k': None, 'seed': 4},
        )

        assert config.output == Path('run')
        assert config.attack.epsilon == 0.3
        assert config.attack.k == 5
        assert config.attack.seed == 4

    def test_flags_override_file(self, tmp_path):
        """Test that command-line values win over the config file."""
        config_file = tmp_path / 'run.json'
        config_file.write_text(json.dumps({'mode': 'global', 'attack': {'epsilon': 0.3}}))

        config = build_config(config_file, {'attack.epsilon': 0.5, 'attack.tau': None})

        assert config.mode == 'global'
        assert config.attack.epsilon == 0.5


class TestCommands:
    """Tests for the CLI commands."""

    def test_help(self):
        """Test that the help lists every pipeline step."""
        result = runner.invoke(app, ['--help'])

        assert result.exit_code == 0
        for command in ('gen-data', 'train', 'saliency', 'attack', 'report'):
            assert command in result.output

    def test_verbose_sets_debug(self, quiet_setup):
        """Test that --verbose logs at DEBUG level."""
        with patch('pointcloud_region_attack.cli.cmd_gen_data') as mock_gen:
            mock_gen.return_value = DatasetManifest(classes=['sphere'], entries=[])
            runner.invoke(app, ['--verbose', 'gen-data'])

        quiet_setup.assert_called_once_with('DEBUG')

    def test_gen_data(self):
        """Test that gen-data splits the class list and reports counts."""
        manifest = DatasetManifest(classes=['sphere', 'plane'], entries=[])
        with patch('pointcloud_region_attack.cli.cmd_gen_data') as mock_gen:
            mock_gen.return_value = manifest

            result = runner.invoke(
                app, ['gen-data', '-o', 'data', '--classes', 'sphere, plane', '--points', '64']
            )

        assert result.exit_code == 0
        config = mock_gen.call_args[0][0]
        assert config.data.classes == ['sphere', 'plane']
        assert config.data.points == 64
        assert config.output == Path('data')
        assert '0 clouds in 2 classes' in result.output

    def test_attack_region_count(self):
        """Test that --m sets the region count of saliency and attack together."""
        summary = AggregateSummary(
            mode='local',
            model_hash='abc',
            samples=1,
            attacked=1,
            skipped=0,
            errors=0,
            successes=1,
            success_rate=1.0,
        )
        with patch('pointcloud_region_attack.cli.cmd_attack') as mock_attack:
            mock_attack.return_value = summary

            result = runner.invoke(
                app,
                ['attack', '--model', 'model.pmdl', '--dataset', 'm.json', '--m', '8', '--k', '2'],
            )

        assert result.exit_code == 0
        config = mock_attack.call_args[0][0]
        assert (config.shapley.m, config.attack.m, config.attack.k) == (8, 8, 2)
        assert json.loads(result.output)['success_rate'] == 1.0

    def test_report(self):
        """Test that report prints the comparison table."""
        with patch('pointcloud_region_attack.cli.cmd_report') as mock_report:
            mock_report.return_value = (ComparisonReport(model_hash='abc', rows=[]), 'table\n')

            result = runner.invoke(app, ['report', 'local', 'global'])

        assert result.exit_code == 0
        assert [str(run) for run in mock_report.call_args[0][0].runs] == ['local', 'global']
        assert result.output == 'table\n'

    def test_step_failure_exits_with_one(self):
        """Test that errors are printed and exit with status 1."""
        with patch('pointcloud_region_attack.cli.cmd_train') as mock_train:
            mock_train.__name__ = 'cmd_train'
            mock_train.side_effect = FileNotFoundError('no manifest')

            result = runner.invoke(app, ['train', '--dataset', 'missing.json'])

        assert result.exit_code == 1
        assert 'Error: no manifest' in result.output

    def test_invalid_value_exits_with_one(self):
        """Test that config validation errors stop before the step runs."""
        with patch('pointcloud_region_attack.cli.cmd_attack') as mock_attack:
            mock_attack.__name__ = 'cmd_attack'

            result = runner.invoke(app, ['attack', '--mode', 'sideways'])

        assert result.exit_code == 1
        mock_attack.assert_not_called()
