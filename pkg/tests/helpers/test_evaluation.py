"""Tests for sample records, aggregates and comparison reports."""

import pytest
from pointcloud_region_attack.helpers.evaluation import (
    SAMPLES_FILE,
    SUMMARY_FILE,
    AggregateSummary,
    IncompatibleReportsError,
    SampleRecord,
    aggregate,
    append_record,
    check_consistency,
    compare_runs,
    load_run,
    read_records,
    render_table,
    write_records,
    write_summary,
)


def _ok(index, success, chamfer, hausdorff, moved, masked=10):
    return SampleRecord(
        sample_index=index,
        cloud_id=f'cloud-{index}',
        true_class=0,
        status='ok',
        success=success,
        adversarial_class=1 if success else 0,
        chamfer=chamfer,
        hausdorff=hausdorff,
        points_modified=moved,
        masked_points=masked,
        lambda1=1.0,
        attacked_regions=[0, 1],
    )


@pytest.fixture
def records():
    """Three attacked samples (two successful), one skipped and one error."""
    return [
        _ok(0, True, 0.01, 0.1, 4),
        _ok(1, False, 0.5, 0.9, 10),
        _ok(2, True, 0.03, 0.3, 8, masked=20),
        SampleRecord(sample_index=3, cloud_id='cloud-3', true_class=2, status='skipped'),
        SampleRecord(
            sample_index=4, cloud_id='cloud-4', true_class=1, status='error', message='boom'
        ),
    ]


def _write_run(run_dir, records, model_hash='abc'):
    run_dir.mkdir()
    write_records(run_dir / SAMPLES_FILE, records)
    write_summary(run_dir / SUMMARY_FILE, aggregate(records, 'local', model_hash))
    return run_dir


class TestAggregate:
    """Tests for aggregate."""

    def test_counts_and_rate(self, records):
        """Test that the rate is over attacked samples only."""
        summary = aggregate(records, 'local', 'abc')

        assert (summary.samples, summary.attacked, summary.skipped, summary.errors) == (5, 3, 1, 1)
        assert summary.successes == 2
        assert summary.success_rate == pytest.approx(2 / 3)

    def test_means_over_successful_samples(self, records):
        """Test that distances and point counts average the successful rows."""
        summary = aggregate(records, 'local', 'abc')

        assert summary.mean_chamfer == pytest.approx(0.02)
        assert summary.median_chamfer == pytest.approx(0.02)
        assert summary.mean_hausdorff == pytest.approx(0.2)
        assert summary.mean_points_modified == pytest.approx(6.0)
        assert summary.mean_masked_points == pytest.approx(40 / 3)

    def test_no_attacked_samples(self):
        """Test that an empty run has rate 0 and no distance statistics."""
        summary = aggregate([], 'global', 'abc')

        assert summary.success_rate == 0.0
        assert summary.mean_chamfer is None
        assert summary.mean_points_modified is None


class TestRecordFiles:
    """Tests for the append-only records file."""

    def test_append_and_read(self, tmp_path, records):
        """Test that appended records read back in order."""
        path = tmp_path / SAMPLES_FILE
        for record in records:
            append_record(path, record)

        assert read_records(path) == records

    def test_lines_are_sorted_json(self, tmp_path, records):
        """Test that each line is a sorted-key JSON object."""
        path = tmp_path / SAMPLES_FILE
        append_record(path, records[0])

        line = path.read_text().splitlines()[0]
        assert line.startswith('{"adversarial_class": 1, "attacked_regions": [0, 1]')

    def test_partial_last_line_is_dropped(self, tmp_path, records):
        """Test that an interrupted write does not poison the file."""
        path = tmp_path / SAMPLES_FILE
        write_records(path, records[:2])
        with open(path, 'a') as handle:
            handle.write('{"sample_index": 2, "cloud')

        assert read_records(path) == records[:2]

    def test_corrupt_middle_line_raises(self, tmp_path, records):
        """Test that damage before the last line is an error."""
        path = tmp_path / SAMPLES_FILE
        path.write_text('not json\n' + records[0].model_dump_json() + '\n')

        with pytest.raises(ValueError):
            read_records(path)

    def test_missing_file(self, tmp_path):
        """Test that a missing records file reads as empty."""
        assert read_records(tmp_path / SAMPLES_FILE) == []


class TestRuns:
    """Tests for load_run, consistency checks and reports."""

    def test_load_run(self, tmp_path, records):
        """Test that a finished run loads with matching aggregates."""
        run = load_run(_write_run(tmp_path / 'local', records))

        assert run.name == 'local'
        assert run.records == records
        assert run.summary.attacked == 3

    def test_unfinished_run(self, tmp_path):
        """Test that a directory without the summary is refused."""
        (tmp_path / 'run').mkdir()

        with pytest.raises(FileNotFoundError, match='not a finished attack run'):
            load_run(tmp_path / 'run')

    def test_tampered_summary(self, tmp_path, records):
        """Test that aggregates must be recomputable from the rows."""
        summary = aggregate(records, 'local', 'abc').model_copy(update={'mean_chamfer': 0.5})

        with pytest.raises(ValueError, match='mean_chamfer'):
            check_consistency(summary, records)

    def test_consistency_within_tolerance(self, records):
        """Test that float noise below 1e-12 is accepted."""
        summary = aggregate(records, 'local', 'abc')
        nudged = summary.model_copy(update={'mean_hausdorff': summary.mean_hausdorff + 1e-14})

        check_consistency(nudged, records)

    def test_two_row_report(self, tmp_path, records):
        """Test that local and global runs make a two-row table with every cell set."""
        local = load_run(_write_run(tmp_path / 'local', records))
        global_records = [_ok(0, True, 0.02, 0.2, 30, masked=64)]
        global_dir = tmp_path / 'global'
        global_dir.mkdir()
        write_records(global_dir / SAMPLES_FILE, global_records)
        write_summary(global_dir / SUMMARY_FILE, aggregate(global_records, 'global', 'abc'))

        report = compare_runs([local, load_run(global_dir)])
        table = render_table(report)

        assert report.model_hash == 'abc'
        assert [row.run for row in report.rows] == ['local', 'global']
        lines = table.splitlines()
        assert lines[0] == '# victim model sha256 abc'
        assert lines[1] == '# ↑ higher is better, ↓ lower is better'
        assert lines[3].startswith('Method')
        assert lines[5].split()[:4] == ['local', 'local', '3', '66.67']
        assert lines[6].split() == [
            'global',
            'global',
            '1',
            '100.00',
            '2.000e-02',
            '2.000e-01',
            '30.0',
        ]
        assert '-' not in lines[5].split()

    def test_empty_cells(self, tmp_path):
        """Test that a run without successes shows dashes for its distances."""
        failed = [_ok(0, False, 0.5, 0.9, 10)]
        report = compare_runs([load_run(_write_run(tmp_path / 'failed', failed))])

        row = render_table(report).splitlines()[-1].split()

        assert row == ['failed', 'local', '1', '0.00', '-', '-', '-']

    def test_incompatible_models(self, tmp_path, records):
        """Test that runs against different victims cannot be merged."""
        first = load_run(_write_run(tmp_path / 'a', records, model_hash='aaa'))
        second = load_run(_write_run(tmp_path / 'b', records, model_hash='bbb'))

        with pytest.raises(IncompatibleReportsError, match='different models'):
            compare_runs([first, second])

    def test_no_runs(self):
        """Test that a report needs at least one run."""
        with pytest.raises(ValueError, match='no runs'):
            compare_runs([])

    def test_summary_round_trip(self, tmp_path, records):
        """Test that written summaries read back equal."""
        summary = aggregate(records, 'local', 'abc')
        write_summary(tmp_path / SUMMARY_FILE, summary)

        loaded = AggregateSummary.model_validate_json((tmp_path / SUMMARY_FILE).read_text())

        assert loaded == summary
