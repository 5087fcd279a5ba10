"""Tests for timing and throughput accounting"""

import logging

import pytest

from camoflow.performance import PerformanceMonitor, StageTiming, get_monitor, timed


class TestStageTiming:
    """Tests for StageTiming"""

    def test_add(self):
        timing = StageTiming('train_step')
        timing.add(0.5, images=4)
        timing.add(1.5, images=4)
        assert (timing.calls, timing.images) == (2, 8)
        assert (timing.fastest, timing.slowest, timing.mean_seconds) == (0.5, 1.5, 1.0)
        assert timing.images_per_second == 4.0

    def test_unused_stage(self):
        timing = StageTiming('idle')
        assert timing.mean_seconds == 0.0
        assert timing.images_per_second == 0.0
        assert timing.to_dict()['fastest'] == 0.0


class TestPerformanceMonitor:
    """Tests for PerformanceMonitor"""

    def test_measure_records_block(self):
        monitor = PerformanceMonitor()
        with monitor.measure('inference', images=1):
            pass
        with monitor.measure('inference', images=1):
            pass
        timing = monitor.get('inference')
        assert (timing.calls, timing.images) == (2, 2)
        assert monitor.get('validation') is None

    def test_measure_records_on_error(self):
        monitor = PerformanceMonitor()
        with pytest.raises(ValueError):
            with monitor.measure('train_step', images=4):
                raise ValueError("bad batch")
        assert monitor.get('train_step').calls == 1

    def test_slowest_first(self):
        monitor = PerformanceMonitor()
        monitor.record('inference', 0.1)
        monitor.record('train_step', 2.0)
        monitor.record('validation', 1.0)
        assert monitor.slowest_stages(2) == [('train_step', 2.0), ('validation', 1.0)]
        assert set(monitor.summary()) == {'inference', 'train_step', 'validation'}

    def test_report(self):
        monitor = PerformanceMonitor()
        assert monitor.report() == "No performance data collected"
        monitor.record('train_step', 0.25, images=4)
        monitor.record('train_step', 0.75, images=4)
        monitor.record('validation', 0.1)
        lines = monitor.report().splitlines()
        assert lines[0] == "Performance: 1.1000s over 2 stage(s)"
        assert lines[1] == "  train_step: 0.5000s x 2 (8.0 img/s)"
        assert lines[2] == "  validation: 0.1000s x 1"

    def test_clear(self):
        monitor = PerformanceMonitor()
        monitor.record('inference', 1.0)
        monitor.clear()
        assert monitor.summary() == {}

    def test_global_instance(self):
        assert get_monitor() is get_monitor()

    def test_trainer_counts_images(self, tiny_cfg, corpus, temp_dir, mocker):
        from camoflow.training import train

        mocker.patch('camoflow.training.Trainer.validate', return_value=0.5)
        monitor = PerformanceMonitor()
        mocker.patch('camoflow.training.get_monitor', return_value=monitor)
        train(tiny_cfg.with_overrides(epochs=1), corpus['train'], None, temp_dir)
        timing = monitor.get('train_step')
        assert (timing.calls, timing.images) == (1, 4)


class TestTimed:
    """Tests for the timed decorator"""

    def test_logs_and_returns(self, caplog):
        @timed
        def double(x):
            return 2 * x

        with caplog.at_level(logging.INFO, logger='camoflow.performance'):
            assert double(3) == 6
        assert "Function double took" in caplog.text
        assert double.__name__ == 'double'

    def test_logs_on_error(self, caplog):
        @timed
        def fail():
            raise RuntimeError("boom")

        with caplog.at_level(logging.INFO, logger='camoflow.performance'):
            with pytest.raises(RuntimeError):
                fail()
        assert "Function fail took" in caplog.text
