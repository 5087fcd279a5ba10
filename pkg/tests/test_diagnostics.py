"""Tests for the gradient diagnostics"""

import numpy as np
import pytest

from camoflow import diagnostics
from camoflow.autograd.functional import ACTIVATIONS, GeluFn
from camoflow.autograd.tensor import precision
from camoflow.commands import main
from camoflow.config import AblationConfig
from camoflow.diagnostics import (
    THRESHOLD,
    GradCheckReport,
    GradCheckRow,
    check_losses,
    check_primitives,
    module_names,
    run_gradcheck,
)
from camoflow.exceptions import ConfigurationError


def broken_gelu_backward(self, grad):
    return (grad * self.cdf,)


class TestModuleNames:
    """Tests for module_names"""

    def test_full(self, tiny_cfg):
        assert module_names(tiny_cfg) == [
            'tensor-core', 'encoder-stub', 'msfi', 'mac', 'mskm', 'coarse-decoder',
            'sbd', 'final-decoder', 'aux', 'losses', 'network',
        ]

    def test_substitutions(self, tiny_cfg):
        cfg = tiny_cfg.with_overrides(ablation=AblationConfig(use_msfi=False, use_mskm=False, use_sbd=False))
        names = module_names(cfg)
        assert 'plain-fusion' in names and 'plain-extract' in names
        assert not {'msfi', 'mac', 'mskm', 'sbd'} & set(names)


class TestReport:
    """Tests for GradCheckReport"""

    def test_threshold_is_exclusive(self):
        report = GradCheckReport(rows=[GradCheckRow('a', 1e-5, 6), GradCheckRow('b', THRESHOLD, 6)], seeds=[0])
        assert not report.passed
        assert [row.module for row in report.failures()] == ['b']
        assert report.worst == THRESHOLD

    def test_to_dict(self):
        report = GradCheckReport(rows=[GradCheckRow('a', 2e-6, 12)], seeds=[0, 1])
        assert report.to_dict() == {
            'threshold': THRESHOLD,
            'seeds': [0, 1],
            'passed': True,
            'modules': {'a': {'worst': 2e-6, 'checked': 12}},
        }


class TestBatteries:
    """The primitive and loss batteries on their own"""

    def test_primitives_pass(self):
        with precision(np.float64):
            worst, count = check_primitives(np.random.default_rng(0))
        assert worst < THRESHOLD
        assert count == 23 + len(ACTIVATIONS)

    def test_losses_pass(self):
        with precision(np.float64):
            worst, count = check_losses(np.random.default_rng(0))
        assert worst < THRESHOLD
        assert count == 36

    def test_broken_backward_detected(self, mocker):
        mocker.patch.object(GeluFn, 'backward', broken_gelu_backward)
        with precision(np.float64):
            worst, _ = check_primitives(np.random.default_rng(0))
        assert worst >= THRESHOLD


class TestRunGradcheck:
    """Tests for run_gradcheck and the gradcheck command"""

    def test_seed_count(self, tiny_cfg):
        with pytest.raises(ConfigurationError, match="seeds"):
            run_gradcheck(tiny_cfg, seeds=0)

    @pytest.mark.slow
    def test_every_component_passes(self, tiny_cfg):
        report = run_gradcheck(tiny_cfg, seeds=1, samples=4)
        assert [row.module for row in report.rows] == module_names(tiny_cfg)
        assert report.passed, report.to_dict()
        assert all(row.checked > 0 for row in report.rows)

    @pytest.mark.slow
    def test_no_sbd_variant_passes(self, no_sbd_cfg):
        report = run_gradcheck(no_sbd_cfg, seeds=1, samples=4)
        assert report.passed, report.to_dict()

    def test_command_runs_primitive_battery(self, tiny_cfg, temp_dir, mocker):
        """gradcheck builds the 64 px model and scores every primitive"""
        mocker.patch('camoflow.diagnostics._component_checks', return_value=[])
        spy = mocker.spy(diagnostics, 'check_primitives')
        tiny_cfg.save(temp_dir / 'tiny.json')
        assert main(['gradcheck', '--config', str(temp_dir / 'tiny.json')]) == 0
        assert spy.call_count == 1

    def test_failing_report_exits_5(self, tiny_cfg, temp_dir, mocker):
        failing = GradCheckReport(rows=[GradCheckRow('mskm', 0.2, 6)], seeds=[0])
        mocker.patch('camoflow.diagnostics.run_gradcheck', return_value=failing)
        tiny_cfg.save(temp_dir / 'tiny.json')
        assert main(['gradcheck', '--config', str(temp_dir / 'tiny.json')]) == 5

    @pytest.mark.slow
    def test_corrupted_backward_exits_5(self, tiny_cfg, temp_dir, mocker):
        mocker.patch.object(GeluFn, 'backward', broken_gelu_backward)
        tiny_cfg.save(temp_dir / 'tiny.json')
        assert main(['gradcheck', '--config', str(temp_dir / 'tiny.json'), '--samples', '2']) == 5
