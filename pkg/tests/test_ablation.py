"""Tests for ablation runs"""

import json

import pytest

from camoflow.ablation import ABLATION_FILE, VARIANTS, run_ablation
from camoflow.config import AblationConfig
from camoflow.model.network import build_model


class TestVariants:
    """The substitution grid"""

    def test_labels(self):
        assert [variant.label() for variant in VARIANTS] == [
            'full', 'no-sbd', 'no-mskm', 'no-mskm-no-sbd', 'no-msfi',
        ]

    def test_removing_modules_removes_parameters(self, tiny_cfg):
        counts = {v.label(): build_model(tiny_cfg.with_overrides(ablation=v)).num_parameters() for v in VARIANTS}
        assert counts['no-sbd'] < counts['full']
        assert counts['no-mskm-no-sbd'] < counts['no-mskm']


class TestRunAblation:
    """Tests for run_ablation"""

    def test_two_variants(self, tiny_cfg, corpus, temp_dir):
        cfg = tiny_cfg.with_overrides(epochs=1, max_steps=1)
        variants = (AblationConfig(), AblationConfig(use_sbd=False))
        result = run_ablation(cfg, corpus['train'], corpus['val'], temp_dir, variants=variants)

        assert [run.variant for run in result.runs] == ['full', 'no-sbd']
        for run in result.runs:
            assert (temp_dir / run.variant / 'best.cofi').is_file()
            assert (temp_dir / run.variant / 'eval' / 'report.json').is_file()
            assert run.steps == 1
            assert run.parameters == build_model(cfg.with_overrides(ablation=run.ablation)).num_parameters()

        saved = json.loads((temp_dir / ABLATION_FILE).read_text())
        assert saved['seed'] == cfg.seed
        assert [v['variant'] for v in saved['variants']] == ['full', 'no-sbd']
        assert saved['variants'][1]['use_sbd'] is False
        assert set(saved['variants'][0]['metrics']) == {'mae', 's_alpha', 'e_xi', 'f_beta'}

    def test_lookup(self, tiny_cfg, corpus, temp_dir):
        cfg = tiny_cfg.with_overrides(epochs=1, max_steps=1)
        result = run_ablation(cfg, corpus['train'], None, temp_dir, variants=(AblationConfig(use_msfi=False),))
        assert result.run('no-msfi').ablation.use_msfi is False
        with pytest.raises(KeyError):
            result.run('full')

    @pytest.mark.slow
    def test_full_grid(self, tiny_cfg, corpus, temp_dir):
        cfg = tiny_cfg.with_overrides(epochs=1, max_steps=1)
        result = run_ablation(cfg, corpus['train'], corpus['val'], temp_dir)
        assert [run.variant for run in result.runs] == [v.label() for v in VARIANTS]
        for run in result.runs:
            assert 0.0 <= run.metrics.mae <= 1.0
