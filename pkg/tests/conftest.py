"""
Pytest configuration and shared fixtures
"""

import pytest
import tempfile
import shutil
from pathlib import Path

import numpy as np

from camoflow.config import AblationConfig, Config
from camoflow.data.synthetic import gen_synthetic


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: trains or checks a full network (deselect with -m 'not slow')")


@pytest.fixture(autouse=True)
def isolated_logs(tmp_path, monkeypatch):
    """Keep log files out of the home directory"""
    monkeypatch.setenv("CAMOFLOW_LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.delenv("COFINET_THREADS", raising=False)


@pytest.fixture
def temp_dir():
    """Create temporary directory for tests"""
    temp = tempfile.mkdtemp()
    yield Path(temp)
    shutil.rmtree(temp, ignore_errors=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_cfg():
    """Small architecture that runs a 64x64 forward pass in well under a second"""
    return Config(
        input_size=64,
        widths=(8, 16, 16, 32),
        latent_dim=16,
        mskm_depth=1,
        decoder_width=4,
        sbd_hidden=8,
        batch_size=4,
        epochs=2,
        early_stop_patience=5,
        seed=0,
        threads=1,
    )


@pytest.fixture
def no_sbd_cfg(tiny_cfg):
    return tiny_cfg.with_overrides(ablation=AblationConfig(use_sbd=False))


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """Synthetic 64x64 corpus: 4 train and 2 val samples, seed 7"""
    root = tmp_path_factory.mktemp("corpus")
    train = gen_synthetic(root, seed=7, n=4, size=64, split='train')
    val = gen_synthetic(root, seed=7, n=2, size=64, split='val')
    return {'root': root, 'train': train, 'val': val}
