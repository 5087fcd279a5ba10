"""Tests for logging setup"""

import logging

from camoflow.logging_config import (
    RUN_LOG_FILE,
    default_log_dir,
    get_logger,
    log_operation,
    run_log,
    setup_logging,
)


class TestSetupLogging:
    """Tests for setup_logging"""

    def test_env_log_dir(self, temp_dir, monkeypatch):
        monkeypatch.setenv("CAMOFLOW_LOG_DIR", str(temp_dir / "custom"))
        assert default_log_dir() == temp_dir / "custom"

    def test_handlers_replaced(self, temp_dir):
        setup_logging(log_dir=temp_dir)
        logger = setup_logging(log_dir=temp_dir, level="DEBUG")
        assert len(logger.handlers) == 2
        assert logger.level == logging.DEBUG
        get_logger('camoflow.test').warning("written to file")
        for handler in logger.handlers:
            handler.flush()
        (log_file,) = temp_dir.glob("camoflow_*.log")
        assert "written to file" in log_file.read_text()


class TestRunLog:
    """Tests for the per-run log file"""

    def test_records_while_active(self, temp_dir):
        logger = get_logger('camoflow.training')
        with run_log(temp_dir / 'run') as path:
            logger.info("epoch 0 done")
        logger.info("after the run")
        assert path == temp_dir / 'run' / RUN_LOG_FILE
        text = path.read_text()
        assert "INFO camoflow.training: epoch 0 done" in text
        assert "after the run" not in text

    def test_appends_and_restores_level(self, temp_dir):
        root = logging.getLogger('camoflow')
        before = root.level
        with run_log(temp_dir):
            get_logger('camoflow.training').info("first")
        with run_log(temp_dir):
            get_logger('camoflow.training').info("second")
        assert root.level == before
        lines = (temp_dir / RUN_LOG_FILE).read_text().splitlines()
        assert [line.rsplit(': ', 1)[1] for line in lines] == ["first", "second"]

    def test_training_writes_run_log(self, tiny_cfg, corpus, temp_dir, mocker):
        from camoflow.training import Trainer, train

        mocker.patch.object(Trainer, 'validate', return_value=0.5)
        train(tiny_cfg.with_overrides(epochs=1), corpus['train'], None, temp_dir)
        text = (temp_dir / RUN_LOG_FILE).read_text()
        assert "Starting: train (full)" in text
        assert "Epoch 0:" in text


class TestLogOperation:
    """Tests for log_operation"""

    def test_failure_logged_and_raised(self, caplog):
        logger = get_logger('camoflow.test')
        with caplog.at_level(logging.INFO, logger='camoflow.test'):
            try:
                with log_operation(logger, "evaluate"):
                    raise RuntimeError("boom")
            except RuntimeError:
                pass
        assert "Starting: evaluate" in caplog.text
        assert "Failed: evaluate" in caplog.text
