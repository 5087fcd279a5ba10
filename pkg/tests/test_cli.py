"""Tests for console output helpers"""

from rich.console import Console

from camoflow.cli import CLI


def recording_cli(verbose=False):
    out = Console(record=True, width=100, force_terminal=False)
    err = Console(record=True, width=100, force_terminal=False)
    return CLI(console=out, error_console=err, verbose=verbose), out, err


class TestCLI:
    """Tests for CLI"""

    def test_errors_go_to_error_console(self):
        cli, out, err = recording_cli()
        cli.error("checkpoint not found")
        cli.success("done")
        out_text = out.export_text()
        assert "checkpoint not found" in err.export_text()
        assert "checkpoint not found" not in out_text
        assert "done" in out_text

    def test_debug_only_when_verbose(self):
        quiet, quiet_out, _ = recording_cli()
        quiet.debug("step 3")
        assert "step 3" not in quiet_out.export_text()

        loud, loud_out, _ = recording_cli(verbose=True)
        loud.debug("step 3")
        assert "step 3" in loud_out.export_text()

    def test_table(self):
        cli, out, _ = recording_cli()
        table = cli.table("Metrics", ["metric", "value"], [["mae", "0.041000"], ["s_alpha", 0.9]])
        assert table.row_count == 2
        text = out.export_text()
        assert "Metrics" in text and "0.041000" in text and "0.9" in text
