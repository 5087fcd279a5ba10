"""
CamoFlow CLI Utilities

Console output for the command handlers:
- Success / error / warning / info lines
- Headers and tables
- Spinners for long-running steps

All rendering goes through rich; errors go to stderr.
"""

from typing import Any, List, Optional, Sequence

from rich import box
from rich.console import Console
from rich.status import Status
from rich.table import Table

from camoflow.logging_config import get_logger

logger = get_logger('camoflow.cli')


class CLI:
    """
    Console output helpers

    Example:
        >>> cli = CLI()
        >>> cli.success("Wrote 8 samples")
        >>> cli.table("Metrics", ["metric", "value"], [["mae", "0.041"]])
    """

    def __init__(
        self,
        console: Optional[Console] = None,
        error_console: Optional[Console] = None,
        verbose: bool = False,
    ):
        self.console = console or Console()
        self.error_console = error_console or Console(stderr=True)
        self.verbose = verbose
        logger.debug(f"CLI initialized: verbose={verbose}")

    def print(self, message: str) -> None:
        self.console.print(message, highlight=False)

    def success(self, message: str) -> None:
        self.console.print(f"[green]✓ {message}[/green]", highlight=False)

    def error(self, message: str) -> None:
        self.error_console.print(f"[red]✗ {message}[/red]", highlight=False)

    def warning(self, message: str) -> None:
        self.console.print(f"[yellow]⚠ {message}[/yellow]", highlight=False)

    def info(self, message: str) -> None:
        self.console.print(f"[cyan]ℹ {message}[/cyan]", highlight=False)

    def debug(self, message: str) -> None:
        """Only shown when verbose"""
        if self.verbose:
            self.console.print(f"[dim]  {message}[/dim]", highlight=False)

    def header(self, title: str) -> None:
        self.console.print()
        self.console.rule(f"[bold]{title}[/bold]")

    def table(
        self,
        title: str,
        headers: Sequence[str],
        rows: Sequence[Sequence[Any]],
        styles: Optional[List[Optional[str]]] = None,
    ) -> Table:
        """
        Print a table and return it

        Args:
            title: Table title
            headers: Column headers
            rows: Cell values (converted with str)
            styles: Optional rich style per row
        """
        table = Table(title=title, box=box.ROUNDED)
        for index, header in enumerate(headers):
            table.add_column(header, justify='left' if index == 0 else 'right')
        for index, row in enumerate(rows):
            style = styles[index] if styles else None
            table.add_row(*(str(cell) for cell in row), style=style)
        self.console.print(table)
        return table

    def status(self, message: str) -> Status:
        """
        Spinner context manager

        Example:
            >>> with cli.status("Training"):
            ...     trainer.fit()
        """
        return self.console.status(message)


_global_cli: Optional[CLI] = None


def get_cli(verbose: bool = False) -> CLI:
    """Process-wide CLI instance"""
    global _global_cli
    if _global_cli is None:
        _global_cli = CLI(verbose=verbose)
    return _global_cli
