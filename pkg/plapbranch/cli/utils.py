"""Console output and error-to-exit-code handling shared by the CLI commands."""

from contextlib import contextmanager
from typing import Any, Dict, Iterator, Optional, Sequence

import pydantic
import typer
from rich.console import Console
from rich.table import Table

from plapbranch.models.errors import USAGE_ERRORS, PLapError
from plapbranch.models.results import Branch

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_VALIDATION = 3


class CLIUtils:
    def __init__(
        self, verbose: bool = False, quiet: bool = False, console: Optional[Console] = None
    ):
        self.console = console or Console()
        self.verbose = verbose
        self.quiet = quiet

    def print_info(self, message: str) -> None:
        """Print informational message"""
        if not self.quiet:
            self.console.print(f"ℹ️  {message}", style="blue")

    def print_success(self, message: str) -> None:
        """Print success message"""
        if not self.quiet:
            self.console.print(f"✅ {message}", style="green")

    def print_error(self, message: str) -> None:
        """Print error message"""
        self.console.print(f"❌ {message}", style="red", highlight=False)

    def print_warning(self, message: str) -> None:
        """Print warning message"""
        if not self.quiet:
            self.console.print(f"⚠️  {message}", style="yellow")

    def print_mapping(self, title: str, values: Dict[str, Any]) -> None:
        if self.quiet:
            return
        table = Table(title=title)
        table.add_column("Key", style="cyan")
        table.add_column("Value", style="green")
        for key, value in values.items():
            table.add_row(key, _format_value(value))
        self.console.print(table)

    def print_branches(self, branches: Sequence[Branch]) -> None:
        if self.quiet:
            return
        table = Table(title="Branch samples")
        for column in ("label", "p", "lambda", "iters", "converged"):
            table.add_column(column, style="cyan" if column == "label" else None)
        for branch in branches:
            for s in branch.samples:
                table.add_row(
                    branch.label,
                    f"{s.p:g}",
                    f"{s.lambda_:.10g}",
                    str(s.iterations),
                    "yes" if s.converged else "[red]no[/red]",
                )
        self.console.print(table)


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def exit_code_for(error: BaseException) -> int:
    """0 ok, 1 usage, 2 numerical failure."""
    if isinstance(error, (pydantic.ValidationError,) + USAGE_ERRORS):
        return EXIT_USAGE
    return EXIT_NUMERICAL


def describe_error(error: BaseException) -> str:
    if isinstance(error, pydantic.ValidationError):
        return "; ".join(
            f"{'.'.join(str(part) for part in e['loc']) or 'value'}: {e['msg']}"
            for e in error.errors()
        )
    if isinstance(error, PLapError):
        return error.message
    return str(error)


@contextmanager
def handle_cli_errors(ui: CLIUtils) -> Iterator[None]:
    """Turn library errors into an error line and the matching exit code."""
    try:
        yield
    except (PLapError, pydantic.ValidationError) as error:
        ui.print_error(describe_error(error))
        if ui.verbose and isinstance(error, PLapError) and error.details:
            ui.console.print(f"Details: {error.details}", style="dim")
        raise typer.Exit(exit_code_for(error))
