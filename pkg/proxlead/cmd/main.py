from pathlib import Path
from typing import Any, Callable, Optional

import orjson
import typer

from proxlead.core.exceptions import SimulationException
from proxlead.core.logger import get_logger
from proxlead.core.settings import settings
from proxlead.core.telemetry import setup_logging, setup_telemetry
from proxlead.schemas.config import load_config
from proxlead.services import harness

logger = get_logger(__name__)

app = typer.Typer(
    name="proxlead",
    help="Simulate decentralized compressed proximal optimization.",
    no_args_is_help=True,
    add_completion=False,
)

OutputOption = typer.Option(None, "--output", "-o", help="Directory for the CSV files")


@app.callback()
def main(
    log_level: Optional[str] = typer.Option(None, "--log-level", help="Overrides LOG_LEVEL"),
) -> None:
    """Configure logging (and tracing when OTEL_ENABLED) before any command."""
    if settings.OTEL_ENABLED:
        setup_telemetry()
    else:
        setup_logging(log_level)


def _execute(command: str, action: Callable[[], Any]) -> Any:
    try:
        return action()
    except SimulationException as e:
        logger.error(f"{command} failed", operation=command, error=e, code=str(e.error_code))
        typer.echo(f"error [{e.error_code}]: {e.message}", err=True)
        raise typer.Exit(code=e.exit_code) from e


def _parse_value(raw: str) -> Any:
    try:
        return orjson.loads(raw)
    except orjson.JSONDecodeError:
        return raw


@app.command()
def run(
    config: Path = typer.Argument(..., help="Experiment config (JSON)"),
    output: Optional[Path] = OutputOption,
) -> None:
    """Run every replica of one experiment."""
    result = _execute("run", lambda: harness.run(load_config(config), output))
    for path in result.paths:
        typer.echo(str(path))
    if result.aggregate_path is not None:
        typer.echo(str(result.aggregate_path))


@app.command()
def sweep(
    config: Path = typer.Argument(..., help="Base experiment config (JSON)"),
    axis: str = typer.Option(..., "--axis", help="Dotted config key or alias such as eta or bits"),
    values: str = typer.Option(..., "--values", help="Comma-separated values"),
    output: Optional[Path] = OutputOption,
) -> None:
    """One run per value of a single config key."""
    parsed = [_parse_value(v.strip()) for v in values.split(",") if v.strip()]
    points = _execute("sweep", lambda: harness.sweep(load_config(config), axis, parsed, output))
    for point in points:
        typer.echo(f"{point.value}\tC={point.c_param!r}\t{point.result.paths[0]}")


@app.command()
def compare(
    configs: list[Path] = typer.Argument(..., help="Configs sharing problem and topology"),
    align: str = typer.Option("iterations", "--align", help="iterations, bits or grad_evals"),
    output: Optional[Path] = OutputOption,
) -> None:
    """Suboptimality of several runs against a shared budget axis."""
    result = _execute(
        "compare",
        lambda: harness.compare([load_config(c) for c in configs], align, output),
    )
    typer.echo(str(result.path))


@app.command("estimate-c")
def estimate_c(
    config: Path = typer.Argument(..., help="Experiment config (JSON)"),
    trials: int = typer.Option(1000, "--trials", min=1),
    repeats: int = typer.Option(200, "--repeats", min=2),
) -> None:
    """Empirical C of the configured compressor."""
    estimate = _execute(
        "estimate-c",
        lambda: harness.estimate_compressor(load_config(config), trials, repeats),
    )
    typer.echo("c_hat,bias,skipped")
    typer.echo(f"{estimate.c_hat!r},{estimate.bias!r},{estimate.skipped}")


@app.command()
def reference(
    config: Path = typer.Argument(..., help="Experiment config (JSON)"),
    refresh: bool = typer.Option(False, "--refresh", help="Re-solve even when cached"),
) -> None:
    """Solve and cache the centralized optimum of the configured problem."""
    solution = _execute(
        "reference", lambda: harness.reference(load_config(config), refresh=refresh)
    )
    typer.echo(f"obj_star={solution.obj_star!r} iterations={solution.iterations}")


if __name__ == "__main__":
    app()
