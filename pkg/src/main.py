import logging

import click
from pydantic import ValidationError

from src.commands.generate import generate
from src.commands.reconstruct import reconstruct
from src.commands.report import report
from src.commands.simulate import simulate
from src.commands.sweep import sweep
from src.core.config import settings
from src.core.errors import ConfigError, InputError

logging.basicConfig(level=settings.log_level)
logger = logging.getLogger("csqns.cli")

EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INPUT = 3


class ExitCodeGroup(click.Group):
    """Maps exceptions escaping a subcommand onto the stable exit codes."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except (click.exceptions.Exit, click.ClickException, click.Abort):
            raise
        except (ValidationError, ConfigError) as exc:
            logger.error("Invalid config: %s", exc)
            click.echo(f"config error: {exc}", err=True)
            ctx.exit(EXIT_CONFIG)
        except (InputError, FileNotFoundError) as exc:
            logger.error("Input error: %s", exc)
            click.echo(f"input error: {exc}", err=True)
            ctx.exit(EXIT_INPUT)
        except Exception as exc:
            if settings.debug_errors:
                logger.exception("Unhandled error in %s", ctx.invoked_subcommand)
            else:
                logger.error("Unhandled error in %s: %s", ctx.invoked_subcommand, exc)
            click.echo(f"error: {exc.__class__.__name__}: {exc}", err=True)
            ctx.exit(EXIT_FAILURE)


@click.group(cls=ExitCodeGroup)
def cli() -> None:
    """Compressed noise spectroscopy: design, simulate, reconstruct, sweep."""


# SUBCOMMANDS ----------------------------------------------------------------------------
cli.add_command(generate)
cli.add_command(simulate)
cli.add_command(reconstruct)
cli.add_command(sweep)
cli.add_command(report)


if __name__ == "__main__":
    cli()
