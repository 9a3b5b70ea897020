import logging
from pathlib import Path
from typing import Optional

from django.core.management.base import BaseCommand, CommandError

from apps.core.exceptions import ReconstructionError

from .constants import parse_grid, parse_levels
from .loaders import Model, apply_overrides, load_config, prepare

logger = logging.getLogger(__name__)


class PipelineCommand(BaseCommand):
    """Shared argument handling and error mapping for the adiabat commands"""

    takes_config = True
    takes_output = True

    def add_arguments(self, parser):
        if self.takes_config:
            parser.add_argument("config", help="Model config (JSON)")
        if self.takes_output:
            parser.add_argument("-o", "--output", default=".", help="Output directory")
        parser.add_argument("--tol", type=float, default=None, help="Tolerance override")
        parser.add_argument("--grid", default=None, help="Output grid as NxM")
        parser.add_argument("--levels", default=None, help="Comma-separated S levels")

    def load_model(self, options: dict, audit: bool = False) -> Model:
        try:
            grid = parse_grid(options["grid"]) if options.get("grid") else None
            levels = parse_levels(options["levels"]) if options.get("levels") else None
        except ValueError as e:
            raise CommandError(str(e), returncode=1)
        config = load_config(options["config"])
        config = apply_overrides(config, tol=options.get("tol"), grid=grid, levels=levels, audit=audit)
        return prepare(config)

    def output_dir(self, options: dict) -> Path:
        return Path(options["output"])

    def handle(self, *args, **options):
        try:
            message = self.run(options)
        except ReconstructionError as e:
            logger.error(f"{self.name} failed at step '{e.step}': {e.message}")
            raise CommandError(f"[{e.step}] {e.message}", returncode=e.exit_code)
        except CommandError:
            raise
        except Exception as e:
            logger.error(f"Unexpected error in {self.name}: {str(e)}", exc_info=True)
            raise CommandError(f"Unexpected error: {str(e)}", returncode=2)
        if message:
            self.stdout.write(self.style.SUCCESS(message))

    @property
    def name(self) -> str:
        return self.__class__.__module__.rsplit(".", 1)[-1]

    def run(self, options: dict) -> Optional[str]:
        raise NotImplementedError
