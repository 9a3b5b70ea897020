from pathlib import Path

from apps.cli.base import PipelineCommand
from apps.cli.services import PipelineService


class Command(PipelineCommand):
    help = "Render adiabats.json in a directory as adiabats.svg"

    takes_config = False
    takes_output = False

    def add_arguments(self, parser):
        parser.add_argument("directory", help="Directory holding adiabats.json")

    def run(self, options: dict) -> str:
        target = PipelineService.plot(Path(options["directory"]))
        return f"Wrote {target}"
