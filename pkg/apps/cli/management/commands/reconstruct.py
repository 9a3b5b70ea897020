from apps.cli.base import PipelineCommand
from apps.cli.services import PipelineService


class Command(PipelineCommand):
    help = "Reconstruct entropy from one adiabat and write grid, level curves and report"

    def run(self, options: dict) -> str:
        model = self.load_model(options)
        outcome = PipelineService.reconstruct(model)
        written = PipelineService.write(outcome, self.output_dir(options))
        band = outcome.report["valid_band"]
        return (
            f"Wrote {len(written)} files to {self.output_dir(options)}; "
            f"valid temperature band [{band['X_min']!r}, {band['X_max']!r}]"
        )
