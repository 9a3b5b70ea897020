from apps.cli.base import PipelineCommand
from apps.cli.services import PipelineService


class Command(PipelineCommand):
    help = "Recover the adiabat family and temperature recalibration from two adiabats"

    def run(self, options: dict) -> str:
        model = self.load_model(options)
        outcome = PipelineService.recalibrate(model)
        written = PipelineService.write(outcome, self.output_dir(options))
        law = outcome.report["power_law"]
        return (
            f"Wrote {len(written)} files to {self.output_dir(options)}; "
            f"f1 - f0 ~ X~^{law['exponent']:.6f}"
        )
