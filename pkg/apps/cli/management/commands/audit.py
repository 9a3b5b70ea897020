from apps.cli.base import PipelineCommand
from apps.cli.services import PipelineService
from apps.core.exceptions import AuditError


class Command(PipelineCommand):
    help = "Audit area preservation, round trips and the sign scan for a model config"

    takes_output = False

    def run(self, options: dict) -> str:
        model = self.load_model(options, audit=True)
        report = PipelineService.audit(model)
        self.stdout.write(report.table())
        failure = report.first_failure
        if failure is not None:
            detail = failure.detail or f"measured {failure.measured!r} exceeds {failure.tolerance!r}"
            raise AuditError(f"{failure.invariant}: {detail}")
        return "All invariants hold"
