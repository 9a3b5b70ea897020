import logging

from django.http import HttpRequest
from ninja import Router

from .loaders import parse_config, prepare
from .schemas import CheckSchema, ErrorSchema, ModelConfig, ReportSchema
from .services import PipelineService, run_report

logger = logging.getLogger(__name__)

router = Router(tags=["Entropy"])


def _model(payload: ModelConfig):
    # re-validate so cross-field rules apply exactly as for config files
    return prepare(parse_config(payload.model_dump()))


@router.post(
    "/reconstruct",
    response={200: ReportSchema, 400: ErrorSchema, 422: ErrorSchema},
    summary="Reconstruct entropy from one adiabat",
)
def reconstruct(request: HttpRequest, payload: ModelConfig):
    """
    Run the calibrated reconstruction and return the report with level curves.

    - Needs mode 'calibrated' and exactly one adiabat
    - Nothing is written to disk
    """
    outcome = PipelineService.reconstruct(_model(payload))
    return run_report(outcome)


@router.post(
    "/recalibrate",
    response={200: ReportSchema, 400: ErrorSchema, 422: ErrorSchema},
    summary="Recalibrate temperature from two adiabats",
)
def recalibrate(request: HttpRequest, payload: ModelConfig):
    """Run the two-adiabat recalibration and return the report with level curves"""
    outcome = PipelineService.recalibrate(_model(payload))
    return run_report(outcome)


@router.post(
    "/check",
    response={200: CheckSchema, 400: ErrorSchema, 422: ErrorSchema},
    summary="Audit the invariants of a model",
)
def check(request: HttpRequest, payload: ModelConfig):
    """Invariant table; `passed` is false when any row fails"""
    report = PipelineService.audit(_model(payload))
    if not report.passed:
        logger.warning(f"Audit failed: {report.first_failure.invariant}")
    return report.as_dict()
