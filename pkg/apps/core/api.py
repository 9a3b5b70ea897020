import logging

from ninja import NinjaAPI

from apps.cli.api import router as entropy_router
from apps.core.exceptions import ReconstructionError

logger = logging.getLogger(__name__)

api = NinjaAPI(
    title="Adiabat Reconstruction API",
    version="1.0.0",
    description="Entropy and the adiabat family reconstructed from an equation of state",
)


@api.exception_handler(ReconstructionError)
def handle_reconstruction_error(request, exc: ReconstructionError):
    # 400 for config errors, 422 for numerical failures
    status = 400 if exc.exit_code == 1 else 422
    logger.error(f"Request failed at step '{exc.step}': {exc.message}")
    return api.create_response(request, {"detail": exc.message, "step": exc.step}, status=status)


api.add_router("/entropy/", router=entropy_router)
