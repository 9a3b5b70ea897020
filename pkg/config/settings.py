from pathlib import Path
from decouple import config

BASE_DIR = Path(__file__).resolve().parent.parent


SECRET_KEY = config("SECRET_KEY", default="adiabat-local-only")

DEBUG = config("DEBUG", default=False, cast=bool)

ALLOWED_HOSTS = ["*"]


INSTALLED_APPS = [
    ##
    "ninja",
    # Local Apps
    "apps.core",
    "apps.expr",
    "apps.transform",
    "apps.calibrated",
    "apps.uncalibrated",
    "apps.oracles",
    "apps.cli",
]

MIDDLEWARE = [
    "django.middleware.security.SecurityMiddleware",
    "django.middleware.common.CommonMiddleware",
]

ROOT_URLCONF = "config.urls"

TEMPLATES = []

WSGI_APPLICATION = "config.wsgi.application"

# stateless: nothing is persisted
DATABASES = {}


# Solver and quadrature defaults; a model config or CLI flag overrides them
ADIABAT_ROOT_TOL = config("ADIABAT_ROOT_TOL", default=1e-12, cast=float)
ADIABAT_ROOT_MAXITER = config("ADIABAT_ROOT_MAXITER", default=200, cast=int)
ADIABAT_QUAD_TOL = config("ADIABAT_QUAD_TOL", default=1e-10, cast=float)
ADIABAT_QUAD_MAX_DEPTH = config("ADIABAT_QUAD_MAX_DEPTH", default=40, cast=int)
ADIABAT_SCAN_GRID = config("ADIABAT_SCAN_GRID", default=33, cast=int)

ADIABAT_CURVE_SAMPLES = config("ADIABAT_CURVE_SAMPLES", default=129, cast=int)
ADIABAT_GRID = config("ADIABAT_GRID", default="60x60")

ADIABAT_AUDIT_POINTS = config("ADIABAT_AUDIT_POINTS", default=100, cast=int)
ADIABAT_AUDIT_TOL = config("ADIABAT_AUDIT_TOL", default=1e-5, cast=float)
ADIABAT_STENCIL_STEP = config("ADIABAT_STENCIL_STEP", default=1e-4, cast=float)
ADIABAT_AUDIT_SEED = config("ADIABAT_AUDIT_SEED", default=20240601, cast=int)

ADIABAT_FIXTURE_DIR = config("ADIABAT_FIXTURE_DIR", default=str(BASE_DIR / "fixtures"))

LOG_LEVEL = config("LOG_LEVEL", default="INFO")

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{asctime} {levelname} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": LOG_LEVEL,
    },
}

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True
