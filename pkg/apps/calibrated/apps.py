from django.apps import AppConfig


class CalibratedConfig(AppConfig):
    name = "apps.calibrated"
    verbose_name = "Calibrated reconstruction"
