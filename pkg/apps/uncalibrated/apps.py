from django.apps import AppConfig


class UncalibratedConfig(AppConfig):
    name = "apps.uncalibrated"
    verbose_name = "Uncalibrated reconstruction"
