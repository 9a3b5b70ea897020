from django.apps import AppConfig


class TransformConfig(AppConfig):
    name = "apps.transform"
    verbose_name = "Straightening transform"
