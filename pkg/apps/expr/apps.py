from django.apps import AppConfig


class ExprConfig(AppConfig):
    name = "apps.expr"
    verbose_name = "Expression language"
