from django.apps import AppConfig


class JashConfig(AppConfig):
    name = "apps.jash"
    verbose_name = "Linear Alignment Baseline"
