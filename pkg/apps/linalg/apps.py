from django.apps import AppConfig


class LinalgConfig(AppConfig):
    name = "apps.linalg"
    verbose_name = "Linear Algebra Core"
