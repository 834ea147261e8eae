from django.apps import AppConfig


class CellularConfig(AppConfig):
    name = "apps.cellular"
    verbose_name = "Two-Cell Networks"
