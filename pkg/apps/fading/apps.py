from django.apps import AppConfig


class FadingConfig(AppConfig):
    name = "apps.fading"
    verbose_name = "Fading Channels"
