from django.apps import AppConfig


class XchannelConfig(AppConfig):
    name = "apps.xchannel"
    verbose_name = "Alamouti X Channel"
