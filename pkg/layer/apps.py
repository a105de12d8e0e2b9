from django.apps import AppConfig


class LayerConfig(AppConfig):
    name = 'layer'
    verbose_name = 'Quantum layer resonances'
