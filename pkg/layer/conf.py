"""
Solver settings, merged over the defaults below.

Project settings may define a ``LAYER_SOLVER`` dict; any key missing there
falls back to ``DEFAULTS``.
"""
from django.conf import settings
from django.core.signals import setting_changed

DEFAULTS = {
    'QUAD_ORDER': 16,
    'TAIL_TOL': 1e-10,
    'ROOT_TOL': 1e-12,
    'MAX_ITERATIONS': 50,
    'CONDITION_LIMIT': 1e12,
    'LATTICE_TERMS': 256,
    'TAIL_SERIES_TERMS': 512,
    'TAIL_POWERS': 20,
    'FD_STEP': 1e-7,
    'THREADS': 1,
    'SWEEP_DELTAS': (0.02, 0.12, 8),
    'MIN_FIT_POINTS': 4,
}


class SolverSettings:

    def __init__(self, defaults=None):
        self.defaults = defaults or DEFAULTS
        self._cached = set()

    @property
    def user_settings(self):
        if not hasattr(self, '_user_settings'):
            self._user_settings = getattr(settings, 'LAYER_SOLVER', {})
        return self._user_settings

    def __getattr__(self, attr):
        if attr not in self.defaults:
            raise AttributeError(f"Invalid solver setting: '{attr}'")
        value = self.user_settings.get(attr, self.defaults[attr])
        self._cached.add(attr)
        setattr(self, attr, value)
        return value

    def reload(self):
        for attr in self._cached:
            delattr(self, attr)
        self._cached.clear()
        if hasattr(self, '_user_settings'):
            delattr(self, '_user_settings')


solver_settings = SolverSettings()


def reload_solver_settings(*args, **kwargs):
    if kwargs['setting'] == 'LAYER_SOLVER':
        solver_settings.reload()


setting_changed.connect(reload_solver_settings)
