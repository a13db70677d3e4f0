import os

SEED_ENV_VAR = 'FLEXFAS_SEED'


class GlobalSettings:

    def __init__(self):
        self._settings = {
            'SEED_OVERRIDE': None,
        }
        self.reload_env()

    def reload_env(self):
        raw = os.environ.get(SEED_ENV_VAR, '').strip()
        self._settings['SEED_OVERRIDE'] = int(raw) if raw else None

    def set(self, key: str, value):
        self._settings[key] = value

    def get(self, key: str):
        return self._settings[key]


SETTINGS = GlobalSettings()
