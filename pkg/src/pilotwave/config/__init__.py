"""Packaged defaults (settings.yaml)."""

from pathlib import Path

import yaml

SETTINGS_FILE = Path(__file__).with_name("settings.yaml")


def load_settings(path=None):
    """Load settings.yaml, overlaying a user file section by section."""
    with open(SETTINGS_FILE, "r", encoding="utf-8") as f:
        settings = yaml.safe_load(f)
    if path is not None:
        with open(path, "r", encoding="utf-8") as f:
            user = yaml.safe_load(f) or {}
        for section, values in user.items():
            if isinstance(values, dict):
                settings.setdefault(section, {}).update(values)
            else:
                settings[section] = values
    return settings
