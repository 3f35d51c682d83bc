# Anomalycounter
# Copyright (C) 2025 Die Anomalycounter-Entwickler
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

import copy
import logging
import os
import platform
import sys
from pathlib import Path

from .exceptions import ConfigError
from .json_io_handler import JsonIOHandler
from .run_options import RunConfig

logger = logging.getLogger(__name__)

SEED_ENV_VAR = "ANOMALYCOUNTER_SEED"


def get_application_root_dir() -> Path:
    """
    Gibt das Wurzelverzeichnis der Anwendung zurück.
    Funktioniert sowohl für Skriptausführung als auch für eine gepackte Anwendung.
    """
    if getattr(sys, "frozen", False):
        return Path(sys.executable).parent
    return Path(__file__).resolve().parent.parent


def get_app_data_dir() -> Path:
    """
    Gibt das plattformspezifische Anwendungsdaten-Verzeichnis zurück.
    Fängt Fehler ab und fällt auf das Anwendungsverzeichnis zurück.
    """
    try:
        system = platform.system()
        app_name = "Anomalycounter"

        if system == "Windows":
            appdata = os.getenv("APPDATA")
            if not appdata:
                raise OSError("APPDATA Umgebungsvariable nicht gefunden.")
            path = Path(appdata) / app_name
        elif system == "Darwin":  # macOS
            path = Path.home() / "Library" / "Application Support" / app_name
        else:  # Linux
            path = Path.home() / ".config" / app_name.lower()

        path.mkdir(parents=True, exist_ok=True)
        return path
    except (OSError, TypeError) as e:
        logger.warning(
            f"Konnte das Benutzer-spezifische Datenverzeichnis nicht erstellen: {e}",
            exc_info=True,
        )
        logger.warning("Fallback auf das Anwendungsverzeichnis für Logs.")
        return get_application_root_dir()


def _merge(base: dict, update: dict) -> dict:
    """Mischt `update` schlüsselweise in eine Kopie von `base`; verschachtelte Abschnitte rekursiv."""
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


class SettingsManager:
    """
    Baut die Konfiguration eines Laufs aus drei Ebenen zusammen.

    1. Eingebaute Standardwerte (`_get_defaults`)
    2. Eine optionale JSON-Konfigurationsdatei
    3. Überschreibungen von der Kommandozeile (höchste Priorität)

    Der Master-Seed kann zusätzlich über die Umgebungsvariable
    `ANOMALYCOUNTER_SEED` vorgegeben werden; sie ersetzt nur den Standardwert.

    Attributes:
        settings (dict): Die zusammengeführten Einstellungen.
    """

    def __init__(self, config_path=None, overrides: dict | None = None, environ=None):
        self.environ = os.environ if environ is None else environ
        self.settings = self._get_defaults()
        if config_path is not None:
            self.settings = self._load_settings(Path(config_path))
        if overrides:
            self.apply_overrides(overrides)

    def _get_defaults(self) -> dict:
        """
        Gibt die Standardeinstellungen als Dictionary zurück.

        Returns:
            dict: Ein Dictionary mit den Standardeinstellungen.
        """
        seed = 0
        if raw_seed := self.environ.get(SEED_ENV_VAR):
            try:
                seed = int(raw_seed)
            except ValueError:
                raise ConfigError(f"{SEED_ENV_VAR}='{raw_seed}' ist keine Ganzzahl.") from None
            if seed < 0:
                raise ConfigError(f"{SEED_ENV_VAR} darf nicht negativ sein.")
        return {
            "seed": seed,
            "window": 5,
            "methods": ["laf_ad", "knn"],
            "log_level": "INFO",
            "synth": {"lambda1": 10.0, "lambda2": 10.0},
            "split": {"train_fraction": 0.8, "repeat_count": 5, "fixed_split": False},
            "bootstrap": {"alpha": 0.8, "B": 20, "boost_eps": 1e-3, "workers": None},
            "embedding": None,
            "em": {"max_iter": 200, "tol": 1e-8},
            "sampling": {"L": 1000, "epsilon": 0.05},
            "knn": {"k": 5},
            "benchmark": {"ratios": [0.5, 1.0, 2.0, 4.0], "windows": [1, 5, 10]},
        }

    def _load_settings(self, filepath: Path) -> dict:
        """
        Lädt die Konfigurationsdatei und mischt sie über die Standardwerte, damit
        fehlende Schlüssel immer vorhanden sind.

        Raises:
            ConfigError: Datei fehlt, ist kein gültiges JSON oder kein Objekt.
        """
        if not filepath.exists():
            raise ConfigError(f"Konfigurationsdatei nicht gefunden: {filepath}")
        loaded_settings = JsonIOHandler.read_json(filepath)
        if not isinstance(loaded_settings, dict):
            raise ConfigError(f"Konfigurationsdatei '{filepath}' ist kein gültiges JSON-Objekt.")
        logger.info(f"Konfiguration aus '{filepath}' geladen.")
        return _merge(self.settings, loaded_settings)

    def apply_overrides(self, overrides: dict):
        """
        Übernimmt Werte von der Kommandozeile. Schlüssel der Form 'abschnitt.name'
        setzen einen Wert innerhalb eines Abschnitts; None-Werte werden ignoriert.
        """
        for key, value in overrides.items():
            if value is None:
                continue
            section, _, name = key.rpartition(".")
            if section:
                target = self.settings.get(section)
                if not isinstance(target, dict):
                    target = self.settings[section] = {}
                target[name] = value
            else:
                self.settings[key] = value

    def get(self, key, default=None):
        """Ruft einen Einstellungswert sicher über seinen Schlüssel ab."""
        return self.settings.get(key, default)

    def build_run_config(self) -> RunConfig:
        """Validiert die Einstellungen vollständig und gibt die RunConfig zurück."""
        return RunConfig.from_dict(self.settings)
