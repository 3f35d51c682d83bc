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

import logging
import os
from pathlib import Path

from ._version import __version__
from .exceptions import SchemaError
from .json_io_handler import JsonIOHandler
from .variance_ensemble import FittedEnsemble

logger = logging.getLogger(__name__)


class ModelStore:
    """
    Speichert und lädt angepasste Ensembles als statische Utility-Klasse.

    Eine Modelldatei enthält neben dem Ensemble die Formatversion, den Dateityp,
    den Fingerabdruck der Konfiguration und eine SHA-256-Prüfsumme, mit der
    manuell veränderte oder beschädigte Dateien erkannt werden.
    """

    MODEL_FORMAT_VERSION = 1
    FILE_TYPE_KEY = "file_type"
    MODEL_FILE_TYPE = "anomalycounter-model"

    @staticmethod
    def _calculate_checksum(data: dict) -> str:
        """SHA-256 über die kanonische JSON-Form von `data` (ohne das Feld 'checksum')."""
        return JsonIOHandler.canonical_digest(data)

    @staticmethod
    def save(ensemble: FittedEnsemble, filepath, fingerprint: str = "") -> Path:
        """
        Schreibt das Ensemble. Es wird zuerst in eine temporäre Datei geschrieben
        und diese dann umbenannt, damit nie eine halbe Modelldatei entsteht.

        Raises:
            OSError: Die Datei konnte nicht geschrieben werden.
        """
        filepath = Path(filepath)
        data = {
            "model_format_version": ModelStore.MODEL_FORMAT_VERSION,
            ModelStore.FILE_TYPE_KEY: ModelStore.MODEL_FILE_TYPE,
            "app_version": __version__,
            "fingerprint": fingerprint,
            "ensemble": ensemble.to_dict(),
        }
        data["checksum"] = ModelStore._calculate_checksum(data)

        tmp_path = filepath.with_name(filepath.name + ".part")
        if not JsonIOHandler.write_json(tmp_path, data, sort_keys=True):
            raise OSError(f"Modelldatei konnte nicht geschrieben werden: {filepath}")
        os.replace(tmp_path, filepath)
        logger.info(f"Modell mit {ensemble.M} x {ensemble.B + 1} Zellen nach '{filepath}' gespeichert.")
        return filepath

    @staticmethod
    def load_data(filepath) -> dict:
        """
        Liest und validiert eine Modelldatei.

        Raises:
            SchemaError: Datei fehlt, ist kein Modell, hat eine unbekannte Version
                oder eine ungültige Prüfsumme.
        """
        filepath = Path(filepath)
        data = JsonIOHandler.read_json(filepath)
        if not isinstance(data, dict):
            raise SchemaError(f"'{filepath}' ist keine lesbare Modelldatei.")

        # --- Validierung ---
        file_version = data.get("model_format_version")
        file_type = data.get(ModelStore.FILE_TYPE_KEY)
        stored_checksum = data.pop("checksum", None)

        if file_version is None or file_type != ModelStore.MODEL_FILE_TYPE:
            raise SchemaError(f"'{filepath}' ist keine gültige '{ModelStore.MODEL_FILE_TYPE}'-Datei.")
        if file_version != ModelStore.MODEL_FORMAT_VERSION:
            raise SchemaError(
                f"Modelldatei-Version {file_version} wird nicht unterstützt "
                f"(erwartet Version {ModelStore.MODEL_FORMAT_VERSION})."
            )
        if not stored_checksum:
            raise SchemaError("Die Modelldatei enthält keine Prüfsumme.")
        if stored_checksum != ModelStore._calculate_checksum(data):
            raise SchemaError("Die Modelldatei ist beschädigt oder wurde manuell verändert.")
        return data

    @staticmethod
    def from_data(data: dict) -> FittedEnsemble:
        """Baut das Ensemble aus bereits validierten Dateidaten."""
        try:
            return FittedEnsemble.from_dict(data["ensemble"])
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise SchemaError(f"Modelldatei hat eine ungültige Struktur: {e}") from e

    @staticmethod
    def load(filepath) -> FittedEnsemble:
        return ModelStore.from_data(ModelStore.load_data(filepath))
