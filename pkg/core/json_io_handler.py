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

import hashlib
import json
import logging
from pathlib import Path

logger = logging.getLogger(__name__)


class JsonIOHandler:
    """Eine statische Utility-Klasse für zentralisiertes Lesen und Schreiben von JSON-Dateien."""

    @staticmethod
    def read_json(filepath: Path) -> dict | None:
        """
        Liest und dekodiert eine JSON-Datei mit zentralisierter Fehlerbehandlung.

        Args:
            filepath (Path): Der Pfad zur JSON-Datei.

        Returns:
            dict or None: Die geladenen Daten als Dictionary oder None bei einem Fehler.
        """
        filepath = Path(filepath)
        if not filepath.exists():
            logger.info(f"JSON-Datei nicht gefunden unter: {filepath}")
            return None
        try:
            with open(filepath, "r", encoding="utf-8") as f:
                return json.load(f)
        except (IOError, json.JSONDecodeError) as e:
            logger.error(
                f"Fehler beim Lesen oder Parsen der JSON-Datei:\n{filepath}\n\nFehler: {e}",
                exc_info=True,
            )
            return None

    @staticmethod
    def write_json(filepath: Path, data: dict, sort_keys: bool = False) -> bool:
        """
        Kodiert und schreibt Daten in eine JSON-Datei mit zentralisierter Fehlerbehandlung.

        Mit `sort_keys=True` ist die Ausgabe bei gleichem Inhalt byte-identisch.
        """
        filepath = Path(filepath)
        try:
            filepath.parent.mkdir(parents=True, exist_ok=True)
            with open(filepath, "w", encoding="utf-8", newline="\n") as f:
                json.dump(data, f, indent=4, sort_keys=sort_keys)
                f.write("\n")
            return True
        except (IOError, TypeError) as e:
            logger.error(f"Die Daten konnten nicht gespeichert werden.\nFehler: {e}", exc_info=True)
            return False

    @staticmethod
    def canonical_digest(data) -> str:
        """
        Berechnet einen SHA-256-Hash über die kanonische JSON-Form von `data`.

        Sortierte Schlüssel und kompakte Trenner machen den Hash unabhängig von
        der Einfüge-Reihenfolge der Dictionaries.
        """
        canonical_string = json.dumps(data, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return hashlib.sha256(canonical_string).hexdigest()
