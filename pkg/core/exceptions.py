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

"""
Zentrale Fehlerklassen der Anwendung.

Fehler, die aus ungültigen Werten entstehen, erben zusätzlich von `ValueError`,
damit bestehender Code, der nur `ValueError` abfängt, weiterhin funktioniert.
"""


class AnomalyCounterError(Exception):
    """Basisklasse für alle anwendungsspezifischen Fehler."""


class ConfigError(AnomalyCounterError, ValueError):
    """Ungültige Parameter oder Konfigurationsdateien."""


class DataFormatError(AnomalyCounterError, ValueError):
    """
    Fehlerhafte Eingabedatei (CSV, Label-Datei).

    Attributes:
        row (int | None): Die 1-basierte Zeilennummer in der Datei (Header = Zeile 1).
    """

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"Zeile {row}: {message}"
        super().__init__(message)
        self.row = row


class DegenerateInputError(AnomalyCounterError, ValueError):
    """Eingaben, mit denen kein sinnvolles Modell möglich ist (leer, konstant, zu kurz)."""


class SchemaError(AnomalyCounterError):
    """Modelldatei mit unbekannter Version, falschem Typ oder ungültiger Prüfsumme."""


class PipelineError(AnomalyCounterError):
    """
    Fehler in einer Zelle des (Modell, Bootstrap)-Rasters.

    Die Herkunft wird mitgeführt, damit sich ein Fehler im Log eindeutig einer
    Zelle zuordnen lässt.
    """

    def __init__(self, message: str, model_index: int | None = None, bootstrap_index: int | None = None):
        prefix = []
        if model_index is not None:
            prefix.append(f"Modell {model_index}")
        if bootstrap_index is not None:
            prefix.append(f"Bootstrap {bootstrap_index}")
        if prefix:
            message = f"[{', '.join(prefix)}] {message}"
        super().__init__(message)
        self.model_index = model_index
        self.bootstrap_index = bootstrap_index


class AucAssertionError(AnomalyCounterError):
    """Eine per `--assert-auc` geforderte Mindest-AUC wurde nicht erreicht."""
