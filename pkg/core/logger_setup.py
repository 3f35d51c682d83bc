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
import sys
from logging.handlers import RotatingFileHandler
from .settings_manager import get_app_data_dir


def setup_logging(level: str = "INFO", log_to_file: bool = True):
    """
    Konfiguriert das zentrale Logging für die gesamte Anwendung.

    - Setzt das globale Logging-Level (Standard: INFO).
    - Fügt optional einen FileHandler hinzu, der Logs in eine rotierende Datei schreibt.
    - Fügt einen StreamHandler hinzu, der Logs auf stderr ausgibt, damit stdout
      frei für Ergebnisse bleibt.
    """
    # WICHTIG: In der Testumgebung (Pytest) darf das Logging nicht manuell
    # konfiguriert werden, da sonst caplog keine Nachrichten mehr einfangen kann.
    if os.environ.get("PYTEST_CURRENT_TEST"):
        return

    logger = logging.getLogger()
    if logger.hasHandlers():
        logger.handlers.clear()

    logger.setLevel(getattr(logging, str(level).upper(), logging.INFO))

    formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")

    # --- FileHandler mit Fehlerbehandlung ---
    # Schlägt das Anlegen fehl (z.B. fehlende Berechtigungen), läuft die
    # Anwendung mit reinem Konsolen-Logging weiter.
    if log_to_file:
        try:
            log_file = get_app_data_dir() / "anomalycounter.log"
            file_handler = RotatingFileHandler(
                log_file, maxBytes=1024 * 1024, backupCount=3, encoding="utf-8"
            )
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)
        except (IOError, PermissionError) as e:  # pragma: no cover
            print(f"WARNUNG: Konnte Log-Datei nicht erstellen. Logging nur in Konsole. Fehler: {e}", file=sys.stderr)

    stream_handler = logging.StreamHandler()
    stream_handler.setFormatter(formatter)
    logger.addHandler(stream_handler)
