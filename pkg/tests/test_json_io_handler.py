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

import pytest
import json
import logging
from unittest.mock import patch

from core.json_io_handler import JsonIOHandler


class TestJsonIOHandler:

    # --- Tests for read_json ---

    def test_read_json_success(self, tmp_path):
        """Testet das erfolgreiche Lesen einer validen JSON-Datei."""
        filepath = tmp_path / "test.json"
        test_data = {"key": "value", "number": 123}
        filepath.write_text(json.dumps(test_data), encoding="utf-8")

        assert JsonIOHandler.read_json(filepath) == test_data

    def test_read_json_file_not_found(self, tmp_path, caplog):
        """Testet das Verhalten, wenn die Datei nicht existiert."""
        filepath = tmp_path / "non_existent.json"

        with caplog.at_level(logging.INFO):
            data = JsonIOHandler.read_json(filepath)

        assert data is None
        assert "JSON-Datei nicht gefunden" in caplog.text and str(filepath.name) in caplog.text

    def test_read_json_invalid_json(self, tmp_path, caplog):
        """Testet das Verhalten bei einer fehlerhaften JSON-Datei."""
        filepath = tmp_path / "invalid.json"
        filepath.write_text('{"key": "value",}', encoding="utf-8")  # trailing comma

        with caplog.at_level(logging.ERROR):
            data = JsonIOHandler.read_json(filepath)

        assert data is None
        assert f"Fehler beim Lesen oder Parsen der JSON-Datei:\n{filepath}" in caplog.text

    @patch("pathlib.Path.exists", return_value=True)
    @patch("builtins.open", side_effect=IOError("Permission denied"))
    def test_read_json_io_error(self, mock_open, mock_exists, tmp_path, caplog):
        """Testet das Verhalten bei einem IOError während des Lesens."""
        with caplog.at_level(logging.ERROR):
            assert JsonIOHandler.read_json(tmp_path / "anyfile.json") is None
        assert "Permission denied" in caplog.text

    # --- Tests for write_json ---

    def test_write_json_success(self, tmp_path):
        """Testet das erfolgreiche Schreiben von Daten in eine Datei."""
        filepath = tmp_path / "output.json"
        test_data = {"a": 1, "b": [2, 3]}

        assert JsonIOHandler.write_json(filepath, test_data) is True
        with open(filepath, "r", encoding="utf-8") as f:
            assert json.load(f) == test_data

    def test_write_json_creates_directory(self, tmp_path):
        """Testet, ob das übergeordnete Verzeichnis bei Bedarf erstellt wird."""
        filepath = tmp_path / "new_dir" / "output.json"

        assert JsonIOHandler.write_json(filepath, {"message": "hello"}) is True
        assert filepath.exists()

    def test_write_json_sorted_is_byte_identical(self, tmp_path):
        """Gleicher Inhalt in anderer Einfüge-Reihenfolge ergibt dieselben Bytes."""
        first, second = tmp_path / "a.json", tmp_path / "b.json"
        JsonIOHandler.write_json(first, {"b": 1, "a": {"y": 2, "x": 3}}, sort_keys=True)
        JsonIOHandler.write_json(second, {"a": {"x": 3, "y": 2}, "b": 1}, sort_keys=True)

        assert first.read_bytes() == second.read_bytes()
        assert first.read_bytes().endswith(b"}\n")

    @patch("builtins.open", side_effect=IOError("Disk full"))
    def test_write_json_io_error(self, mock_open, tmp_path, caplog):
        """Testet das Verhalten bei einem IOError während des Schreibens."""
        with caplog.at_level(logging.ERROR):
            assert JsonIOHandler.write_json(tmp_path / "output.json", {"a": 1}) is False
        assert "Disk full" in caplog.text

    def test_write_json_unserializable(self, tmp_path):
        assert JsonIOHandler.write_json(tmp_path / "output.json", {"a": object()}) is False

    # --- Tests for canonical_digest ---

    def test_canonical_digest_ignores_key_order(self):
        assert JsonIOHandler.canonical_digest({"a": 1, "b": [1, 2]}) == JsonIOHandler.canonical_digest(
            {"b": [1, 2], "a": 1}
        )

    @pytest.mark.parametrize("other", [{"a": 2, "b": [1, 2]}, {"a": 1, "b": [2, 1]}])
    def test_canonical_digest_detects_changes(self, other):
        digest = JsonIOHandler.canonical_digest({"a": 1, "b": [1, 2]})
        assert JsonIOHandler.canonical_digest(other) != digest
        assert len(digest) == 64
