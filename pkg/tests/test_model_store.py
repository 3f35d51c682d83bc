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

import json
from unittest.mock import patch

import numpy as np
import pytest

from core.exceptions import SchemaError
from core.json_io_handler import JsonIOHandler
from core.model_store import ModelStore


@pytest.fixture
def saved_model(tmp_path, fitted_ensemble):
    path = tmp_path / "model.json"
    ModelStore.save(fitted_ensemble, path, fingerprint="feedbeef00000000")
    return path


def _rewrite(path, mutate):
    data = json.loads(path.read_text(encoding="utf-8"))
    mutate(data)
    path.write_text(json.dumps(data), encoding="utf-8")


class TestModelStore:
    """Testet das Speichern und Laden von Modelldateien."""

    def test_save_writes_metadata(self, saved_model, fitted_ensemble):
        data = json.loads(saved_model.read_text(encoding="utf-8"))
        assert data["file_type"] == ModelStore.MODEL_FILE_TYPE
        assert data["model_format_version"] == ModelStore.MODEL_FORMAT_VERSION
        assert data["fingerprint"] == "feedbeef00000000"
        assert len(data["ensemble"]["models"]) == fitted_ensemble.M
        assert not saved_model.with_name("model.json.part").exists()

    def test_load_restores_scores(self, saved_model, fitted_ensemble, small_split):
        _, val = small_split
        restored = ModelStore.load(saved_model)
        np.testing.assert_array_equal(
            restored.score_arrays(val)[3], fitted_ensemble.score_arrays(val)[3]
        )
        np.testing.assert_array_equal(restored.report.weights, fitted_ensemble.report.weights)

    def test_load_data_keeps_fingerprint(self, saved_model):
        data = ModelStore.load_data(saved_model)
        assert data["fingerprint"] == "feedbeef00000000"
        assert "checksum" not in data

    def test_tampered_file_is_rejected(self, saved_model):
        _rewrite(saved_model, lambda d: d["ensemble"]["report"]["weights"].__setitem__(0, 0.99))
        with pytest.raises(SchemaError, match="beschädigt"):
            ModelStore.load(saved_model)

    def test_missing_checksum(self, saved_model):
        _rewrite(saved_model, lambda d: d.pop("checksum"))
        with pytest.raises(SchemaError, match="Prüfsumme"):
            ModelStore.load(saved_model)

    def test_wrong_version(self, saved_model):
        def bump(data):
            data["model_format_version"] = 99
            data.pop("checksum")
            data["checksum"] = JsonIOHandler.canonical_digest(data)

        _rewrite(saved_model, bump)
        with pytest.raises(SchemaError, match="Version 99"):
            ModelStore.load(saved_model)

    def test_foreign_json(self, tmp_path):
        path = tmp_path / "settings.json"
        path.write_text(json.dumps({"seed": 1}), encoding="utf-8")
        with pytest.raises(SchemaError, match="keine gültige"):
            ModelStore.load(path)

    def test_unreadable_file(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text("{kaputt", encoding="utf-8")
        with pytest.raises(SchemaError, match="keine lesbare"):
            ModelStore.load(path)
        with pytest.raises(SchemaError):
            ModelStore.load(tmp_path / "fehlt.json")

    def test_valid_checksum_but_broken_structure(self, tmp_path):
        data = {
            "model_format_version": ModelStore.MODEL_FORMAT_VERSION,
            "file_type": ModelStore.MODEL_FILE_TYPE,
            "ensemble": {"specs": []},
        }
        data["checksum"] = JsonIOHandler.canonical_digest(data)
        path = tmp_path / "model.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        with pytest.raises(SchemaError, match="Struktur"):
            ModelStore.load(path)

    @patch("core.model_store.JsonIOHandler.write_json", return_value=False)
    def test_write_failure_raises(self, mock_write_json, tmp_path, fitted_ensemble):
        with pytest.raises(OSError):
            ModelStore.save(fitted_ensemble, tmp_path / "model.json")
        mock_write_json.assert_called_once()
        assert not (tmp_path / "model.json").exists()
