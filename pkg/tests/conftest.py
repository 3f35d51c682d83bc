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

import numpy as np
import pytest

from core.boosted_embedding import DEFAULT_SPECS
from core.gmm_scoring import EmConfig
from core.synth_generator import SynthConfig, generate
from core.time_series import TimeSeries
from core.variance_ensemble import PipelineConfig, SamplingConfig, fit_ensemble


def pytest_configure(config):
    """
    Konfiguriert pytest und das Logging für die Test-Suite.

    Diese Funktion wird von pytest automatisch vor der Testausführung aufgerufen.
    """
    # Registriere benutzerdefinierte Marker, um PytestUnknownMarkWarning zu vermeiden
    config.addinivalue_line("markers", "slow: Lange Läufe auf Datensätzen in voller Größe")
    config.addinivalue_line("markers", "e2e: Tests, die die Kommandozeile komplett durchlaufen")

    # Setze das Level auf INFO, damit caplog diese Nachrichten einfangen kann.
    logging.getLogger().setLevel(logging.INFO)


def make_series(values, start="2014-07-07 00:00:00", step_minutes=30, labels=None) -> TimeSeries:
    """Baut eine Zeitreihe mit gleichmäßigem Takt ab `start`."""
    values = np.asarray(values, dtype=np.float64)
    timestamps = np.datetime64(start, "s") + np.arange(len(values)) * np.timedelta64(step_minutes, "m")
    return TimeSeries(timestamps, values, labels)


@pytest.fixture
def series_factory():
    """Gibt `make_series` als Fixture heraus, damit Tests keine conftest-Importe brauchen."""
    return make_series


@pytest.fixture(scope="session")
def small_synth_config():
    """Drei Wochen im 30-Minuten-Takt mit deutlich erhöhter Anomalie-Rate."""
    return SynthConfig(lambda2=40.0, n=1008, pi_mix=0.95, seed=3)


@pytest.fixture(scope="session")
def small_synth(small_synth_config):
    return generate(small_synth_config)


@pytest.fixture(scope="session")
def small_pipeline():
    return PipelineConfig(alpha=0.8, B=4, seed=11, workers=2)


@pytest.fixture(scope="session")
def small_sampling():
    return SamplingConfig(L=200, epsilon=0.05, seed=11)


@pytest.fixture(scope="session")
def small_split(small_synth):
    series = small_synth.series
    boundary = int(0.8 * len(series))
    return series.slice(0, boundary), series.slice(boundary, len(series))


@pytest.fixture(scope="session")
def fitted_ensemble(small_split, small_pipeline, small_sampling):
    """Ein kleines, einmal pro Session angepasstes Ensemble (3 Modelle x 5 Spalten)."""
    train, val = small_split
    return fit_ensemble(
        train, val, DEFAULT_SPECS[:3], small_pipeline, EmConfig(seed=11), small_sampling
    )
