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
Geboostete Kalender-Embeddings.

Jede Stufe ist eine Mittelwert-Tabelle über eine Kalender-Kategorie (Stunde,
Wochentag, ...), angepasst auf die Residuen der vorherigen Stufen. Fertige
Stufen werden eingefroren; die Vorhersage ist die Summe aller Stufen.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, DegenerateInputError
from .time_series import TimePoint, TimeSeries, calendar_codes, canonical_feature

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WeakLearner:
    """
    Eine Nachschlagetabelle Kategorie -> Vorhersage.

    Attributes:
        feature (str): Das Kalender-Merkmal, auf dem die Tabelle aufsetzt.
        table (dict): Kategorie -> Mittelwert der Residuen dieser Kategorie.
        fallback (float): Globaler Residuen-Mittelwert für unbekannte Kategorien.
    """

    feature: str
    table: dict
    fallback: float

    def predict_codes(self, codes) -> np.ndarray:
        """Tabellen-Lookup für bereits berechnete Kategorien."""
        codes = np.asarray(codes)
        keys = list(self.table)
        if np.issubdtype(codes.dtype, np.integer) and all(isinstance(k, (int, np.integer)) for k in keys):
            if len(codes) == 0:
                return np.zeros(0)
            if keys and min(keys) >= 0 and codes.min() >= 0:
                size = max(max(keys, default=0), int(codes.max())) + 1
                lookup = np.full(size, self.fallback, dtype=np.float64)
                lookup[np.asarray(keys, dtype=np.int64)] = [self.table[k] for k in keys]
                return lookup[codes]
        return np.array([self.table.get(c.item() if hasattr(c, "item") else c, self.fallback)
                         for c in codes], dtype=np.float64)

    def predict(self, timestamps) -> np.ndarray:
        return self.predict_codes(calendar_codes(timestamps, self.feature))

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "table": {str(k): v for k, v in sorted(self.table.items())},
            "fallback": self.fallback,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WeakLearner":
        return cls(
            feature=data["feature"],
            table={int(k): float(v) for k, v in data["table"].items()},
            fallback=float(data["fallback"]),
        )


def fit_weak(feature_values, residuals, feature: str = "category") -> WeakLearner:
    """
    Passt eine Tabelle per kleinsten Quadraten an: je Kategorie der Mittelwert
    der zugehörigen Residuen.

    Raises:
        DegenerateInputError: Leere Eingabe.
        ConfigError: Unterschiedliche Längen.
    """
    categories = np.asarray(feature_values)
    residuals = np.asarray(residuals, dtype=np.float64)
    if len(categories) == 0:
        raise DegenerateInputError("fit_weak benötigt mindestens einen Wert.")
    if len(categories) != len(residuals):
        raise ConfigError(
            f"Merkmale ({len(categories)}) und Residuen ({len(residuals)}) sind unterschiedlich lang."
        )
    uniques, inverse = np.unique(categories, return_inverse=True)
    sums = np.bincount(inverse, weights=residuals)
    counts = np.bincount(inverse)
    means = sums / counts
    table = {u.item() if hasattr(u, "item") else u: float(m) for u, m in zip(uniques, means)}
    return WeakLearner(feature=feature, table=table, fallback=float(residuals.mean()))


@dataclass(frozen=True)
class EmbeddingSpec:
    """
    Die Stufenfolge eines Modells, z.B. (hour_of_day, day_of_week).

    Ein Merkmal darf je Modell nur einmal vorkommen; Vielfalt im Ensemble
    entsteht durch unterschiedliche Specs.
    """

    stages: tuple
    max_stages: int | None = None
    name: str = ""

    def __post_init__(self):
        if isinstance(self.stages, str):
            raise ConfigError("stages muss eine Liste von Merkmalsnamen sein.")
        stages = tuple(canonical_feature(s) for s in self.stages)
        if not stages:
            raise ConfigError("EmbeddingSpec benötigt mindestens eine Stufe.")
        if len(set(stages)) != len(stages):
            raise ConfigError(f"Doppeltes Merkmal in EmbeddingSpec: {stages}")
        max_stages = len(stages) if self.max_stages is None else int(self.max_stages)
        if max_stages < 1:
            raise ConfigError("max_stages muss mindestens 1 sein.")
        object.__setattr__(self, "stages", stages)
        object.__setattr__(self, "max_stages", max_stages)
        object.__setattr__(self, "name", self.name or "+".join(stages))

    @property
    def active_stages(self) -> tuple:
        return self.stages[: self.max_stages]

    def to_dict(self) -> dict:
        return {"stages": list(self.stages), "max_stages": self.max_stages, "name": self.name}

    @classmethod
    def from_dict(cls, data) -> "EmbeddingSpec":
        # Kurzform in Konfigurationsdateien: einfach eine Liste von Merkmalen.
        if isinstance(data, (list, tuple)):
            return cls(stages=tuple(data))
        return cls(
            stages=tuple(data["stages"]),
            max_stages=data.get("max_stages"),
            name=data.get("name", ""),
        )


DEFAULT_SPECS = (
    EmbeddingSpec(("hour_of_day",)),
    EmbeddingSpec(("day_of_week",)),
    EmbeddingSpec(("hour_of_day", "day_of_week")),
    EmbeddingSpec(("hour_of_day", "day_of_week", "month_of_year")),
    EmbeddingSpec(("hour_of_day", "is_weekend")),
)


@dataclass(frozen=True)
class BoostedModel:
    """
    Eine eingefrorene Folge von WeakLearnern.

    Attributes:
        learners (tuple[WeakLearner]): Die akzeptierten Stufen in Reihenfolge.
        termination_eps (float): Abbruchschwelle für die RMS-Änderung einer Stufe.
        spec (EmbeddingSpec): Die Spec, aus der das Modell entstand.
        fitted_on (int): Anzahl der Trainingspunkte.
        residual_norms (tuple[float]): ||F_0||, ||F_1||, ... der akzeptierten Stufen.
    """

    learners: tuple
    termination_eps: float
    spec: EmbeddingSpec
    fitted_on: int
    residual_norms: tuple = field(default=())

    def predict(self, timestamps) -> np.ndarray:
        timestamps = np.asarray(timestamps, dtype="datetime64[s]")
        prediction = np.zeros(len(timestamps), dtype=np.float64)
        for learner in self.learners:
            prediction += learner.predict(timestamps)
        return prediction

    def to_dict(self) -> dict:
        return {
            "learners": [learner.to_dict() for learner in self.learners],
            "termination_eps": self.termination_eps,
            "spec": self.spec.to_dict(),
            "fitted_on": self.fitted_on,
            "residual_norms": list(self.residual_norms),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BoostedModel":
        return cls(
            learners=tuple(WeakLearner.from_dict(d) for d in data["learners"]),
            termination_eps=float(data["termination_eps"]),
            spec=EmbeddingSpec.from_dict(data["spec"]),
            fitted_on=int(data["fitted_on"]),
            residual_norms=tuple(float(x) for x in data.get("residual_norms", ())),
        )


def fit_boosted(series: TimeSeries, spec: EmbeddingSpec, eps: float) -> BoostedModel:
    """
    Passt die Stufen der Spec nacheinander auf die Residuen an.

    Eine Stufe, deren Beitrag (RMS über alle Punkte) unter `eps` liegt, beendet
    das Boosting und wird nicht übernommen. Die erste Stufe wird immer
    übernommen, damit jedes Modell mindestens einen Learner hat.
    """
    if not spec.stages:
        raise ConfigError("Leere EmbeddingSpec.")
    if eps <= 0:
        raise ConfigError(f"eps muss positiv sein, nicht {eps}.")
    n = len(series)
    if n < 2:
        raise DegenerateInputError(f"Boosting benötigt mindestens 2 Punkte, nicht {n}.")

    residual = series.values.astype(np.float64).copy()
    norms = [float(np.linalg.norm(residual))]
    learners = []
    for feature in spec.active_stages:
        codes = calendar_codes(series.timestamps, feature)
        learner = fit_weak(codes, residual, feature=feature)
        step = learner.predict_codes(codes)
        change = float(np.linalg.norm(step)) / math.sqrt(n)
        if learners and change < eps:
            logger.debug(f"Boosting nach {len(learners)} Stufen beendet (Änderung {change:.3g} < {eps}).")
            break
        residual = residual - step
        learners.append(learner)
        norms.append(float(np.linalg.norm(residual)))

    return BoostedModel(
        learners=tuple(learners),
        termination_eps=float(eps),
        spec=spec,
        fitted_on=n,
        residual_norms=tuple(norms),
    )


def predict(model: BoostedModel, timestamps) -> np.ndarray:
    """Summe der Stufen-Vorhersagen; unbekannte Kategorien nutzen den Fallback."""
    return model.predict(timestamps)


def anomaly_distance(model: BoostedModel, sample: TimePoint) -> float:
    """Betrag des Residuums |y - y_hat| für einen einzelnen Punkt."""
    prediction = model.predict(np.array([sample.timestamp], dtype="datetime64[s]"))[0]
    return float(abs(prediction - sample.value))


def anomaly_distances(model: BoostedModel, series: TimeSeries) -> np.ndarray:
    """Vektorisierte Form von `anomaly_distance` für eine ganze Zeitreihe."""
    return np.abs(series.values - model.predict(series.timestamps))
