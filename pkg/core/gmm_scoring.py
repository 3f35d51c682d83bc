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
Zwei-Komponenten-Gauß-Mischung über Anomalie-Distanzen.

Komponente 0 beschreibt die normalen Punkte, Komponente 1 (mit dem größeren
Mittelwert) die Anomalien. Die Anomalie-Wahrscheinlichkeit eines Punktes ist
die A-posteriori-Zugehörigkeit zu Komponente 1.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp

from .exceptions import ConfigError, DegenerateInputError
from .random_streams import STREAM_EM, derive_rng

logger = logging.getLogger(__name__)

MIN_EM_POINTS = 4
RELATIVE_VAR_FLOOR = 1e-6
ANOMALY_THRESHOLD = 0.5
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class EmConfig:
    """
    Parameter des EM-Verfahrens.

    Ist `var_floor` None, wird die Untergrenze der Varianzen aus den Daten
    bestimmt: 1e-6 * (max - min)^2.
    """

    max_iter: int = 200
    tol: float = 1e-8
    var_floor: float | None = None
    seed: int = 0

    def __post_init__(self):
        if int(self.max_iter) < 1:
            raise ConfigError(f"max_iter muss mindestens 1 sein, nicht {self.max_iter}.")
        if float(self.tol) <= 0:
            raise ConfigError(f"tol muss positiv sein, nicht {self.tol}.")
        if self.var_floor is not None and float(self.var_floor) <= 0:
            raise ConfigError(f"var_floor muss positiv sein, nicht {self.var_floor}.")
        if int(self.seed) < 0:
            raise ConfigError("seed darf nicht negativ sein.")
        object.__setattr__(self, "max_iter", int(self.max_iter))
        object.__setattr__(self, "tol", float(self.tol))
        object.__setattr__(self, "seed", int(self.seed))
        if self.var_floor is not None:
            object.__setattr__(self, "var_floor", float(self.var_floor))

    @classmethod
    def from_dict(cls, data: dict) -> "EmConfig":
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})

    def to_dict(self) -> dict:
        return {"max_iter": self.max_iter, "tol": self.tol, "var_floor": self.var_floor, "seed": self.seed}


@dataclass(frozen=True)
class Gmm1D:
    """
    Eine angepasste Mischung; `mean0 <= mean1` gilt immer.

    `log_likelihood_history` enthält die mittlere Log-Likelihood je Iteration
    und dient nur der Diagnose.
    """

    weight0: float
    weight1: float
    mean0: float
    mean1: float
    var0: float
    var1: float
    converged: bool = True
    log_likelihood_history: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not (0.0 <= self.weight0 <= 1.0 and 0.0 <= self.weight1 <= 1.0):
            raise ConfigError("Gewichte müssen in [0, 1] liegen.")
        if abs(self.weight0 + self.weight1 - 1.0) > 1e-12:
            raise ConfigError(f"Gewichte summieren sich nicht zu 1: {self.weight0} + {self.weight1}")
        if self.mean0 > self.mean1:
            raise ConfigError("mean0 muss kleiner oder gleich mean1 sein.")
        if self.var0 <= 0 or self.var1 <= 0:
            raise ConfigError("Varianzen müssen positiv sein.")

    def log_joint(self, d) -> np.ndarray:
        """log(pi_k) + log N(d | mu_k, var_k) als (n, 2)-Matrix."""
        d = np.asarray(d, dtype=np.float64).reshape(-1, 1)
        means = np.array([self.mean0, self.mean1])
        variances = np.array([self.var0, self.var1])
        with np.errstate(divide="ignore"):
            log_weights = np.log([self.weight0, self.weight1])
        return log_weights - 0.5 * (_LOG_2PI + np.log(variances) + (d - means) ** 2 / variances)

    def to_dict(self) -> dict:
        return {
            "weight0": self.weight0,
            "weight1": self.weight1,
            "mean0": self.mean0,
            "mean1": self.mean1,
            "var0": self.var0,
            "var1": self.var1,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Gmm1D":
        return cls(
            weight0=float(data["weight0"]),
            weight1=float(data["weight1"]),
            mean0=float(data["mean0"]),
            mean1=float(data["mean1"]),
            var0=float(data["var0"]),
            var1=float(data["var1"]),
            converged=bool(data.get("converged", True)),
        )


def _initial_means(x: np.ndarray, seed: int) -> tuple[float, float]:
    q25, q90 = np.percentile(x, [25, 90])
    if q90 > q25:
        return float(q25), float(q90)
    # Viele identische Werte: das obere Perzentil fällt mit dem unteren zusammen.
    rng = derive_rng(seed, STREAM_EM)
    above = x[x > q25]
    if len(above):
        return float(q25), float(rng.choice(above))
    return float(rng.choice(x[x < q25])), float(q25)


def fit_em(distances, config: EmConfig | None = None) -> Gmm1D:
    """
    Passt die Mischung per EM im Log-Raum an.

    Abbruch, sobald die mittlere Log-Likelihood um weniger als `tol` steigt oder
    `max_iter` erreicht ist. Die Varianzen werden nach unten auf die
    Varianz-Untergrenze begrenzt.

    Raises:
        DegenerateInputError: Weniger als 4 Punkte oder alle Werte identisch.
    """
    config = config or EmConfig()
    x = np.asarray(distances, dtype=np.float64).ravel()
    if len(x) < MIN_EM_POINTS:
        raise DegenerateInputError(f"EM benötigt mindestens {MIN_EM_POINTS} Punkte, nicht {len(x)}.")
    if not np.all(np.isfinite(x)):
        raise DegenerateInputError("Distanzen enthalten nicht-endliche Werte.")
    data_range = float(x.max() - x.min())
    if data_range == 0.0:
        raise DegenerateInputError("Alle Distanzen sind identisch; die Mischung ist entartet.")

    floor = config.var_floor if config.var_floor is not None else RELATIVE_VAR_FLOOR * data_range**2
    means = np.array(_initial_means(x, config.seed))
    variances = np.full(2, max(float(x.var()), floor))
    weights = np.array([0.9, 0.1])

    history = []
    converged = False
    for _ in range(config.max_iter):
        # E-Schritt
        log_joint = np.log(weights) - 0.5 * (_LOG_2PI + np.log(variances) + (x[:, None] - means) ** 2 / variances)
        log_norm = logsumexp(log_joint, axis=1)
        history.append(float(log_norm.mean()))
        if len(history) > 1 and history[-1] - history[-2] < config.tol:
            converged = True
            break
        resp = np.exp(log_joint - log_norm[:, None])

        # M-Schritt
        nk = np.maximum(resp.sum(axis=0), np.finfo(np.float64).tiny)
        weights = nk / len(x)
        means = resp.T @ x / nk
        variances = np.maximum((resp * (x[:, None] - means) ** 2).sum(axis=0) / nk, floor)
    else:
        log_joint = np.log(weights) - 0.5 * (_LOG_2PI + np.log(variances) + (x[:, None] - means) ** 2 / variances)
        history.append(float(logsumexp(log_joint, axis=1).mean()))
        logger.warning(f"EM hat nach {config.max_iter} Iterationen nicht konvergiert.")

    order = (0, 1) if means[0] <= means[1] else (1, 0)
    weight0 = float(weights[order[0]])
    return Gmm1D(
        weight0=weight0,
        weight1=1.0 - weight0,
        mean0=float(means[order[0]]),
        mean1=float(means[order[1]]),
        var0=float(variances[order[0]]),
        var1=float(variances[order[1]]),
        converged=converged,
        log_likelihood_history=tuple(history),
    )


def anomaly_probabilities(gmm: Gmm1D, distances) -> np.ndarray:
    """
    Vektorisierte A-posteriori-Wahrscheinlichkeit der Anomalie-Komponente.

    Unterlaufen beide gewichteten Dichten in float64 zu 0 (log < ca. -745), gilt
    die Randregel: 1, falls d > mean1, sonst 0. Sonst expit(l1 - l0).
    """
    d = np.asarray(distances, dtype=np.float64).ravel()
    log_joint = gmm.log_joint(d)
    with np.errstate(under="ignore"):
        density = np.exp(log_joint)
    underflow = (density[:, 0] == 0.0) & (density[:, 1] == 0.0)
    with np.errstate(invalid="ignore"):
        p = expit(log_joint[:, 1] - log_joint[:, 0])
    if np.any(underflow):
        p[underflow] = (d[underflow] > gmm.mean1).astype(np.float64)
    return p


def anomaly_probability(gmm: Gmm1D, d: float) -> float:
    return float(anomaly_probabilities(gmm, [d])[0])


def vote(gmm: Gmm1D, d: float) -> int:
    """1, wenn die Anomalie-Wahrscheinlichkeit echt größer als 0.5 ist."""
    return int(anomaly_probability(gmm, d) > ANOMALY_THRESHOLD)


def votes(gmm: Gmm1D, distances) -> np.ndarray:
    return (anomaly_probabilities(gmm, distances) > ANOMALY_THRESHOLD).astype(np.int8)
