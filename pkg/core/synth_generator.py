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
Generator für strukturelle Test-Zeitreihen mit bekannten Anomalien.

Das Modell ist additiv: y_t = x_t + z_t + eps_t mit einem Sinus-Signal x_t,
ARMA(2,2)-Rauschen z_t und einer Poisson-Mischung eps_t, deren seltener Zweig
die Anomalien liefert. Auf fünf Werktage folgen zwei Wochenendtage, an denen
Signal und Rauschen durch die Konstante c_weekend ersetzt werden.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, asdict, replace

import numpy as np
from scipy.signal import lfilter

from .exceptions import ConfigError
from .random_streams import STREAM_ANOMALY, STREAM_ARMA, derive_rng
from .time_series import TimeSeries, extract_calendar

logger = logging.getLogger(__name__)

WORKDAYS_PER_BLOCK = 5
WEEKEND_DAYS = 2
# Oberhalb dieser Rate wird der Poisson-Sampler von numpy verwendet.
INVERSION_MAX_LAMBDA = 30.0


@dataclass
class SynthConfig:
    """
    Alle Parameter des Generators.

    `f` wird, falls nicht angegeben, auf 5/T gesetzt (ein Zyklus pro Tag).
    `T` ist die Zahl der Schritte eines 5-Tage-Blocks (240 bei 30-Minuten-Takt).
    """

    lambda2: float
    a: float = 10.0
    b: float = 20.0
    phi: float = 0.0
    f: float | None = None
    T: int = 240
    ar1: float = 0.5
    ar2: float = -0.5
    ma1: float = 2.0
    ma2: float = 2.0
    sigma_w2: float = 1.0
    pi_mix: float = 0.999
    lambda1: float = 10.0
    c_min: float = 10.0
    c_weekend: float = 0.0
    n: int = 13497
    seed: int = 0
    epoch: str = "2014-07-07 00:00:00"
    step_minutes: int = 30
    burn_in: int = 200

    def __post_init__(self):
        for name in ("lambda2", "a", "b", "phi", "ar1", "ar2", "ma1", "ma2", "sigma_w2",
                     "pi_mix", "lambda1", "c_min", "c_weekend"):
            setattr(self, name, float(getattr(self, name)))
        for name in ("T", "n", "seed", "step_minutes", "burn_in"):
            setattr(self, name, int(getattr(self, name)))
        if self.f is None:
            self.f = WORKDAYS_PER_BLOCK / self.T if self.T > 0 else 0.0
        self.f = float(self.f)

        if self.T <= 0 or self.T % WORKDAYS_PER_BLOCK != 0:
            raise ConfigError(f"T muss positiv und durch 5 teilbar sein, nicht {self.T}.")
        if not 0.0 < self.pi_mix <= 1.0:
            raise ConfigError(f"pi_mix muss in (0, 1] liegen, nicht {self.pi_mix}.")
        if self.lambda1 <= 0 or self.lambda2 <= 0:
            raise ConfigError("lambda1 und lambda2 müssen positiv sein.")
        if self.c_min < 0:
            raise ConfigError("c_min darf nicht negativ sein.")
        if self.sigma_w2 < 0:
            raise ConfigError("sigma_w2 darf nicht negativ sein.")
        if self.n <= 0 or self.seed < 0 or self.step_minutes <= 0 or self.burn_in < 0:
            raise ConfigError("n, step_minutes müssen positiv, seed und burn_in nicht negativ sein.")
        if not is_stationary(self.ar1, self.ar2):
            raise ConfigError(
                f"AR-Koeffizienten ({self.ar1}, {self.ar2}) sind nicht stationär: "
                "Nullstellen von 1 - ar1*z - ar2*z^2 müssen außerhalb des Einheitskreises liegen."
            )
        epoch = np.datetime64(self.epoch, "s")
        if extract_calendar(epoch).day_of_week != 0 or epoch != epoch.astype("datetime64[D]"):
            raise ConfigError(f"epoch muss auf einen Montag 00:00 fallen, nicht '{self.epoch}'.")
        if self.lambda2 < self.lambda1:
            logger.warning(
                f"lambda2 ({self.lambda2}) < lambda1 ({self.lambda1}): Anomalien liegen im Mittel "
                "unter dem Normalniveau."
            )

    @property
    def weekend_steps(self) -> int:
        return WEEKEND_DAYS * self.T // WORKDAYS_PER_BLOCK

    @property
    def week_steps(self) -> int:
        return self.T + self.weekend_steps

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        field_names = {f.name for f in cls.__dataclass_fields__.values()}
        return cls(**{k: v for k, v in data.items() if k in field_names})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class SynthOutput:
    """Erzeugte Zeitreihe (mit angehängten Labels) und die Labels als eigenes Array."""

    series: TimeSeries
    labels: np.ndarray

    @property
    def anomaly_count(self) -> int:
        return int(self.labels.sum())


def default_config(lambda2: float, **overrides) -> SynthConfig:
    """
    Der Standard-Parametersatz; `lambda2` muss der Aufrufer wählen, da gerade das
    Verhältnis lambda2/lambda1 variiert wird.
    """
    return SynthConfig(lambda2=lambda2, **overrides)


def is_stationary(ar1: float, ar2: float) -> bool:
    """Prüft, ob alle Nullstellen von 1 - ar1*z - ar2*z^2 außerhalb des Einheitskreises liegen."""
    roots = np.roots([-ar2, -ar1, 1.0])
    return bool(np.all(np.abs(roots) > 1.0))


def signal_at(config: SynthConfig, t):
    """Periodisches Signal a*sin(2*pi*f*t + phi) + b (skalar oder vektorisiert)."""
    return config.a * np.sin(2.0 * np.pi * config.f * np.asarray(t, dtype=np.float64) + config.phi) + config.b


def gen_arma(config: SynthConfig, length: int, rng: np.random.Generator) -> np.ndarray:
    """
    ARMA(2,2)-Rauschen mit Gauß'schem weißen Rauschen.

    Startwerte sind Null; die ersten `config.burn_in` Schritte werden verworfen,
    damit der Einschwingvorgang nicht in die Daten eingeht.
    """
    if not is_stationary(config.ar1, config.ar2):
        raise ConfigError("Nicht-stationäre AR-Koeffizienten.")
    total = int(length) + config.burn_in
    noise = rng.normal(0.0, math.sqrt(config.sigma_w2), size=total)
    z = lfilter([1.0, config.ma1, config.ma2], [1.0, -config.ar1, -config.ar2], noise)
    return z[config.burn_in:]


def theoretical_arma_variance(config: SynthConfig, terms: int = 5000) -> float:
    """Stationäre Varianz über die MA(unendlich)-Gewichte der Impulsantwort."""
    impulse = np.zeros(terms)
    impulse[0] = 1.0
    psi = lfilter([1.0, config.ma1, config.ma2], [1.0, -config.ar1, -config.ar2], impulse)
    return float(config.sigma_w2 * np.sum(psi**2))


def poisson_inversion(lam: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """
    Poisson-Ziehungen per Inversion (sequentielle Suche über die Verteilungsfunktion).

    Für lam <= 30 plattformunabhängig reproduzierbar; darüber wird auf
    `Generator.poisson` zurückgegriffen.
    """
    if lam > INVERSION_MAX_LAMBDA:
        return rng.poisson(lam, size=size).astype(np.float64)
    uniforms = rng.random(size)
    max_k = int(lam + 20.0 * math.sqrt(lam) + 50)
    k = np.arange(max_k + 1)
    log_pmf = k * math.log(lam) - lam - np.array([math.lgamma(i + 1.0) for i in k])
    cdf = np.cumsum(np.exp(log_pmf))
    draws = np.searchsorted(cdf, uniforms, side="left")
    return np.minimum(draws, max_k).astype(np.float64)


def inject_anomalies(config: SynthConfig, length: int, rng: np.random.Generator):
    """
    Zieht je Schritt unabhängig: mit Wahrscheinlichkeit pi Poisson(lambda1) (Label 0),
    sonst c_min + Poisson(lambda2) (Label 1).

    Returns:
        tuple[np.ndarray, np.ndarray]: (eps, labels)
    """
    length = int(length)
    branch = rng.random(length)
    normal = poisson_inversion(config.lambda1, length, rng)
    shock = config.c_min + poisson_inversion(config.lambda2, length, rng)
    labels = (branch >= config.pi_mix).astype(np.int8)
    return np.where(labels == 1, shock, normal), labels


def weekday_mask(config: SynthConfig, length: int) -> np.ndarray:
    """True für Werktags-Schritte, False für die Wochenend-Schritte jedes Blocks."""
    return (np.arange(length) % config.week_steps) < config.T


def generate(config: SynthConfig) -> SynthOutput:
    """
    Erzeugt die komplette Zeitreihe mit n Punkten im Takt von `step_minutes`,
    beginnend am Montag `epoch`.
    """
    n = config.n
    t = np.arange(n)
    weekday = weekday_mask(config, n)

    signal = signal_at(config, t)
    noise = gen_arma(config, n, derive_rng(config.seed, STREAM_ARMA))
    eps, labels = inject_anomalies(config, n, derive_rng(config.seed, STREAM_ANOMALY))

    values = np.where(weekday, signal + noise + eps, config.c_weekend + eps)
    timestamps = np.datetime64(config.epoch, "s") + t * np.timedelta64(config.step_minutes, "m")
    series = TimeSeries(timestamps, values, labels)
    logger.info(
        f"Synthetische Reihe erzeugt: n={n}, Anomalien={int(labels.sum())}, "
        f"lambda2/lambda1={config.lambda2 / config.lambda1:g}, "
        f"ARMA-Varianz (theoretisch)={theoretical_arma_variance(config):.3f}"
    )
    return SynthOutput(series=series, labels=series.labels)


def sweep_configs(base: SynthConfig, ratios) -> list[SynthConfig]:
    """Eine Konfiguration je Verhältnis lambda2/lambda1, sonst identisch zu `base`."""
    return [replace(base, lambda2=base.lambda1 * float(r)) for r in ratios]
