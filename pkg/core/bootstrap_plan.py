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
Geordnete Unterstichproben (Bootstraps) und Glaubwürdigkeitsgewichte.

Spalte 0 des Plans ist immer die volle Trainingsmenge; die Spalten 1..B sind
Ziehungen mit Zurücklegen, deren Duplikate entfernt werden.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, DataFormatError, DegenerateInputError
from .random_streams import STREAM_PLAN, derive_rng

logger = logging.getLogger(__name__)

PLAN_MAGIC = "# anomalycounter-plan"


@dataclass(frozen=True, eq=False)
class BootstrapPlan:
    """
    In-Bag-Matrix H (N x (B+1)) mit den Parametern, aus denen sie entstand.

    Attributes:
        H (np.ndarray): uint8-Matrix; H[i, j] = 1, wenn Punkt i im Bootstrap j liegt.
        alpha (float): Stichprobenrate in (0.5, 1].
        B (int): Anzahl der Bootstraps ohne die volle Spalte 0.
        seed (int): Master-Seed.
    """

    H: np.ndarray
    alpha: float
    B: int
    seed: int

    def __post_init__(self):
        H = np.asarray(self.H, dtype=np.uint8)
        if H.ndim != 2 or H.shape[1] != self.B + 1:
            raise ConfigError(f"H muss N x (B+1) = N x {self.B + 1} sein, nicht {H.shape}.")
        if not np.all(H[:, 0] == 1):
            raise ConfigError("Spalte 0 des Plans muss vollständig belegt sein.")
        if H.shape[1] > 1 and np.any(H[:, 1:].sum(axis=0) == 0):
            raise ConfigError("Jeder Bootstrap muss mindestens einen Punkt enthalten.")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    @property
    def N(self) -> int:
        return self.H.shape[0]

    def in_bag(self, j: int) -> np.ndarray:
        """Aufsteigend sortierte Indizes der Punkte in Bootstrap j."""
        return np.flatnonzero(self.H[:, j])


@dataclass(frozen=True, eq=False)
class CredibilityWeights:
    """
    Zeilenstochastische Gewichte über die Bootstraps 1..B.

    `coverage_fallback_rows` enthält die Zeilen, die in keinem Bootstrap
    out-of-bag waren und daher gleichverteilt gewichtet werden.
    """

    W: np.ndarray
    coverage_fallback_rows: frozenset

    @property
    def B(self) -> int:
        return self.W.shape[1]


def _check_plan_params(N: int, B: int, alpha: float):
    if N < 2:
        raise DegenerateInputError(f"Ein Bootstrap-Plan benötigt mindestens 2 Punkte, nicht {N}.")
    if B < 1:
        raise ConfigError(f"B muss mindestens 1 sein, nicht {B}.")
    if not 0.5 < alpha <= 1.0:
        raise ConfigError(f"alpha muss in (0.5, 1] liegen, nicht {alpha}.")


def draw_column(N: int, alpha: float, seed: int, j: int) -> np.ndarray:
    """
    Zieht ceil(alpha*N) Indizes mit Zurücklegen für Bootstrap j.

    Returns:
        np.ndarray: Sortierte, eindeutige Indizes.
    """
    draws = derive_rng(seed, STREAM_PLAN, j).integers(0, N, size=math.ceil(alpha * N))
    return np.unique(draws)


def draw_plan(N: int, B: int, alpha: float, seed: int) -> BootstrapPlan:
    """Erzeugt den Plan; jede Spalte hat ihren eigenen, aus (seed, j) abgeleiteten Strom."""
    _check_plan_params(N, B, alpha)
    H = np.zeros((N, B + 1), dtype=np.uint8)
    H[:, 0] = 1
    for j in range(1, B + 1):
        H[draw_column(N, alpha, seed, j), j] = 1
    logger.debug(
        f"Bootstrap-Plan gezogen: N={N}, B={B}, alpha={alpha}, "
        f"mittlere Abdeckung={H[:, 1:].mean():.3f}"
    )
    return BootstrapPlan(H=H, alpha=float(alpha), B=int(B), seed=int(seed))


def complement(plan: BootstrapPlan) -> np.ndarray:
    """Out-of-Bag-Matrix H^c = 1 - H; Spalte 0 ist immer Null."""
    return (1 - plan.H).astype(np.uint8)


def credibility(hc) -> CredibilityWeights:
    """
    Normiert jede Zeile von H^c über die Bootstraps 1..B.

    Zeilen ohne Out-of-Bag-Eintrag erhalten gleichverteilte Gewichte 1/B.
    """
    hc = np.asarray(hc, dtype=np.float64)
    if hc.ndim != 2 or hc.shape[1] < 2:
        raise ConfigError("Die Komplement-Matrix benötigt mindestens einen Bootstrap (B >= 1).")
    oob = hc[:, 1:]
    B = oob.shape[1]
    row_sums = oob.sum(axis=1)
    uncovered = row_sums == 0

    W = np.empty_like(oob)
    W[~uncovered] = oob[~uncovered] / row_sums[~uncovered, None]
    W[uncovered] = 1.0 / B

    fallback = frozenset(int(i) for i in np.flatnonzero(uncovered))
    if fallback:
        logger.warning(
            f"{len(fallback)} Trainingspunkte sind in keinem Bootstrap out-of-bag; "
            "sie werden gleichverteilt gewichtet."
        )
    return CredibilityWeights(W=W, coverage_fallback_rows=fallback)


def expected_oob_rate(N: int, alpha: float) -> float:
    """Wahrscheinlichkeit, dass ein Punkt in einem Bootstrap nicht gezogen wird."""
    return (1.0 - 1.0 / N) ** math.ceil(alpha * N)


def dump_plan(plan: BootstrapPlan, path) -> Path:
    """
    Schreibt den Plan als Textmatrix: eine Kopfzeile mit den Parametern, danach
    je Trainingspunkt eine Zeile aus B+1 Zeichen '0'/'1'.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = ["".join("1" if h else "0" for h in row) for row in plan.H]
    header = f"{PLAN_MAGIC} N={plan.N} B={plan.B} alpha={plan.alpha!r} seed={plan.seed}"
    path.write_text("\n".join([header, *rows]) + "\n", encoding="utf-8")
    logger.info(f"Bootstrap-Plan nach '{path}' geschrieben.")
    return path


def load_plan(path) -> BootstrapPlan:
    """Liest eine mit `dump_plan` geschriebene Datei."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith(PLAN_MAGIC):
        raise DataFormatError(f"'{path}' ist keine Plan-Datei.", row=1)
    try:
        params = dict(item.split("=", 1) for item in lines[0][len(PLAN_MAGIC):].split())
        N, B = int(params["N"]), int(params["B"])
        alpha, seed = float(params["alpha"]), int(params["seed"])
    except (KeyError, ValueError) as e:
        raise DataFormatError(f"Ungültige Kopfzeile der Plan-Datei: {e}", row=1) from e

    body = lines[1:]
    if len(body) != N:
        raise DataFormatError(f"Erwartet {N} Matrixzeilen, gefunden {len(body)}.")
    H = np.zeros((N, B + 1), dtype=np.uint8)
    for i, line in enumerate(body):
        if len(line) != B + 1 or set(line) - {"0", "1"}:
            raise DataFormatError("Ungültige Matrixzeile.", row=i + 2)
        H[i] = [c == "1" for c in line]
    return BootstrapPlan(H=H, alpha=alpha, B=B, seed=seed)
