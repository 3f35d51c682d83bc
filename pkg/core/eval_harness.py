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
Evaluierung: AUC, KNN-Vergleichsverfahren und das Wiederholungsprotokoll.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata, spearmanr
from sklearn.neighbors import NearestNeighbors

from .boosted_embedding import DEFAULT_SPECS
from .exceptions import AucAssertionError, ConfigError, DegenerateInputError
from .gmm_scoring import EmConfig
from .json_io_handler import JsonIOHandler
from .time_series import SplitSpec, TimeSeries, ordered_split, window_arrays
from .variance_ensemble import PipelineConfig, SamplingConfig, fit_ensemble

logger = logging.getLogger(__name__)

METHOD_LAF_AD = "laf_ad"
METHOD_KNN = "knn"
METHODS = (METHOD_LAF_AD, METHOD_KNN)


@dataclass(frozen=True)
class AucResult:
    auc: float
    positives: int
    negatives: int


def auc(scores, labels) -> AucResult:
    """
    Rangbasierte AUC (Mann-Whitney U); Gleichstände zählen 1/2.

    Raises:
        ConfigError: Unterschiedliche Längen.
        DegenerateInputError: Nur eine Klasse in den Labels.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if len(scores) != len(labels):
        raise ConfigError(f"Scores ({len(scores)}) und Labels ({len(labels)}) sind unterschiedlich lang.")
    positive = labels == 1
    n_pos = int(positive.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateInputError(
            f"AUC benötigt beide Klassen (positiv={n_pos}, negativ={n_neg})."
        )
    ranks = rankdata(scores, method="average")
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return AucResult(auc=float(u / (n_pos * n_neg)), positives=n_pos, negatives=n_neg)


# --- KNN-Vergleichsverfahren -----------------------------------------------


@dataclass(frozen=True)
class KnnConfig:
    """k: Anzahl der Nachbarn, window: Fenstergröße W der Merkmalsvektoren."""

    k: int = 5
    window: int = 5

    def __post_init__(self):
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "window", int(self.window))
        if self.k < 1:
            raise ConfigError(f"k muss mindestens 1 sein, nicht {self.k}.")
        if self.window < 1:
            raise ConfigError(f"window muss mindestens 1 sein, nicht {self.window}.")

    @classmethod
    def from_dict(cls, data: dict) -> "KnnConfig":
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})

    def to_dict(self) -> dict:
        return {"k": self.k, "window": self.window}


def knn_distances(vectors, k: int, reference=None) -> np.ndarray:
    """
    Mittlere euklidische Distanz zu den k nächsten Nachbarn.

    Ohne `reference` sind die Nachbarn die übrigen Punkte von `vectors` (der
    Punkt selbst wird ausgeschlossen); mit `reference` wird gegen diese Menge
    gemessen.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if reference is None:
        if k >= len(X):
            raise ConfigError(f"k={k} muss kleiner als die Anzahl der Punkte ({len(X)}) sein.")
        nn = NearestNeighbors(n_neighbors=k + 1).fit(X)
        distances, _ = nn.kneighbors(X)
        # Die erste Spalte ist der Punkt selbst (Distanz 0).
        return distances[:, 1:].mean(axis=1)
    R = np.asarray(reference, dtype=np.float64)
    if R.ndim == 1:
        R = R.reshape(-1, 1)
    if k > len(R):
        raise ConfigError(f"k={k} ist größer als die Referenzmenge ({len(R)}).")
    distances, _ = NearestNeighbors(n_neighbors=k).fit(R).kneighbors(X)
    return distances.mean(axis=1)


def knn_score(samples, config: KnnConfig, reference=None) -> np.ndarray:
    """
    KNN-Anomalie-Score je WindowedSample im Merkmalsraum (`sample.features`).

    `reference` ist eine optionale Sample-Liste, gegen die gemessen wird.
    """
    samples = list(samples)
    vectors = np.array([s.features for s in samples])
    ref = None if reference is None else np.array([s.features for s in reference])
    return knn_distances(vectors, config.k, ref)


# --- Experiment ------------------------------------------------------------


@dataclass
class ExperimentReport:
    """
    AUC je Verfahren und Wiederholung samt Kontext.

    Attributes:
        auc (dict[str, list[float]]): Verfahren -> AUC je Wiederholung.
        window (int): Fenstergröße W.
        dataset (dict): Beschreibung der Daten (Name, Länge, Anomalien).
        fingerprint (str): Hash aller Parameter und Seeds.
        boundaries (list[int]): Trainingslänge je Wiederholung.
        model_selection (list[dict]): Je Wiederholung mu_sigma, AUC je Modell und
            deren Rangkorrelation.
    """

    auc: dict
    window: int
    dataset: dict
    fingerprint: str
    boundaries: list = field(default_factory=list)
    model_selection: list = field(default_factory=list)

    @property
    def methods(self) -> list[str]:
        return list(self.auc)

    def mean(self, method: str) -> float:
        return float(np.mean(self.auc[method]))

    def variance(self, method: str) -> float:
        """Populationsvarianz der Wiederholungs-AUCs."""
        return float(np.var(self.auc[method]))

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "window": self.window,
            "fingerprint": self.fingerprint,
            "boundaries": list(self.boundaries),
            "methods": {
                method: {"auc": list(values), "mean": self.mean(method), "variance": self.variance(method)}
                for method, values in self.auc.items()
            },
            "model_selection": self.model_selection,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentReport":
        return cls(
            auc={method: [float(a) for a in entry["auc"]] for method, entry in data["methods"].items()},
            window=int(data["window"]),
            dataset=dict(data["dataset"]),
            fingerprint=str(data["fingerprint"]),
            boundaries=[int(b) for b in data.get("boundaries", [])],
            model_selection=list(data.get("model_selection", [])),
        )


def _model_selection_entry(mu_sigma, model_names, z_val, labels) -> dict:
    per_model_auc = [auc(z, labels).auc for z in z_val]
    correlation = None
    if len(per_model_auc) > 1 and np.ptp(mu_sigma) > 0 and np.ptp(per_model_auc) > 0:
        rho, _ = spearmanr(-np.asarray(mu_sigma), per_model_auc)
        correlation = None if math.isnan(rho) else float(rho)
    return {
        "models": list(model_names),
        "mu_sigma": [float(m) for m in mu_sigma],
        "auc": per_model_auc,
        "spearman": correlation,
    }


def run_experiment(series: TimeSeries, methods=METHODS, split: SplitSpec | None = None, window: int = 5,
                   specs=DEFAULT_SPECS, pipeline: PipelineConfig | None = None, em: EmConfig | None = None,
                   sampling: SamplingConfig | None = None, knn: KnnConfig | None = None,
                   dataset_name: str = "series", fingerprint: str | None = None) -> ExperimentReport:
    """
    Führt das Protokoll aus: je Wiederholung geordneter Split, jedes Verfahren
    auf Trainings- und Validierungsteil, AUC auf den Validierungspunkten.

    LaF-AD wird mit der gewichteten Ensemble-Wahrscheinlichkeit bewertet, KNN
    mit der mittleren Nachbardistanz. Beide sehen dieselben Validierungspunkte
    (Index >= W).
    """
    methods = list(dict.fromkeys(methods))
    if not methods:
        raise ConfigError("Mindestens ein Verfahren muss angegeben werden.")
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ConfigError(f"Unbekannte Verfahren: {sorted(unknown)}. Erlaubt: {', '.join(METHODS)}")
    if not series.has_labels:
        raise ConfigError("Für die Evaluierung werden Labels benötigt (Label-Datei fehlt?).")

    split = split or SplitSpec()
    pipeline = pipeline or PipelineConfig()
    em = em or EmConfig()
    sampling = sampling or SamplingConfig()
    knn = knn or KnnConfig(window=window)
    specs = tuple(specs)
    window = int(window)

    if fingerprint is None:
        fingerprint = JsonIOHandler.canonical_digest({
            "methods": methods,
            "split": split.to_dict(),
            "window": window,
            "specs": [s.to_dict() for s in specs],
            "pipeline": pipeline.to_dict(),
            "em": em.to_dict(),
            "sampling": sampling.to_dict(),
            "knn": knn.to_dict(),
        })[:16]

    # Fensterpunkte über die ganze Reihe; ein Validierungspunkt sieht nur seine Vergangenheit.
    # Der KNN-Vektor enthält die W jüngsten Werte einschließlich des Punktes selbst.
    features, targets, indices = window_arrays(series, window)
    vectors = np.column_stack([features[:, 1:], targets])

    results = {method: [] for method in methods}
    selection = []
    boundaries = []
    for repeat, (train, val) in enumerate(ordered_split(series, split)):
        boundary = len(train)
        boundaries.append(boundary)
        first_val = max(0, window - boundary)
        val_labels = val.labels[first_val:]

        if METHOD_LAF_AD in methods:
            ensemble = fit_ensemble(train, val, specs, pipeline, em, sampling)
            z, _votes, _combined, _decision, weighted = ensemble.score_arrays(val)
            results[METHOD_LAF_AD].append(auc(weighted[first_val:], val_labels).auc)
            selection.append(_model_selection_entry(
                ensemble.report.mu_sigma, ensemble.report.model_names, z[:, first_val:], val_labels
            ))

        if METHOD_KNN in methods:
            is_val = indices >= boundary
            scores = knn_distances(vectors[is_val], knn.k, reference=vectors[~is_val])
            results[METHOD_KNN].append(auc(scores, series.labels[indices[is_val]]).auc)

        logger.info(
            f"Wiederholung {repeat + 1}/{split.repeat_count} (Grenze {boundary}): "
            + ", ".join(f"{m}={results[m][-1]:.4f}" for m in methods)
        )

    return ExperimentReport(
        auc=results,
        window=window,
        dataset={
            "name": dataset_name,
            "length": len(series),
            "anomalies": int(series.labels.sum()),
        },
        fingerprint=fingerprint,
        boundaries=boundaries,
        model_selection=selection,
    )


def parse_auc_assertion(text: str) -> tuple[str, float]:
    """Zerlegt 'methode:schwelle', z.B. 'laf_ad:0.75'."""
    method, sep, threshold = str(text).partition(":")
    try:
        if not sep:
            raise ValueError
        value = float(threshold)
    except ValueError:
        raise ConfigError(f"Ungültige AUC-Zusicherung '{text}', erwartet 'methode:wert'.") from None
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"AUC-Schwelle muss in [0, 1] liegen, nicht {value}.")
    return method.strip(), value


def check_auc_assertions(report: ExperimentReport, assertions) -> list[tuple[str, float, float]]:
    """
    Prüft, ob die mittlere AUC jedes genannten Verfahrens die Schwelle erreicht.

    Returns:
        list: (Verfahren, mittlere AUC, Schwelle) je erfüllter Zusicherung.

    Raises:
        AucAssertionError: Mindestens eine Zusicherung ist verletzt.
    """
    passed, failed = [], []
    for method, threshold in (parse_auc_assertion(a) for a in assertions):
        if method not in report.auc:
            raise ConfigError(f"Verfahren '{method}' ist nicht im Bericht enthalten.")
        entry = (method, report.mean(method), threshold)
        (passed if entry[1] >= threshold else failed).append(entry)
    if failed:
        raise AucAssertionError(
            "AUC-Zusicherung verletzt: "
            + "; ".join(f"{m}: {mean:.4f} < {t}" for m, mean, t in failed)
        )
    return passed
