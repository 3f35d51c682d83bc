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
Varianz-gewichtetes Modell-Ensemble.

Für jedes Modell m und jeden Bootstrap j wird ein geboostetes Modell samt GMM
angepasst. Aus den Out-of-Bag-Wahrscheinlichkeiten entstehen Margen r, aus
denen für jeden Validierungspunkt eine Stichprobe von Wahrscheinlichkeiten
gezogen wird. Die mittlere Bernoulli-Varianz der daraus abgeleiteten
Entscheidungen (mu_sigma) bestimmt das Stimmgewicht des Modells.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .boosted_embedding import BoostedModel, EmbeddingSpec, anomaly_distances, fit_boosted
from .bootstrap_plan import BootstrapPlan, CredibilityWeights, complement, credibility, draw_plan
from .exceptions import AnomalyCounterError, ConfigError, DegenerateInputError, PipelineError
from .gmm_scoring import ANOMALY_THRESHOLD, EmConfig, Gmm1D, anomaly_probabilities, fit_em
from .random_streams import STREAM_SAMPLING, derive_rng
from .time_series import TimeSeries, format_timestamp

logger = logging.getLogger(__name__)

MAX_MODEL_VARIANCE = 0.25


@dataclass(frozen=True, eq=False)
class ProbMatrix:
    """Anomalie-Wahrscheinlichkeiten P (N x (B+1)) eines Modells auf den Trainingsdaten."""

    P: np.ndarray
    model_id: int

    def __post_init__(self):
        P = np.asarray(self.P, dtype=np.float64)
        if P.ndim != 2 or P.shape[1] < 2:
            raise ConfigError(f"P muss N x (B+1) mit B >= 1 sein, nicht {P.shape}.")
        if np.any((P < 0.0) | (P > 1.0)):
            raise ConfigError("Alle Einträge von P müssen in [0, 1] liegen.")
        object.__setattr__(self, "P", P)


@dataclass(frozen=True, eq=False)
class OobSummary:
    """z: gewichtete Out-of-Bag-Wahrscheinlichkeit, r: Marge |z - p_0| je Trainingspunkt."""

    z: np.ndarray
    r: np.ndarray


@dataclass(frozen=True)
class SamplingConfig:
    """
    Monte-Carlo-Parameter der Varianzschätzung.

    Attributes:
        L (int): Stichproben je Validierungspunkt.
        epsilon (float): Zuschlag auf die Standardabweichung (Sensitivitätstest).
        seed (int): Seed der Stichproben-Ströme.
    """

    L: int = 1000
    epsilon: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if int(self.L) < 1:
            raise ConfigError(f"L muss mindestens 1 sein, nicht {self.L}.")
        if float(self.epsilon) < 0:
            raise ConfigError(f"epsilon darf nicht negativ sein, nicht {self.epsilon}.")
        if int(self.seed) < 0:
            raise ConfigError("seed darf nicht negativ sein.")
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def from_dict(cls, data: dict) -> "SamplingConfig":
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})

    def to_dict(self) -> dict:
        return {"L": self.L, "epsilon": self.epsilon, "seed": self.seed}


@dataclass(frozen=True)
class PipelineConfig:
    """
    Bootstrap- und Boosting-Parameter des Ensembles.

    `boost_eps` ist die Abbruchschwelle des Boostings und unabhängig von
    `SamplingConfig.epsilon`. `workers=None` wählt die Anzahl automatisch.
    """

    alpha: float = 0.8
    B: int = 20
    boost_eps: float = 1e-3
    seed: int = 0
    workers: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "B", int(self.B))
        object.__setattr__(self, "boost_eps", float(self.boost_eps))
        object.__setattr__(self, "seed", int(self.seed))
        if not 0.5 < self.alpha <= 1.0:
            raise ConfigError(f"alpha muss in (0.5, 1] liegen, nicht {self.alpha}.")
        if self.B < 1:
            raise ConfigError(f"B muss mindestens 1 sein, nicht {self.B}.")
        if self.boost_eps <= 0:
            raise ConfigError(f"boost_eps muss positiv sein, nicht {self.boost_eps}.")
        if self.seed < 0:
            raise ConfigError("seed darf nicht negativ sein.")
        if self.workers is not None:
            object.__setattr__(self, "workers", int(self.workers))
            if self.workers < 1:
                raise ConfigError(f"workers muss mindestens 1 sein, nicht {self.workers}.")

    @property
    def effective_workers(self) -> int:
        return self.workers or min(8, os.cpu_count() or 1)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})

    def to_dict(self) -> dict:
        # workers beeinflusst das Ergebnis nicht und gehört nicht in den Fingerabdruck.
        return {"alpha": self.alpha, "B": self.B, "boost_eps": self.boost_eps, "seed": self.seed}


@dataclass(frozen=True, eq=False)
class ModelVarianceReport:
    """
    Ergebnis der Varianzschätzung für M Modelle und K Validierungspunkte.

    Attributes:
        mu_sigma (np.ndarray): Geschätzte Modellvarianz je Modell, in [0, 0.25].
        weights (np.ndarray): Ensemble-Gewichte (Simplex).
        per_val_mean (np.ndarray): mu_k je Modell und Validierungspunkt (M x K).
        per_val_sigma (np.ndarray): sigma_k je Modell und Validierungspunkt (M x K).
        model_names (tuple[str]): Namen der EmbeddingSpecs.
    """

    mu_sigma: np.ndarray
    weights: np.ndarray
    per_val_mean: np.ndarray
    per_val_sigma: np.ndarray
    model_names: tuple = ()

    def __post_init__(self):
        mu = np.asarray(self.mu_sigma, dtype=np.float64)
        if np.any((mu < 0.0) | (mu > MAX_MODEL_VARIANCE)):
            raise ConfigError("mu_sigma muss in [0, 0.25] liegen.")
        object.__setattr__(self, "mu_sigma", mu)
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))
        object.__setattr__(self, "per_val_mean", np.atleast_2d(np.asarray(self.per_val_mean, dtype=np.float64)))
        object.__setattr__(self, "per_val_sigma", np.atleast_2d(np.asarray(self.per_val_sigma, dtype=np.float64)))
        object.__setattr__(self, "model_names", tuple(self.model_names))

    def to_dict(self) -> dict:
        return {
            "model_names": list(self.model_names),
            "mu_sigma": self.mu_sigma.tolist(),
            "weights": self.weights.tolist(),
            "per_val_mean": self.per_val_mean.tolist(),
            "per_val_sigma": self.per_val_sigma.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelVarianceReport":
        return cls(
            mu_sigma=data["mu_sigma"],
            weights=data["weights"],
            per_val_mean=data["per_val_mean"],
            per_val_sigma=data["per_val_sigma"],
            model_names=tuple(data.get("model_names", ())),
        )


@dataclass(frozen=True)
class EnsembleVerdict:
    """
    Die Ensemble-Entscheidung für einen Punkt.

    `combined_score` ist das Skalarprodukt aus Stimmen und Gewichten und bestimmt
    die Entscheidung. `weighted_probability` mittelt stattdessen die
    Wahrscheinlichkeiten der Modelle und dient als stetiger Score.
    """

    votes: tuple
    combined_score: float
    decision: int
    weighted_probability: float | None = None
    model_probabilities: tuple = field(default=(), compare=False)
    timestamp: str | None = None

    def __post_init__(self):
        if self.decision != int(self.combined_score > ANOMALY_THRESHOLD):
            raise ConfigError("decision muss genau dann 1 sein, wenn combined_score > 0.5.")

    def to_dict(self) -> dict:
        data = {
            "votes": list(self.votes),
            "combined_score": self.combined_score,
            "decision": self.decision,
            "weighted_probability": self.weighted_probability,
        }
        if self.timestamp is not None:
            data["timestamp"] = self.timestamp
        return data


# ----------------------------------------------------------------------------
# Einzelschritte
# ----------------------------------------------------------------------------


def oob_summary(P: ProbMatrix, W: CredibilityWeights) -> OobSummary:
    """z_i = sum_j p_ij * w_ij über j = 1..B, r_i = |z_i - p_i0|."""
    if P.P.shape[1] != W.B + 1 or P.P.shape[0] != W.W.shape[0]:
        raise ConfigError(
            f"Dimensionen passen nicht: P ist {P.P.shape}, W ist {W.W.shape} (erwartet N x (B+1) und N x B)."
        )
    z = np.clip(np.einsum("ij,ij->i", P.P[:, 1:], W.W), 0.0, 1.0)
    r = np.abs(z - P.P[:, 0])
    return OobSummary(z=z, r=r)


def val_stats(z_val: float, r) -> tuple[float, float]:
    """
    Mittelwert und Standardabweichung der Menge {z_val +- r_i}.

    Die Menge ist symmetrisch um z_val, daher ist mu = z_val und
    sigma = sqrt(mean(r^2)).
    """
    r = np.asarray(r, dtype=np.float64)
    if r.size == 0:
        raise DegenerateInputError("Der Margen-Vektor ist leer.")
    return float(z_val), float(np.sqrt(np.mean(r**2)))


def sample_probs(mu_k: float, sigma_k: float, config: SamplingConfig, key: tuple = ()) -> np.ndarray:
    """
    L Normal-Stichproben mit Mittelwert mu_k und Standardabweichung sigma_k + epsilon.

    Die Werte werden nicht auf [0, 1] begrenzt; verwendet wird nur die Schwelle 0.5.
    `key` (z.B. (m, k)) wählt den Zufallsstrom unterhalb von `config.seed`.
    """
    if sigma_k < 0:
        raise ConfigError(f"sigma_k darf nicht negativ sein, nicht {sigma_k}.")
    rng = derive_rng(config.seed, STREAM_SAMPLING, *key)
    return rng.normal(mu_k, sigma_k + config.epsilon, size=config.L)


def estimate_model_variance(samples_per_val) -> float:
    """
    Mittlere Bernoulli-Varianz v(1-v) über alle Validierungspunkte, wobei v der
    Anteil der Stichproben echt über 0.5 ist.
    """
    if len(samples_per_val) == 0:
        raise DegenerateInputError("Keine Validierungsstichproben vorhanden.")
    v_bar = np.array([np.mean(np.asarray(s) > ANOMALY_THRESHOLD) if len(s) else np.nan for s in samples_per_val])
    if np.any(np.isnan(v_bar)):
        raise DegenerateInputError("Mindestens ein Validierungspunkt hat keine Stichproben.")
    return float(np.mean(v_bar * (1.0 - v_bar)))


def ensemble_weights(mu_sigma) -> np.ndarray:
    """
    w_m = (1 - 4 mu_m) / sum(1 - 4 mu).

    Raises:
        DegenerateInputError: Alle Modelle haben mu = 0.25; kein Modell ist verwendbar.
    """
    mu = np.asarray(mu_sigma, dtype=np.float64)
    if mu.size == 0:
        raise ConfigError("Keine Modellvarianzen übergeben.")
    if np.any((mu < 0.0) | (mu > MAX_MODEL_VARIANCE)):
        raise ConfigError(f"Modellvarianzen müssen in [0, 0.25] liegen: {mu.tolist()}")
    raw = 1.0 - 4.0 * mu
    total = raw.sum()
    if total <= 0.0:
        raise DegenerateInputError("Alle Modelle haben die maximale Varianz 0.25; kein Modell ist verwendbar.")
    return raw / total


def ensemble_decide(votes, weights) -> EnsembleVerdict:
    votes = np.asarray(votes, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    if votes.shape != weights.shape:
        raise ConfigError(f"Stimmen ({votes.shape}) und Gewichte ({weights.shape}) sind unterschiedlich lang.")
    score = float(np.dot(votes, weights))
    return EnsembleVerdict(
        votes=tuple(int(v) for v in votes),
        combined_score=score,
        decision=int(score > ANOMALY_THRESHOLD),
    )


# ----------------------------------------------------------------------------
# Gesamtes Ensemble
# ----------------------------------------------------------------------------


def bootstrap_probability(models, gmms, series: TimeSeries) -> np.ndarray:
    """
    Gleichgewichtetes Mittel der Anomalie-Wahrscheinlichkeiten der Bootstraps 1..B
    eines Modells. Neue Punkte sind für jeden Bootstrap out-of-bag.
    """
    columns = [
        anomaly_probabilities(gmm, anomaly_distances(model, series))
        for model, gmm in zip(models[1:], gmms[1:])
    ]
    return np.mean(columns, axis=0)


@dataclass(frozen=True, eq=False)
class FittedEnsemble:
    """
    M x (B+1) angepasste Modelle und GMMs mit dem zugehörigen Varianzbericht.

    Spalte 0 (volle Trainingsmenge) wird nur für die Margen gebraucht; Scores
    neuer Punkte mitteln gleichgewichtet über die Bootstraps 1..B.
    """

    specs: tuple
    models: tuple
    gmms: tuple
    report: ModelVarianceReport
    pipeline: PipelineConfig
    em: EmConfig
    sampling: SamplingConfig
    fallback_rows: int = 0

    @property
    def M(self) -> int:
        return len(self.specs)

    @property
    def B(self) -> int:
        return len(self.models[0]) - 1

    def model_probabilities(self, series: TimeSeries) -> np.ndarray:
        """z je Modell und Punkt (M x K): Mittel der Bootstrap-Wahrscheinlichkeiten."""
        if len(series) == 0:
            return np.empty((self.M, 0))
        return np.vstack([bootstrap_probability(self.models[m], self.gmms[m], series) for m in range(self.M)])

    def score_arrays(self, series: TimeSeries):
        """
        Vektorisierte Bewertung.

        Returns:
            tuple: (z M x K, votes M x K, combined_score K, decision K, weighted_probability K)
        """
        z = self.model_probabilities(series)
        votes = (z > ANOMALY_THRESHOLD).astype(np.int8)
        combined = self.report.weights @ votes
        weighted = self.report.weights @ z
        decision = (combined > ANOMALY_THRESHOLD).astype(np.int8)
        return z, votes, combined, decision, weighted

    def score(self, series: TimeSeries) -> list[EnsembleVerdict]:
        z, votes, combined, decision, weighted = self.score_arrays(series)
        return [
            EnsembleVerdict(
                votes=tuple(int(v) for v in votes[:, k]),
                combined_score=float(combined[k]),
                decision=int(decision[k]),
                weighted_probability=float(weighted[k]),
                model_probabilities=tuple(float(p) for p in z[:, k]),
                timestamp=format_timestamp(series.timestamps[k]),
            )
            for k in range(len(series))
        ]

    def to_dict(self) -> dict:
        return {
            "specs": [spec.to_dict() for spec in self.specs],
            "models": [[model.to_dict() for model in row] for row in self.models],
            "gmms": [[gmm.to_dict() for gmm in row] for row in self.gmms],
            "report": self.report.to_dict(),
            "pipeline": self.pipeline.to_dict(),
            "em": self.em.to_dict(),
            "sampling": self.sampling.to_dict(),
            "fallback_rows": self.fallback_rows,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FittedEnsemble":
        return cls(
            specs=tuple(EmbeddingSpec.from_dict(s) for s in data["specs"]),
            models=tuple(tuple(BoostedModel.from_dict(d) for d in row) for row in data["models"]),
            gmms=tuple(tuple(Gmm1D.from_dict(d) for d in row) for row in data["gmms"]),
            report=ModelVarianceReport.from_dict(data["report"]),
            pipeline=PipelineConfig.from_dict(data["pipeline"]),
            em=EmConfig.from_dict(data["em"]),
            sampling=SamplingConfig.from_dict(data["sampling"]),
            fallback_rows=int(data.get("fallback_rows", 0)),
        )


def _fit_cell(train: TimeSeries, plan: BootstrapPlan, spec: EmbeddingSpec, m: int, j: int,
              pipeline: PipelineConfig, em: EmConfig):
    """
    Eine Zelle (m, j): Boosting auf den In-Bag-Punkten, GMM auf den Distanzen
    aller N Trainingspunkte, Wahrscheinlichkeiten für alle Trainingspunkte.
    """
    try:
        in_bag = plan.in_bag(j)
        model = fit_boosted(train.take(in_bag), spec, pipeline.boost_eps)
        distances = anomaly_distances(model, train)
        gmm = fit_em(distances, em)
        return model, gmm, anomaly_probabilities(gmm, distances)
    except AnomalyCounterError as e:
        raise PipelineError(str(e), model_index=m, bootstrap_index=j) from e
    except (ValueError, FloatingPointError) as e:
        raise PipelineError(f"{type(e).__name__}: {e}", model_index=m, bootstrap_index=j) from e


def fit_ensemble(train: TimeSeries, val: TimeSeries, specs, pipeline: PipelineConfig | None = None,
                 em: EmConfig | None = None, sampling: SamplingConfig | None = None) -> FittedEnsemble:
    """
    Passt alle M x (B+1) Zellen an und schätzt die Modellvarianzen auf `val`.

    Die Zellen laufen parallel in einem Thread-Pool; die Ergebnisse werden nach
    Index zusammengesetzt und hängen daher nicht von der Worker-Zahl ab.
    """
    pipeline = pipeline or PipelineConfig()
    em = em or EmConfig()
    sampling = sampling or SamplingConfig()
    specs = tuple(specs)
    if not specs:
        raise ConfigError("Mindestens eine EmbeddingSpec wird benötigt.")
    if len(val) == 0:
        raise DegenerateInputError("Die Validierungsmenge ist leer.")
    if len(train) and val.timestamps[0] <= train.timestamps[-1]:
        raise ConfigError("Validierungsdaten müssen zeitlich nach den Trainingsdaten liegen.")

    plan = draw_plan(len(train), pipeline.B, pipeline.alpha, pipeline.seed)
    weights = credibility(complement(plan))
    cells = [(m, j) for m in range(len(specs)) for j in range(pipeline.B + 1)]
    logger.info(
        f"Passe {len(specs)} Modelle x {pipeline.B + 1} Bootstraps an "
        f"(N={len(train)}, K={len(val)}, Worker={pipeline.effective_workers})."
    )

    with ThreadPoolExecutor(max_workers=pipeline.effective_workers) as pool:
        results = list(pool.map(lambda mj: _fit_cell(train, plan, specs[mj[0]], mj[0], mj[1], pipeline, em), cells))

    models, gmms = [], []
    mu_sigma = np.empty(len(specs))
    per_val_mean = np.empty((len(specs), len(val)))
    per_val_sigma = np.empty((len(specs), len(val)))
    for m, spec in enumerate(specs):
        row = results[m * (pipeline.B + 1):(m + 1) * (pipeline.B + 1)]
        models.append(tuple(cell[0] for cell in row))
        gmms.append(tuple(cell[1] for cell in row))
        P = ProbMatrix(P=np.column_stack([cell[2] for cell in row]), model_id=m)
        oob = oob_summary(P, weights)

        z_val = bootstrap_probability(models[m], gmms[m], val)
        samples = []
        for k, z in enumerate(z_val):
            mu_k, sigma_k = val_stats(z, oob.r)
            per_val_mean[m, k], per_val_sigma[m, k] = mu_k, sigma_k
            samples.append(sample_probs(mu_k, sigma_k, sampling, key=(m, k)))
        mu_sigma[m] = estimate_model_variance(samples)
        logger.info(f"Modell {m} ({spec.name}): mu_sigma={mu_sigma[m]:.4f}")

    report = ModelVarianceReport(
        mu_sigma=mu_sigma,
        weights=ensemble_weights(mu_sigma),
        per_val_mean=per_val_mean,
        per_val_sigma=per_val_sigma,
        model_names=tuple(spec.name for spec in specs),
    )
    return FittedEnsemble(
        specs=specs,
        models=tuple(models),
        gmms=tuple(gmms),
        report=report,
        pipeline=pipeline,
        em=em,
        sampling=sampling,
        fallback_rows=len(weights.coverage_fallback_rows),
    )


def run_pipeline(train: TimeSeries, val: TimeSeries, specs, pipeline: PipelineConfig | None = None,
                 em: EmConfig | None = None, sampling: SamplingConfig | None = None):
    """
    Passt das Ensemble an und bewertet die Validierungspunkte.

    Returns:
        tuple[ModelVarianceReport, list[EnsembleVerdict]]
    """
    ensemble = fit_ensemble(train, val, specs, pipeline, em, sampling)
    return ensemble.report, ensemble.score(val)
