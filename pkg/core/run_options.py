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

from dataclasses import dataclass, field

from .boosted_embedding import DEFAULT_SPECS, EmbeddingSpec
from .eval_harness import METHODS, KnnConfig
from .exceptions import ConfigError
from .gmm_scoring import EmConfig
from .json_io_handler import JsonIOHandler
from .synth_generator import SynthConfig
from .time_series import SplitSpec
from .variance_ensemble import PipelineConfig, SamplingConfig

# Abschnitte, in die der Master-Seed übernommen wird, sofern sie keinen eigenen setzen.
SEEDED_SECTIONS = ("synth", "split", "bootstrap", "em", "sampling")


@dataclass
class RunConfig:
    """Eine Datenklasse, die alle Parameter eines Laufs bündelt."""

    synth: SynthConfig
    split: SplitSpec = field(default_factory=SplitSpec)
    specs: tuple = DEFAULT_SPECS
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    em: EmConfig = field(default_factory=EmConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    knn: KnnConfig = field(default_factory=KnnConfig)
    window: int = 5
    seed: int = 0
    methods: tuple = METHODS
    bench_ratios: tuple = (0.5, 1.0, 2.0, 4.0)
    bench_windows: tuple = (1, 5, 10)
    log_level: str = "INFO"

    def __post_init__(self):
        if self.window < 1:
            raise ConfigError(f"window muss mindestens 1 sein, nicht {self.window}.")
        if self.knn.window != self.window:
            self.knn = KnnConfig(k=self.knn.k, window=self.window)
        if not self.specs:
            raise ConfigError("Mindestens eine EmbeddingSpec wird benötigt.")
        unknown = set(self.methods) - set(METHODS)
        if not self.methods or unknown:
            raise ConfigError(f"Ungültige Verfahren {list(self.methods)}. Erlaubt: {', '.join(METHODS)}")
        if not self.bench_ratios or any(r <= 0 for r in self.bench_ratios):
            raise ConfigError("bench_ratios muss positive Verhältnisse enthalten.")
        if not self.bench_windows or any(w < 1 for w in self.bench_windows):
            raise ConfigError("bench_windows muss positive Fenstergrößen enthalten.")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        """
        Erstellt eine RunConfig aus einem (verschachtelten) Dictionary, wie es
        der SettingsManager liefert. Unbekannte Schlüssel werden ignoriert.
        """
        try:
            seed = int(data.get("seed", 0))
            window = int(data.get("window", 5))
            sections = {name: dict(data.get(name) or {}) for name in SEEDED_SECTIONS}
            for section in sections.values():
                if section.get("seed") is None:
                    section["seed"] = seed
            synth = sections["synth"]
            if synth.get("lambda2") is None:
                synth["lambda2"] = synth.get("lambda1", 10.0)
            benchmark = data.get("benchmark") or {}
            embedding = data.get("embedding")
            return cls(
                synth=SynthConfig.from_dict(synth),
                split=SplitSpec.from_dict(sections["split"]),
                specs=tuple(EmbeddingSpec.from_dict(s) for s in embedding) if embedding else DEFAULT_SPECS,
                pipeline=PipelineConfig.from_dict(sections["bootstrap"]),
                em=EmConfig.from_dict(sections["em"]),
                sampling=SamplingConfig.from_dict(sections["sampling"]),
                knn=KnnConfig.from_dict({**(data.get("knn") or {}), "window": window}),
                window=window,
                seed=seed,
                methods=tuple(data.get("methods") or METHODS),
                bench_ratios=tuple(float(r) for r in benchmark.get("ratios", cls.bench_ratios)),
                bench_windows=tuple(int(w) for w in benchmark.get("windows", cls.bench_windows)),
                log_level=str(data.get("log_level", "INFO")),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as e:
            raise ConfigError(f"Ungültige Konfiguration: {e}") from e

    def to_dict(self) -> dict:
        """Konvertiert die RunConfig in ein Dictionary im Format der Konfigurationsdatei."""
        return {
            "seed": self.seed,
            "window": self.window,
            "methods": list(self.methods),
            "log_level": self.log_level,
            "synth": self.synth.to_dict(),
            "split": self.split.to_dict(),
            "bootstrap": {**self.pipeline.to_dict(), "workers": self.pipeline.workers},
            "embedding": [spec.to_dict() for spec in self.specs],
            "em": self.em.to_dict(),
            "sampling": self.sampling.to_dict(),
            "knn": {"k": self.knn.k},
            "benchmark": {"ratios": list(self.bench_ratios), "windows": list(self.bench_windows)},
        }

    def fingerprint(self) -> str:
        """
        Stabiler Hash über alle ergebnisrelevanten Parameter.

        Worker-Zahl und Log-Level fließen nicht ein, da sie das Ergebnis nicht ändern.
        """
        data = self.to_dict()
        data.pop("log_level")
        data["bootstrap"].pop("workers")
        return JsonIOHandler.canonical_digest(data)[:16]
