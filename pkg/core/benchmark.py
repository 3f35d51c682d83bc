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
Sweep über das Signal-Rausch-Verhältnis lambda2/lambda1 und die Fenstergröße W
auf synthetischen Daten.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .eval_harness import KnnConfig, run_experiment
from .exceptions import ConfigError
from .json_io_handler import JsonIOHandler
from .report_writer import markdown_table, plot_benchmark
from .run_options import RunConfig
from .synth_generator import generate, sweep_configs

logger = logging.getLogger(__name__)

BENCHMARK_FORMATS = ("json", "markdown", "png")


@dataclass
class BenchmarkResult:
    """
    Eine Zeile je (Verhältnis, Fenstergröße, Verfahren) mit Mittelwert, Varianz
    und den einzelnen AUCs der Wiederholungen.
    """

    rows: list = field(default_factory=list)
    fingerprint: str = ""

    def to_dict(self) -> dict:
        return {"fingerprint": self.fingerprint, "rows": self.rows}


def run_benchmark(config: RunConfig) -> BenchmarkResult:
    """Erzeugt je Verhältnis eine Reihe und wertet sie für jede Fenstergröße aus."""
    result = BenchmarkResult(fingerprint=config.fingerprint())
    for synth in sweep_configs(config.synth, config.bench_ratios):
        ratio = synth.lambda2 / synth.lambda1
        series = generate(synth).series
        for window in config.bench_windows:
            logger.info(f"Benchmark: lambda2/lambda1={ratio:g}, W={window}")
            report = run_experiment(
                series,
                methods=config.methods,
                split=config.split,
                window=window,
                specs=config.specs,
                pipeline=config.pipeline,
                em=config.em,
                sampling=config.sampling,
                knn=KnnConfig(k=config.knn.k, window=window),
                dataset_name=f"synth-{ratio:g}",
                fingerprint=config.fingerprint(),
            )
            for method in report.methods:
                result.rows.append({
                    "ratio": ratio,
                    "window": window,
                    "method": method,
                    "mean": report.mean(method),
                    "variance": report.variance(method),
                    "auc": list(report.auc[method]),
                })
    return result


def emit_benchmark(result: BenchmarkResult, out_dir, formats=BENCHMARK_FORMATS) -> list[Path]:
    """Schreibt `benchmark.json`, `benchmark.md` und `benchmark.png` nach `out_dir`."""
    unknown = set(formats) - set(BENCHMARK_FORMATS)
    if unknown:
        raise ConfigError(f"Unbekannte Benchmark-Formate: {sorted(unknown)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    if "json" in formats:
        path = out_dir / "benchmark.json"
        if not JsonIOHandler.write_json(path, result.to_dict(), sort_keys=True):
            raise OSError(f"Benchmark konnte nicht geschrieben werden: {path}")
        written.append(path)
    if "markdown" in formats:
        path = out_dir / "benchmark.md"
        rows = [
            [f"{r['ratio']:g}", r["window"], r["method"], f"{r['mean']:.4f}", f"{r['variance']:.6f}"]
            for r in result.rows
        ]
        table = markdown_table(["lambda2/lambda1", "W", "Verfahren", "AUC (Mittel)", "Varianz"], rows)
        path.write_text(f"# Benchmark\n\nFingerabdruck `{result.fingerprint}`\n\n{table}\n", encoding="utf-8")
        written.append(path)
    if "png" in formats and result.rows:
        if path := plot_benchmark(result.rows, out_dir / "benchmark.png"):
            written.append(path)
    return written
