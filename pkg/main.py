#!python3
# -*- coding: utf-8 -*-

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

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from core._version import __version__
from core.benchmark import BENCHMARK_FORMATS, emit_benchmark, run_benchmark
from core.bootstrap_plan import draw_plan, dump_plan
from core.eval_harness import check_auc_assertions, parse_auc_assertion, run_experiment
from core.exceptions import AnomalyCounterError, AucAssertionError, ConfigError
from core.logger_setup import setup_logging
from core.model_store import ModelStore
from core.report_writer import REPORT_FORMATS, emit_report, report_path
from core.settings_manager import SettingsManager
from core.synth_generator import generate
from core.time_series import (
    attach_labels,
    iter_nab_csv_chunks,
    load_label_windows,
    load_nab_csv,
    split_boundaries,
    write_label_windows,
    write_nab_csv,
)
from core.variance_ensemble import fit_ensemble

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_ASSERTION = 3


class CliParser(argparse.ArgumentParser):
    """ArgumentParser, der bei Bedienfehlern mit Exit-Code 1 statt 2 endet."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: Fehler: {message}\n")


def _add_common_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, help="JSON-Konfigurationsdatei (überschreibt die Standardwerte).")
    parser.add_argument("--seed", type=int, help="Master-Seed (Standard: $ANOMALYCOUNTER_SEED oder 0).")
    parser.add_argument("--log-level", help="Log-Level, z.B. DEBUG, INFO, WARNING.")
    parser.add_argument("--no-log-file", action="store_true", help="Nur auf stderr loggen.")


def _add_pipeline_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--alpha", type=float, help="Stichprobenrate der Bootstraps in (0.5, 1].")
    parser.add_argument("--bootstraps", type=int, help="Anzahl B der Bootstraps.")
    parser.add_argument("--samples", type=int, help="Monte-Carlo-Stichproben L je Validierungspunkt.")
    parser.add_argument("--epsilon", type=float, help="Zuschlag auf die Standardabweichung der Stichproben.")
    parser.add_argument("--workers", type=int, help="Anzahl paralleler Worker (beeinflusst das Ergebnis nicht).")
    parser.add_argument("--train-fraction", type=float, help="Anteil der Trainingsdaten am Split.")


def build_parser() -> CliParser:
    parser = CliParser(
        prog="anomalycounter",
        description="Label-freie Anomalieerkennung für Zeitreihen mit varianzgewichtetem Modell-Ensemble.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    p = sub.add_parser("generate", help="Synthetische Zeitreihe mit bekannten Anomalien erzeugen.")
    _add_common_arguments(p)
    p.add_argument("--out", type=Path, required=True, help="Ziel-CSV der Zeitreihe (NAB-Format).")
    p.add_argument("--labels", type=Path, help="Ziel-CSV der Anomalie-Fenster (Standard: <out>_labels.csv).")
    p.add_argument("--lambda1", type=float, help="Poisson-Rate des normalen Zweigs.")
    p.add_argument("--lambda2", type=float, help="Poisson-Rate des Anomalie-Zweigs.")
    p.add_argument("--pi", type=float, dest="pi_mix", help="Wahrscheinlichkeit des normalen Zweigs.")
    p.add_argument("--n", type=int, help="Anzahl der Punkte.")

    p = sub.add_parser("fit", help="Ensemble auf einer Zeitreihe anpassen und speichern.")
    _add_common_arguments(p)
    _add_pipeline_arguments(p)
    p.add_argument("--input", type=Path, required=True, help="Trainings-CSV (NAB-Format, ohne Labels).")
    p.add_argument("--model", type=Path, required=True, help="Ziel der Modelldatei.")
    p.add_argument("--dump-plan", type=Path, help="Bootstrap-Plan zusätzlich als Textmatrix ablegen.")

    p = sub.add_parser("score", help="Zeitreihe mit einem gespeicherten Modell bewerten.")
    _add_common_arguments(p)
    p.add_argument("--model", type=Path, required=True, help="Modelldatei aus 'fit'.")
    p.add_argument("--input", type=Path, required=True, help="Zu bewertende CSV (NAB-Format).")
    p.add_argument("--out", type=Path, required=True, help="Ziel-CSV der Scores.")
    p.add_argument("--chunk-size", type=int, default=50_000, help="Zeilen je Verarbeitungsblock.")

    p = sub.add_parser("evaluate", help="AUC-Protokoll mit Wiederholungen ausführen.")
    _add_common_arguments(p)
    _add_pipeline_arguments(p)
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--input", type=Path, help="Zeitreihe (NAB-Format).")
    source.add_argument("--synthetic", action="store_true", help="Synthetische Reihe aus der Konfiguration.")
    p.add_argument("--labels", type=Path, help="Anomalie-Fenster (CSV oder NAB combined_windows.json).")
    p.add_argument("--label-key", help="Schlüssel in combined_windows.json (Standard: passend zur Eingabe).")
    p.add_argument("--window", type=int, help="Fenstergröße W.")
    p.add_argument("--repeats", type=int, help="Anzahl der Wiederholungen.")
    p.add_argument("--methods", nargs="+", help="Verfahren, z.B. laf_ad knn.")
    p.add_argument("--knn-k", type=int, help="Anzahl der Nachbarn des KNN-Verfahrens.")
    p.add_argument("--out", type=Path, default=Path("report"), help="Basisname der Berichtsdateien.")
    p.add_argument("--format", nargs="+", choices=sorted(REPORT_FORMATS), default=["json", "markdown"])
    p.add_argument("--assert-auc", action="append", default=[], metavar="METHODE:WERT",
                   help="Mindest-AUC; bei Verletzung Exit-Code 3. Mehrfach verwendbar.")

    p = sub.add_parser("benchmark", help="Sweep über lambda2/lambda1 und Fenstergrößen.")
    _add_common_arguments(p)
    _add_pipeline_arguments(p)
    p.add_argument("--ratios", type=float, nargs="+", help="Verhältnisse lambda2/lambda1.")
    p.add_argument("--windows", type=int, nargs="+", help="Fenstergrößen W.")
    p.add_argument("--repeats", type=int, help="Anzahl der Wiederholungen.")
    p.add_argument("--out-dir", type=Path, default=Path("benchmark"), help="Ausgabeverzeichnis.")
    p.add_argument("--format", nargs="+", choices=BENCHMARK_FORMATS, default=list(BENCHMARK_FORMATS))
    return parser


def _overrides_from_args(args) -> dict:
    """Überträgt gesetzte Kommandozeilen-Flags auf Konfigurationsschlüssel."""
    mapping = {
        "seed": "seed",
        "log_level": "log_level",
        "window": "window",
        "methods": "methods",
        "repeats": "split.repeat_count",
        "train_fraction": "split.train_fraction",
        "alpha": "bootstrap.alpha",
        "bootstraps": "bootstrap.B",
        "workers": "bootstrap.workers",
        "samples": "sampling.L",
        "epsilon": "sampling.epsilon",
        "knn_k": "knn.k",
        "lambda1": "synth.lambda1",
        "lambda2": "synth.lambda2",
        "pi_mix": "synth.pi_mix",
        "n": "synth.n",
        "ratios": "benchmark.ratios",
        "windows": "benchmark.windows",
    }
    return {key: getattr(args, attr) for attr, key in mapping.items() if getattr(args, attr, None) is not None}


def _check_distinct_paths(inputs, outputs):
    """Ausgaben dürfen weder Eingaben überschreiben noch miteinander kollidieren."""
    resolved_out = [Path(p).resolve() for p in outputs if p is not None]
    if len(set(resolved_out)) != len(resolved_out):
        raise ConfigError("Mehrere Ausgaben zeigen auf dieselbe Datei.")
    clash = set(resolved_out) & {Path(p).resolve() for p in inputs if p is not None}
    if clash:
        raise ConfigError(f"Ausgabe würde eine Eingabe überschreiben: {sorted(map(str, clash))}")


class App:
    """
    Die Hauptanwendungsklasse, die als zentraler Orchestrator fungiert.

    Verantwortlichkeiten:
    - Einrichten des Loggings und Zusammenführen der Konfiguration.
    - Vollständige Validierung, bevor irgendeine Datei geschrieben wird.
    - Ausführen des gewählten Unterbefehls und Abbilden von Fehlern auf Exit-Codes.
    """

    def __init__(self, args):
        self.args = args
        self.version = f"v{__version__}"
        setup_logging(level=args.log_level or "INFO", log_to_file=not args.no_log_file)
        self.settings_manager = SettingsManager(args.config, _overrides_from_args(args))
        self.config = self.settings_manager.build_run_config()
        logger.debug(f"Anomalycounter {self.version}, Fingerabdruck {self.config.fingerprint()}")

    def run(self) -> int:
        handler = getattr(self, f"cmd_{self.args.command}")
        handler()
        return EXIT_OK

    # --- Unterbefehle -------------------------------------------------------

    def cmd_generate(self):
        labels_path = self.args.labels or self.args.out.with_name(f"{self.args.out.stem}_labels.csv")
        _check_distinct_paths([], [self.args.out, labels_path])
        output = generate(self.config.synth)
        # Beide Dateien entstehen erst als .part; bei einem Fehler bleibt keine halbe Ausgabe zurück.
        targets = [Path(self.args.out), Path(labels_path)]
        parts = [path.with_name(path.name + ".part") for path in targets]
        try:
            write_nab_csv(output.series, parts[0])
            write_label_windows(output.series, parts[1])
            for part, target in zip(parts, targets):
                os.replace(part, target)
        except BaseException:
            for part in parts:
                part.unlink(missing_ok=True)
            raise
        print(f"{len(output.series)} Punkte nach {self.args.out}, {output.anomaly_count} Anomalien nach {labels_path}")

    def _split_for_fit(self, series):
        spec = replace(self.config.split, fixed_split=True, repeat_count=1)
        boundary = split_boundaries(len(series), spec)[0]
        return series.slice(0, boundary), series.slice(boundary, len(series))

    def cmd_fit(self):
        _check_distinct_paths([self.args.input], [self.args.model, self.args.dump_plan])
        train, val = self._split_for_fit(load_nab_csv(self.args.input))
        pipeline = self.config.pipeline
        ensemble = fit_ensemble(train, val, self.config.specs, pipeline, self.config.em, self.config.sampling)
        if self.args.dump_plan:
            dump_plan(draw_plan(len(train), pipeline.B, pipeline.alpha, pipeline.seed), self.args.dump_plan)
        ModelStore.save(ensemble, self.args.model, fingerprint=self.config.fingerprint())
        for name, mu, weight in zip(ensemble.report.model_names, ensemble.report.mu_sigma, ensemble.report.weights):
            print(f"{name}: mu_sigma={mu:.4f} Gewicht={weight:.4f}")

    def cmd_score(self):
        _check_distinct_paths([self.args.input, self.args.model], [self.args.out])
        if self.args.chunk_size < 1:
            raise ConfigError("--chunk-size muss mindestens 1 sein.")
        data = ModelStore.load_data(self.args.model)
        ensemble = ModelStore.from_data(data)

        out = Path(self.args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        tmp_path = out.with_name(out.name + ".part")
        rows = anomalies = 0
        try:
            with open(tmp_path, "w", encoding="utf-8", newline="\n") as f:
                f.write(f"# fingerprint: {data.get('fingerprint', '')}\n")
                for i, chunk in enumerate(iter_nab_csv_chunks(self.args.input, self.args.chunk_size)):
                    _z, _votes, combined, decision, weighted = ensemble.score_arrays(chunk)
                    stamps = np.char.replace(np.datetime_as_string(chunk.timestamps, unit="s"), "T", " ")
                    pd.DataFrame({
                        "timestamp": stamps,
                        "combined_score": combined,
                        "decision": decision,
                        "weighted_probability": weighted,
                    }).to_csv(f, header=(i == 0), index=False, lineterminator="\n")
                    rows += len(chunk)
                    anomalies += int(decision.sum())
            os.replace(tmp_path, out)
        except BaseException:
            tmp_path.unlink(missing_ok=True)
            raise
        print(f"{rows} Punkte bewertet, {anomalies} als Anomalie markiert -> {out}")

    def _load_labeled_series(self):
        if self.args.synthetic:
            return generate(self.config.synth).series, "synthetic"
        series = load_nab_csv(self.args.input)
        if self.args.labels is None:
            raise ConfigError("Für 'evaluate' wird eine Label-Datei benötigt (--labels).")
        windows = load_label_windows(self.args.labels, key=self.args.label_key, data_file=self.args.input.name)
        return attach_labels(series, windows), self.args.input.stem

    def cmd_evaluate(self):
        assertions = [parse_auc_assertion(a) for a in self.args.assert_auc]
        outputs = [report_path(self.args.out, fmt) for fmt in self.args.format]
        _check_distinct_paths([self.args.input, self.args.labels], outputs)
        unknown = {method for method, _ in assertions} - set(self.config.methods)
        if unknown:
            raise ConfigError(f"Zusicherung für nicht ausgewertete Verfahren: {sorted(unknown)}")

        series, name = self._load_labeled_series()
        report = run_experiment(
            series,
            methods=self.config.methods,
            split=self.config.split,
            window=self.config.window,
            specs=self.config.specs,
            pipeline=self.config.pipeline,
            em=self.config.em,
            sampling=self.config.sampling,
            knn=self.config.knn,
            dataset_name=name,
            fingerprint=self.config.fingerprint(),
        )
        for fmt, path in zip(self.args.format, outputs):
            emit_report(report, path, fmt)
        for method in report.methods:
            print(f"{method}: AUC {report.mean(method):.4f} (Varianz {report.variance(method):.6f})")
        check_auc_assertions(report, self.args.assert_auc)

    def cmd_benchmark(self):
        result = run_benchmark(self.config)
        for path in emit_benchmark(result, self.args.out_dir, self.args.format):
            print(path)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return App(args).run()
    except AucAssertionError as e:
        logger.error(str(e))
        print(f"Fehler: {e}", file=sys.stderr)
        return EXIT_ASSERTION
    except ConfigError as e:
        print(f"Konfigurationsfehler: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (AnomalyCounterError, OSError) as e:
        logger.error(f"Abbruch: {e}", exc_info=True)
        print(f"Fehler: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
