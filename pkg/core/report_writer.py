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
Ausgabe von Experiment- und Benchmark-Berichten als JSON, CSV, Markdown und PNG.
"""
import logging
from pathlib import Path

import pandas as pd

from .eval_harness import ExperimentReport
from .exceptions import ConfigError
from .json_io_handler import JsonIOHandler

try:
    from matplotlib.figure import Figure
    from matplotlib.backends.backend_agg import FigureCanvasAgg

    MATPLOTLIB_AVAILABLE = True
except ImportError:
    MATPLOTLIB_AVAILABLE = False

logger = logging.getLogger(__name__)

REPORT_FORMATS = {"json": ".json", "csv": ".csv", "markdown": ".md"}


def report_path(base: Path, fmt: str) -> Path:
    """Hängt die zum Format passende Endung an `base` an."""
    if fmt not in REPORT_FORMATS:
        raise ConfigError(f"Unbekanntes Berichtsformat '{fmt}'. Erlaubt: {', '.join(REPORT_FORMATS)}")
    return Path(base).with_suffix(REPORT_FORMATS[fmt])


def markdown_table(header: list, rows: list) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(str(cell) for cell in row) + " |" for row in rows]
    return "\n".join(lines)


def report_markdown(report: ExperimentReport) -> str:
    """
    Tabelle mit einer Spalte je Verfahren: Mittelwert der AUC in der Datensatz-Zeile,
    darunter die Varianz und die einzelnen Wiederholungen.
    """
    methods = report.methods
    rows = [[report.dataset.get("name", "-")] + [f"{report.mean(m):.4f}" for m in methods]]
    rows.append(["Varianz"] + [f"{report.variance(m):.6f}" for m in methods])
    repeats = max((len(v) for v in report.auc.values()), default=0)
    for r in range(repeats):
        rows.append([f"Wiederholung {r + 1}"] + [f"{report.auc[m][r]:.4f}" for m in methods])

    text = [
        f"# AUC-Auswertung: {report.dataset.get('name', '-')}",
        "",
        f"Fenstergröße W = {report.window}, Fingerabdruck `{report.fingerprint}`",
        "",
        markdown_table(["Datensatz"] + methods, rows),
    ]
    if report.model_selection:
        text += ["", "## Modellauswahl", ""]
        sel_rows = [
            [r + 1, "-" if e["spearman"] is None else f"{e['spearman']:.3f}"]
            + [f"{mu:.4f} / {a:.4f}" for mu, a in zip(e["mu_sigma"], e["auc"])]
            for r, e in enumerate(report.model_selection)
        ]
        text.append(markdown_table(
            ["Wiederholung", "Spearman"] + [f"{n} (mu_sigma / AUC)" for n in report.model_selection[0]["models"]],
            sel_rows,
        ))
    return "\n".join(text) + "\n"


def report_frame(report: ExperimentReport) -> pd.DataFrame:
    """Eine Zeile je Verfahren und Wiederholung."""
    return pd.DataFrame(
        [
            {"method": method, "repeat": r + 1, "auc": value,
             "boundary": report.boundaries[r] if r < len(report.boundaries) else None}
            for method, values in report.auc.items()
            for r, value in enumerate(values)
        ],
        columns=["method", "repeat", "auc", "boundary"],
    )


def emit_report(report: ExperimentReport, path, fmt: str) -> Path:
    """
    Schreibt den Bericht deterministisch im gewünschten Format.

    Raises:
        ConfigError: Unbekanntes Format.
        OSError: Der Pfad ist nicht beschreibbar.
    """
    if fmt not in REPORT_FORMATS:
        raise ConfigError(f"Unbekanntes Berichtsformat '{fmt}'. Erlaubt: {', '.join(REPORT_FORMATS)}")
    path = Path(path)
    if fmt == "json":
        if not JsonIOHandler.write_json(path, report.to_dict(), sort_keys=True):
            raise OSError(f"Bericht konnte nicht geschrieben werden: {path}")
    else:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            if fmt == "csv":
                report_frame(report).to_csv(path, index=False, lineterminator="\n")
            else:
                path.write_text(report_markdown(report), encoding="utf-8")
        except OSError as e:
            logger.error(f"Bericht konnte nicht geschrieben werden: {path}", exc_info=True)
            raise OSError(f"Bericht konnte nicht geschrieben werden: {path} ({e})") from e
    logger.info(f"Bericht ({fmt}) nach '{path}' geschrieben.")
    return path


def plot_benchmark(rows: list[dict], path) -> Path | None:
    """
    Zeichnet die mittlere AUC über lambda2/lambda1, eine Linie je Verfahren und
    Fenstergröße. Ohne matplotlib wird nur eine Warnung ausgegeben.
    """
    if not MATPLOTLIB_AVAILABLE:
        logger.warning("matplotlib ist nicht installiert; das Benchmark-Diagramm wird übersprungen.")
        return None
    frame = pd.DataFrame(rows)
    fig = Figure(figsize=(8, 4.5), dpi=100)
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)
    for (method, window), group in frame.groupby(["method", "window"], sort=True):
        group = group.sort_values("ratio")
        ax.plot(group["ratio"], group["mean"], marker="o", label=f"{method} (W={window})")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("lambda2 / lambda1")
    ax.set_ylabel("mittlere AUC")
    ax.set_ylim(0.0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right", fontsize="small")
    fig.tight_layout()

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Software": None})
    logger.info(f"Benchmark-Diagramm nach '{path}' geschrieben.")
    return path
