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
Datenmodell für univariate Zeitreihen.

Enthält das Einlesen und Schreiben von NAB-CSV-Dateien und Label-Fenstern,
die Kalender-Merkmale, die Rolling-Window-Featurisierung und die geordnete
Aufteilung in Trainings- und Validierungsdaten.

Alle Zeitstempel werden als UTC ohne Sommerzeit-Korrektur interpretiert.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterator

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import ConfigError, DataFormatError, DegenerateInputError
from .json_io_handler import JsonIOHandler
from .random_streams import STREAM_SPLIT, derive_rng

logger = logging.getLogger(__name__)

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"
NAB_HEADER = ["timestamp", "value"]
LABEL_HEADER = ["start_timestamp", "end_timestamp"]

CALENDAR_FEATURES = ("hour_of_day", "day_of_week", "month_of_year", "is_weekend")
# Kurzformen, wie sie in Konfigurationsdateien bequem sind.
FEATURE_ALIASES = {
    "hour": "hour_of_day",
    "dow": "day_of_week",
    "weekday": "day_of_week",
    "month": "month_of_year",
    "weekend": "is_weekend",
}
SATURDAY = 5
SUNDAY = 6


def canonical_feature(name: str) -> str:
    """Löst einen Merkmalsnamen (inkl. Kurzform) auf den kanonischen Namen auf."""
    key = str(name).strip().lower()
    key = FEATURE_ALIASES.get(key, key)
    if key not in CALENDAR_FEATURES:
        raise ConfigError(
            f"Unbekanntes Kalender-Merkmal '{name}'. Erlaubt: {', '.join(CALENDAR_FEATURES)}"
        )
    return key


def _as_seconds(values) -> np.ndarray:
    return np.asarray(values, dtype="datetime64[s]")


def format_timestamp(ts) -> str:
    """Formatiert einen Zeitstempel im NAB-Format `YYYY-MM-DD HH:MM:SS`."""
    return str(np.datetime_as_string(np.datetime64(ts, "s"), unit="s")).replace("T", " ")


def format_value(value: float) -> str:
    """Verlustfreie Textform eines Messwerts (ganze Zahlen ohne Nachkommastelle)."""
    value = float(value)
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


@dataclass(frozen=True)
class TimePoint:
    """Ein einzelner Messpunkt (Zeitstempel, Wert)."""

    timestamp: np.datetime64
    value: float

    def __post_init__(self):
        ts = np.datetime64(self.timestamp, "s")
        if np.isnat(ts):
            raise ConfigError("TimePoint benötigt einen gültigen Zeitstempel.")
        if not math.isfinite(float(self.value)):
            raise ConfigError(f"TimePoint-Wert muss endlich sein, nicht {self.value}.")
        object.__setattr__(self, "timestamp", ts)
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """
    Eine geordnete Zeitreihe mit optionalen Anomalie-Labels (1 = Anomalie).

    Die Arrays werden beim Erstellen schreibgeschützt, damit Instanzen gefahrlos
    zwischen parallelen Workern geteilt werden können.

    Attributes:
        timestamps (np.ndarray): datetime64[s], streng monoton steigend.
        values (np.ndarray): float64, endlich.
        labels (np.ndarray | None): int8 mit Werten 0/1, gleiche Länge wie `values`.
    """

    timestamps: np.ndarray
    values: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        timestamps = _as_seconds(self.timestamps).copy()
        values = np.asarray(self.values, dtype=np.float64).copy()
        if timestamps.ndim != 1 or values.ndim != 1 or len(timestamps) != len(values):
            raise ConfigError("Zeitstempel und Werte müssen eindimensional und gleich lang sein.")
        if np.isnat(timestamps).any():
            raise ConfigError("Zeitreihe enthält ungültige Zeitstempel.")
        if not np.isfinite(values).all():
            raise ConfigError("Zeitreihe enthält nicht-endliche Werte.")
        if len(timestamps) > 1 and not (np.diff(timestamps) > np.timedelta64(0, "s")).all():
            raise ConfigError("Zeitstempel müssen streng monoton steigen.")

        labels = None
        if self.labels is not None:
            labels = np.asarray(self.labels).astype(np.int8)
            if labels.shape != values.shape:
                raise ConfigError(
                    f"Label-Länge {labels.shape[0]} passt nicht zur Zeitreihe ({len(values)})."
                )
            if not np.isin(labels, (0, 1)).all():
                raise ConfigError("Labels müssen binär (0/1) sein.")
            labels.flags.writeable = False

        timestamps.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    @property
    def points(self) -> tuple[TimePoint, ...]:
        return tuple(TimePoint(t, v) for t, v in zip(self.timestamps, self.values))

    @classmethod
    def from_points(cls, points, labels=None) -> "TimeSeries":
        points = list(points)
        return cls(
            timestamps=[p.timestamp for p in points],
            values=[p.value for p in points],
            labels=labels,
        )

    def slice(self, start: int, stop: int) -> "TimeSeries":
        """Gibt den zusammenhängenden Ausschnitt [start, stop) als neue Zeitreihe zurück."""
        labels = None if self.labels is None else self.labels[start:stop]
        return TimeSeries(self.timestamps[start:stop], self.values[start:stop], labels)

    def take(self, indices) -> "TimeSeries":
        """Gibt die Punkte an den (aufsteigend sortierten) Indizes zurück."""
        indices = np.asarray(indices, dtype=np.int64)
        labels = None if self.labels is None else self.labels[indices]
        return TimeSeries(self.timestamps[indices], self.values[indices], labels)

    def with_labels(self, labels) -> "TimeSeries":
        return TimeSeries(self.timestamps, self.values, labels)


@dataclass(frozen=True)
class CalendarFeatures:
    """Kalender-Merkmale eines Zeitstempels (Montag = 0 ... Sonntag = 6)."""

    hour_of_day: int
    day_of_week: int
    month_of_year: int
    is_weekend: bool

    def __post_init__(self):
        if not 0 <= self.hour_of_day <= 23:
            raise ConfigError(f"hour_of_day außerhalb 0-23: {self.hour_of_day}")
        if not 0 <= self.day_of_week <= 6:
            raise ConfigError(f"day_of_week außerhalb 0-6: {self.day_of_week}")
        if not 1 <= self.month_of_year <= 12:
            raise ConfigError(f"month_of_year außerhalb 1-12: {self.month_of_year}")
        if self.is_weekend != (self.day_of_week in (SATURDAY, SUNDAY)):
            raise ConfigError("is_weekend widerspricht day_of_week.")

    def to_dict(self) -> dict:
        return asdict(self)


def calendar_codes(timestamps, feature: str) -> np.ndarray:
    """
    Vektorisierte Kalender-Merkmale für viele Zeitstempel.

    Args:
        timestamps: Array-artige Zeitstempel (werden als datetime64[s] gelesen).
        feature (str): Ein Name aus CALENDAR_FEATURES (oder eine Kurzform).

    Returns:
        np.ndarray: int64-Kategorien je Zeitstempel.
    """
    feature = canonical_feature(feature)
    ts = _as_seconds(timestamps)
    days = ts.astype("datetime64[D]")
    if feature == "hour_of_day":
        return ((ts - days) // np.timedelta64(1, "h")).astype(np.int64)
    if feature == "month_of_year":
        return ts.astype("datetime64[M]").astype(np.int64) % 12 + 1
    # 1970-01-01 war ein Donnerstag (Index 3 bei Montag = 0).
    day_of_week = (days.astype(np.int64) + 3) % 7
    if feature == "day_of_week":
        return day_of_week
    return (day_of_week >= SATURDAY).astype(np.int64)


def extract_calendar(t) -> CalendarFeatures:
    """Ermittelt Stunde, Wochentag, Monat und Wochenend-Flag eines Zeitstempels (UTC)."""
    ts = np.array([np.datetime64(t, "s")])
    day_of_week = int(calendar_codes(ts, "day_of_week")[0])
    return CalendarFeatures(
        hour_of_day=int(calendar_codes(ts, "hour_of_day")[0]),
        day_of_week=day_of_week,
        month_of_year=int(calendar_codes(ts, "month_of_year")[0]),
        is_weekend=day_of_week in (SATURDAY, SUNDAY),
    )


# --- NAB-CSV ----------------------------------------------------------------


def _frame_to_series(frame: pd.DataFrame, first_row: int) -> TimeSeries:
    """
    Wandelt einen eingelesenen DataFrame in eine Zeitreihe um.

    `first_row` ist die Dateizeile der ersten Datenzeile, damit Fehlermeldungen
    die tatsächliche Zeilennummer nennen.
    """
    raw_ts = frame["timestamp"].astype(str).str.strip()
    timestamps = pd.to_datetime(raw_ts, format=TIMESTAMP_FORMAT, errors="coerce")
    bad = timestamps.isna().to_numpy()
    if bad.any():
        pos = int(np.flatnonzero(bad)[0])
        raise DataFormatError(f"Ungültiger Zeitstempel '{raw_ts.iloc[pos]}'", row=first_row + pos)

    raw_values = frame["value"].astype(str).str.strip()
    values = pd.to_numeric(raw_values, errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        pos = int(np.flatnonzero(bad)[0])
        raise DataFormatError(
            f"Ungültiger oder fehlender Wert '{raw_values.iloc[pos]}'", row=first_row + pos
        )

    ts = timestamps.to_numpy().astype("datetime64[s]")
    steps = np.diff(ts)
    not_increasing = steps <= np.timedelta64(0, "s")
    if not_increasing.any():
        pos = int(np.flatnonzero(not_increasing)[0]) + 1
        raise DataFormatError(
            f"Zeitstempel nicht streng monoton steigend ('{raw_ts.iloc[pos]}')",
            row=first_row + pos,
        )
    return TimeSeries(ts, values)


def _read_frames(path: Path, chunk_size: int | None):
    if not path.exists():
        raise DataFormatError(f"Datei nicht gefunden: {path}")
    try:
        return pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            chunksize=chunk_size,
        )
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataFormatError(f"CSV-Datei {path} nicht lesbar: {e}") from e


def _check_header(frame: pd.DataFrame, path: Path):
    columns = [str(c).strip() for c in frame.columns]
    if columns != NAB_HEADER:
        raise DataFormatError(
            f"Unerwarteter Header {columns} in {path}, erwartet: {','.join(NAB_HEADER)}", row=1
        )
    frame.columns = columns


def load_nab_csv(path) -> TimeSeries:
    """
    Liest eine Zeitreihe im NAB-Format (`timestamp,value`).

    Raises:
        DataFormatError: Fehlende Datei, fehlerhafte Zeile (mit Zeilennummer) oder
            nicht monotone Zeitstempel.
        DegenerateInputError: Die Datei enthält nur den Header.
    """
    path = Path(path)
    frame = _read_frames(path, None)
    _check_header(frame, path)
    if frame.empty:
        raise DegenerateInputError(f"Zeitreihe in {path} ist leer.")
    series = _frame_to_series(frame, first_row=2)
    logger.info(f"{len(series)} Punkte aus {path.name} geladen.")
    return series


def iter_nab_csv_chunks(path, chunk_size: int = 50_000) -> Iterator[TimeSeries]:
    """
    Liest eine NAB-CSV-Datei blockweise, damit große Dateien nicht komplett im
    Speicher liegen müssen. Die Monotonie wird auch über Blockgrenzen geprüft.
    """
    path = Path(path)
    reader = _read_frames(path, chunk_size)
    first_row = 2
    last_ts = None
    empty = True
    try:
        for frame in reader:
            _check_header(frame, path)
            if frame.empty:
                continue
            chunk = _frame_to_series(frame, first_row=first_row)
            if last_ts is not None and chunk.timestamps[0] <= last_ts:
                raise DataFormatError(
                    "Zeitstempel nicht streng monoton steigend (Blockgrenze)", row=first_row
                )
            last_ts = chunk.timestamps[-1]
            first_row += len(frame)
            empty = False
            yield chunk
    except pd.errors.ParserError as e:
        raise DataFormatError(f"CSV-Datei {path} nicht lesbar: {e}") from e
    if empty:
        raise DegenerateInputError(f"Zeitreihe in {path} ist leer.")


def write_nab_csv(series: TimeSeries, path) -> Path:
    """Schreibt eine Zeitreihe verlustfrei im NAB-Format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as csvfile:
        writer = csv.writer(csvfile, lineterminator="\n")
        writer.writerow(NAB_HEADER)
        for ts, value in zip(series.timestamps, series.values):
            writer.writerow([format_timestamp(ts), format_value(value)])
    return path


# --- Label-Fenster ----------------------------------------------------------


def _parse_window_stamp(raw: str, row: int | None) -> np.datetime64:
    try:
        parsed = pd.Timestamp(str(raw).strip())
    except (ValueError, TypeError) as e:
        raise DataFormatError(f"Ungültiger Fenster-Zeitstempel '{raw}'", row=row) from e
    if pd.isna(parsed):
        raise DataFormatError(f"Ungültiger Fenster-Zeitstempel '{raw}'", row=row)
    return np.datetime64(parsed.to_datetime64(), "s")


def _windows_from_pairs(pairs, first_row: int | None) -> list[tuple[np.datetime64, np.datetime64]]:
    windows = []
    for offset, pair in enumerate(pairs):
        row = None if first_row is None else first_row + offset
        if len(pair) != 2:
            raise DataFormatError("Fenster benötigt genau Start und Ende.", row=row)
        start = _parse_window_stamp(pair[0], row)
        end = _parse_window_stamp(pair[1], row)
        if end < start:
            raise DataFormatError("Fensterende liegt vor dem Fensterstart.", row=row)
        windows.append((start, end))
    return windows


def load_label_windows(path, key: str | None = None, data_file: str | None = None):
    """
    Liest Anomalie-Fenster als Liste von (Start, Ende)-Paaren.

    Unterstützt zwei Formate:
    - CSV mit `start_timestamp,end_timestamp` je Zeile (Header optional).
    - NABs `combined_windows.json` (Datei-Schlüssel -> Liste von [Start, Ende]).
      Der Eintrag wird über `key` gewählt, sonst über die Endung `data_file`
      oder, falls es nur einen gibt, automatisch.
    """
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"Label-Datei nicht gefunden: {path}")

    if path.suffix.lower() == ".json":
        data = JsonIOHandler.read_json(path)
        if not isinstance(data, dict):
            raise DataFormatError(f"Label-Datei {path} ist kein gültiges JSON-Objekt.")
        if key is None:
            candidates = list(data)
            if data_file is not None:
                candidates = [k for k in data if k.endswith(Path(data_file).name)]
            if len(candidates) != 1:
                raise DataFormatError(
                    f"Label-Eintrag in {path} nicht eindeutig ({len(candidates)} Kandidaten)."
                )
            key = candidates[0]
        if key not in data:
            raise DataFormatError(f"Schlüssel '{key}' nicht in {path} enthalten.")
        return _windows_from_pairs(data[key], first_row=None)

    with open(path, newline="", encoding="utf-8") as f:
        rows = [row for row in csv.reader(f) if row and not row[0].lstrip().startswith("#")]
    first_row = 1
    if rows and [c.strip() for c in rows[0]] == LABEL_HEADER:
        rows = rows[1:]
        first_row = 2
    return _windows_from_pairs(rows, first_row=first_row)


def attach_labels(series: TimeSeries, windows) -> TimeSeries:
    """Ein Punkt erhält Label 1 genau dann, wenn er in einem Fenster liegt (inklusive Grenzen)."""
    labels = np.zeros(len(series), dtype=np.int8)
    for start, end in windows:
        labels |= ((series.timestamps >= start) & (series.timestamps <= end)).astype(np.int8)
    return series.with_labels(labels)


def write_label_windows(series: TimeSeries, path) -> Path:
    """Schreibt die Labels als maximale Fenster aufeinanderfolgender Anomalie-Punkte."""
    if series.labels is None:
        raise ConfigError("Zeitreihe ohne Labels kann keine Label-Datei erzeugen.")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    padded = np.concatenate(([0], series.labels.astype(np.int8), [0]))
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    with open(path, "w", newline="", encoding="utf-8") as csvfile:
        writer = csv.writer(csvfile, lineterminator="\n")
        writer.writerow(LABEL_HEADER)
        for s, e in zip(starts, ends):
            writer.writerow([format_timestamp(series.timestamps[s]), format_timestamp(series.timestamps[e])])
    return path


# --- Rolling Window ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WindowedSample:
    """Die W vorhergehenden Werte als Merkmale, der aktuelle Wert als Ziel."""

    features: np.ndarray
    target: float
    timestamp: np.datetime64
    index: int

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 1 or len(features) == 0:
            raise ConfigError("WindowedSample benötigt einen nichtleeren Merkmalsvektor.")
        if self.index < len(features):
            raise ConfigError(f"Index {self.index} ist kleiner als die Fenstergröße {len(features)}.")
        object.__setattr__(self, "features", features)


def _check_window(n: int, window: int):
    if int(window) < 1:
        raise ConfigError(f"Fenstergröße muss mindestens 1 sein, nicht {window}.")
    if int(window) >= n:
        raise DegenerateInputError(f"Fenstergröße {window} nicht kleiner als die Reihenlänge {n}.")


def window_arrays(series: TimeSeries, window: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Array-Form von `make_windows`.

    Returns:
        tuple: (Merkmale der Form (N-W, W), Zielwerte (N-W,), Quell-Indizes (N-W,)).
    """
    _check_window(len(series), window)
    window = int(window)
    features = sliding_window_view(series.values, window)[:-1]
    indices = np.arange(window, len(series))
    return features, series.values[window:], indices


def make_windows(series: TimeSeries, window: int) -> list[WindowedSample]:
    """Erzeugt für jeden Index i >= W ein Sample mit values[i-W..i-1] und Ziel values[i]."""
    features, targets, indices = window_arrays(series, window)
    return [
        WindowedSample(features[r].copy(), float(targets[r]), series.timestamps[i], int(i))
        for r, i in enumerate(indices)
    ]


# --- Geordneter Split -------------------------------------------------------


@dataclass
class SplitSpec:
    """
    Parameter der geordneten Trainings-/Validierungsaufteilung.

    Bei `fixed_split=True` nutzen alle Wiederholungen dieselbe Grenze; sonst
    verschiebt ein geseedeter Jitter (bis `jitter_fraction` * N) die Grenze je
    Wiederholung. Die erste Wiederholung nutzt immer die unverschobene Grenze.
    """

    train_fraction: float = 0.8
    repeat_count: int = 5
    seed: int = 0
    fixed_split: bool = False
    jitter_fraction: float = 0.05

    def __post_init__(self):
        self.train_fraction = float(self.train_fraction)
        self.repeat_count = int(self.repeat_count)
        self.seed = int(self.seed)
        self.fixed_split = bool(self.fixed_split)
        self.jitter_fraction = float(self.jitter_fraction)
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction muss in (0, 1) liegen, nicht {self.train_fraction}.")
        if self.repeat_count < 1:
            raise ConfigError(f"repeat_count muss mindestens 1 sein, nicht {self.repeat_count}.")
        if self.seed < 0:
            raise ConfigError("seed darf nicht negativ sein.")
        if not 0.0 <= self.jitter_fraction < 0.5:
            raise ConfigError("jitter_fraction muss in [0, 0.5) liegen.")

    @classmethod
    def from_dict(cls, data: dict) -> "SplitSpec":
        field_names = {f.name for f in cls.__dataclass_fields__.values()}
        return cls(**{k: v for k, v in data.items() if k in field_names})

    def to_dict(self) -> dict:
        return asdict(self)


MIN_SPLIT_LENGTH = 10
MIN_PART_LENGTH = 2


def split_boundaries(n: int, spec: SplitSpec) -> list[int]:
    """Berechnet die Trainingslänge jeder Wiederholung."""
    if n < MIN_SPLIT_LENGTH:
        raise DegenerateInputError(
            f"Zeitreihe mit {n} Punkten zu kurz für einen Split (mindestens {MIN_SPLIT_LENGTH})."
        )
    base = int(math.floor(spec.train_fraction * n))
    if n - base < MIN_PART_LENGTH:
        raise DegenerateInputError(
            f"Validierungsmenge zu klein ({n - base} Punkte) bei train_fraction={spec.train_fraction}."
        )
    if base < MIN_PART_LENGTH:
        raise DegenerateInputError(f"Trainingsmenge zu klein ({base} Punkte).")

    if spec.fixed_split or spec.repeat_count == 1:
        return [base] * spec.repeat_count

    jitter = int(math.floor(spec.jitter_fraction * n))
    low = max(MIN_PART_LENGTH, base - jitter)
    high = min(n - MIN_PART_LENGTH, base + jitter)
    candidates = [b for b in range(low, high + 1) if b != base]
    if not candidates:
        return [base] * spec.repeat_count

    rng = derive_rng(spec.seed, STREAM_SPLIT)
    extra = rng.choice(
        candidates, size=spec.repeat_count - 1, replace=len(candidates) < spec.repeat_count - 1
    )
    return [base] + [int(b) for b in extra]


def ordered_split(series: TimeSeries, spec: SplitSpec) -> list[tuple[TimeSeries, TimeSeries]]:
    """
    Teilt die Zeitreihe je Wiederholung in einen zusammenhängenden Trainings-Präfix
    und den Rest als Validierung. Es wird nie gemischt.
    """
    boundaries = split_boundaries(len(series), spec)
    logger.debug(f"Split-Grenzen: {boundaries}")
    return [(series.slice(0, b), series.slice(b, len(series))) for b in boundaries]
