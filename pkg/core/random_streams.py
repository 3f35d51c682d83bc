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
Ableitung unabhängiger Zufallsströme aus einem Master-Seed.

Jeder Strom hängt nur vom Seed und seinem Schlüssel ab (z.B. Modell, Bootstrap,
Validierungspunkt), nie von der Reihenfolge, in der Worker ihn anfordern.
"""
import numpy as np

# Feste Kennungen für benannte Ströme, damit Schlüssel stabil bleiben.
STREAM_SPLIT = 1
STREAM_PLAN = 2
STREAM_SAMPLING = 3
STREAM_EM = 4
STREAM_ARMA = 5
STREAM_ANOMALY = 6


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """
    Erzeugt einen Generator für den Strom `key` unterhalb von `seed`.

    Args:
        seed (int): Der Master-Seed (nicht negativ).
        *key (int): Beliebig viele nicht negative Ganzzahlen, z.B. (STREAM_PLAN, j).

    Returns:
        np.random.Generator: Ein PCG64-Generator, reproduzierbar für (seed, key).
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(sequence))
