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

import numpy as np

from core.random_streams import STREAM_PLAN, STREAM_SAMPLING, derive_rng


def test_same_key_same_stream():
    a = derive_rng(7, STREAM_PLAN, 3).uniform(size=5)
    b = derive_rng(7, STREAM_PLAN, 3).uniform(size=5)
    np.testing.assert_array_equal(a, b)


def test_streams_differ_by_seed_and_key():
    base = derive_rng(7, STREAM_PLAN, 3).uniform(size=5)
    for other in (derive_rng(8, STREAM_PLAN, 3), derive_rng(7, STREAM_PLAN, 4), derive_rng(7, STREAM_SAMPLING, 3)):
        assert not np.array_equal(base, other.uniform(size=5))


def test_independent_of_request_order():
    """Ein Strom liefert dasselbe, egal welche anderen Ströme vorher gezogen wurden."""
    first = derive_rng(1, STREAM_SAMPLING, 0, 9).normal(size=3)
    for j in range(5):
        derive_rng(1, STREAM_SAMPLING, 0, j).normal(size=100)
    np.testing.assert_array_equal(derive_rng(1, STREAM_SAMPLING, 0, 9).normal(size=3), first)
