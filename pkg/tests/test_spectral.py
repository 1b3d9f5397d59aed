import numpy as np
import pytest

from tsgraph.errors import InputError
from tsgraph.spectral import (
    SpectralStatistics,
    TimeSeriesPanel,
    aggregate_periodogram,
    bartlett_split,
    daniell_smooth,
    dft_coefficients,
    dft_direct,
    fold_conjugate_pairs,
    load_cache,
    piecewise_bin,
    save_cache,
)


def panel(rng, N=2, T=16, p=3):
    return TimeSeriesPanel(rng.standard_normal((N, T, p)))


class TestDFT:
    def test_cosine_peaks(self):
        T = 8
        t = np.arange(T)
        d = dft_coefficients(np.cos(2 * np.pi * t / T)[:, None])[:, 0]
        expected = np.zeros(T, dtype=complex)
        expected[1] = expected[7] = 0.5
        np.testing.assert_allclose(d, expected, atol=1e-12)

    def test_matches_direct(self):
        x = np.random.default_rng(0).standard_normal((13, 4))
        np.testing.assert_allclose(dft_coefficients(x), dft_direct(x), atol=1e-12)

    def test_parseval(self):
        x = np.random.default_rng(1).standard_normal((32, 2))
        d = dft_coefficients(x)
        np.testing.assert_allclose(32 * (np.abs(d) ** 2).sum(axis=0), (x**2).sum(axis=0))

    def test_rejects_nonfinite(self):
        with pytest.raises(InputError):
            dft_coefficients(np.array([[1.0], [np.nan]]))


class TestPeriodogram:
    def test_shapes_and_dc_excluded(self):
        s = aggregate_periodogram(panel(np.random.default_rng(0)))
        assert s.num_entries == 15
        assert s.freq_ranges[0] == (1, 1)
        assert s.excluded_frequencies == (0,)
        np.testing.assert_array_equal(s.dof, 2.0)
        s.check_hermitian_psd()

    def test_keep_dc(self):
        s = aggregate_periodogram(panel(np.random.default_rng(0)), keep_dc=True)
        assert s.num_entries == 16 and s.freq_ranges[0] == (0, 0)

    def test_mean_shift_invariance(self):
        pn = panel(np.random.default_rng(2))
        shifted = TimeSeriesPanel(pn.data + 5.0)
        np.testing.assert_allclose(aggregate_periodogram(pn).stats, aggregate_periodogram(shifted).stats, atol=1e-12)

    def test_sum_over_replicates(self):
        pn = panel(np.random.default_rng(3), N=3)
        total = aggregate_periodogram(pn).stats
        parts = sum(aggregate_periodogram(TimeSeriesPanel(pn.data[n : n + 1])).stats for n in range(3))
        np.testing.assert_allclose(total, parts, atol=1e-12)

    def test_mirror_is_conjugate(self):
        s = aggregate_periodogram(panel(np.random.default_rng(4), T=10))
        # entry index k-1 holds frequency k
        np.testing.assert_allclose(s.stats[2], s.stats[6].conj(), atol=1e-12)


class TestDaniell:
    def test_brute_force(self):
        s = aggregate_periodogram(panel(np.random.default_rng(5), N=1, T=16))
        sm = daniell_smooth(s, 1)
        K = s.num_entries
        for i in range(K):
            expected = s.stats[(i - 1) % K] + s.stats[i] + s.stats[(i + 1) % K]
            np.testing.assert_allclose(sm.stats[i], expected, atol=1e-12)
        np.testing.assert_array_equal(sm.dof, 3.0)
        assert sm.kind == "daniell"

    def test_zero_width_is_identity(self):
        s = aggregate_periodogram(panel(np.random.default_rng(6)))
        np.testing.assert_allclose(daniell_smooth(s, 0).stats, s.stats)

    def test_window_too_wide(self):
        s = aggregate_periodogram(panel(np.random.default_rng(6), T=4))
        with pytest.raises(InputError):
            daniell_smooth(s, 2)


class TestPiecewise:
    def test_bins_T8_M4(self):
        s = piecewise_bin(aggregate_periodogram(panel(np.random.default_rng(7), N=1, T=8)), 4)
        assert s.freq_ranges == ((1, 1), (2, 3), (4, 5), (6, 7))
        np.testing.assert_array_equal(s.dof, [1, 2, 2, 2])
        base = aggregate_periodogram(panel(np.random.default_rng(7), N=1, T=8))
        np.testing.assert_allclose(s.stats[1], base.stats[1] + base.stats[2])

    def test_total_preserved(self):
        base = aggregate_periodogram(panel(np.random.default_rng(8), T=50))
        s = piecewise_bin(base, 7)
        np.testing.assert_allclose(s.stats.sum(0), base.stats.sum(0), atol=1e-12)
        assert s.total_dof == base.total_dof


class TestBartlett:
    def test_segments(self):
        x = np.arange(22.0).reshape(11, 2)
        pn = bartlett_split(x, 3)
        assert (pn.N, pn.T, pn.p) == (3, 3, 2)
        np.testing.assert_array_equal(pn.data[1, 0], x[3])

    def test_bad_M(self):
        with pytest.raises(InputError):
            bartlett_split(np.zeros((10, 2)), 6)


class TestFold:
    def test_pairs_and_nyquist(self):
        s = aggregate_periodogram(panel(np.random.default_rng(9), T=8))
        f = fold_conjugate_pairs(s)
        assert f.freq_ranges == ((1, 1), (2, 2), (3, 3), (4, 4))
        np.testing.assert_array_equal(f.weights, [2, 2, 2, 1])

    def test_odd_T(self):
        f = fold_conjugate_pairs(aggregate_periodogram(panel(np.random.default_rng(9), T=9)))
        assert f.num_entries == 4
        np.testing.assert_array_equal(f.weights, 2.0)

    def test_complex_input_not_folded(self):
        s = aggregate_periodogram(panel(np.random.default_rng(9), T=8))
        s.stats[0] = s.stats[0] + 0.5 * np.eye(3)
        f = fold_conjugate_pairs(s)
        assert f.weights[0] == 1


class TestContainer:
    def test_rejects_non_hermitian(self):
        S = np.zeros((1, 2, 2), dtype=complex)
        S[0, 0, 1] = 1.0
        with pytest.raises(InputError):
            SpectralStatistics(S, [1.0], [(1, 1)], T=4, N=1).check_hermitian_psd()

    def test_json_round_trip(self):
        s = fold_conjugate_pairs(aggregate_periodogram(panel(np.random.default_rng(10))))
        r = SpectralStatistics.from_json(s.to_json())
        np.testing.assert_array_equal(r.stats, s.stats)
        np.testing.assert_array_equal(r.weights, s.weights)
        assert r.freq_ranges == s.freq_ranges

    def test_cache_round_trip(self, tmp_path):
        s = piecewise_bin(aggregate_periodogram(panel(np.random.default_rng(11), T=40)), 5)
        path = tmp_path / "s.bin"
        save_cache(s, path)
        r = load_cache(path)
        np.testing.assert_array_equal(r.stats, s.stats)
        np.testing.assert_array_equal(r.dof, s.dof)
        assert r.kind == "piecewise" and r.meta == s.meta

    def test_cache_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"not a cache file at all")
        with pytest.raises(InputError):
            load_cache(path)
