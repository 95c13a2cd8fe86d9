import numpy as np
import pytest
from scipy import stats

from canica import (
    GroundTruth,
    make_ground_truth,
    make_group_patterns,
    simulate_group,
    simulate_subject,
)
from canica.errors import BadDimension


class TestMakeGroupPatterns:
    def test_single_dense_source(self):
        m = make_group_patterns(1, 10, 1.0, seed=0)
        assert m.rows == 1
        assert np.count_nonzero(m.values) == 10
        assert np.isclose(np.linalg.norm(m.values), 1.0)

    def test_sparse_rows_and_low_correlation(self):
        m = make_group_patterns(10, 5000, 0.05, seed=1)
        nnz = np.count_nonzero(m.values, axis=1)
        assert (nnz == 250).all()
        # direct recomputation of pairwise row correlations
        corr = np.corrcoef(m.values)
        off = corr[~np.eye(10, dtype=bool)]
        assert np.abs(off).max() < 0.2

    def test_rows_super_gaussian(self):
        m = make_group_patterns(4, 2000, 0.1, seed=2)
        for row in m.values:
            assert stats.kurtosis(row, fisher=True) > 0.0

    def test_deterministic(self):
        a = make_group_patterns(3, 100, 0.5, seed=9)
        b = make_group_patterns(3, 100, 0.5, seed=9)
        assert a.values.tobytes() == b.values.tobytes()

    @pytest.mark.parametrize(
        "k,v,s", [(0, 10, 0.5), (10, 10, 0.5), (2, 10, 0.0), (2, 10, 1.5)]
    )
    def test_preconditions(self, k, v, s):
        with pytest.raises(BadDimension):
            make_group_patterns(k, v, s, seed=0)


def identity_truth(k, n_voxels, seed=0):
    """Hand-built noiseless truth with identity mixing and loadings."""
    patterns = make_group_patterns(k, n_voxels, 1.0, seed=seed)
    return GroundTruth(
        group_patterns=patterns,
        loadings=(np.eye(k),),
        residual_patterns=(np.zeros((k, n_voxels)),),
        temporal_mixing=(np.eye(k),),
        noise_scale=0.0,
        variability_scale=0.0,
        seed=seed,
    )


class TestSimulateSubject:
    def test_identity_noiseless_reproduces_patterns(self):
        truth = identity_truth(4, 50)
        series = simulate_subject(truth, 0, 4)
        np.testing.assert_array_equal(series.data.values, truth.group_patterns.values)

    def test_noiseless_rows_contained_in_pattern_span(self):
        truth = make_ground_truth(
            k_true=5, n_voxels=300, n_subjects=2, n_frames=40,
            sparsity=0.3, noise_scale=0.0, variability_scale=0.0, seed=3,
        )
        series = simulate_subject(truth, 1, 40)
        b = truth.group_patterns.values
        coeffs, *_ = np.linalg.lstsq(b.T, series.data.values.T, rcond=None)
        residual = series.data.values - (b.T @ coeffs).T
        rel = np.linalg.norm(residual) / np.linalg.norm(series.data.values)
        assert rel < 1e-10

    def test_spectrum_spikes_above_noise_bulk(self):
        # ten signal eigenvalues must clear the Marchenko-Pastur edge of
        # the observation noise, (1 + sqrt(V/f))^2 * entry_variance
        k, f, v, sigma_e = 10, 200, 5000, 0.5
        data = simulate_group(12, f, v, k, 0.05, sigma_e, 0.1, seed=4)
        y = data.dataset.subjects[0].data.values
        eigvals = np.linalg.eigvalsh(y @ y.T / f)[::-1]
        edge = (1.0 + np.sqrt(v / f)) ** 2 * (sigma_e**2 / v)
        assert (eigvals > edge).sum() >= k

    def test_noise_variance_matches_configured_scale(self):
        sigma_e = 0.7
        data = simulate_group(1, 500, 2000, 0, 0.5, sigma_e, 0.0, seed=5)
        y = data.dataset.subjects[0].data.values  # pure noise when k_true=0
        empirical = y.var() * 2000
        assert abs(empirical - sigma_e**2) / sigma_e**2 < 0.02

    def test_frame_count_must_match_mixing(self):
        truth = identity_truth(3, 30)
        with pytest.raises(BadDimension):
            simulate_subject(truth, 0, 5)

    def test_subject_index_range(self):
        truth = identity_truth(3, 30)
        with pytest.raises(BadDimension):
            simulate_subject(truth, 1, 3)


class TestSimulateGroup:
    def test_bit_exact_regeneration(self):
        a = simulate_group(3, 20, 50, 2, 0.5, 0.3, 0.1, seed=11)
        b = simulate_group(3, 20, 50, 2, 0.5, 0.3, 0.1, seed=11)
        for sa, sb in zip(a.dataset.subjects, b.dataset.subjects):
            assert sa.data.values.tobytes() == sb.data.values.tobytes()
        assert (
            a.truth.group_patterns.values.tobytes()
            == b.truth.group_patterns.values.tobytes()
        )

    def test_subject_streams_differ(self):
        data = simulate_group(2, 20, 50, 0, 0.5, 1.0, 0.0, seed=12)
        y0 = data.dataset.subjects[0].data.values
        y1 = data.dataset.subjects[1].data.values
        assert not np.array_equal(y0, y1)

    def test_pure_noise_group_has_empty_truth(self):
        data = simulate_group(2, 10, 40, 0, 0.5, 1.0, 0.0, seed=13)
        assert data.truth.group_patterns.rows == 0
        assert data.dataset.subjects[0].data.values.shape == (10, 40)

    def test_pattern_gains_scale_loading_columns(self):
        gains = np.array([3.0, 1.0])
        data = simulate_group(
            1, 20, 60, 2, 1.0, 0.0, 0.0, seed=14, pattern_gains=gains
        )
        lam = data.truth.loadings[0]
        ratio = np.linalg.norm(lam[:, 0]) / np.linalg.norm(lam[:, 1])
        assert 2.0 < ratio < 4.0

    def test_paper_scale_shapes_accepted(self):
        truth = make_ground_truth(
            k_true=2, n_voxels=40000, n_subjects=1, n_frames=820,
            sparsity=0.01, noise_scale=0.5, variability_scale=0.1, seed=15,
        )
        series = simulate_subject(truth, 0, 820)
        assert series.data.values.shape == (820, 40000)
