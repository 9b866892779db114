from __future__ import annotations

import numpy as np
import pytest

from clair.contrast import StackedPairMatrix, all_pairs, n_pairs
from clair.detection import (
    DetectionConfig,
    largest_gap_threshold,
    vote_set,
)
from clair.exceptions import ConfigError


def stacked_from_norms(norms, n_clients, q=2, p=2):
    """Stacked matrix whose block g has Frobenius norm norms[g]."""
    norms = np.asarray(norms, dtype=float)
    assert norms.size == n_pairs(n_clients)
    data = np.zeros((norms.size * q, p))
    for g, norm in enumerate(norms):
        data[g * q, 0] = norm
    return StackedPairMatrix(n_clients, q, p, data)


class TestLargestGapThreshold:
    def test_single_dominant_gap(self):
        assert largest_gap_threshold(np.array([0.0, 0.0, 0.0, 5.0, 5.0])) == 2.5

    def test_all_below_floor(self):
        norms = np.full(4, 1e-12)
        tau = largest_gap_threshold(norms, eps_abs=1e-9)
        assert tau == pytest.approx(1e-12 + 1e-9)
        assert (norms <= tau).all()

    def test_exhaustive_gap_scan(self):
        norms = np.array([0.1, 0.2, 0.9, 1.0, 3.0])
        srt = np.sort(norms)
        gaps = np.diff(srt)
        i = int(np.argmax(gaps))
        assert largest_gap_threshold(norms) == pytest.approx(
            (srt[i] + srt[i + 1]) / 2
        )
        assert largest_gap_threshold(norms) == 2.0

    def test_tie_breaks_to_smallest_index(self):
        # gaps (1, 1): the earlier gap wins, keeping the small group small
        assert largest_gap_threshold(np.array([0.0, 1.0, 2.0])) == 0.5

    def test_unsorted_input(self):
        assert largest_gap_threshold(np.array([3.0, 0.1, 1.0, 0.2, 0.9])) == 2.0

    def test_empty_rejected(self):
        with pytest.raises(ConfigError):
            largest_gap_threshold(np.array([]))

    def test_single_norm_measured_from_zero(self):
        assert largest_gap_threshold(np.array([4.0])) == 2.0


class TestVoteSet:
    def test_all_zero_norms_full_set(self):
        s = stacked_from_norms(np.zeros(n_pairs(4)), 4)
        result = vote_set(s, DetectionConfig(alpha=0.5, tau=0.0))
        assert result.collaborative_set == (0, 1, 2, 3)
        np.testing.assert_array_equal(result.vote_fractions, np.ones(4))

    def test_single_contaminated_client_hand_enumeration(self):
        # K=5: pairs touching client 4 have norm 10, all others 0
        n_clients = 5
        norms = np.zeros(n_pairs(n_clients))
        for pair in all_pairs(n_clients):
            if 4 in (pair.j, pair.k):
                norms[pair.flat] = 10.0
        s = stacked_from_norms(norms, n_clients)
        result = vote_set(s, DetectionConfig(alpha=0.5, tau=1.0))
        assert result.collaborative_set == (0, 1, 2, 3)
        assert result.vote_fractions[4] == 0.0
        np.testing.assert_allclose(result.vote_fractions[:4], 0.75)

    def test_set_membership_matches_fractions(self):
        rng = np.random.default_rng(5)
        norms = rng.uniform(0, 2, size=n_pairs(6))
        s = stacked_from_norms(norms, 6)
        cfg = DetectionConfig(alpha=0.5, tau=1.0)
        result = vote_set(s, cfg)
        for k in range(6):
            assert (k in result.collaborative_set) == (
                result.vote_fractions[k] >= cfg.alpha
            )

    @pytest.mark.parametrize("n_clients,eta", [(5, 0.6), (5, 0.8), (10, 0.6),
                                               (10, 0.8), (20, 0.6), (20, 0.8)])
    @pytest.mark.parametrize("hidden_cluster", [False, True])
    def test_population_rule_recovers_exact_set(self, n_clients, eta, hidden_cluster):
        # exact inputs: benign pairs are zero blocks, mixed pairs carry signal;
        # contaminated-contaminated pairs may cancel entirely (hidden cluster)
        benign = list(range(int(round(eta * n_clients))))
        contaminated = [k for k in range(n_clients) if k not in benign]
        norms = np.zeros(n_pairs(n_clients))
        for pair in all_pairs(n_clients):
            j_bad = pair.j in contaminated
            k_bad = pair.k in contaminated
            if j_bad and k_bad:
                norms[pair.flat] = 0.0 if hidden_cluster else 7.0
            elif j_bad or k_bad:
                norms[pair.flat] = 5.0
        s = stacked_from_norms(norms, n_clients)
        lo = (len(contaminated) - 1) / (n_clients - 1)
        hi = (len(benign) - 1) / (n_clients - 1)
        assert lo < hi
        for alpha in (max(0.5, np.nextafter(lo, 1.0)), hi, 0.5 * (max(0.5, lo) + hi)):
            result = vote_set(s, DetectionConfig(alpha=float(alpha), tau=1.0))
            assert result.collaborative_set == tuple(benign)

    def test_vote_fraction_monotone_in_tau(self):
        rng = np.random.default_rng(11)
        norms = rng.uniform(0, 3, size=n_pairs(7))
        s = stacked_from_norms(norms, 7)
        previous = np.zeros(7)
        for tau in np.linspace(0, 3.5, 15):
            fractions = vote_set(s, DetectionConfig(tau=float(tau))).vote_fractions
            assert (fractions >= previous - 1e-15).all()
            previous = fractions

    def test_gap_mode_on_separated_clusters(self):
        n_clients = 6
        benign = [0, 1, 2, 3]
        norms = np.zeros(n_pairs(n_clients))
        for pair in all_pairs(n_clients):
            if pair.j not in benign or pair.k not in benign:
                norms[pair.flat] = 4.0 + 0.01 * pair.flat
        s = stacked_from_norms(norms, n_clients)
        result = vote_set(s, DetectionConfig(alpha=0.5))
        assert result.collaborative_set == tuple(benign)
        assert 0 < result.tau_used < 4.0

    def test_json_payload(self):
        s = stacked_from_norms(np.zeros(n_pairs(3)), 3)
        payload = vote_set(s, DetectionConfig()).to_json_dict()
        assert set(payload) == {
            "collaborative_set",
            "tau_used",
            "vote_fractions",
            "block_norms",
        }


class TestDetectionConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"alpha": 0.4},
            {"alpha": 1.0},
            {"tau": -0.5},
            {"eps_abs": 0.0},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ConfigError):
            DetectionConfig(**kwargs)
