from __future__ import annotations

import json
import warnings

import numpy as np
import pytest

from clair.contrast import build_contrast
from clair.decomposition import canonical_split, projector_from_rows, row_projector
from clair.exceptions import ClairError, ConfigError, IllPosedError
from clair.metrics import DegenerateRecallWarning
from clair.pipeline import ClairConfig
from clair.simulation import (
    SimConfig,
    ar1_cov,
    dump_scenario,
    gen_scenario,
    load_scenario,
    ols_fit,
    ols_noise_level,
    run_batch,
    run_replicate,
    substream,
)

SMALL = SimConfig(p=6, q=5, n=40, n_clients=5, replicates=3, base_seed=7)


class TestAr1Cov:
    def test_zero_correlation(self):
        np.testing.assert_array_equal(ar1_cov(4, 0.0, 2.0), 4.0 * np.eye(4))

    def test_reference_matrix(self):
        np.testing.assert_allclose(
            ar1_cov(2, 0.25, 1.0), [[1.0, 0.25], [0.25, 1.0]]
        )

    def test_empirical_moments(self, rng):
        cov = ar1_cov(4, 0.25, 1.0)
        chol = np.linalg.cholesky(cov)
        draws = chol @ rng.standard_normal((4, 100_000))
        sample = draws @ draws.T / 100_000
        np.testing.assert_allclose(sample, cov, atol=0.02)

    def test_validation(self):
        with pytest.raises(ConfigError):
            ar1_cov(3, 1.0, 1.0)
        with pytest.raises(ConfigError):
            ar1_cov(3, 0.2, 0.0)


class TestGenScenario:
    def test_no_contamination_rows_stay_in_shared_space(self):
        cfg = SimConfig(p=8, q=4, n=30, n_clients=5, contamination_frac=0.0,
                        replicates=1, base_seed=1)
        sc = gen_scenario(cfg, substream(1, 0))
        assert sc.benign == tuple(range(5))
        d = build_contrast(sc.true_weights)
        pa = projector_from_rows(sc.row_factor)
        _, orth = canonical_split(d, pa)
        assert np.abs(orth.data).max() < 1e-10

    def test_fixed_seed_bitwise_identical(self):
        a = gen_scenario(SMALL, substream(SMALL.base_seed, 2))
        b = gen_scenario(SMALL, substream(SMALL.base_seed, 2))
        np.testing.assert_array_equal(a.w0, b.w0)
        np.testing.assert_array_equal(a.row_factor, b.row_factor)
        assert a.benign == b.benign
        assert a.contamination_scale == b.contamination_scale
        for wa, wb in zip(a.true_weights, b.true_weights):
            np.testing.assert_array_equal(wa, wb)
        for xa, xb in zip(a.x, b.x):
            np.testing.assert_array_equal(xa, xb)
        for ya, yb in zip(a.y, b.y):
            np.testing.assert_array_equal(ya, yb)

    def test_contamination_moment_oracle(self):
        # E||W_contaminated - W0||_F^2 = c^2 * p / (3 (p - r))
        cfg = SimConfig(p=10, q=4, n=12, n_clients=5, rank=2,
                        contamination_levels=(3.0,), replicates=1, base_seed=0)
        total, count = 0.0, 0
        for i in range(5000):
            sc = gen_scenario(cfg, substream(0, i))
            for k in range(cfg.n_clients):
                if k not in sc.benign:
                    total += float(np.sum((sc.true_weights[k] - sc.w0) ** 2))
                    count += 1
        assert count == 10_000
        assert total / count == pytest.approx(3.75, rel=0.03)

    def test_benign_structure(self):
        sc = gen_scenario(SMALL, substream(SMALL.base_seed, 0))
        for k in sc.benign:
            expected = sc.w0 + 0.8 * sc.b_factors[k] @ sc.row_factor
            np.testing.assert_allclose(sc.true_weights[k], expected, atol=1e-12)

    def test_contaminated_count(self):
        cfg = SimConfig(p=6, q=4, n=30, n_clients=10, contamination_frac=0.4,
                        replicates=1, base_seed=0)
        sc = gen_scenario(cfg, substream(0, 0))
        assert len(sc.benign) == 6

    def test_orthonormal_rows_flag(self):
        cfg = SimConfig(p=8, q=4, n=30, n_clients=4, orthonormal_rows=True,
                        replicates=1, base_seed=5)
        sc = gen_scenario(cfg, substream(5, 0))
        np.testing.assert_allclose(
            sc.row_factor @ sc.row_factor.T, np.eye(cfg.rank), atol=1e-12
        )


class TestOlsFit:
    def test_identity_covariates(self, rng):
        y = rng.normal(size=(3, 4))
        np.testing.assert_allclose(ols_fit(np.eye(4), y), y, atol=1e-12)

    def test_noiseless_exact_interpolation(self, rng):
        w = rng.normal(size=(3, 5))
        x = rng.standard_normal((5, 40))
        np.testing.assert_allclose(ols_fit(x, w @ x), w, atol=1e-10)

    def test_residual_orthogonality(self, rng):
        x = rng.standard_normal((5, 60))
        y = rng.normal(size=(4, 60))
        w = ols_fit(x, y)
        np.testing.assert_allclose((y - w @ x) @ x.T, 0.0, atol=1e-8)

    def test_singular_gram_rejected(self, rng):
        x = np.zeros((4, 20))
        x[:2] = rng.standard_normal((2, 20))
        with pytest.raises(IllPosedError):
            ols_fit(x, rng.normal(size=(3, 20)))

    def test_too_few_samples(self, rng):
        with pytest.raises(IllPosedError):
            ols_fit(rng.standard_normal((6, 5)), rng.normal(size=(2, 5)))


class TestSimConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"p": 6, "q": 5, "n": 6, "n_clients": 4},
            {"p": 6, "q": 5, "n": 40, "n_clients": 4, "rank": 6},
            {"p": 6, "q": 5, "n": 40, "n_clients": 4, "contamination_frac": 1.0},
            {"p": 6, "q": 5, "n": 40, "n_clients": 4, "ar1_rho": 1.0},
            {"p": 6, "q": 5, "n": 40, "n_clients": 4, "replicates": 0},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ConfigError):
            SimConfig(**kwargs)

    def test_expected_local_error(self):
        cfg = SimConfig(p=10, q=10, n=100, n_clients=10)
        assert ols_noise_level(cfg) == pytest.approx(100 / 89)


class TestRunReplicate:
    def test_noiseless_fixed_point(self):
        cfg = SimConfig(p=8, q=4, n=30, n_clients=5, contamination_frac=0.0,
                        replicates=1, base_seed=3)
        clair_cfg = ClairConfig(lambda_c1=0.5, lambda_c2=2.5, max_iters=500)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateRecallWarning)
            report = run_replicate(cfg, clair_cfg, 0, use_true_weights=True)
        assert report.error is None
        assert report.collaborative_set == tuple(range(5))
        assert max(report.method_errors["clair"]) < 1e-12
        assert report.detection_accuracy == 1.0

    def test_report_determinism(self):
        clair_cfg = ClairConfig(lambda_c1=1.0, lambda_c2=5.0, max_iters=300)
        r1 = run_replicate(SMALL, clair_cfg, 1)
        r2 = run_replicate(SMALL, clair_cfg, 1)
        assert json.dumps(r1.to_json_dict(), sort_keys=True) == json.dumps(
            r2.to_json_dict(), sort_keys=True
        )

    def test_failure_recorded_not_raised(self):
        clair_cfg = ClairConfig(lambda_c1=1.0, lambda_c2=5.0, rank=50)
        report = run_replicate(SMALL, clair_cfg, 0)
        assert report.error is not None
        assert "Rank" in report.error

    def test_mean_error_accessors(self):
        clair_cfg = ClairConfig(lambda_c1=1.0, lambda_c2=5.0, max_iters=300)
        report = run_replicate(SMALL, clair_cfg, 0)
        assert report.error is None
        for method in ("local", "clair", "fedavg", "oracle_fedavg"):
            assert report.mean_error(method) >= 0
            assert report.benign_mean_error(method) >= 0


class TestRunBatch:
    def test_sequential_matches_parallel(self):
        cfg = SimConfig(p=5, q=4, n=30, n_clients=4, replicates=4, base_seed=9)
        clair_cfg = ClairConfig(lambda_c1=1.0, lambda_c2=5.0, max_iters=200)
        seq = run_batch(cfg, clair_cfg, jobs=1)
        par = run_batch(cfg, clair_cfg, jobs=2)
        assert len(seq) == len(par) == 4
        for a, b in zip(seq, par):
            assert json.dumps(a.to_json_dict(), sort_keys=True) == json.dumps(
                b.to_json_dict(), sort_keys=True
            )

    def test_fedavg_worse_than_local_under_contamination(self):
        cfg = SimConfig(p=6, q=6, n=50, n_clients=6, contamination_frac=0.4,
                        replicates=8, base_seed=21)
        clair_cfg = ClairConfig(lambda_c1=1.0, lambda_c2=5.0, max_iters=500)
        reports = [r for r in run_batch(cfg, clair_cfg) if r.error is None]
        fed = np.mean([r.mean_error("fedavg") for r in reports])
        local = np.mean([r.mean_error("local") for r in reports])
        assert fed > local


def test_scenario_dump_load_round_trip(tmp_path):
    sc = gen_scenario(SMALL, substream(SMALL.base_seed, 1))
    dump_scenario(tmp_path / "scenario", SMALL, sc, replicate=1)
    cfg2, sc2 = load_scenario(tmp_path / "scenario")
    assert cfg2 == SMALL
    np.testing.assert_array_equal(sc.w0, sc2.w0)
    for a, b in zip(sc.true_weights, sc2.true_weights):
        np.testing.assert_array_equal(a, b)

    # tampered dump is rejected
    bad = tmp_path / "scenario" / "manifest.json"
    manifest = json.loads(bad.read_text())
    manifest["replicate"] = 2
    bad.write_text(json.dumps(manifest))
    with pytest.raises(ClairError):
        load_scenario(tmp_path / "scenario")


def test_projected_error_shrinks_with_more_clients():
    # uniform bound on per-block error of the orthogonal component tightens
    # as clients accumulate, provided per-client information keeps pace
    # (n grows with K so the aggregate noise level stays bounded)
    clair_cfg = ClairConfig(lambda_c1=1.0, lambda_c2=5.0, max_iters=2000)
    sup_by_k = {}
    for n_clients in (4, 16):
        sups = []
        for rep in range(12):
            cfg = SimConfig(p=10, q=10, n=50 * n_clients, n_clients=n_clients,
                            replicates=1, base_seed=31)
            sc = gen_scenario(cfg, substream(31, rep))
            w_hat = [ols_fit(x, y) for x, y in zip(sc.x, sc.y)]
            d_hat = build_contrast(w_hat)
            d_true = build_contrast(sc.true_weights)
            pa = projector_from_rows(sc.row_factor)
            from clair.solver import solve

            l_hat, _, _ = solve(d_hat, clair_cfg.solver_config(n_clients))
            pv = row_projector(l_hat, 2)
            _, orth_hat = canonical_split(d_hat, pv)
            _, orth_true = canonical_split(d_true, pa)
            diff = orth_hat.data - orth_true.data
            blocks = diff.reshape(d_hat.n_pairs, cfg.q, cfg.p)
            sups.append(float(np.sqrt((blocks**2).sum(axis=(1, 2))).max()))
        sup_by_k[n_clients] = float(np.median(sups))
    assert sup_by_k[16] < sup_by_k[4]
