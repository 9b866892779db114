"""Multi-response regression simulation harness.

Generates per-client data Y = W X + E where every benign client's weight
matrix is a common backbone plus a rank-r adapter sharing one row factor,
fits local least-squares estimates, and runs the full pipeline against them
over seeded Monte Carlo replicates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import textio
from .decomposition import projector_distance, projector_from_rows
from .exceptions import ClairError, ConfigError, IllPosedError
from .metrics import frob_sq_error, set_metrics
from .pipeline import ClairConfig, run_pipeline
from .refinement import fedavg, oracle_fedavg

METHODS = ("local", "clair", "fedavg", "oracle_fedavg")


def substream(base_seed: int, index: int) -> np.random.Generator:
    """Independent counter-based RNG stream for one replicate.

    Philox streams keyed by (base_seed, index) are stable regardless of how
    many replicates run, or in which order, so parallel execution cannot
    change results.
    """
    seq = np.random.SeedSequence(entropy=base_seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class SimConfig:
    """Scenario dimensions and generation knobs for one regime."""

    p: int
    q: int
    n: int
    n_clients: int
    rank: int = 2
    contamination_frac: float = 0.4
    signal_scale: float = 0.8
    contamination_levels: tuple[float, ...] = (3.0, 4.0, 5.0, 6.0)
    ar1_rho: float = 0.25
    ar1_scale: float = 1.0
    replicates: int = 100
    base_seed: int = 0
    orthonormal_rows: bool = False

    def __post_init__(self):
        if min(self.p, self.q, self.n, self.n_clients, self.rank) < 1:
            raise ConfigError("dimensions must be positive")
        if self.rank >= self.p:
            raise ConfigError(f"rank {self.rank} must be below p={self.p}")
        if not 0.0 <= self.contamination_frac < 1.0:
            raise ConfigError("contamination_frac must lie in [0, 1)")
        if self.n <= self.p:
            raise ConfigError(
                f"need n > p for well-posed least squares, got n={self.n}, p={self.p}"
            )
        if not abs(self.ar1_rho) < 1:
            raise ConfigError("ar1_rho must satisfy |rho| < 1")
        if self.ar1_scale <= 0:
            raise ConfigError("ar1_scale must be positive")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")

    @property
    def n_contaminated(self) -> int:
        return round(self.contamination_frac * self.n_clients)

    def to_json_dict(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "n": self.n,
            "n_clients": self.n_clients,
            "rank": self.rank,
            "contamination_frac": self.contamination_frac,
            "signal_scale": self.signal_scale,
            "contamination_levels": list(self.contamination_levels),
            "ar1_rho": self.ar1_rho,
            "ar1_scale": self.ar1_scale,
            "replicates": self.replicates,
            "base_seed": self.base_seed,
            "orthonormal_rows": self.orthonormal_rows,
        }


@dataclass(frozen=True)
class SimScenario:
    """One realized draw: true weights, benign labels, and client data."""

    w0: np.ndarray
    row_factor: np.ndarray
    b_factors: dict[int, np.ndarray]
    true_weights: list[np.ndarray]
    benign: tuple[int, ...]
    contamination_scale: float
    x: list[np.ndarray]
    y: list[np.ndarray]

    @property
    def n_clients(self) -> int:
        return len(self.true_weights)


def ar1_cov(q: int, rho: float, scale: float) -> np.ndarray:
    """AR(1) covariance: scale^2 * rho^|i-j|."""
    if not abs(rho) < 1:
        raise ConfigError(f"|rho| must be < 1, got {rho}")
    if scale <= 0:
        raise ConfigError(f"scale must be positive, got {scale}")
    idx = np.arange(q)
    return scale**2 * rho ** np.abs(idx[:, None] - idx[None, :])


def gen_scenario(cfg: SimConfig, rng: np.random.Generator | int) -> SimScenario:
    """Draw one scenario.

    Benign clients get W0 + signal_scale * B_k A with a shared row factor A;
    contaminated clients replace the adapter with a flat uniform perturbation
    scaled so its expected off-subspace energy is comparable across
    dimensions. One contamination level c is drawn per scenario.
    """
    if not isinstance(rng, np.random.Generator):
        rng = substream(int(rng), 0)
    p, q, r = cfg.p, cfg.q, cfg.rank
    w0 = rng.uniform(-1.0, 1.0, size=(q, p))
    row_factor = rng.uniform(-1.0, 1.0, size=(r, p))
    if cfg.orthonormal_rows:
        qmat, _ = np.linalg.qr(row_factor.T)
        row_factor = qmat.T
    order = rng.permutation(cfg.n_clients)
    contaminated = set(int(c) for c in order[: cfg.n_contaminated])
    benign = tuple(k for k in range(cfg.n_clients) if k not in contaminated)
    c_level = float(rng.choice(np.asarray(cfg.contamination_levels)))

    chol = np.linalg.cholesky(ar1_cov(q, cfg.ar1_rho, cfg.ar1_scale))
    b_factors: dict[int, np.ndarray] = {}
    true_weights: list[np.ndarray] = []
    xs: list[np.ndarray] = []
    ys: list[np.ndarray] = []
    pert_scale = c_level / math.sqrt(q * (p - r))
    for k in range(cfg.n_clients):
        if k in contaminated:
            w = w0 + pert_scale * rng.uniform(-1.0, 1.0, size=(q, p))
        else:
            b = rng.uniform(-1.0, 1.0, size=(q, r))
            b_factors[k] = b
            w = w0 + cfg.signal_scale * b @ row_factor
        x = rng.standard_normal((p, cfg.n))
        noise = chol @ rng.standard_normal((q, cfg.n))
        true_weights.append(w)
        xs.append(x)
        ys.append(w @ x + noise)
    return SimScenario(
        w0, row_factor, b_factors, true_weights, benign, c_level, xs, ys
    )


def ols_fit(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares coefficient matrix W with Y ~ W X (X is p x n)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    p, n = x.shape
    if n < p:
        raise IllPosedError(f"need at least p={p} samples, got n={n}")
    gram = x @ x.T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e12:
        raise IllPosedError(f"covariate Gram matrix is ill conditioned ({cond:.2e})")
    return np.linalg.solve(gram, x @ y.T).T


@dataclass(frozen=True)
class ReplicateReport:
    """Everything measured on one replicate, or its failure record."""

    replicate: int
    base_seed: int
    n_clients: int
    contamination_scale: float = float("nan")
    benign: tuple[int, ...] = ()
    method_errors: dict[str, list[float]] = field(default_factory=dict)
    collaborative_set: tuple[int, ...] = ()
    detection_accuracy: float = float("nan")
    contamination_recall: float = float("nan")
    projector_error: float = float("nan")
    tau_used: float = float("nan")
    solver_iterations: int = 0
    solver_converged: bool = False
    error: str | None = None

    def mean_error(self, method: str) -> float:
        return float(np.mean(self.method_errors[method]))

    def benign_mean_error(self, method: str) -> float:
        vals = [self.method_errors[method][k] for k in self.benign]
        return float(np.mean(vals))

    def to_json_dict(self) -> dict:
        return {
            "replicate": self.replicate,
            "base_seed": self.base_seed,
            "n_clients": self.n_clients,
            "contamination_scale": self.contamination_scale,
            "benign": list(self.benign),
            "method_errors": self.method_errors,
            "collaborative_set": list(self.collaborative_set),
            "detection_accuracy": self.detection_accuracy,
            "contamination_recall": self.contamination_recall,
            "projector_error": self.projector_error,
            "tau_used": self.tau_used,
            "solver_iterations": self.solver_iterations,
            "solver_converged": self.solver_converged,
            "error": self.error,
        }


def run_replicate(
    sim_cfg: SimConfig,
    clair_cfg: ClairConfig,
    replicate: int,
    use_true_weights: bool = False,
) -> ReplicateReport:
    """Generate, fit, decompose, detect, refine, and score one replicate.

    ``use_true_weights`` feeds the true coefficient matrices to the pipeline
    instead of least-squares fits (the infinite-sample limit). Failures
    surface as a report with ``error`` set rather than an exception.
    """
    try:
        rng = substream(sim_cfg.base_seed, replicate)
        scenario = gen_scenario(sim_cfg, rng)
        if use_true_weights:
            w_hat = [w.copy() for w in scenario.true_weights]
        else:
            w_hat = [ols_fit(x, y) for x, y in zip(scenario.x, scenario.y)]
        result = run_pipeline(w_hat, clair_cfg)

        true_projector = projector_from_rows(scenario.row_factor)
        proj_err = projector_distance(result.decomposition.projector, true_projector)

        all_ids = range(sim_cfg.n_clients)
        fedavg_all = fedavg(w_hat, all_ids)
        oracle = oracle_fedavg(w_hat, scenario.benign)
        clair_weights = {k: result.refinement.weight(k) for k in all_ids}
        method_estimates = {
            "local": {k: w_hat[k] for k in all_ids},
            "clair": clair_weights,
            "fedavg": {k: fedavg_all for k in all_ids},
            "oracle_fedavg": oracle,
        }
        method_errors = {
            name: [
                frob_sq_error(est[k], scenario.true_weights[k]) for k in all_ids
            ]
            for name, est in method_estimates.items()
        }
        accuracy, recall = set_metrics(
            result.detection.collaborative_set, scenario.benign, sim_cfg.n_clients
        )
        return ReplicateReport(
            replicate=replicate,
            base_seed=sim_cfg.base_seed,
            n_clients=sim_cfg.n_clients,
            contamination_scale=scenario.contamination_scale,
            benign=scenario.benign,
            method_errors=method_errors,
            collaborative_set=result.detection.collaborative_set,
            detection_accuracy=accuracy,
            contamination_recall=recall,
            projector_error=proj_err,
            tau_used=result.detection.tau_used,
            solver_iterations=result.decomposition.trace.iterations,
            solver_converged=result.decomposition.trace.converged,
        )
    except ClairError as exc:
        return ReplicateReport(
            replicate=replicate,
            base_seed=sim_cfg.base_seed,
            n_clients=sim_cfg.n_clients,
            error=f"{type(exc).__name__}: {exc}",
        )


def _replicate_job(args) -> ReplicateReport:
    sim_cfg, clair_cfg, rep = args
    return run_replicate(sim_cfg, clair_cfg, rep)


def run_batch(
    sim_cfg: SimConfig, clair_cfg: ClairConfig, jobs: int = 1
) -> list[ReplicateReport]:
    """All replicates of one regime, optionally across processes.

    Each replicate owns its RNG substream, so the result is identical for
    any ``jobs``.
    """
    tasks = [(sim_cfg, clair_cfg, rep) for rep in range(sim_cfg.replicates)]
    if jobs <= 1 or sim_cfg.replicates == 1:
        return [_replicate_job(t) for t in tasks]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_replicate_job, tasks))


def dump_scenario(
    directory: str | Path, cfg: SimConfig, scenario: SimScenario, replicate: int = 0
) -> None:
    """Write a scenario's matrices and a replay manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": cfg.to_json_dict(),
        "replicate": replicate,
        "benign": list(scenario.benign),
        "contamination_scale": scenario.contamination_scale,
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    textio.save_matrix(directory / "backbone.mat", scenario.w0)
    textio.save_matrix(directory / "row_factor.mat", scenario.row_factor)
    for k, w in enumerate(scenario.true_weights):
        textio.save_matrix(directory / f"true_client_{k}.mat", w)


def load_scenario(directory: str | Path) -> tuple[SimConfig, SimScenario]:
    """Regenerate a dumped scenario from its manifest and verify the dump."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    raw = dict(manifest["config"])
    raw["contamination_levels"] = tuple(raw["contamination_levels"])
    cfg = SimConfig(**raw)
    scenario = gen_scenario(cfg, substream(cfg.base_seed, int(manifest["replicate"])))
    stored_w0 = textio.load_matrix(directory / "backbone.mat")
    if not np.array_equal(stored_w0, scenario.w0):
        raise ClairError(
            f"scenario in {directory} does not match its manifest seed"
        )
    return cfg, scenario


def ols_noise_level(cfg: SimConfig) -> float:
    """Expected squared error of one local least-squares fit.

    Useful as a scale reference: trace of the noise covariance times the
    expected trace of the inverse covariate Gram, q*p/(n-p-1) for white
    covariates and unit-scale noise.
    """
    tr_noise = cfg.q * cfg.ar1_scale**2
    return tr_noise * cfg.p / (cfg.n - cfg.p - 1)
