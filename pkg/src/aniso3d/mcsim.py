"""Seeded Monte Carlo simulation of soft random geometric graphs.

Nodes are dropped uniformly in a cuboid (optionally periodic), each gets a
uniformly random antenna orientation, and every unordered pair is linked
independently with probability ``exp(-beta r**eta / (G_i G_j))``.

Random streams are derived from ``(master_seed, trial, purpose)`` with a
counter-based generator, so a trial's outcome never depends on which worker
ran it or in what order.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import sparse, special
from scipy.sparse import csgraph
from scipy.spatial.transform import Rotation

from .analytic import PathLossModel, homogeneous_mass
from .boundary import Domain, default_workers
from .gain import GainPattern, MultiLobe, pattern_from_dict
from .specfn import DomainError

__all__ = [
    "SimConfig",
    "NetworkSample",
    "AdjacencyGraph",
    "ConnectivityReport",
    "EnsembleReport",
    "SweepRow",
    "pattern_label",
    "trial_generator",
    "sample_network",
    "link_probability",
    "pair_link_probabilities",
    "sample_graph",
    "analyze",
    "run_trial",
    "run_ensemble",
    "sweep_eta",
    "torus_safe_beta",
    "derive_seed",
]

# purposes for per-trial random streams
_POSITIONS, _ORIENTATIONS, _LINKS = 0, 1, 2


@dataclass(frozen=True)
class SimConfig:
    """One simulation setup.  ``pattern_rx`` defaults to ``pattern``."""

    domain: Domain
    n_nodes: int
    model: PathLossModel
    pattern: GainPattern
    trials: int = 1
    master_seed: int = 0
    pattern_rx: GainPattern | None = None

    def __post_init__(self):
        if self.domain.kind != "cuboid":
            raise DomainError("simulation needs a 3D cuboid domain")
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 2:
            raise DomainError("n_nodes must be an integer >= 2")
        if int(self.trials) != self.trials or self.trials < 1:
            raise DomainError("trials must be an integer >= 1")
        if not 0 <= int(self.master_seed) < 2**64:
            raise DomainError("master_seed must fit in 64 unsigned bits")

    @property
    def rx(self) -> GainPattern:
        return self.pattern if self.pattern_rx is None else self.pattern_rx

    @property
    def density(self) -> float:
        return self.n_nodes / self.domain.volume

    @property
    def pair_density(self) -> float:
        """``(N - 1) / V``: the density of partners seen by one node."""
        return (self.n_nodes - 1) / self.domain.volume

    def with_(self, **changes) -> "SimConfig":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(changes)
        return SimConfig(**d)

    def to_dict(self) -> dict[str, Any]:
        out = {
            "domain": self.domain.to_dict(),
            "n_nodes": int(self.n_nodes),
            "eta": self.model.eta,
            "beta": self.model.beta,
            "pattern": self.pattern.to_dict(),
            "trials": int(self.trials),
            "master_seed": int(self.master_seed),
        }
        if self.pattern_rx is not None:
            out["pattern_rx"] = self.pattern_rx.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SimConfig":
        rx = d.get("pattern_rx")
        return cls(
            domain=Domain.from_dict(d["domain"]),
            n_nodes=int(d["n_nodes"]),
            model=PathLossModel(float(d.get("eta", 2.0)), float(d.get("beta", 1.0))),
            pattern=pattern_from_dict(d["pattern"]),
            trials=int(d.get("trials", 1)),
            master_seed=int(d.get("master_seed", 0)),
            pattern_rx=None if rx is None else pattern_from_dict(rx),
        )


@dataclass(frozen=True)
class NetworkSample:
    positions: np.ndarray
    orientations: np.ndarray  # boresight unit vectors, (N, 3)
    rotations: np.ndarray | None = None  # body-to-world matrices for multi-lobe nodes

    @property
    def n(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class AdjacencyGraph:
    """Undirected simple graph stored as an ``(E, 2)`` array with ``i < j``."""

    n: int
    edges: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (np.any(e[:, 0] >= e[:, 1]) or e.min() < 0 or e.max() >= self.n):
            raise DomainError("edges must be pairs i < j of node indices")
        object.__setattr__(self, "edges", e)

    @classmethod
    def from_pairs(cls, n: int, pairs) -> "AdjacencyGraph":
        e = np.sort(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), axis=1)
        e = np.unique(e[e[:, 0] != e[:, 1]], axis=0)
        return cls(n, e)

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def to_sparse(self) -> sparse.csr_matrix:
        i, j = self.edges.T
        data = np.ones(self.n_edges, dtype=np.int8)
        return sparse.coo_matrix((data, (i, j)), shape=(self.n, self.n)).tocsr()


@dataclass(frozen=True)
class ConnectivityReport:
    n_nodes: int
    mean_degree: float
    degree_histogram: np.ndarray
    isolated_fraction: float
    fully_connected: bool
    n_components: int
    pair_link_fraction: float


@dataclass(frozen=True)
class EnsembleReport:
    """Trial averages with standard errors (``nan`` for a single trial)."""

    config: SimConfig
    trials: int
    mean_degree: float
    mean_degree_stderr: float
    isolated_fraction: float
    isolated_fraction_stderr: float
    pair_link_fraction: float
    pair_link_fraction_stderr: float
    p_fc: float
    p_fc_stderr: float
    degree_histogram: np.ndarray = field(repr=False)

    @property
    def mean_degree_over_rho(self) -> float:
        return self.mean_degree / self.config.pair_density

    @property
    def mean_degree_over_rho_stderr(self) -> float:
        return self.mean_degree_stderr / self.config.pair_density

    def degree_distribution(self) -> np.ndarray:
        return self.degree_histogram / self.degree_histogram.sum()


def pattern_label(pattern: GainPattern) -> str:
    d = pattern.to_dict()
    params = ",".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}"
                      for k, v in d.items() if k not in ("type", "directions"))
    return f"{d['type']}({params})" if params else d["type"]


def trial_generator(master_seed: int, trial: int, purpose: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(trial), int(purpose)))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(master_seed: int, *key: int) -> int:
    """A 64-bit seed for a sub-experiment, independent of its siblings."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def _needs_rotation(config: SimConfig) -> bool:
    return not (config.pattern.symmetric and config.rx.symmetric)


def sample_network(config: SimConfig, trial_index: int) -> NetworkSample:
    n = config.n_nodes
    lengths = np.asarray(config.domain.lengths)
    pos = trial_generator(config.master_seed, trial_index, _POSITIONS).uniform(size=(n, 3)) * lengths
    rng = trial_generator(config.master_seed, trial_index, _ORIENTATIONS)
    if _needs_rotation(config):
        rot = Rotation.random(n, random_state=rng).as_matrix()
        return NetworkSample(pos, rot[:, :, 2].copy(), rot)
    cos_t = rng.uniform(-1.0, 1.0, size=n)
    phi = rng.uniform(0.0, 2.0 * math.pi, size=n)
    sin_t = np.sqrt(1.0 - cos_t**2)
    v = np.stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t], axis=1)
    return NetworkSample(pos, v)


def _displacement(domain: Domain, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    if domain.periodic:
        L = np.asarray(domain.lengths)
        d = d - L * np.round(d / L)
    return d


def _gain_towards(pattern: GainPattern, boresight, rotation, u) -> np.ndarray:
    if pattern.symmetric:
        cos_chi = np.clip(np.einsum("...k,...k->...", boresight, u), -1.0, 1.0)
        return pattern.gain_theta(np.arccos(cos_chi))
    # world direction into the node's body frame: R^T u
    body = np.einsum("...kj,...k->...j", rotation, u)
    return pattern.gain(body)


def _pair_probabilities(config: SimConfig, net: NetworkSample, i, j) -> np.ndarray:
    d = _displacement(config.domain, net.positions[i], net.positions[j])
    r = np.linalg.norm(d, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = d / r[..., None]
    # coincident nodes: any direction works as long as both ends agree
    u = np.where((r > 0)[..., None], u, net.orientations[i])
    rot_i = None if net.rotations is None else net.rotations[i]
    rot_j = None if net.rotations is None else net.rotations[j]
    g_i = _gain_towards(config.pattern, net.orientations[i], rot_i, u)
    g_j = _gain_towards(config.rx, net.orientations[j], rot_j, -u)
    return config.model.link_probability(r, g_i * g_j)


def link_probability(config: SimConfig, net: NetworkSample, i: int, j: int) -> float:
    """Link probability of one pair; the lower index plays the transmitter."""
    if i == j:
        raise DomainError("link_probability needs two distinct nodes")
    a, b = min(i, j), max(i, j)
    return float(_pair_probabilities(config, net, np.array([a]), np.array([b]))[0])


def pair_link_probabilities(config: SimConfig, net: NetworkSample) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Probabilities for all pairs ``i < j`` in ``np.triu_indices`` order."""
    i, j = np.triu_indices(net.n, 1)
    return i, j, _pair_probabilities(config, net, i, j)


def sample_graph(net: NetworkSample, config: SimConfig, trial_index: int) -> AdjacencyGraph:
    i, j, p = pair_link_probabilities(config, net)
    u = trial_generator(config.master_seed, trial_index, _LINKS).random(p.shape[0])
    keep = u < p
    return AdjacencyGraph(net.n, np.stack([i[keep], j[keep]], axis=1))


def analyze(graph: AdjacencyGraph) -> ConnectivityReport:
    deg = graph.degrees()
    hist = np.bincount(deg, minlength=1)
    n = graph.n
    n_comp = int(csgraph.connected_components(graph.to_sparse(), directed=False)[0])
    return ConnectivityReport(
        n_nodes=n,
        mean_degree=float(deg.mean()),
        degree_histogram=hist,
        isolated_fraction=float(hist[0]) / n,
        fully_connected=n_comp == 1,
        n_components=n_comp,
        pair_link_fraction=graph.n_edges / (n * (n - 1) / 2),
    )


def run_trial(config: SimConfig, trial_index: int) -> ConnectivityReport:
    net = sample_network(config, trial_index)
    return analyze(sample_graph(net, config, trial_index))


def _mean_and_stderr(x: np.ndarray) -> tuple[float, float]:
    m = float(x.mean())
    if x.size < 2:
        return m, math.nan
    return m, float(x.std(ddof=1) / math.sqrt(x.size))


def run_ensemble(config: SimConfig, workers: int | None = None) -> EnsembleReport:
    """Run ``config.trials`` trials and fold them in trial order."""
    workers = default_workers() if workers is None else max(1, int(workers))
    idx = range(config.trials)
    if workers > 1 and config.trials > 1:
        with ThreadPoolExecutor(min(workers, config.trials)) as pool:
            reports = list(pool.map(lambda t: run_trial(config, t), idx))
    else:
        reports = [run_trial(config, t) for t in idx]

    width = max(r.degree_histogram.size for r in reports)
    hist = np.zeros(width, dtype=np.int64)
    for r in reports:
        hist[: r.degree_histogram.size] += r.degree_histogram
    md = _mean_and_stderr(np.array([r.mean_degree for r in reports]))
    iso = _mean_and_stderr(np.array([r.isolated_fraction for r in reports]))
    plf = _mean_and_stderr(np.array([r.pair_link_fraction for r in reports]))
    fc = _mean_and_stderr(np.array([float(r.fully_connected) for r in reports]))
    return EnsembleReport(config, config.trials, *md, *iso, *plf, *fc, degree_histogram=hist)


@dataclass(frozen=True)
class SweepRow:
    eta: float
    pattern: str
    mean_degree_over_rho: float
    stderr: float
    analytic_mass: float
    p_fc: float


def sweep_eta(
    config: SimConfig,
    eta_values: Sequence[float],
    patterns: Sequence[GainPattern] | None = None,
    workers: int | None = None,
) -> list[SweepRow]:
    """One ensemble per ``(eta, pattern)``; ``beta``, domain and ``N`` stay fixed.

    Every ensemble gets its own seed derived from ``config.master_seed`` and
    its position in the sweep, so rows are statistically independent.
    """
    if len(eta_values) == 0:
        raise DomainError("eta_values must be non-empty")
    pats = [config.pattern] if patterns is None else list(patterns)
    rows = []
    for a, eta in enumerate(eta_values):
        model = PathLossModel(float(eta), config.model.beta)
        for b, pat in enumerate(pats):
            cfg = config.with_(model=model, pattern=pat, pattern_rx=None,
                               master_seed=derive_seed(config.master_seed, a, b))
            rep = run_ensemble(cfg, workers)
            mass = homogeneous_mass(pat, pat, model).mass
            rows.append(SweepRow(float(eta), pattern_label(pat), rep.mean_degree_over_rho,
                                 rep.mean_degree_over_rho_stderr, mass, rep.p_fc))
    return rows


def torus_safe_beta(
    pattern_tx: GainPattern, pattern_rx: GainPattern, eta: float, half_side: float, tail: float = 1e-4
) -> float:
    """Smallest ``beta`` for which minimum-image truncation is harmless.

    Chosen so that even the strongest gain pair keeps all but ``tail`` of its
    radial connectivity inside the ball of radius ``half_side``.
    """
    if not 0 < tail < 1 or half_side <= 0:
        raise DomainError("need 0 < tail < 1 and half_side > 0")
    x = float(special.gammainccinv(3.0 / eta, tail))
    q = pattern_tx.max_gain() * pattern_rx.max_gain()
    return x * q / half_side**eta
