"""Continuous-time simulation of the two-species process on a closed segment.

Every bond carries the clocks of its two-site pair state; a (3,0) <-> (0,3)
swap moves two particles at once and is one event. Trials draw uniforms
from their own numpy Generator seeded by SeedSequence([master_seed,
trial_index]), so results do not depend on execution order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import stats

from .configspace import Config, _as_config, index_of
from .duality import AlphaRangeWarning, MeasureParams, duality_matrix
from .generator import GeneratorParams, global_generator, local_generator
from .reports import CheckReport, tolerance

__all__ = [
    "SimParams",
    "TrajectoryState",
    "RateTable",
    "ConjectureParams",
    "rate_table",
    "trial_rng",
    "next_event",
    "run_trajectory",
    "run_trials",
    "exact_evolution",
    "mc_duality_check",
    "occupation_times",
    "step_initial_condition",
    "step_ic_experiment",
    "StepICResult",
]

EXACT_MAX_L = 3
EDGE_MARGIN = 5


@dataclass(frozen=True)
class SimParams:
    L: int
    q: float
    n: int
    t_max: float
    trials: int = 1
    master_seed: int = 0

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("L must be >= 2")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.t_max < 0:
            raise ValueError("t_max must be >= 0")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        GeneratorParams(self.q, self.n)

    @property
    def generator_params(self) -> GeneratorParams:
        return GeneratorParams(self.q, self.n)

    def as_dict(self) -> dict:
        return {"L": self.L, "q": self.q, "n": self.n, "t_max": self.t_max,
                "trials": self.trials, "master_seed": self.master_seed}


@dataclass(frozen=True)
class TrajectoryState:
    config: Config
    time: float = 0.0
    event_count: int = 0


@dataclass(frozen=True)
class RateTable:
    """Outgoing transitions of each two-site pair state 4a+b.

    ``targets[k, j]`` and ``rates[k, j]`` for j < ``count[k]``; ``total[k]``
    is the bond's total exit rate.
    """

    targets: np.ndarray
    rates: np.ndarray
    count: np.ndarray
    total: np.ndarray


def rate_table(p: GeneratorParams) -> RateTable:
    M = local_generator(p).matrix
    targets = np.zeros((16, 16), dtype=np.int64)
    rates = np.zeros((16, 16))
    count = np.zeros(16, dtype=np.int64)
    for k in range(16):
        for j in range(16):
            if j != k and M[k, j] > 0:
                targets[k, count[k]] = j
                rates[k, count[k]] = M[k, j]
                count[k] += 1
    total = np.array([rates[k, : count[k]].sum() for k in range(16)])
    return RateTable(targets, rates, count, total)


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(trial_index)]))


def next_event(state: TrajectoryState, rates: RateTable, rng: np.random.Generator,
               t_max: float = math.inf) -> TrajectoryState:
    """One Gillespie step; a frozen state jumps straight to ``t_max``."""
    sites = list(state.config.sites)
    L = len(sites)
    bond_rates = np.array([rates.total[4 * sites[x] + sites[x + 1]] for x in range(L - 1)])
    total = float(bond_rates.sum())
    if total <= 0.0:
        return TrajectoryState(state.config, max(state.time, t_max), state.event_count)
    time = state.time + rng.exponential(1.0 / total)
    if time > t_max:
        return TrajectoryState(state.config, t_max, state.event_count)
    x = int(np.searchsorted(np.cumsum(bond_rates), rng.random() * total, side="right"))
    x = min(x, L - 2)
    k = 4 * sites[x] + sites[x + 1]
    r = rates.rates[k, : rates.count[k]]
    j = int(np.searchsorted(np.cumsum(r), rng.random() * rates.total[k], side="right"))
    new = int(rates.targets[k, min(j, rates.count[k] - 1)])
    sites[x], sites[x + 1] = divmod(new, 4)
    return TrajectoryState(Config(tuple(sites)), time, state.event_count + 1)


# compiled kernel -----------------------------------------------------------------------
#
# Bonds are kept in one list per pair state so the total rate is an exact
# sum of 16 terms. Each event consumes four uniforms: holding time, pair
# state, bond within that state, transition.


@njit(cache=True)
def _init_bonds(config, members, where, btype, counts):
    counts[:] = 0
    for b in range(config.shape[0] - 1):
        k = 4 * config[b] + config[b + 1]
        btype[b] = k
        where[b] = counts[k]
        members[k, counts[k]] = b
        counts[k] += 1


@njit(cache=True)
def _retype(b, config, members, where, btype, counts):
    old = btype[b]
    new = 4 * config[b] + config[b + 1]
    if old == new:
        return
    last = members[old, counts[old] - 1]
    members[old, where[b]] = last
    where[last] = where[b]
    counts[old] -= 1
    members[new, counts[new]] = b
    where[b] = counts[new]
    counts[new] += 1
    btype[b] = new


@njit(cache=True)
def _advance(config, members, where, btype, counts, targets, rates, ntarg, total_rate,
             time, t_max, u, margin):
    """Run until t_max, uniforms run out, or (margin > 0) an edge is reached.

    Returns (time, uniforms used, events, code): code 0 needs more
    uniforms, 1 reached t_max, 2 touched the edge margin.
    """
    L = config.shape[0]
    used = 0
    events = 0
    while True:
        if used + 4 > u.shape[0]:
            return time, used, events, 0
        total = 0.0
        for k in range(16):
            total += counts[k] * total_rate[k]
        if total <= 0.0:
            return t_max, used, events, 1
        dt = -math.log(1.0 - u[used]) / total
        if time + dt > t_max:
            return t_max, used + 1, events, 1
        time += dt
        target = u[used + 1] * total
        acc = 0.0
        k = -1
        for kk in range(16):
            w = counts[kk] * total_rate[kk]
            if w > 0.0:
                acc += w
                k = kk
                if target < acc:
                    break
        j = int(u[used + 2] * counts[k])
        if j >= counts[k]:
            j = counts[k] - 1
        b = members[k, j]
        target = u[used + 3] * total_rate[k]
        acc = 0.0
        new = targets[k, ntarg[k] - 1]
        for jj in range(ntarg[k]):
            acc += rates[k, jj]
            if target < acc:
                new = targets[k, jj]
                break
        config[b] = new // 4
        config[b + 1] = new % 4
        if b > 0:
            _retype(b - 1, config, members, where, btype, counts)
        _retype(b, config, members, where, btype, counts)
        if b + 2 < L:
            _retype(b + 1, config, members, where, btype, counts)
        used += 4
        events += 1
        if margin > 0:
            if config[b + 1] != 0 and b + 1 >= L - margin:
                return time, used, events, 2
            if config[b] != 3 and b < margin:
                return time, used, events, 2


class _Kernel:
    """Per-trial driver around the compiled kernel; refills uniforms in chunks."""

    def __init__(self, p: GeneratorParams, L: int):
        self.table = rate_table(p)
        self.L = L
        self.members = np.zeros((16, max(L - 1, 1)), dtype=np.int64)
        self.where = np.zeros(max(L - 1, 1), dtype=np.int64)
        self.btype = np.zeros(max(L - 1, 1), dtype=np.int64)
        self.counts = np.zeros(16, dtype=np.int64)

    def run(self, sites: np.ndarray, t_max: float, rng: np.random.Generator,
            margin: int = 0, chunk: int = 256) -> tuple[np.ndarray, float, int, bool]:
        config = np.array(sites, dtype=np.int64)
        _init_bonds(config, self.members, self.where, self.btype, self.counts)
        tab = self.table
        time, events = 0.0, 0
        if t_max <= 0:
            return config, 0.0, 0, False
        while True:
            u = rng.random(4 * chunk)
            time, _, ev, code = _advance(config, self.members, self.where, self.btype,
                                         self.counts, tab.targets, tab.rates, tab.count,
                                         tab.total, time, t_max, u, margin)
            events += ev
            if code == 1:
                return config, time, events, False
            if code == 2:
                return config, time, events, True
            chunk = min(2 * chunk, 1 << 16)


def run_trajectory(initial, sp: SimParams, trial_index: int) -> Config:
    """Configuration at ``sp.t_max`` for one trial."""
    c = _as_config(initial)
    if c.L != sp.L:
        raise ValueError(f"initial configuration has {c.L} sites, expected {sp.L}")
    kern = _Kernel(sp.generator_params, sp.L)
    final, _, _, _ = kern.run(np.array(c.sites), sp.t_max, trial_rng(sp.master_seed, trial_index))
    return Config(tuple(int(s) for s in final))


def run_trials(initial, sp: SimParams, first_trial: int = 0) -> np.ndarray:
    """Final configuration indices for trials first_trial .. first_trial + trials - 1."""
    c = _as_config(initial)
    kern = _Kernel(sp.generator_params, sp.L)
    start = np.array(c.sites, dtype=np.int64)
    weights = 4 ** np.arange(sp.L - 1, -1, -1, dtype=np.int64)
    out = np.empty(sp.trials, dtype=np.int64)
    for k in range(sp.trials):
        final, _, _, _ = kern.run(start, sp.t_max, trial_rng(sp.master_seed, first_trial + k))
        out[k] = int(final @ weights)
    return out


def occupation_times(initial, p: GeneratorParams, n_events: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Time spent in each state along one long trajectory, in blocks of events.

    Returns (times, block_times) where block_times[b] holds the occupation
    vector of the b-th block of 1000 events (for batch-means errors).
    """
    c = _as_config(initial)
    L = c.L
    rng = trial_rng(seed, 0)
    tab = rate_table(p)
    state = TrajectoryState(c)
    block = 1000
    blocks = np.zeros((max(n_events // block, 1), 4**L))
    for e in range(n_events):
        nxt = next_event(state, tab, rng)
        b = min(e // block, blocks.shape[0] - 1)
        blocks[b, index_of(state.config)] += nxt.time - state.time
        state = nxt
    return blocks.sum(axis=0), blocks


# exact oracle ----------------------------------------------------------------------------

def exact_evolution(initial, L: int, p: GeneratorParams, t: float,
                    tail: float = 1e-12) -> np.ndarray:
    """Row of exp(t G) for ``initial`` by uniformization.

    The Poisson series is cut where the remaining Poisson mass is below ``tail``.
    """
    if L > EXACT_MAX_L:
        raise ValueError(f"exact evolution is limited to L <= {EXACT_MAX_L}")
    if t < 0:
        raise ValueError("t must be >= 0")
    c = _as_config(initial)
    if c.L != L:
        raise ValueError("configuration length does not match L")
    G = global_generator(L, p).toarray()
    v = np.zeros(4**L)
    v[index_of(c)] = 1.0
    if t == 0:
        return v
    lam = float(np.abs(np.diag(G)).max())
    if lam == 0.0:
        return v
    P = np.eye(4**L) + G / lam
    mean = lam * t
    K = int(stats.poisson.isf(tail, mean)) + 1
    weights = stats.poisson.pmf(np.arange(K + 1), mean)
    out = np.zeros_like(v)
    for k in range(K + 1):
        out += weights[k] * v
        v = v @ P
    return out


def _z_exact(mean: float, se: float, value: float) -> float:
    # with zero variance allow the uniformization truncation error only
    if se > 0:
        return abs(mean - value) / se
    return 0.0 if abs(mean - value) <= 1e-10 * max(1.0, abs(value)) else math.inf


def mc_duality_check(eta0, xi0, sp: SimParams, mp: MeasureParams,
                     n_sigma: float | None = None, exact: bool = True) -> CheckReport:
    """Compare E_eta0[D(X_t, xi0)] with E_xi0[D(eta0, Y_t)].

    The two sides use disjoint trial indices (0..T-1 and T..2T-1). With
    ``exact`` the uniformization value is reported and each side is also
    scored against it (``details["oracle_pass"]``).
    """
    n_sigma = tolerance("mc_sigma") if n_sigma is None else n_sigma
    eta0, xi0 = _as_config(eta0), _as_config(xi0)
    if eta0.L != sp.L or xi0.L != sp.L:
        raise ValueError("configurations must have L sites")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AlphaRangeWarning)
        D = duality_matrix(sp.L, mp, sp.q).values
    i_eta, i_xi = index_of(eta0), index_of(xi0)
    x_final = run_trials(eta0, sp, 0)
    y_final = run_trials(xi0, sp, sp.trials)
    lhs_s = D[x_final, i_xi]
    rhs_s = D[i_eta, y_final]
    T = sp.trials
    lhs, rhs = float(lhs_s.mean()), float(rhs_s.mean())
    se_l = float(lhs_s.std(ddof=1) / math.sqrt(T)) if T > 1 else 0.0
    se_r = float(rhs_s.std(ddof=1) / math.sqrt(T)) if T > 1 else 0.0
    se = math.hypot(se_l, se_r)
    diff = abs(lhs - rhs)
    z = diff / se if se > 0 else (0.0 if diff == 0 else math.inf)
    details = {"lhs": lhs, "rhs": rhs, "se_lhs": se_l, "se_rhs": se_r, "z_score": z,
               "eta0": str(eta0), "xi0": str(xi0)}
    if exact and sp.L <= EXACT_MAX_L:
        P = exact_evolution(eta0, sp.L, sp.generator_params, sp.t_max)
        value = float(P @ D[:, i_xi])
        z_l, z_r = _z_exact(lhs, se_l, value), _z_exact(rhs, se_r, value)
        details.update({"exact": value, "z_lhs_exact": z_l, "z_rhs_exact": z_r,
                        "oracle_pass": z_l <= n_sigma and z_r <= n_sigma})
    params = {**sp.as_dict(), **mp.as_dict()}
    return CheckReport("mc_duality", params, z, n_sigma, z <= n_sigma, details)


# step initial condition --------------------------------------------------------------------

@dataclass(frozen=True)
class ConjectureParams:
    """Scalings attached to particle rank m at conjecture time t."""

    m: int
    t: float
    q: float
    n: int

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("t must be positive")
        if not 0 < self.sigma < 1:
            raise ValueError(f"sigma = m/t must lie in (0, 1), got {self.sigma}")

    @property
    def speed(self) -> float:
        return GeneratorParams(self.q, self.n).speed

    @property
    def tau(self) -> float:
        """t s (q + 1/q)/(q - 1/q) as written; negative for q < 1."""
        q = self.q
        return self.t * self.speed * (q + 1 / q) / (q - 1 / q)

    @property
    def tau_abs(self) -> float:
        return abs(self.tau)

    @property
    def tau_asep(self) -> float:
        """Process time at which single-species ASEP drift has covered t."""
        q = self.q
        return self.t / (self.speed * (1 / q - q))

    @property
    def sigma(self) -> float:
        return self.m / self.t

    @property
    def c1(self) -> float:
        return -1.0 + 2.0 * math.sqrt(self.sigma)

    @property
    def c2(self) -> float:
        s = self.sigma
        return s ** (-1 / 6) * (1 - math.sqrt(s)) ** (2 / 3)

    def process_time(self, time_change: str) -> float:
        if time_change == "tau":
            return self.tau_abs
        if time_change == "asep":
            return self.tau_asep
        raise ValueError(f"unknown time change {time_change!r}")

    def as_dict(self) -> dict:
        return {"m": self.m, "t": self.t, "tau": self.tau, "tau_abs": self.tau_abs,
                "tau_asep": self.tau_asep, "sigma": self.sigma, "c1": self.c1, "c2": self.c2}


def step_initial_condition(L: int) -> Config:
    """Sites 1..L//2 doubly occupied, the rest empty."""
    if L < 2:
        raise ValueError("L must be >= 2")
    o = L // 2
    return Config(tuple([3] * o + [0] * (L - o)))


def _rank_positions(sites: np.ndarray, species: int, m: int, origin: int) -> int:
    """Mirrored coordinate of the m-th species particle counted from the right.

    Site s (1-based) maps to origin + 1 - s, so at time 0 the m-th particle
    sits at m.
    """
    bit = 1 if species == 1 else 2
    occ = np.nonzero(sites & bit)[0][::-1]
    if m > occ.size:
        raise ValueError(f"rank {m} exceeds the particle number {occ.size}")
    return origin + 1 - (int(occ[m - 1]) + 1)


@dataclass
class StepICResult:
    L: int
    params: GeneratorParams
    t: float
    time_change: str
    process_time: float
    conj: dict[int, ConjectureParams]
    rows: list[tuple[int, int, int, int, float]] = field(default_factory=list)
    contaminated: list[int] = field(default_factory=list)
    trials: int = 0
    seed: int = 0

    def sample(self, species: int, m: int, rescaled: bool = True) -> np.ndarray:
        col = 4 if rescaled else 3
        return np.array([r[col] for r in self.rows if r[1] == species and r[2] == m], dtype=float)

    def summary(self) -> dict:
        out = {}
        for m, cp in self.conj.items():
            for i in (1, 2):
                x = self.sample(i, m, rescaled=False)
                z = self.sample(i, m)
                if x.size == 0:
                    continue
                out[f"species{i}_m{m}"] = {
                    "n": int(x.size),
                    "velocity": float(x.mean() / self.t),
                    "c1": cp.c1,
                    "velocity_error": float(abs(x.mean() / self.t - cp.c1)),
                    "rescaled_mean": float(z.mean()),
                    "rescaled_var": float(z.var(ddof=1)) if z.size > 1 else 0.0,
                }
        return out

    def ks_species(self, m: int):
        a, b = self.sample(1, m), self.sample(2, m)
        if a.size < 2 or b.size < 2:
            return None
        return stats.ks_2samp(a, b)


def step_ic_experiment(L: int, p: GeneratorParams, t: float, m_list, trials: int, seed: int,
                       time_change: str = "asep", margin: int = EDGE_MARGIN) -> StepICResult:
    """Positions of ranked particles of both species after a step start.

    ``t`` is conjecture time; the process runs for the time given by
    ``time_change`` ("asep": t / (s (1/q - q)), "tau": |tau|). Trials in
    which a particle comes within ``margin`` sites of either edge are
    stopped and listed in ``contaminated``; they contribute no rows.
    """
    m_list = sorted({int(m) for m in m_list})
    if not m_list:
        raise ValueError("m_list must not be empty")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    start = np.array(step_initial_condition(L).sites, dtype=np.int64)
    origin = L // 2
    if max(m_list) > origin:
        raise ValueError("rank exceeds the number of particles of a species")
    if t == 0:
        conj: dict[int, ConjectureParams] = {}
        res = StepICResult(L, p, 0.0, time_change, 0.0, conj, trials=trials, seed=seed)
        for k in range(trials):
            for i in (1, 2):
                for m in m_list:
                    res.rows.append((k, i, m, _rank_positions(start, i, m, origin), math.nan))
        return res
    conj = {m: ConjectureParams(m, t, p.q, p.n) for m in m_list}
    t_proc = conj[m_list[0]].process_time(time_change)
    res = StepICResult(L, p, t, time_change, t_proc, conj, trials=trials, seed=seed)
    kern = _Kernel(p, L)
    for k in range(trials):
        final, _, _, hit = kern.run(start, t_proc, trial_rng(seed, k), margin=margin, chunk=4096)
        if hit:
            res.contaminated.append(k)
            continue
        for i in (1, 2):
            for m in m_list:
                x = _rank_positions(final, i, m, origin)
                cp = conj[m]
                z = (x - cp.c1 * t) / (cp.c2 * t ** (1 / 3))
                res.rows.append((k, i, m, x, z))
    return res
