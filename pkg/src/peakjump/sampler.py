"""Replica-exchange MCMC with trans-dimensional birth/death moves.

One tempered chain ("replica") runs at each rung of an inverse-temperature
ladder 0 = b_1 < b_2 < ... < b_L.  A Monte Carlo step (MCS) consists of
``inner_repeats`` rounds of (one jump move + one full local-update sweep) on
every replica, followed by a single exchange sweep over adjacent rungs;
traces are recorded once per (thinned) MCS during the sampling phase.

Step sizes are tuned per rung and parameter kind during burnin only, by a
stochastic-approximation rule driven toward a target acceptance rate, and
are frozen afterwards.

Determinism: a master seed spawns L + 1 independent substreams, one per
rung plus one for exchange decisions, so results are bit-identical for a
given seed no matter how many threads the process is allowed to use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernel as _k
from ._rng import RandomStream, spawn_stream_states
from .errors import ConfigError, DataError
from .model import (
    Continuum,
    ModelConfiguration,
    Peak,
    PriorSpec,
    SpectralDataset,
)

__all__ = [
    "KIND_NAMES",
    "Ladder",
    "SamplerSchedule",
    "TunerParams",
    "MoveStats",
    "ReplicaState",
    "TraceSet",
    "default_step_sizes",
    "run",
    "local_update",
    "birth_move",
    "death_move",
    "jump_move",
    "exchange_sweep",
    "tune_step_sizes",
]

KIND_NAMES = ("amplitude", "precision", "center", "offset", "slope")


# ---------------------------------------------------------------------------
# schedule / ladder / tuner types


@dataclass(frozen=True, eq=False)
class Ladder:
    """Strictly increasing inverse temperatures b_1 < ... < b_L, b_1 >= 0."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if v.ndim != 1 or v.size < 1:
            raise ConfigError("ladder must be a non-empty 1-D array")
        if not np.isfinite(v).all() or v[0] < 0:
            raise ConfigError("ladder values must be finite and >= 0")
        if v.size > 1 and not np.all(np.diff(v) > 0):
            raise ConfigError("ladder values must be strictly increasing")
        object.__setattr__(self, "values", v)

    @property
    def L(self) -> int:
        return self.values.size

    @classmethod
    def geometric(cls, b_max: float, ratio: float, length: int, b1_zero: bool = True):
        """Rungs b_l = b_max * ratio**(l - L) for l = 1..L, with the first
        rung optionally replaced by exactly 0."""
        if b_max <= 0 or ratio <= 1 or length < 1:
            raise ConfigError("geometric ladder needs b_max > 0, ratio > 1, length >= 1")
        exps = np.arange(1, length + 1) - length
        vals = b_max * np.power(float(ratio), exps.astype(float))
        if b1_zero:
            vals[0] = 0.0
        return cls(vals)


@dataclass(frozen=True)
class SamplerSchedule:
    """Run lengths in MCS plus trace recording controls.

    `record_rungs` lists the (0-based) rungs at which full configuration
    snapshots are kept; K and E traces are always recorded at every rung.
    """

    burnin_mcs: int
    sampling_mcs: int
    inner_repeats: int = 10
    thinning: int = 1
    record_rungs: tuple[int, ...] = ()

    def __post_init__(self):
        if self.burnin_mcs < 0 or self.sampling_mcs < 0:
            raise ConfigError("MCS counts must be >= 0")
        if self.inner_repeats < 1:
            raise ConfigError("inner_repeats must be >= 1")
        if self.thinning < 1:
            raise ConfigError("thinning must be >= 1")
        object.__setattr__(self, "record_rungs", tuple(int(r) for r in self.record_rungs))


@dataclass(frozen=True)
class TunerParams:
    """Step-size adaptation: after each window of `m_max` local-update
    rounds, each tuned step size moves by c_t (p - p_star) / (t0 + t).

    `c_t` is a per-kind 5-tuple (amplitude, precision, center, offset,
    slope); None means "use the initial step sizes", which keeps the update
    on the parameter's own scale.  Adaptation happens during burnin only and
    never pushes a step size below `floor`.
    """

    p_star: float = 0.5
    c_t: tuple[float, float, float, float, float] | None = None
    t0: float = 10.0
    m_max: int = 50
    floor: float = 1e-6
    adapt_during: str = "burnin"

    def __post_init__(self):
        if not 0.0 < self.p_star < 1.0:
            raise ConfigError("p_star must be in (0, 1)")
        if self.t0 <= 0 or self.m_max < 1 or self.floor <= 0:
            raise ConfigError("need t0 > 0, m_max >= 1, floor > 0")
        if self.adapt_during != "burnin":
            raise ConfigError("only burnin adaptation is supported")
        if self.c_t is not None:
            c = self.c_t
            if np.isscalar(c):
                c = (float(c),) * 5
            c = tuple(float(v) for v in c)
            if len(c) != 5 or any(v <= 0 for v in c):
                raise ConfigError("c_t must be 5 positive values (or None)")
            object.__setattr__(self, "c_t", c)


def default_step_sizes(priors: PriorSpec) -> dict[str, float]:
    """Initial proposal scales: one prior standard deviation per kind."""
    out = {
        "amplitude": priors.amplitude.sd,
        "precision": priors.precision.sd,
        "center": priors.center.sd,
        "offset": priors.continuum_offset.sd if priors.has_continuum else 1.0,
        "slope": priors.continuum_slope.sd if priors.has_continuum else 1.0,
    }
    return out


def _steps_vector(steps: dict[str, float]) -> np.ndarray:
    try:
        v = np.array([float(steps[k]) for k in KIND_NAMES])
    except KeyError as e:
        raise ConfigError(f"step sizes must define {KIND_NAMES}, missing {e}") from None
    if not np.isfinite(v).all() or (v <= 0).any():
        raise ConfigError("step sizes must be positive and finite")
    return v


def _steps_dict(vec: np.ndarray) -> dict[str, float]:
    return {k: float(vec[i]) for i, k in enumerate(KIND_NAMES)}


# ---------------------------------------------------------------------------
# statistics / state / trace containers


@dataclass
class MoveStats:
    """Attempt/accept counts by move kind; local counts split by parameter
    kind, exchange counts per adjacent rung pair."""

    local_attempts: np.ndarray
    local_accepts: np.ndarray
    birth_attempts: np.ndarray
    birth_accepts: np.ndarray
    death_attempts: np.ndarray
    death_accepts: np.ndarray
    exchange_attempts: np.ndarray
    exchange_accepts: np.ndarray

    @classmethod
    def zeros(cls, L: int):
        z = lambda *s: np.zeros(s, dtype=np.int64)
        return cls(
            z(L, _k.NKINDS), z(L, _k.NKINDS),
            z(L), z(L), z(L), z(L),
            z(max(L - 1, 1)), z(max(L - 1, 1)),
        )

    def local_rate(self) -> np.ndarray:
        """Pooled local acceptance rate per rung (NaN where nothing was attempted)."""
        att = self.local_attempts.sum(axis=1).astype(float)
        acc = self.local_accepts.sum(axis=1).astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(att > 0, acc / np.maximum(att, 1), np.nan)

    def exchange_rate(self) -> np.ndarray:
        att = self.exchange_attempts.astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(att > 0, self.exchange_accepts / np.maximum(att, 1), np.nan)


@dataclass
class ReplicaState:
    """One tempered chain: its rung, inverse temperature, configuration,
    cached energy, and per-kind step sizes."""

    rung_index: int
    b: float
    config: ModelConfiguration
    cached_energy: float
    step_sizes: dict[str, float]


@dataclass
class TraceSet:
    """Everything recorded by one run.

    `ks` and `energies` have shape (L, num_samples), indexed by rung.
    `snapshot_params[r]` holds (num_samples, k_max_capacity, 3) full
    configurations at rung r (only rungs asked for in the schedule); the
    valid peak count of row t is ``ks[r, t]``.
    """

    ladder: Ladder
    schedule: SamplerSchedule
    seed: object
    n: int
    k_min: int
    k_max: int
    has_continuum: bool
    mcs_index: np.ndarray
    ks: np.ndarray
    energies: np.ndarray
    snapshot_params: dict[int, np.ndarray]
    snapshot_continuum: dict[int, np.ndarray]
    stats_burnin: MoveStats
    stats_sampling: MoveStats
    step_sizes: np.ndarray

    @property
    def num_samples(self) -> int:
        return self.mcs_index.size

    def k_counts(self) -> np.ndarray:
        """Occupation counts of each K per rung, shape (L, k_max + 1)."""
        L = self.ladder.L
        out = np.zeros((L, self.k_max + 1), dtype=np.int64)
        for l in range(L):
            cnt = np.bincount(self.ks[l].astype(np.int64), minlength=self.k_max + 1)
            out[l] = cnt[: self.k_max + 1]
        return out


# ---------------------------------------------------------------------------
# ensemble construction


class _Ensemble:
    """Flat array state shared with the compiled kernels."""

    def __init__(self, data: SpectralDataset, priors: PriorSpec, ladder: Ladder,
                 seed, initial_steps: dict[str, float] | None, jump_moves: bool):
        L = ladder.L
        order = np.argsort(data.x, kind="stable")
        xs = np.ascontiguousarray(data.x[order])
        ys = np.ascontiguousarray(data.y[order])
        n = xs.size
        if priors.has_continuum and np.any(xs <= 0):
            raise DataError("continuum model requires all x > 0")

        h = 0.0
        if n >= 2:
            hh = (xs[-1] - xs[0]) / (n - 1)
            if hh > 0 and np.max(np.abs(np.diff(xs) - hh)) <= 1e-9 * hh:
                h = float(hh)

        if priors.has_continuum:
            invx = 1.0 / xs
            sxx = float(np.dot(invx, invx))
        else:
            invx = np.zeros(n)
            sxx = 0.0

        pp = np.zeros(14)
        pp[0] = priors.amplitude.shape
        pp[1] = priors.amplitude.rate
        pp[2] = priors.precision.shape
        pp[3] = priors.precision.rate
        center = priors.center
        if hasattr(center, "lo"):
            pp[4] = 0.0
            pp[5] = center.lo
            pp[6] = center.hi
        else:
            pp[4] = 1.0
            pp[5] = center.mean
            pp[6] = center.sd
        if priors.has_continuum:
            pp[7] = 1.0
            pp[8] = priors.continuum_offset.mean
            pp[9] = priors.continuum_offset.sd
            pp[10] = priors.continuum_slope.shape
            pp[11] = priors.continuum_slope.rate
        pp[12] = priors.k_min
        pp[13] = priors.k_max

        probs = priors.k_probs()
        klogp = np.full(priors.k_max + 2, -np.inf)
        with np.errstate(divide="ignore"):
            klogp[priors.k_min: priors.k_max + 1] = np.log(probs)
        kcum = np.cumsum(probs)

        kcap = max(priors.k_max, 1)
        self.data = data
        self.priors = priors
        self.ladder = ladder
        self.xs, self.ys, self.invx, self.sxx, self.h = xs, ys, invx, sxx, h
        self.pp, self.klogp, self.kcum = pp, klogp, kcum
        self.bvec = ladder.values
        self.slot_of = np.arange(L, dtype=np.int64)
        self.K = np.zeros(L, dtype=np.int64)
        self.par = np.zeros((L, kcap, 3))
        self.cont = np.zeros((L, 2))
        self.rows = np.zeros((L, kcap, n))
        self.resid = np.zeros((L, n))
        self.energy = np.zeros(L)
        steps0 = _steps_vector(initial_steps if initial_steps is not None
                               else default_step_sizes(priors))
        self.initial_steps = steps0
        self.steps = np.tile(steps0, (L, 1))
        self.states = spawn_stream_states(seed, L + 1)
        self.scratch = np.zeros(n)
        self.flags = np.full(3 * kcap + 2, -1, dtype=np.int8)
        self.xflags = np.zeros(max(L - 1, 1), dtype=np.int8)
        self.wat = np.zeros((L, _k.NKINDS), dtype=np.int64)
        self.wac = np.zeros((L, _k.NKINDS), dtype=np.int64)
        self.jump_enabled = bool(jump_moves) and priors.k_min != priors.k_max

        _k._init_ensemble(xs, ys, invx, h, pp, kcum, self.K, self.par, self.cont,
                          self.rows, self.resid, self.energy, self.states)

    def mcs(self, stats: MoveStats, adapt: bool, inner: int):
        _k._run_mcs(
            self.xs, self.ys, self.invx, self.sxx, self.h, self.pp, self.klogp,
            self.bvec, self.slot_of,
            self.K, self.par, self.cont, self.rows, self.resid, self.energy,
            self.steps, self.states,
            stats.local_attempts, stats.local_accepts, self.wat, self.wac,
            stats.birth_attempts, stats.birth_accepts,
            stats.death_attempts, stats.death_accepts,
            stats.exchange_attempts, stats.exchange_accepts,
            inner, adapt, self.jump_enabled, self.scratch, self.flags, self.xflags,
        )

    def config_at_rung(self, l: int) -> ModelConfiguration:
        s = self.slot_of[l]
        k = int(self.K[s])
        cont = None
        if self.priors.has_continuum:
            cont = Continuum(float(self.cont[s, 0]), float(self.cont[s, 1]))
        return ModelConfiguration.from_arrays(self.par[s, :k].copy(), cont)


def run(
    data: SpectralDataset,
    priors: PriorSpec,
    ladder: Ladder,
    schedule: SamplerSchedule,
    tuner: TunerParams | None = None,
    seed=0,
    initial_steps: dict[str, float] | None = None,
    jump_moves: bool = True,
) -> TraceSet:
    """Run the full sampler and return its traces.

    Every replica starts from an independent prior draw.  Step sizes adapt
    during burnin (frozen afterwards); K and E are recorded at every rung
    once per `thinning` MCS of the sampling phase, and full configuration
    snapshots at the rungs listed in ``schedule.record_rungs``.

    `seed` may be an int or a ``numpy.random.SeedSequence``.  With
    ``jump_moves=False`` (or k_min == k_max) the peak count stays fixed and
    the sampler reduces to the conventional fixed-K version.
    """
    if tuner is None:
        tuner = TunerParams()
    L = ladder.L
    for r in schedule.record_rungs:
        if not 0 <= r < L:
            raise ConfigError(f"record rung {r} outside 0..{L - 1}")

    ens = _Ensemble(data, priors, ladder, seed, initial_steps, jump_moves)
    inner = schedule.inner_repeats
    stats_b = MoveStats.zeros(L)
    stats_s = MoveStats.zeros(L)

    c_vec = np.array(tuner.c_t) if tuner.c_t is not None else ens.initial_steps.copy()
    t = 0
    rounds = 0
    for _ in range(schedule.burnin_mcs):
        ens.mcs(stats_b, adapt=True, inner=inner)
        rounds += inner
        while rounds >= tuner.m_max:
            rounds -= tuner.m_max
            seen = ens.wat > 0
            p = np.where(seen, ens.wac / np.maximum(ens.wat, 1), 0.0)
            gain = c_vec[None, :] / (tuner.t0 + t)
            ens.steps = np.where(
                seen,
                np.maximum(ens.steps + gain * (p - tuner.p_star), tuner.floor),
                ens.steps,
            )
            ens.wat[:] = 0
            ens.wac[:] = 0
            t += 1

    S = 0 if schedule.sampling_mcs == 0 else (
        (schedule.sampling_mcs + schedule.thinning - 1) // schedule.thinning
    )
    kcap = ens.par.shape[1]
    mcs_index = np.zeros(S, dtype=np.int64)
    ks = np.zeros((L, S), dtype=np.int16)
    energies = np.zeros((L, S))
    snap_par = {r: np.zeros((S, kcap, 3)) for r in schedule.record_rungs}
    snap_cont = (
        {r: np.zeros((S, 2)) for r in schedule.record_rungs}
        if priors.has_continuum else {}
    )

    j = 0
    for step in range(schedule.sampling_mcs):
        ens.mcs(stats_s, adapt=False, inner=inner)
        if step % schedule.thinning == 0:
            mcs_index[j] = schedule.burnin_mcs + step
            by_rung = ens.slot_of
            ks[:, j] = ens.K[by_rung].astype(np.int16)
            energies[:, j] = ens.energy[by_rung]
            for r in schedule.record_rungs:
                s = by_rung[r]
                snap_par[r][j] = ens.par[s]
                if priors.has_continuum:
                    snap_cont[r][j] = ens.cont[s]
            j += 1

    return TraceSet(
        ladder=ladder,
        schedule=schedule,
        seed=seed if isinstance(seed, (int, np.integer)) else None,
        n=data.n,
        k_min=priors.k_min,
        k_max=priors.k_max,
        has_continuum=priors.has_continuum,
        mcs_index=mcs_index,
        ks=ks,
        energies=energies,
        snapshot_params=snap_par,
        snapshot_continuum=snap_cont,
        stats_burnin=stats_b,
        stats_sampling=stats_s,
        step_sizes=ens.steps.copy(),
    )


# ---------------------------------------------------------------------------
# single-replica operations
#
# These expose the exact move semantics of the compiled run loop on one
# ReplicaState at a time.  They rebuild the cached rows and energy from the
# configuration on entry (the cache on the returned state is coherent), and
# they draw from the same generator the kernels use, so a given stream
# produces the same proposal sequence here as inside `run`.


class _OpPack:
    def __init__(self, state: ReplicaState, data: SpectralDataset, priors: PriorSpec):
        k = state.config.peak_count
        if not k <= priors.k_max:
            raise ConfigError("configuration has more peaks than k_max")
        if priors.has_continuum and state.config.continuum is None:
            raise ConfigError("continuum priors given but configuration has none")
        ens = _Ensemble.__new__(_Ensemble)
        # reuse the array-building logic on a single-rung ladder at this b,
        # then overwrite the prior-drawn start with the caller's config
        _Ensemble.__init__(
            ens, data, priors, Ladder(np.array([max(state.b, 0.0)])),
            seed=0, initial_steps=state.step_sizes, jump_moves=True,
        )
        if state.b < 0:
            raise ConfigError("inverse temperature must be >= 0")
        ens.bvec = np.array([float(state.b)])
        pa = state.config.peak_array()
        ens.K[0] = k
        ens.par[0, :, :] = 0.0
        ens.par[0, :k] = pa
        ens.rows[0, :, :] = 0.0
        for i in range(k):
            i0, i1 = _k._win_bounds(ens.xs, pa[i, 1], pa[i, 2])
            _k._fill_window(ens.xs, ens.h, pa[i, 0], pa[i, 1], pa[i, 2],
                            ens.rows[0, i], i0, i1)
        if priors.has_continuum:
            ens.cont[0, 0] = state.config.continuum.offset
            ens.cont[0, 1] = state.config.continuum.slope
        _k._refresh_all(ens.ys, ens.invx, priors.has_continuum,
                        ens.K, ens.cont, ens.rows, ens.resid, ens.energy)
        self.ens = ens
        self.state = state
        self.priors = priors

    def unpack(self) -> ReplicaState:
        ens = self.ens
        k = int(ens.K[0])
        cont = None
        if self.priors.has_continuum:
            cont = Continuum(float(ens.cont[0, 0]), float(ens.cont[0, 1]))
        cfg = ModelConfiguration.from_arrays(ens.par[0, :k].copy(), cont)
        return replace(self.state, config=cfg, cached_energy=float(ens.energy[0]))


def _stream_states(rng: RandomStream) -> np.ndarray:
    if not isinstance(rng, RandomStream):
        raise ConfigError("sampler operations need a RandomStream")
    return rng._states


def local_update(state: ReplicaState, data: SpectralDataset, priors: PriorSpec,
                 rng: RandomStream):
    """One full sweep of single-parameter Metropolis updates.

    Returns (new_state, accepted) where `accepted` is a bool array over the
    scan order: (amplitude, precision, center) for each peak, then continuum
    offset and slope when present.
    """
    pk = _OpPack(state, data, priors)
    ens = pk.ens
    dummy = MoveStats.zeros(1)
    ens.flags[:] = -1
    npos = _k._local_scan(
        ens.xs, ens.ys, ens.invx, ens.sxx, ens.h, ens.pp, ens.bvec, 0, 0,
        ens.K, ens.par, ens.cont, ens.rows, ens.resid, ens.energy,
        ens.steps, _stream_states(rng),
        dummy.local_attempts, dummy.local_accepts, ens.wat, ens.wac,
        False, ens.scratch, ens.flags,
    )
    return pk.unpack(), ens.flags[:npos] == 1


def birth_move(state: ReplicaState, data: SpectralDataset, priors: PriorSpec,
               rng: RandomStream):
    """Propose appending one prior-drawn peak; returns (new_state, accepted)."""
    if state.config.peak_count >= priors.k_max:
        raise ConfigError("birth requires K < k_max")
    pk = _OpPack(state, data, priors)
    ens = pk.ens
    dummy = MoveStats.zeros(1)
    code = _k._birth_move(
        ens.xs, ens.h, ens.pp, ens.klogp, ens.bvec, 0, 0,
        ens.K, ens.par, ens.rows, ens.resid, ens.energy, _stream_states(rng),
        dummy.birth_attempts, dummy.birth_accepts, ens.scratch,
    )
    return pk.unpack(), code == _k.JUMP_BIRTH_ACC


def death_move(state: ReplicaState, data: SpectralDataset, priors: PriorSpec,
               rng: RandomStream):
    """Propose removing one uniformly chosen peak; returns (new_state, accepted)."""
    if state.config.peak_count <= priors.k_min:
        raise ConfigError("death requires K > k_min")
    pk = _OpPack(state, data, priors)
    ens = pk.ens
    dummy = MoveStats.zeros(1)
    code = _k._death_move(
        ens.xs, ens.pp, ens.klogp, ens.bvec, 0, 0,
        ens.K, ens.par, ens.rows, ens.resid, ens.energy, _stream_states(rng),
        dummy.death_attempts, dummy.death_accepts,
    )
    return pk.unpack(), code == _k.JUMP_DEATH_ACC


def jump_move(state: ReplicaState, data: SpectralDataset, priors: PriorSpec,
              rng: RandomStream):
    """One trans-dimensional move: birth with the boundary-aware move
    probability, else death.  Returns (new_state, kind, accepted) with kind
    in {"birth", "death", "none"}."""
    pk = _OpPack(state, data, priors)
    ens = pk.ens
    dummy = MoveStats.zeros(1)
    code = _k._jump_move(
        ens.xs, ens.ys, ens.h, ens.pp, ens.klogp, ens.bvec, 0, 0,
        ens.K, ens.par, ens.rows, ens.resid, ens.energy, _stream_states(rng),
        dummy.birth_attempts, dummy.birth_accepts,
        dummy.death_attempts, dummy.death_accepts, ens.scratch,
    )
    kind = {
        _k.JUMP_NONE: "none",
        _k.JUMP_BIRTH_REJ: "birth",
        _k.JUMP_BIRTH_ACC: "birth",
        _k.JUMP_DEATH_REJ: "death",
        _k.JUMP_DEATH_ACC: "death",
    }[code]
    accepted = code in (_k.JUMP_BIRTH_ACC, _k.JUMP_DEATH_ACC)
    return pk.unpack(), kind, accepted


def exchange_sweep(states, data: SpectralDataset, rng: RandomStream):
    """One deterministic sweep of adjacent-pair swap proposals.

    `states` must be ordered by strictly increasing b.  Energies are
    recomputed from the configurations; swaps move configurations between
    rungs while step sizes stay put.  Returns (new_states, accepted_flags).
    """
    from .model import energy as model_energy

    L = len(states)
    bvec = np.array([s.b for s in states], dtype=float)
    if L >= 2 and not np.all(np.diff(bvec) > 0):
        raise ConfigError("replica list must be ordered by increasing b")
    evec = np.array([model_energy(s.config, data) for s in states])
    slot_of = np.arange(L, dtype=np.int64)
    xatt = np.zeros(max(L - 1, 1), dtype=np.int64)
    xacc = np.zeros(max(L - 1, 1), dtype=np.int64)
    xflags = np.zeros(max(L - 1, 1), dtype=np.int8)
    # the exchange stream is the last state row; a 1-row stream works because
    # the kernel indexes row L of an (L+1)-row bank, so stack a dummy bank
    bank = np.zeros((L + 1, 4), dtype=np.uint64)
    bank[L] = _stream_states(rng)[0]
    _k._exchange_sweep(data.n, bvec, slot_of, evec, bank, xatt, xacc, xflags)
    _stream_states(rng)[0] = bank[L]
    out = []
    for l in range(L):
        src = states[slot_of[l]]
        out.append(replace(states[l], config=src.config,
                           cached_energy=float(evec[slot_of[l]])))
    return out, xflags[: max(L - 1, 0)] == 1


def tune_step_sizes(state: ReplicaState, observed, tuner: TunerParams, t: int,
                    ) -> ReplicaState:
    """Apply one adaptation update given observed acceptance rate(s).

    `observed` is a single rate applied to every kind, or a mapping from
    kind name to rate (kinds not mentioned stay put).  `t` counts previous
    updates.  Uses tuner.c_t, falling back to the state's current step
    sizes as the per-kind scale.
    """
    if t < 0:
        raise ConfigError("t must be >= 0")
    if np.isscalar(observed):
        obs = {k: float(observed) for k in KIND_NAMES}
    else:
        obs = {k: float(v) for k, v in observed.items()}
        for k in obs:
            if k not in KIND_NAMES:
                raise ConfigError(f"unknown parameter kind {k!r}")
    for k, v in obs.items():
        if not 0.0 <= v <= 1.0:
            raise ConfigError("acceptance rates must be in [0, 1]")
    c = dict(zip(KIND_NAMES, tuner.c_t)) if tuner.c_t is not None else dict(state.step_sizes)
    new = dict(state.step_sizes)
    for k, p in obs.items():
        new[k] = max(tuner.floor, new[k] + c[k] / (tuner.t0 + t) * (p - tuner.p_star))
    return replace(state, step_sizes=new)
