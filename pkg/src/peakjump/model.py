"""Model space, priors, and likelihood for sparse spectral deconvolution.

A spectrum ``y`` observed at points ``x`` is modelled as a superposition of
``K`` Gaussian components plus optional reflectance continuum,

    f(x) = sum_k a_k exp(-(rho_k / 2) (x - mu_k)^2)        (Gaussian basis)
    f(x) = c0 + c1 / x + sum_k ...                         (continuum variant)

with i.i.d. Gaussian noise of precision ``b``.  The component count ``K`` is
itself unknown and carries a prior, which is what makes the posterior
trans-dimensional.  Everything in this module is pure: no sampler state, no
files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError

__all__ = [
    "Peak",
    "Continuum",
    "ModelConfiguration",
    "SpectralDataset",
    "GammaPrior",
    "UniformPrior",
    "NormalPrior",
    "PriorSpec",
    "evaluate_basis",
    "predict",
    "energy",
    "tempered_exponent",
    "log_likelihood",
    "prior_logdensity",
    "sample_peak_from_prior",
    "sample_configuration_from_prior",
]


# ---------------------------------------------------------------------------
# configurations


@dataclass(frozen=True)
class Peak:
    """One Gaussian component: height `amplitude`, inverse squared width
    `precision`, location `center`."""

    amplitude: float
    precision: float
    center: float


@dataclass(frozen=True)
class Continuum:
    """Reflectance continuum c0 + c1 / x (only meaningful for x > 0)."""

    offset: float
    slope: float


@dataclass(frozen=True)
class ModelConfiguration:
    """A full parameter point: a list of peaks plus optional continuum.

    The peak list is exchangeable; nothing downstream may depend on its
    order.  ``peaks=()`` is the empty model, whose prediction is identically
    zero (plus continuum if present).
    """

    peaks: tuple[Peak, ...] = ()
    continuum: Continuum | None = None

    @property
    def peak_count(self) -> int:
        return len(self.peaks)

    def peak_array(self) -> np.ndarray:
        """Peaks as a (K, 3) array with columns amplitude, precision, center."""
        if not self.peaks:
            return np.zeros((0, 3))
        return np.array([[p.amplitude, p.precision, p.center] for p in self.peaks])

    @classmethod
    def from_arrays(cls, peak_array, continuum=None):
        pts = np.atleast_2d(np.asarray(peak_array, dtype=float))
        peaks = tuple(Peak(float(a), float(r), float(m)) for a, r, m in pts) if pts.size else ()
        return cls(peaks=peaks, continuum=continuum)


@dataclass(frozen=True, eq=False)
class SpectralDataset:
    """Observed points (x_i, y_i) in model space.

    `transform` records how raw file observations were mapped to ``y``:
    "identity" for direct intensities, "neglog" when ``y = -log(raw)`` was
    applied to reflectance data before fitting.
    """

    x: np.ndarray
    y: np.ndarray
    transform: str = "identity"

    def __post_init__(self):
        x = np.ascontiguousarray(np.asarray(self.x, dtype=np.float64))
        y = np.ascontiguousarray(np.asarray(self.y, dtype=np.float64))
        if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape:
            raise DataError("x and y must be 1-D arrays of equal length")
        if x.size < 1:
            raise DataError("dataset needs at least one point")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise DataError("dataset contains non-finite values")
        if self.transform not in ("identity", "neglog"):
            raise DataError(f"unknown transform {self.transform!r}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size


# ---------------------------------------------------------------------------
# priors


def _is_compiled_stream(rng) -> bool:
    # RandomStream.gamma takes a rate; numpy Generator.gamma takes a scale
    from ._rng import RandomStream

    return isinstance(rng, RandomStream)


@dataclass(frozen=True)
class GammaPrior:
    """Gamma density rate**shape x**(shape-1) exp(-rate x) / Gamma(shape), x > 0."""

    shape: float
    rate: float

    def __post_init__(self):
        if self.shape <= 0 or self.rate <= 0:
            raise ValueError("Gamma prior needs positive shape and rate")

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    @property
    def sd(self) -> float:
        return math.sqrt(self.shape) / self.rate

    def logpdf(self, v: float) -> float:
        if v <= 0:
            return -math.inf
        return (
            self.shape * math.log(self.rate)
            - math.lgamma(self.shape)
            + (self.shape - 1.0) * math.log(v)
            - self.rate * v
        )

    def sample(self, rng) -> float:
        if _is_compiled_stream(rng):
            return rng.gamma(self.shape, self.rate)
        return float(rng.gamma(self.shape, 1.0 / self.rate))


@dataclass(frozen=True)
class UniformPrior:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("Uniform prior needs hi > lo")

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def sd(self) -> float:
        return (self.hi - self.lo) / math.sqrt(12.0)

    def logpdf(self, v: float) -> float:
        if self.lo <= v <= self.hi:
            return -math.log(self.hi - self.lo)
        return -math.inf

    def sample(self, rng) -> float:
        return float(rng.uniform(self.lo, self.hi))


@dataclass(frozen=True)
class NormalPrior:
    mean: float
    sd: float

    def __post_init__(self):
        if self.sd <= 0:
            raise ValueError("Normal prior needs positive sd")

    def logpdf(self, v: float) -> float:
        z = (v - self.mean) / self.sd
        return -0.5 * z * z - math.log(self.sd) - 0.5 * math.log(2.0 * math.pi)

    def sample(self, rng) -> float:
        return float(rng.normal(self.mean, self.sd))


@dataclass(frozen=True)
class PriorSpec:
    """Joint prior over (K, peaks, continuum).

    Peaks are i.i.d. given K: amplitude ~ Gamma, precision ~ Gamma, center ~
    Uniform or Normal.  `k_weights` are unnormalized probabilities over
    ``K = k_min .. k_max`` (None means uniform).  Continuum priors must be
    given both-or-neither; their presence switches on the continuum variant.
    """

    amplitude: GammaPrior
    precision: GammaPrior
    center: UniformPrior | NormalPrior
    k_min: int = 0
    k_max: int = 15
    k_weights: tuple[float, ...] | None = None
    continuum_offset: NormalPrior | None = None
    continuum_slope: GammaPrior | None = None

    def __post_init__(self):
        if not (0 <= self.k_min <= self.k_max):
            raise ValueError("need 0 <= k_min <= k_max")
        if (self.continuum_offset is None) != (self.continuum_slope is None):
            raise ValueError("continuum priors must be given both-or-neither")
        if self.k_weights is not None:
            w = tuple(float(v) for v in self.k_weights)
            if len(w) != self.k_max - self.k_min + 1:
                raise ValueError("k_weights must cover k_min..k_max inclusive")
            if any(v < 0 for v in w) or sum(w) <= 0:
                raise ValueError("k_weights must be nonnegative with positive sum")
            object.__setattr__(self, "k_weights", w)

    @property
    def has_continuum(self) -> bool:
        return self.continuum_offset is not None

    def k_values(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_max + 1)

    def k_probs(self) -> np.ndarray:
        m = self.k_max - self.k_min + 1
        if self.k_weights is None:
            return np.full(m, 1.0 / m)
        w = np.asarray(self.k_weights, dtype=float)
        return w / w.sum()

    def log_k_prob(self, k: int) -> float:
        if not (self.k_min <= k <= self.k_max):
            return -math.inf
        p = self.k_probs()[k - self.k_min]
        return math.log(p) if p > 0 else -math.inf


# ---------------------------------------------------------------------------
# model evaluation


def evaluate_basis(peak: Peak, x) -> np.ndarray:
    """One component's contribution a exp(-(rho/2)(x - mu)^2) at points x."""
    x = np.asarray(x, dtype=float)
    d = x - peak.center
    return peak.amplitude * np.exp(-0.5 * peak.precision * d * d)


def predict(config: ModelConfiguration, x) -> np.ndarray:
    """Noise-free model value at points x; zero for the empty model."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x, dtype=float)
    if config.continuum is not None:
        if np.any(x <= 0):
            raise DataError("continuum term c1/x requires all x > 0")
        out += config.continuum.offset + config.continuum.slope / x
    for p in config.peaks:
        out += evaluate_basis(p, x)
    return out


def energy(config: ModelConfiguration, data: SpectralDataset) -> float:
    """Half the mean squared residual, E = (1/2n) sum (y_i - f(x_i))^2."""
    r = data.y - predict(config, data.x)
    return float(0.5 * np.mean(r * r))


def tempered_exponent(config: ModelConfiguration, data: SpectralDataset, b: float) -> float:
    """The exponent -n b E used in every tempered Metropolis ratio.

    This is the only likelihood term that exists at b = 0, where it is 0 for
    any configuration.
    """
    if b < 0:
        raise ValueError("inverse temperature must be >= 0")
    if b == 0.0:
        return 0.0
    return -data.n * b * energy(config, data)


def log_likelihood(
    config: ModelConfiguration, data: SpectralDataset, b: float, prefactor: bool = True
) -> float:
    """Gaussian log likelihood (n/2) log(b / 2 pi) - n b E at precision b.

    The prefactor is only defined for b > 0; at b = 0 it is skipped and the
    value reduces to the (zero) tempered exponent, matching how b = 0 rungs
    enter acceptance ratios.
    """
    out = tempered_exponent(config, data, b)
    if prefactor and b > 0.0:
        out += 0.5 * data.n * math.log(b / (2.0 * math.pi))
    return out


def prior_logdensity(config: ModelConfiguration, priors: PriorSpec) -> float:
    """Joint log prior of (K, peaks, continuum); -inf outside the support."""
    out = priors.log_k_prob(config.peak_count)
    for p in config.peaks:
        out += priors.amplitude.logpdf(p.amplitude)
        out += priors.precision.logpdf(p.precision)
        out += priors.center.logpdf(p.center)
    if priors.has_continuum:
        if config.continuum is None:
            return -math.inf
        out += priors.continuum_offset.logpdf(config.continuum.offset)
        out += priors.continuum_slope.logpdf(config.continuum.slope)
    elif config.continuum is not None:
        return -math.inf
    return out


def sample_peak_from_prior(priors: PriorSpec, rng) -> Peak:
    """Draw one peak (amplitude, precision, center in that order) from the prior.

    `rng` may be a numpy Generator or a :class:`peakjump._rng.RandomStream`;
    both paths use exact samplers.
    """
    a = priors.amplitude.sample(rng)
    r = priors.precision.sample(rng)
    m = priors.center.sample(rng)
    return Peak(a, r, m)


def sample_configuration_from_prior(priors: PriorSpec, rng) -> ModelConfiguration:
    """Draw K from the K-prior, then K i.i.d. peaks (and continuum if present)."""
    probs = priors.k_probs()
    u = float(rng.uniform(0.0, 1.0))
    k = priors.k_min
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            k = priors.k_min + i
            break
    else:
        k = priors.k_max
    peaks = tuple(sample_peak_from_prior(priors, rng) for _ in range(k))
    cont = None
    if priors.has_continuum:
        c0 = priors.continuum_offset.sample(rng)
        c1 = priors.continuum_slope.sample(rng)
        cont = Continuum(c0, c1)
    return ModelConfiguration(peaks=peaks, continuum=cont)
