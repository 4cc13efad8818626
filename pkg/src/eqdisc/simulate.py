"""Forced-response simulation of single-degree-of-freedom oscillators.

The oscillator is ``m*q'' + c*q' + k*q + g(q, q') = u`` written in state form
with ``x1 = q`` and ``x2 = q'``.  Integration is fixed-step RK4 at the sampling
rate, with the input held constant over each step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import ConfigError, DataError, IntegrationDivergenceError

__all__ = [
    "Nonlinearity",
    "SystemSpec",
    "ExcitationSpec",
    "Dataset",
    "SYSTEMS",
    "system_preset",
    "generate_excitation",
    "simulate",
    "add_noise",
    "differentiate",
]


class Nonlinearity(str, Enum):
    NONE = "none"
    CUBIC_STIFFNESS = "cubic_stiffness"
    QUADRATIC_DAMPING = "quadratic_damping"
    COULOMB_FRICTION = "coulomb_friction"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            legal = ", ".join(m.value for m in cls)
            raise ConfigError(f"unknown nonlinearity {value!r}; legal values: {legal}") from None


@dataclass(frozen=True)
class SystemSpec:
    """Parameters of an SDOF oscillator.

    ``coefficient`` multiplies the nonlinear restoring term selected by
    ``nonlinearity`` (k3, c2 or cF); it is ignored for a linear system.
    """

    mass: float = 1.0
    damping_c: float = 2.0
    stiffness_k: float = 1000.0
    nonlinearity: Nonlinearity = Nonlinearity.NONE
    coefficient: float = 0.0
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "nonlinearity", Nonlinearity.parse(self.nonlinearity))
        if not self.mass > 0:
            raise ConfigError(f"mass must be positive, got {self.mass}")
        if not self.stiffness_k > 0:
            raise ConfigError(f"stiffness_k must be positive, got {self.stiffness_k}")
        if not self.damping_c >= 0:
            raise ConfigError(f"damping_c must be non-negative, got {self.damping_c}")
        if not self.coefficient >= 0:
            raise ConfigError(f"nonlinearity coefficient must be non-negative, got {self.coefficient}")

    def restoring_nonlinear(self, x1, x2):
        """Nonlinear term g(x1, x2); works on scalars and arrays."""
        kind = self.nonlinearity
        if kind is Nonlinearity.CUBIC_STIFFNESS:
            return self.coefficient * x1**3
        if kind is Nonlinearity.QUADRATIC_DAMPING:
            return self.coefficient * x2 * np.abs(x2)
        if kind is Nonlinearity.COULOMB_FRICTION:
            return self.coefficient * np.sign(x2)
        return 0.0 * x1

    def acceleration(self, x1, x2, u):
        return (u - self.stiffness_k * x1 - self.damping_c * x2 - self.restoring_nonlinear(x1, x2)) / self.mass

    def to_dict(self):
        return {
            "name": self.name,
            "mass": self.mass,
            "damping_c": self.damping_c,
            "stiffness_k": self.stiffness_k,
            "nonlinearity": self.nonlinearity.value,
            "coefficient": self.coefficient,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - {"name", "mass", "damping_c", "stiffness_k", "nonlinearity", "coefficient"}
        if unknown:
            raise ConfigError(f"unknown system fields: {sorted(unknown)}")
        return cls(**d)


SYSTEMS = {
    "linear": SystemSpec(name="linear"),
    "duffing": SystemSpec(nonlinearity=Nonlinearity.CUBIC_STIFFNESS, coefficient=1e5, name="duffing"),
    "quadratic_damping": SystemSpec(
        nonlinearity=Nonlinearity.QUADRATIC_DAMPING, coefficient=2.0, name="quadratic_damping"
    ),
    "coulomb": SystemSpec(nonlinearity=Nonlinearity.COULOMB_FRICTION, coefficient=1.0, name="coulomb"),
}


def system_preset(name):
    """Return one of the four reference oscillators by name."""
    try:
        return SYSTEMS[name]
    except KeyError:
        raise ConfigError(f"unknown system {name!r}; legal values: {', '.join(SYSTEMS)}") from None


@dataclass(frozen=True)
class ExcitationSpec:
    kind: str = "bandlimited_gaussian"
    passband_hz: tuple = (0.0, 100.0)
    std: float = 50.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "passband_hz", tuple(float(f) for f in self.passband_hz))
        if self.kind not in ("bandlimited_gaussian", "external"):
            raise ConfigError(f"unknown excitation kind {self.kind!r}; legal values: bandlimited_gaussian, external")

    def validate(self, fs):
        low, high = self.passband_hz
        if not (0.0 <= low < high):
            raise ConfigError(f"invalid passband {self.passband_hz}: need 0 <= low < high")
        if high > fs / 2:
            raise ConfigError(f"passband upper edge {high} Hz exceeds Nyquist frequency {fs / 2} Hz")
        if not self.std > 0:
            raise ConfigError(f"excitation std must be positive, got {self.std}")

    def to_dict(self):
        return {"kind": self.kind, "passband_hz": list(self.passband_hz), "std": self.std, "seed": self.seed}


@dataclass(frozen=True)
class Dataset:
    """Aligned displacement, velocity, acceleration and force records."""

    t: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    x2dot: np.ndarray
    u: np.ndarray
    fs: float
    reconstructed: tuple = field(default=())

    CHANNELS = ("x1", "x2", "x2dot", "u")

    def __post_init__(self):
        arrays = {}
        for name in ("t",) + self.CHANNELS:
            a = np.asarray(getattr(self, name), dtype=float)
            if a.ndim != 1:
                raise DataError(f"{name} must be one-dimensional")
            arrays[name] = a
            object.__setattr__(self, name, a)
        n = arrays["t"].size
        if n < 2:
            raise DataError("a dataset needs at least 2 samples")
        for name, a in arrays.items():
            if a.size != n:
                raise DataError(f"channel {name} has length {a.size}, expected {n}")
        if not self.fs > 0:
            raise DataError(f"sampling rate must be positive, got {self.fs}")
        dt = np.diff(arrays["t"])
        step = 1.0 / self.fs
        if np.any(dt <= 0) or np.max(np.abs(dt - step)) > 1e-9 * max(1.0, abs(arrays["t"][-1])) + 1e-9 * step:
            raise DataError("time stamps must be strictly increasing with uniform step 1/fs")

    def __len__(self):
        return self.t.size

    def slice(self, start, stop=None):
        s = slice(start, stop)
        return replace(self, t=self.t[s], x1=self.x1[s], x2=self.x2[s], x2dot=self.x2dot[s], u=self.u[s])

    def is_finite(self):
        return all(np.all(np.isfinite(getattr(self, c))) for c in self.CHANNELS)


def generate_excitation(spec, n, fs):
    """Band-limited random-phase Gaussian force signal.

    Every DFT bin inside the passband gets unit magnitude and an independent
    uniform phase; all other bins are zero.  The time signal is rescaled so
    that its population standard deviation equals ``spec.std`` exactly.
    The DC bin is left empty so the signal has zero mean.
    """
    if spec.kind != "bandlimited_gaussian":
        raise ConfigError("external excitation signals are supplied by the caller, not generated")
    if n < 2:
        raise ConfigError(f"need at least 2 samples, got {n}")
    spec.validate(fs)
    low, high = spec.passband_hz
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    band = (freqs >= low) & (freqs <= high) & (freqs > 0)
    if n % 2 == 0:
        band[-1] = False  # Nyquist bin must be real
    if not band.any():
        raise ConfigError(f"no DFT bins fall in passband {spec.passband_hz} for n={n}, fs={fs}")
    rng = np.random.default_rng(spec.seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=int(band.sum()))
    spectrum = np.zeros(freqs.size, dtype=complex)
    spectrum[band] = np.exp(1j * phases)
    signal = np.fft.irfft(spectrum, n=n)
    return signal * (spec.std / signal.std())


def _rk4_step(system, x1, x2, u, h):
    m, c, k = system.mass, system.damping_c, system.stiffness_k
    kind = system.nonlinearity
    coef = system.coefficient

    def accel(a, b):
        if kind is Nonlinearity.CUBIC_STIFFNESS:
            g = coef * a * a * a
        elif kind is Nonlinearity.QUADRATIC_DAMPING:
            g = coef * b * abs(b)
        elif kind is Nonlinearity.COULOMB_FRICTION:
            g = coef * ((b > 0) - (b < 0))
        else:
            g = 0.0
        return (u - k * a - c * b - g) / m

    k1x, k1v = x2, accel(x1, x2)
    k2x, k2v = x2 + 0.5 * h * k1v, accel(x1 + 0.5 * h * k1x, x2 + 0.5 * h * k1v)
    k3x, k3v = x2 + 0.5 * h * k2v, accel(x1 + 0.5 * h * k2x, x2 + 0.5 * h * k2v)
    k4x, k4v = x2 + h * k3v, accel(x1 + h * k3x, x2 + h * k3v)
    return (
        x1 + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        x2 + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    )


def simulate(system, u, fs, x0=(0.0, 0.0), discard=0):
    """Integrate the oscillator under force ``u`` sampled at ``fs``.

    Parameters
    ----------
    system : SystemSpec
    u : array_like
        Force samples; ``u[j]`` is held over ``[t_j, t_j + 1/fs)``.
    fs : float
        Sampling rate in Hz; the RK4 step is ``1/fs``.
    x0 : tuple of float
        Initial displacement and velocity.
    discard : int
        Number of leading warm-up samples to drop from the returned record.

    Returns
    -------
    Dataset
        Acceleration is evaluated from the equation of motion at each sample.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size < 2:
        raise ConfigError("u must be a 1-D vector with at least 2 samples")
    if not np.all(np.isfinite(u)):
        raise ConfigError("input force contains non-finite values")
    if not fs > 0:
        raise ConfigError(f"sampling rate must be positive, got {fs}")
    if not 0 <= discard < u.size - 1:
        raise ConfigError(f"discard must lie in [0, {u.size - 2}], got {discard}")
    n = u.size
    h = 1.0 / fs
    x1 = np.empty(n)
    x2 = np.empty(n)
    a, b = float(x0[0]), float(x0[1])
    x1[0], x2[0] = a, b
    ul = u.tolist()
    for j in range(n - 1):
        a, b = _rk4_step(system, a, b, ul[j], h)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise IntegrationDivergenceError(j + 1)
        x1[j + 1] = a
        x2[j + 1] = b
    x2dot = system.acceleration(x1, x2, u)
    t = np.arange(n) / fs
    s = slice(discard, None)
    return Dataset(t=t[s], x1=x1[s], x2=x2[s], x2dot=x2dot[s], u=u[s].copy(), fs=float(fs))


def add_noise(data, noise_fraction, seed):
    """Corrupt every channel with white Gaussian noise.

    The noise standard deviation on each channel is ``noise_fraction`` times
    that channel's empirical standard deviation.  Channels are processed in
    the fixed order x1, x2, x2dot, u.
    """
    if not noise_fraction >= 0:
        raise ConfigError(f"noise_fraction must be non-negative, got {noise_fraction}")
    if noise_fraction == 0:
        return replace(data)
    rng = np.random.default_rng(seed)
    noisy = {}
    for name in Dataset.CHANNELS:
        clean = getattr(data, name)
        noisy[name] = clean + rng.normal(0.0, noise_fraction * clean.std(), size=clean.size)
    return replace(data, **noisy)


def differentiate(signal, fs, order=1):
    """Finite-difference derivative of a uniformly sampled signal.

    Five-point central stencils are used wherever they fit, three-point
    central stencils one sample in from each end, and second-order one-sided
    stencils on the end samples, so the output has the input's length.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1 or x.size < 5:
        raise DataError("differentiate needs a 1-D signal with at least 5 samples")
    if order not in (1, 2):
        raise ConfigError(f"derivative order must be 1 or 2, got {order}")
    h = 1.0 / fs
    out = np.empty_like(x)
    if order == 1:
        out[2:-2] = (x[:-4] - 8.0 * x[1:-3] + 8.0 * x[3:-1] - x[4:]) / (12.0 * h)
        out[1] = (x[2] - x[0]) / (2.0 * h)
        out[-2] = (x[-1] - x[-3]) / (2.0 * h)
        out[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * h)
        out[-1] = (3.0 * x[-1] - 4.0 * x[-2] + x[-3]) / (2.0 * h)
    else:
        h2 = h * h
        out[2:-2] = (-x[:-4] + 16.0 * x[1:-3] - 30.0 * x[2:-2] + 16.0 * x[3:-1] - x[4:]) / (12.0 * h2)
        out[1] = (x[0] - 2.0 * x[1] + x[2]) / h2
        out[-2] = (x[-3] - 2.0 * x[-2] + x[-1]) / h2
        out[0] = (2.0 * x[0] - 5.0 * x[1] + 4.0 * x[2] - x[3]) / h2
        out[-1] = (2.0 * x[-1] - 5.0 * x[-2] + 4.0 * x[-3] - x[-4]) / h2
    return out
