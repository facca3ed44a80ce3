"""Classical squeezed-light model with amplitude-threshold heralding.

Random stream
-------------
Trial ``t`` consumes the raw 64-bit words ``4t .. 4t+3`` of a PCG64DXSM stream
seeded through ``numpy.random.SeedSequence(seed)``.  Words 0-1 give ``z_s`` and
words 2-3 give ``z_i`` through the polar map

    |z| = sqrt(-ln u),   u = ((w0 >> 11) + 1) * 2**-53   in (0, 1]
    arg z = 2 pi v,      v = (w1 >> 11) * 2**-53         in [0, 1)

so ``|z|**2`` is Exp(1): ``E|z|^2 = 1`` with real and imaginary parts of
variance 1/2 each.  Every trial uses exactly four words, so trial ``t`` can be
reached with ``advance(4 t)`` and any chunking of the trial index space yields
the same ensemble.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .errors import AbortedAfterMaxTrials

VACUUM_SIGMA = 1.0 / math.sqrt(2.0)
WORDS_PER_TRIAL = 4
DEFAULT_MAX_TRIALS = 10**9
DEFAULT_CHUNK_TRIALS = 1 << 20
SEED_LIMIT = 1 << 64

_TWO_M53 = 2.0**-53
_TWO_M50 = 2.0**-50
_FRAC_MASK = np.uint64((1 << 50) - 1)
_SHIFT_53 = np.uint64(11)
_SHIFT_OCTANT = np.uint64(50)
_QUARTER_PI = math.pi / 4.0


@dataclass(frozen=True)
class ModelParams:
    """Physical scenario plus the controls of one Monte Carlo run.

    ``sigma = 1/sqrt(2)`` is the zero-point vacuum scale.  All amplitudes are
    dimensionless quadrature-space numbers.
    """

    alpha: complex = 0j
    sigma: float = VACUUM_SIGMA
    r: float = 0.4
    gamma: float = 2.5
    seed: int = 20240
    target_conditioned: int = 2**16
    max_trials: int = DEFAULT_MAX_TRIALS

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        if not math.isfinite(self.alpha.real) or not math.isfinite(self.alpha.imag):
            raise ValueError(f"alpha must be finite, got {self.alpha}")
        if not self.sigma > 0 or not math.isfinite(self.sigma):
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not self.r >= 0 or not math.isfinite(self.r):
            raise ValueError(f"r must be >= 0, got {self.r}")
        if not self.gamma >= 0 or not math.isfinite(self.gamma):
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not 0 <= int(self.seed) < SEED_LIMIT:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if int(self.target_conditioned) < 1:
            raise ValueError(f"target_conditioned must be >= 1, got {self.target_conditioned}")
        if int(self.max_trials) < 1:
            raise ValueError(f"max_trials must be >= 1, got {self.max_trials}")


class ModePair(NamedTuple):
    z_s: complex | np.ndarray
    z_i: complex | np.ndarray


class TransformedPair(NamedTuple):
    b_s: complex | np.ndarray
    b_i: complex | np.ndarray


@dataclass(frozen=True, eq=False)
class HeraldedEnsemble:
    """Signal amplitudes that passed the idler threshold, with provenance."""

    c_s: np.ndarray
    total_trials: int
    accepted: int
    efficiency: float
    seed: int
    params: ModelParams


@njit(cache=True, nogil=True)
def _complex_gaussian(w_mod, w_arg):
    u = float((w_mod >> _SHIFT_53) + np.uint64(1)) * _TWO_M53
    rad = math.sqrt(-math.log(u))
    # The phase is split into an octant and a remainder so that cos/sin only
    # ever see |angle| <= pi/4; the quarter-turn rotation below is exact.
    v = w_arg >> _SHIFT_53
    octant = int(v >> _SHIFT_OCTANT)
    frac = float(v & _FRAC_MASK) * _TWO_M50
    if octant % 2 == 0:
        quarter = octant // 2
        ang = _QUARTER_PI * frac
    else:
        quarter = (octant + 1) // 2
        ang = -_QUARTER_PI * (1.0 - frac)
    c = math.cos(ang)
    s = math.sin(ang)
    quarter = quarter % 4
    if quarter == 0:
        re, im = c, s
    elif quarter == 1:
        re, im = -s, c
    elif quarter == 2:
        re, im = -c, -s
    else:
        re, im = s, -c
    return complex(rad * re, rad * im)


@njit(cache=True, nogil=True)
def _modes_from_words(words):
    n = words.shape[0] // 4
    z_s = np.empty(n, np.complex128)
    z_i = np.empty(n, np.complex128)
    for t in range(n):
        z_s[t] = _complex_gaussian(words[4 * t], words[4 * t + 1])
        z_i[t] = _complex_gaussian(words[4 * t + 2], words[4 * t + 3])
    return z_s, z_i


@njit(cache=True, nogil=True)
def _herald_chunk(words, alpha, sigma, ch, sh, gamma_sq):
    n = words.shape[0] // 4
    idx = np.empty(n, np.int64)
    out = np.empty(n, np.complex128)
    k = 0
    for t in range(n):
        z_s = _complex_gaussian(words[4 * t], words[4 * t + 1])
        z_i = _complex_gaussian(words[4 * t + 2], words[4 * t + 3])
        a_s = alpha + sigma * z_s
        a_i = sigma * z_i
        b_i = ch * a_i + sh * a_s.conjugate()
        if b_i.real * b_i.real + b_i.imag * b_i.imag > gamma_sq:
            idx[k] = t
            out[k] = ch * a_s + sh * a_i.conjugate()
            k += 1
    return idx[:k], out[:k]


def bit_generator(seed, start=0):
    """PCG64DXSM stream for ``seed`` positioned at trial index ``start``."""
    bg = np.random.PCG64DXSM(int(seed))
    if start:
        bg.advance(WORDS_PER_TRIAL * int(start))
    return bg


def sample_mode_pairs(seed, count, start=0):
    """Fluctuation draws for trials ``start .. start+count-1`` as arrays."""
    words = bit_generator(seed, start).random_raw(WORDS_PER_TRIAL * int(count))
    z_s, z_i = _modes_from_words(words)
    return ModePair(z_s, z_i)


def sample_mode_pair(seed, index=0):
    """The single ``(z_s, z_i)`` draw of trial ``index``."""
    z_s, z_i = sample_mode_pairs(seed, 1, start=index)
    return ModePair(complex(z_s[0]), complex(z_i[0]))


def input_amplitudes(pair, params):
    """Coherent signal plus background fluctuation; the idler is pure fluctuation."""
    a_s = params.alpha + params.sigma * pair.z_s
    a_i = params.sigma * pair.z_i
    return a_s, a_i


def bogoliubov(a_s, a_i, r):
    """Two-mode squeezing transform of the signal and idler amplitudes."""
    ch, sh = math.cosh(r), math.sinh(r)
    b_s = ch * a_s + sh * np.conj(a_i)
    b_i = ch * a_i + sh * np.conj(a_s)
    if np.ndim(b_s) == 0:
        return TransformedPair(complex(b_s), complex(b_i))
    return TransformedPair(b_s, b_i)


def herald(pair, gamma):
    """True where the idler modulus strictly exceeds the threshold.

    Compared as squared modulus against ``gamma**2``, the same test the
    ensemble kernel applies.
    """
    b_i = np.asarray(pair.b_i)
    passed = b_i.real * b_i.real + b_i.imag * b_i.imag > gamma * gamma
    return bool(passed) if passed.ndim == 0 else passed


def quadrature(c, theta):
    """Balanced-homodyne readout ``sqrt(2) Re[c exp(-i theta)]``.

    Broadcasts over ``c`` and ``theta``.
    """
    c = np.asarray(c)
    theta = np.asarray(theta, dtype=float)
    q = math.sqrt(2.0) * (c.real * np.cos(theta) + c.imag * np.sin(theta))
    return float(q) if q.ndim == 0 else q


def transform_trials(params, count, start=0):
    """Unconditioned ``(b_s, b_i)`` for a block of trials; no herald applied."""
    pair = sample_mode_pairs(params.seed, count, start)
    return bogoliubov(*input_amplitudes(pair, params), params.r)


def generate_ensemble(params, chunk_trials=DEFAULT_CHUNK_TRIALS):
    """Draw trials until ``params.target_conditioned`` of them pass the herald.

    The ensemble stops at exactly the trial that supplied the last required
    sample, so ``total_trials`` does not depend on ``chunk_trials``.
    """
    target = int(params.target_conditioned)
    cap = int(params.max_trials)
    bg = bit_generator(params.seed)
    ch, sh = math.cosh(params.r), math.sinh(params.r)
    parts = []
    accepted = 0
    done = 0
    while accepted < target:
        if done >= cap:
            raise AbortedAfterMaxTrials(accepted, done, target)
        count = min(int(chunk_trials), cap - done)
        words = bg.random_raw(WORDS_PER_TRIAL * count)
        idx, c = _herald_chunk(words, params.alpha, params.sigma, ch, sh, params.gamma**2)
        need = target - accepted
        if len(c) >= need:
            parts.append(c[:need])
            done += int(idx[need - 1]) + 1
            accepted = target
        else:
            parts.append(c)
            accepted += len(c)
            done += count
    c_s = np.concatenate(parts)
    return HeraldedEnsemble(
        c_s=c_s,
        total_trials=done,
        accepted=accepted,
        efficiency=accepted / done,
        seed=int(params.seed),
        params=params,
    )


def expected_quadrature_moments(params, theta):
    """Unconditioned mean and variance of the quadrature at phase ``theta``."""
    ch = math.cosh(params.r)
    mean = math.sqrt(2.0) * ch * (params.alpha * np.exp(-1j * np.asarray(theta))).real
    var = (2.0 * ch * ch - 1.0) * params.sigma**2
    return mean, var


def herald_tail_probability(params):
    """Exact herald rate for ``alpha = 0``, where ``|b_i|`` is Rayleigh distributed."""
    if params.alpha != 0:
        raise ValueError("closed-form herald rate only holds for alpha = 0")
    power = params.sigma**2 * math.cosh(2.0 * params.r)
    return math.exp(-params.gamma**2 / power)


def pair_covariances(b_s, b_i):
    """Sample covariance and pseudo-covariance of the transformed modes.

    Diagnostic only: returns ``(E[d_s conj(d_i)], E[d_s d_i])`` with means removed.
    """
    d_s = b_s - b_s.mean()
    d_i = b_i - b_i.mean()
    return complex(np.mean(d_s * np.conj(d_i))), complex(np.mean(d_s * d_i))
