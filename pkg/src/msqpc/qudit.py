"""Exact simulation of single d-level particles.

States live in the computational basis ``T1 = {|0>, ..., |d-1>}``; the
conjugate basis ``T2`` is the image of ``T1`` under the discrete Fourier
transform ``F|t> = d**-0.5 * sum_k exp(2*pi*i*t*k/d) |k>``.

The array helpers (``basis_coefficients``, ``measure_amplitudes``) also accept
joint particle-probe arrays of shape ``(d, D)``: the first axis is always the
particle and every trailing axis is treated as environment.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

ATOL = 1e-10


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class Basis(enum.Enum):
    T1 = "T1"  # computational (Z)
    T2 = "T2"  # Fourier (X)


def check_dimension(d) -> int:
    """Validate a protocol dimension: odd and at least 3.

    The comparison arithmetic bounds private digits by ``h = (d - 1) / 2``,
    which is only an integer for odd ``d``.
    """
    if isinstance(d, bool) or not isinstance(d, (int, np.integer)):
        raise DomainError(f"dimension must be an integer, got {d!r}")
    d = int(d)
    if d < 3 or d % 2 == 0:
        raise DomainError(
            f"dimension must be odd and >= 3 so that h = (d-1)/2 is an integer; got d={d}"
        )
    return d


def _check_index(index, d: int, name: str = "index") -> int:
    if isinstance(index, bool) or not isinstance(index, (int, np.integer)):
        raise DomainError(f"{name} must be an integer, got {index!r}")
    if not 0 <= index < d:
        raise DomainError(f"{name} must lie in [0, {d - 1}], got {index}")
    return int(index)


@lru_cache(maxsize=None)
def fourier_matrix(d: int) -> np.ndarray:
    """Unitary DFT matrix whose column ``t`` is ``F|t>`` (read-only)."""
    k = np.arange(d)
    mat = np.exp(2j * np.pi * np.outer(k, k) / d) / np.sqrt(d)
    mat.setflags(write=False)
    return mat


@lru_cache(maxsize=None)
def _identity(d: int) -> np.ndarray:
    mat = np.eye(d, dtype=complex)
    mat.setflags(write=False)
    return mat


def basis_matrix(d: int, basis: Basis) -> np.ndarray:
    """Matrix whose columns are the vectors of ``basis``."""
    return _identity(d) if basis is Basis.T1 else fourier_matrix(d)


@dataclass(frozen=True, eq=False)
class QuditState:
    """Unit-norm vector of ``d`` complex amplitudes over the T1 basis."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size < 2:
            raise DomainError("a qudit state is a 1-D vector of at least 2 amplitudes")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > ATOL:
            raise DomainError(f"state is not normalized (squared norm {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def _trusted(cls, amps: np.ndarray) -> "QuditState":
        # Skips validation; callers guarantee a unit-norm 1-D vector.
        obj = object.__new__(cls)
        amps = np.asarray(amps, dtype=complex)
        if amps.flags.writeable:
            amps = amps.copy()
            amps.setflags(write=False)
        object.__setattr__(obj, "amplitudes", amps)
        return obj

    @property
    def d(self) -> int:
        return self.amplitudes.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)

    def __repr__(self) -> str:
        return f"QuditState(d={self.d}, amplitudes={np.round(self.amplitudes, 6).tolist()})"


@dataclass(frozen=True)
class MeasurementOutcome:
    value: int
    post_state: QuditState


def prepare(d: int, basis: Basis, index: int) -> QuditState:
    """Prepare ``|index>`` (T1) or ``F|index>`` (T2)."""
    d = check_dimension(d)
    index = _check_index(index, d)
    return QuditState._trusted(basis_matrix(d, Basis(basis))[:, index])


def basis_coefficients(amps: np.ndarray, basis: Basis) -> np.ndarray:
    """Expansion coefficients of ``amps`` (first axis = particle) over ``basis``."""
    if basis is Basis.T1:
        return amps
    return fourier_matrix(amps.shape[0]).conj().T @ amps


def outcome_probabilities(amps: np.ndarray, basis: Basis) -> np.ndarray:
    """Born-rule distribution of the particle, marginalised over any environment."""
    coeffs = basis_coefficients(amps, basis)
    probs = np.abs(coeffs) ** 2
    if probs.ndim > 1:
        probs = probs.reshape(probs.shape[0], -1).sum(axis=1)
    return probs


def _pick(probs: np.ndarray, u: float) -> int:
    # Inverse-CDF draw: exactly one uniform per measurement keeps streams aligned.
    cdf = probs.cumsum()
    k = int(cdf.searchsorted(u * cdf[-1], side="right"))
    k = min(k, probs.shape[0] - 1)
    while probs[k] == 0.0 and k > 0:
        k -= 1
    return k


def measure_amplitudes(amps: np.ndarray, basis: Basis, u: float) -> tuple[int, np.ndarray]:
    """Projectively measure the particle in ``basis`` using the uniform draw ``u``.

    Returns the outcome and the collapsed array. For a bare particle the
    collapsed state is the exact basis vector; for a joint array the
    environment keeps its normalized conditional state.
    """
    d = amps.shape[0]
    coeffs = basis_coefficients(amps, basis)
    probs = coeffs.real ** 2 + coeffs.imag ** 2
    if probs.ndim > 1:
        probs = probs.reshape(d, -1).sum(axis=1)
    value = _pick(probs, u)
    vec = basis_matrix(d, basis)[:, value]
    if amps.ndim == 1:
        return value, vec
    env = coeffs[value] / np.sqrt(probs[value])
    return value, np.multiply.outer(vec, env)


def measure(state: QuditState, basis: Basis, rng: np.random.Generator) -> MeasurementOutcome:
    """Sample a Born-rule outcome of ``state`` in ``basis`` and collapse.

    Consumes exactly one ``rng.random()`` draw.
    """
    if not isinstance(state, QuditState):
        state = QuditState(state)
    value, post = measure_amplitudes(state.amplitudes, Basis(basis), float(rng.random()))
    return MeasurementOutcome(value, QuditState._trusted(post))


def outcome_probability(state: QuditState, basis: Basis, value: int) -> float:
    """Exact probability ``|<basis_value|state>|**2``."""
    amps = state.amplitudes if isinstance(state, QuditState) else QuditState(state).amplitudes
    value = _check_index(value, amps.shape[0], "value")
    coeff = basis_coefficients(amps, Basis(basis))[value]
    return float(abs(coeff) ** 2)


def inverse_fourier_expand(d: int, delta: int) -> np.ndarray:
    """Coefficients ``c`` with ``|delta> = sum_a c[a] F|a>``.

    ``c[a] = d**-0.5 * exp(-2*pi*i*a*delta/d)``.
    """
    d = check_dimension(d)
    delta = _check_index(delta, d, "delta")
    a = np.arange(d)
    return np.exp(-2j * np.pi * a * delta / d) / np.sqrt(d)


def fidelity(a: QuditState, b: QuditState) -> float:
    va = np.asarray(a, dtype=complex)
    vb = np.asarray(b, dtype=complex)
    if va.shape != vb.shape:
        raise DomainError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    return float(abs(np.vdot(va, vb)) ** 2)


def states_equal(a: QuditState, b: QuditState, tol: float = ATOL) -> bool:
    """Equality up to global phase: ``|<a|b>|**2 >= 1 - tol``."""
    return fidelity(a, b) >= 1.0 - tol
