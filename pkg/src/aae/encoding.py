"""Training targets for amplitude encoding.

A real data vector is normalized, classified by sign structure, extended with
a sign ancilla when it has mixed signs, and turned into the two probability
distributions the loader is trained against (computational basis and
Hadamard basis).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

SIGN_TOL = 1e-12


class EncodingError(ValueError):
    pass


class Case(str, enum.Enum):
    UNIFORM_SIGN = "case1"
    MIXED_SIGN = "case2"


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def pad_pow2(raw) -> np.ndarray:
    """Zero-pad at the tail up to the next power of two."""
    raw = np.asarray(raw, dtype=float).ravel()
    if raw.size == 0:
        raise EncodingError("empty vector")
    size = 1 << max(1, (raw.size - 1).bit_length())
    return np.concatenate([raw, np.zeros(size - raw.size)])


def normalize(raw) -> np.ndarray:
    raw = np.asarray(raw, dtype=float).ravel()
    if raw.size == 0 or not _is_pow2(raw.size):
        raise EncodingError(f"length {raw.size} is not a power of two; pad first")
    norm = np.linalg.norm(raw)
    if norm == 0.0:
        raise EncodingError("cannot normalize the zero vector")
    return raw / norm


def classify_case(d) -> Case:
    d = np.asarray(d, dtype=float)
    if np.all(d >= -SIGN_TOL) or np.all(d <= SIGN_TOL):
        return Case.UNIFORM_SIGN
    return Case.MIXED_SIGN


def extend_case2(d) -> np.ndarray:
    """Interleave a sign ancilla as the least significant index bit.

    Non-negative entries go to the even slot, negative entries (negated) to
    the odd slot.
    """
    d = np.asarray(d, dtype=float)
    if classify_case(d) is not Case.MIXED_SIGN:
        raise EncodingError("extend_case2 called on a uniform-sign vector")
    out = np.zeros(2 * d.size)
    neg = d < 0
    out[0::2] = np.where(neg, 0.0, d)
    out[1::2] = np.where(neg, -d, 0.0)
    return out


def fold_case2(d_bar) -> np.ndarray:
    d_bar = np.asarray(d_bar, dtype=float)
    return d_bar[0::2] - d_bar[1::2]


def fwht(v, axis: int = -1) -> np.ndarray:
    """Orthonormal Walsh-Hadamard transform (equals H^{(x)n}) along ``axis``.

    Radix-2 butterflies, one vectorized pass per bit; works for real and
    complex input.
    """
    v = np.asarray(v)
    out = np.moveaxis(np.array(v, dtype=np.result_type(v, float), copy=True), axis, -1)
    out = np.ascontiguousarray(out)
    n = out.shape[-1]
    if not _is_pow2(n) or n < 2:
        raise EncodingError(f"fwht needs a power-of-two length >= 2, got {n}")
    lead = out.shape[:-1]
    h = 1
    while h < n:
        view = out.reshape(lead + (n // (2 * h), 2, h))
        a = view[..., 0, :].copy()
        b = view[..., 1, :]
        view[..., 0, :] += b
        b *= -1
        b += a
        h *= 2
    out /= np.sqrt(n)
    return np.moveaxis(out, -1, axis)


@dataclass
class TargetEncoding:
    """A normalized data vector and the distributions a loader must reproduce."""

    d: np.ndarray
    case: Case
    d_bar: np.ndarray | None = None
    p: np.ndarray = field(default=None, repr=False)
    p_hadamard: np.ndarray = field(default=None, repr=False)

    @property
    def loaded_vector(self) -> np.ndarray:
        """The vector whose amplitudes the trained circuit should output."""
        return self.d if self.d_bar is None else self.d_bar

    @property
    def n_qubits(self) -> int:
        return self.loaded_vector.size.bit_length() - 1

    @classmethod
    def from_raw(cls, raw) -> "TargetEncoding":
        d = normalize(pad_pow2(raw))
        case = classify_case(d)
        enc = cls(d=d, case=case, d_bar=extend_case2(d) if case is Case.MIXED_SIGN else None)
        enc.p, enc.p_hadamard = target_distributions(enc)
        return enc


def target_distributions(enc: TargetEncoding) -> tuple[np.ndarray, np.ndarray]:
    v = enc.loaded_vector
    return v**2, fwht(v) ** 2
