"""Deterministic numeric kernels shared by every other module.

Matrices are plain 2-D float64 numpy arrays in C (row-major) order; the
``Mat`` alias documents that convention.  All randomness flows through
:class:`Rng`, a self-contained xoshiro256** generator seeded via splitmix64,
so experiments are bit-reproducible regardless of numpy version or platform.

PRNG algorithm (fixed for the whole repository):

- seeding: the four 64-bit state words are successive splitmix64 outputs of
  the user seed;
- stream: xoshiro256** (Blackman & Vigna), ``rotl(s1 * 5, 7) * 9``;
- doubles: ``(next_u64() >> 11) * 2**-53`` giving uniform values in [0, 1);
- child seeds: ``mix_seed(seed, salt) = splitmix64(seed ^ splitmix64(salt))``.
"""

from __future__ import annotations

import math

import numpy as np

# A Mat is a 2-D float64 ndarray, C order. Kept as an alias rather than a
# wrapper class: numpy already enforces the dense row-major layout.
Mat = np.ndarray

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    """One splitmix64 step: advance by the golden-ratio increment and scramble."""
    x = (x + _GOLDEN) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def mix_seed(seed: int, salt: int) -> int:
    """Derive an independent 64-bit child seed from ``(seed, salt)``.

    Used wherever one logical task hands sub-seeds to others (replications,
    folds, per-word out-of-vocabulary vectors), so derived streams do not
    depend on consumption order.
    """
    return _splitmix64((seed & _MASK) ^ _splitmix64(salt & _MASK))


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class Rng:
    """xoshiro256** stream owned by a single logical task.

    Equal seeds produce equal streams; children created via :meth:`child`
    are derived from the original seed, not the current state, so their
    streams do not depend on how much of the parent was consumed.
    """

    __slots__ = ("seed", "_s")

    def __init__(self, seed: int):
        self.seed = seed & _MASK
        s = self.seed
        state = []
        for _ in range(4):
            s = (s + _GOLDEN) & _MASK
            z = s
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
            state.append(z ^ (z >> 31))
        if not any(state):  # xoshiro must not start at all-zero state
            state[0] = 1
        self._s = state

    @property
    def state(self) -> tuple[int, int, int, int]:
        return tuple(self._s)

    def clone(self) -> "Rng":
        c = Rng.__new__(Rng)
        c.seed = self.seed
        c._s = list(self._s)
        return c

    def child(self, salt: int) -> "Rng":
        return Rng(mix_seed(self.seed, salt))

    def next_u64(self) -> int:
        s = self._s
        s0, s1, s2, s3 = s
        result = (_rotl((s1 * 5) & _MASK, 7) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        s[0], s[1], s[2], s[3] = s0, s1, s2, s3
        return result

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * 1.1102230246251565e-16  # 2**-53

    def random_array(self, n: int) -> np.ndarray:
        """``n`` uniform doubles in [0, 1), drawn in stream order."""
        out = np.empty(n, dtype=np.float64)
        s = self._s
        s0, s1, s2, s3 = s
        for i in range(n):
            result = (_rotl((s1 * 5) & _MASK, 7) * 9) & _MASK
            t = (s1 << 17) & _MASK
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = _rotl(s3, 45)
            out[i] = (result >> 11) * 1.1102230246251565e-16
        s[0], s[1], s[2], s[3] = s0, s1, s2, s3
        return out

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def uniform_array(self, n: int, lo: float, hi: float) -> np.ndarray:
        return lo + (hi - lo) * self.random_array(n)

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("randbelow requires n >= 1")
        limit = ((1 << 64) // n) * n
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, n: int, k: int) -> list[int]:
        """``k`` distinct indices from range(n), without replacement."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} from {n}")
        pool = list(range(n))
        for i in range(k):
            j = i + self.randbelow(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]


def uniform_fill(m: Mat, rng: Rng, lo: float, hi: float) -> Mat:
    """Fill ``m`` in place with i.i.d. uniform draws on [lo, hi), row-major order."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("uniform_fill bounds must be finite")
    if not lo < hi:
        raise ValueError(f"uniform_fill requires lo < hi, got [{lo}, {hi})")
    m[...] = rng.uniform_array(m.size, lo, hi).reshape(m.shape)
    return m


def softmax(logits) -> np.ndarray:
    """Numerically stable softmax (max-subtraction before exponentiation)."""
    x = np.asarray(logits, dtype=np.float64)
    if x.size == 0:
        raise ValueError("softmax of empty input")
    if not np.all(np.isfinite(x)):
        raise ValueError("softmax input must be finite")
    shifted = x - x.max()
    e = np.exp(shifted)
    return e / e.sum()


def cross_entropy(probs, label: int) -> float:
    """Negative log probability of the true class, clamped at 1e-12."""
    p = np.asarray(probs, dtype=np.float64)
    if not 0 <= label < p.size:
        raise ValueError(f"label {label} out of range for {p.size} classes")
    return -math.log(max(float(p[label]), 1e-12))


def constrain_l2(v, c: float):
    """Rescale ``v`` onto the l2 ball of radius ``c`` when its norm exceeds ``c``.

    Vectors already within the ball are returned unchanged (same object when
    the input is an ndarray).
    """
    if not (math.isfinite(c) and c > 0):
        raise ValueError(f"l2 constraint must be positive, got {c}")
    arr = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if norm > c:
        return arr * (c / norm)
    return v if isinstance(v, np.ndarray) else arr
