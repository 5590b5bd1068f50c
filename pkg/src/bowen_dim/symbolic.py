"""Subshifts of finite type, admissible words and Birkhoff sums.

Phase points are handled throughout the package as rows ``(x, y_1, ..., y_d)``
of a float array: column 0 is the base coordinate, the rest the fiber.
Words are tuples of symbol indices; bulk enumeration returns an integer array
with one word per row.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Tuple

import numpy as np

from .errors import BudgetExceededError, BowenDimError, ValidationError

SymbolWord = Tuple[int, ...]

DEFAULT_WORD_BUDGET = 10**8
POWER_TOL = 1e-12
POWER_MAX_ITER = 100_000


def _bool_matmul(a, b):
    return (a.astype(np.int64) @ b.astype(np.int64)) > 0


@dataclass(frozen=True)
class TransitionStructure:
    """Alphabet ``{0..m-1}`` with admissibility matrix ``A``.

    ``admissible[i, j]`` is true when symbol ``j`` may follow symbol ``i``.
    Dead symbols are rejected on construction; irreducibility is certified
    by the operations that rely on it (entropy, pressure).
    """

    admissible: np.ndarray
    labels: Optional[Tuple[str, ...]] = None
    alphabet_size: int = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.admissible).astype(bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValidationError(f"admissibility matrix must be square and nonempty, got shape {a.shape}")
        if not a.any(axis=1).all():
            dead = np.flatnonzero(~a.any(axis=1)).tolist()
            raise ValidationError(f"symbols {dead} have no admissible successor")
        a.setflags(write=False)
        object.__setattr__(self, "admissible", a)
        object.__setattr__(self, "alphabet_size", a.shape[0])
        if self.labels is not None and len(self.labels) != a.shape[0]:
            raise ValidationError("labels must name every symbol")

    @classmethod
    def full_shift(cls, m: int) -> "TransitionStructure":
        if m < 1:
            raise ValidationError("alphabet size must be positive")
        return cls(np.ones((m, m), dtype=bool))

    def is_irreducible(self) -> bool:
        m = self.alphabet_size
        reach = np.eye(m, dtype=bool) | self.admissible
        power = np.eye(m, dtype=bool)
        for _ in range(max(m - 1, 1)):
            power = _bool_matmul(power, reach)
        return bool(power.all())

    def is_primitive(self) -> bool:
        m = self.alphabet_size
        power = self.admissible.copy()
        # Wielandt: a primitive matrix has A^k > 0 for k = (m-1)^2 + 1.
        for _ in range((m - 1) ** 2):
            if power.all():
                return True
            power = _bool_matmul(power, self.admissible)
        return bool(power.all())

    def require_irreducible(self):
        if not self.is_irreducible():
            raise ValidationError("transition structure is not irreducible (no topologically transitive coding)")

    def predecessors(self, symbol: int) -> np.ndarray:
        return np.flatnonzero(self.admissible[:, symbol])

    def successors(self, symbol: int) -> np.ndarray:
        return np.flatnonzero(self.admissible[symbol])

    def is_admissible(self, word: Sequence[int]) -> bool:
        w = list(word)
        if any(s < 0 or s >= self.alphabet_size for s in w):
            return False
        return all(self.admissible[a, b] for a, b in zip(w, w[1:]))

    def count_words(self, n: int, first_symbol: Optional[int] = None) -> int:
        """Exact number of admissible words of length ``n`` (Python ints)."""
        if n < 1:
            raise ValidationError("word length must be at least 1")
        a = [[int(v) for v in row] for row in self.admissible]
        m = self.alphabet_size
        counts = [0] * m
        if first_symbol is None:
            counts = [1] * m
        else:
            counts[first_symbol] = 1
        for _ in range(n - 1):
            counts = [sum(counts[i] * a[i][j] for i in range(m)) for j in range(m)]
        return sum(counts)


def word_array(ts: TransitionStructure, n: int, budget: int = DEFAULT_WORD_BUDGET,
               first_symbol: Optional[int] = None) -> np.ndarray:
    """Admissible words of length ``n`` as an ``(N, n)`` array, lexicographic."""
    if n < 1:
        raise ValidationError("word length must be at least 1")
    total = ts.count_words(n, first_symbol)
    if total > budget:
        raise BudgetExceededError(
            f"depth {n} needs {total} words, over the enumeration budget {budget}")
    if first_symbol is None:
        words = np.arange(ts.alphabet_size, dtype=np.int64)[:, None]
    else:
        words = np.array([[first_symbol]], dtype=np.int64)
    for _ in range(n - 1):
        rows, cols = np.nonzero(ts.admissible[words[:, -1]])
        words = np.column_stack([words[rows], cols])
    return words


def enumerate_words(ts: TransitionStructure, n: int, budget: int = DEFAULT_WORD_BUDGET,
                    first_symbol: Optional[int] = None) -> list:
    """All admissible words of length ``n``, each once, in lexicographic order.

    ``first_symbol`` restricts to one leading-symbol partition so callers can
    map-reduce over partitions; concatenating the partitions in symbol order
    reproduces the unpartitioned list.
    """
    return [tuple(int(s) for s in row) for row in word_array(ts, n, budget, first_symbol)]


@dataclass(frozen=True)
class PotentialSpec:
    """A real potential on phase space.

    ``evaluator(symbols, points)`` is vectorised: ``symbols`` is an integer
    array of 1-cylinder indices and ``points`` the matching ``(N, 1+d)``
    phase points. ``locally_constant`` is the optional per-symbol fast path.
    ``holder_modulus`` is a Lipschitz constant with respect to the max-norm on
    phase points; zero for locally constant potentials.
    """

    evaluator: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    locally_constant: Optional[np.ndarray] = None
    holder_modulus: float = 0.0
    name: str = "potential"

    def __post_init__(self):
        if self.evaluator is None and self.locally_constant is None:
            raise ValidationError("potential needs an evaluator or a locally constant table")
        if self.locally_constant is not None:
            table = np.asarray(self.locally_constant, dtype=float)
            if table.ndim != 1 or not np.all(np.isfinite(table)):
                raise ValidationError("locally constant table must be a finite 1-d array")
            table.setflags(write=False)
            object.__setattr__(self, "locally_constant", table)
        if self.holder_modulus < 0:
            raise ValidationError("holder_modulus must be nonnegative")

    @classmethod
    def from_table(cls, table: Iterable[float], name: str = "table") -> "PotentialSpec":
        return cls(locally_constant=np.asarray(list(table), dtype=float), name=name)

    @classmethod
    def constant(cls, value: float, alphabet_size: int) -> "PotentialSpec":
        return cls.from_table([value] * alphabet_size, name=f"constant({value!r})")

    def __call__(self, symbols, points) -> np.ndarray:
        symbols = np.asarray(symbols, dtype=np.int64)
        if self.evaluator is not None:
            return np.asarray(self.evaluator(symbols, np.asarray(points, dtype=float)), dtype=float)
        return self.locally_constant[symbols]

    def scaled(self, factor: float) -> "PotentialSpec":
        table = None if self.locally_constant is None else factor * self.locally_constant
        ev = None
        if self.evaluator is not None:
            inner = self.evaluator
            ev = lambda s, p: factor * inner(s, p)
        return PotentialSpec(ev, table, abs(factor) * self.holder_modulus, f"{factor!r}*{self.name}")

    def plus(self, other: "PotentialSpec") -> "PotentialSpec":
        table = None
        if self.locally_constant is not None and other.locally_constant is not None:
            table = self.locally_constant + other.locally_constant
        ev = None
        if table is None:
            ev = lambda s, p: self(s, p) + other(s, p)
        return PotentialSpec(ev, table, self.holder_modulus + other.holder_modulus,
                             f"({self.name})+({other.name})")


def birkhoff_sum(psi: PotentialSpec, orbit) -> float:
    """Sum of ``psi`` along ``orbit``, a nonempty sequence of (symbol, point)."""
    orbit = list(orbit)
    if not orbit:
        raise ValidationError("orbit must be nonempty")
    symbols = np.array([s for s, _ in orbit], dtype=np.int64)
    points = np.array([np.atleast_1d(np.asarray(p, dtype=float)) for _, p in orbit])
    return float(np.sum(psi(symbols, points)))


def perron_root(matrix, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> float:
    """Spectral radius of a nonnegative irreducible matrix by power iteration.

    Convergence is certified by the Collatz-Wielandt bracket
    ``min (Bv)_i/v_i <= rho <= max (Bv)_i/v_i``. The iteration runs on
    ``B + I``, which is primitive for every irreducible ``B``; this also covers
    matrices that are primitive only through negligibly small entries.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError("matrix must be square")
    if np.any(m < 0):
        raise ValidationError("matrix must be nonnegative")
    pattern = TransitionStructure(m > 0)
    pattern.require_irreducible()
    scale = m.max()
    b = m / scale
    shift = 1.0
    b = b + shift * np.eye(len(b))
    v = np.ones(len(b))
    for _ in range(max_iter):
        w = b @ v
        ratios = w / v
        lo, hi = ratios.min(), ratios.max()
        if hi - lo <= tol * hi:
            return float((0.5 * (lo + hi) - shift) * scale)
        v = w / w.max()
    raise BowenDimError(f"power iteration did not reach tolerance {tol} in {max_iter} iterations")


def topological_entropy(ts: TransitionStructure) -> float:
    """Log of the spectral radius of the admissibility matrix."""
    ts.require_irreducible()
    return float(np.log(perron_root(ts.admissible.astype(float))))
