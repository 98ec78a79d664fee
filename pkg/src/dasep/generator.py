"""Type D ASEP generator (delta = 0).

The two-site generator is a 16x16 matrix over the pair states (a, b),
a, b in {0,1,2,3}, ordered lexicographically. The L-site generator is the
sum of the two-site block embedded on every bond (x, x+1); closed
boundaries need no extra terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .configspace import _as_config, all_configs, filter_species, index_of

__all__ = [
    "GeneratorParams",
    "RateMatrix",
    "GeneratorReport",
    "SpeciesReductionReport",
    "local_generator",
    "global_generator",
    "validate_generator",
    "single_species_reduction",
    "asep_generator",
    "hop_rates",
    "rightward_displacement",
]

MAX_L = 10
DENSE_MAX_L = 3


@dataclass(frozen=True)
class GeneratorParams:
    q: float
    n: int

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise ValueError(f"q must lie in (0, 1), got {self.q}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def speed(self) -> float:
        """q^{1-2n} + q^{2n-1}, the single-species time scale."""
        return self.q ** (1 - 2 * self.n) + self.q ** (2 * self.n - 1)

    def as_dict(self) -> dict:
        return {"q": self.q, "n": self.n}


def hop_rates(p: GeneratorParams) -> tuple[float, float]:
    """(right, left) hop rates of a lone particle: q^{-1} s and q s."""
    s = p.speed
    return s / p.q, s * p.q


@dataclass
class RateMatrix:
    """Markov generator; ``matrix`` is a dense array or a CSR matrix."""

    matrix: np.ndarray | sp.csr_matrix
    L: int
    params: GeneratorParams | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)

    def __getitem__(self, key):
        i, j = key
        if not isinstance(i, int):
            i = index_of(i)
        if not isinstance(j, int):
            j = index_of(j)
        return float(self.matrix[i, j])

    def entries(self) -> list[tuple[int, int, float]]:
        """Nonzero entries (row, col, rate), diagonal included, row-major."""
        coo = sp.coo_matrix(self.matrix)
        order = np.lexsort((coo.col, coo.row))
        return [(int(coo.row[k]), int(coo.col[k]), float(coo.data[k]))
                for k in order if coo.data[k] != 0.0]

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "entries": [list(e) for e in self.entries()],
            "params": None if self.params is None else {**self.params.as_dict(), "L": self.L},
        }


def _pair(a: int, b: int) -> int:
    return 4 * a + b


def local_generator(p: GeneratorParams) -> RateMatrix:
    q, n = p.q, p.n
    s = p.speed
    gap = (q ** (n - 1) - q ** (1 - n)) ** 2
    M = np.zeros((16, 16))
    # lone particle hops; left hop q*s, right hop s/q
    for a, b in [((0, 1), (1, 0)), ((0, 2), (2, 0)), ((1, 3), (3, 1)), ((2, 3), (3, 2))]:
        M[_pair(*a), _pair(*b)] = q * s
        M[_pair(*b), _pair(*a)] = s / q
    # (0,3) row
    M[_pair(0, 3), _pair(1, 2)] = 2 * q**2 + q ** (2 - 2 * n) - q ** (4 - 2 * n)
    M[_pair(0, 3), _pair(2, 1)] = 2 * q**2 + q ** (2 - 2 * n) - q ** (4 - 2 * n)
    M[_pair(0, 3), _pair(3, 0)] = q**2 * gap
    # (1,2) and (2,1) rows
    for a, b in [((1, 2), (2, 1)), ((2, 1), (1, 2))]:
        M[_pair(*a), _pair(0, 3)] = (1 / q) ** (2 * n) - (1 / q) ** (2 * n - 2) + 2
        M[_pair(*a), _pair(*b)] = gap
        M[_pair(*a), _pair(3, 0)] = q ** (2 * n) - q ** (2 * n - 2) + 2
    # (3,0) row
    M[_pair(3, 0), _pair(0, 3)] = gap / q**2
    M[_pair(3, 0), _pair(1, 2)] = (1 / q) ** (2 - 2 * n) - (1 / q) ** (4 - 2 * n) + 2 / q**2
    M[_pair(3, 0), _pair(2, 1)] = (1 / q) ** (2 - 2 * n) - (1 / q) ** (4 - 2 * n) + 2 / q**2
    M[np.diag_indices(16)] = -M.sum(axis=1)
    return RateMatrix(M, 2, p)


def global_generator(L: int, p: GeneratorParams, dense: bool | None = None) -> RateMatrix:
    """Sum of the local generator over bonds (x, x+1).

    Dense for L <= 3 and sparse CSR otherwise, unless ``dense`` says so.
    """
    if L < 2:
        raise ValueError("the generator needs L >= 2")
    if L > MAX_L:
        raise ValueError(f"L={L} exceeds the dimension guard (L <= {MAX_L})")
    if dense is None:
        dense = L <= DENSE_MAX_L
    local = sp.csr_matrix(local_generator(p).matrix)
    total = sp.csr_matrix((4**L, 4**L))
    for x in range(L - 1):
        left = sp.identity(4**x, format="csr")
        right = sp.identity(4 ** (L - x - 2), format="csr")
        total = total + sp.kron(sp.kron(left, local), right, format="csr")
    total.eliminate_zeros()
    return RateMatrix(total.toarray() if dense else total.tocsr(), L, p)


def rightward_displacement(a, b) -> int:
    """Total signed rightward displacement of all particles going from a to b.

    Both arguments are configurations (Config, digit string or site tuple)
    with equal per-species particle numbers.
    """
    ca, cb = _as_config(a), _as_config(b)
    total = 0
    for i in (1, 2):
        va, vb = filter_species(ca, i), filter_species(cb, i)
        if va.count != vb.count:
            raise ValueError("configurations differ in particle numbers")
        total += sum(x + 1 for x, v in enumerate(vb.bits) if v)
        total -= sum(x + 1 for x, v in enumerate(va.bits) if v)
    return total


@dataclass
class GeneratorReport:
    max_row_sum: float
    scale: float
    min_offdiagonal: float
    conservation_violations: list[tuple[int, int]] = field(default_factory=list)
    row_sum_tolerance: float = 1e-12

    @property
    def rows_ok(self) -> bool:
        return self.max_row_sum <= self.row_sum_tolerance * max(self.scale, 1.0)

    @property
    def nonnegative(self) -> bool:
        return self.min_offdiagonal >= 0.0

    @property
    def conserves(self) -> bool:
        return not self.conservation_violations

    @property
    def passed(self) -> bool:
        return self.rows_ok and self.nonnegative and self.conserves

    def as_dict(self) -> dict:
        return {
            "max_row_sum": self.max_row_sum,
            "scale": self.scale,
            "min_offdiagonal": self.min_offdiagonal,
            "conservation_violations": [list(v) for v in self.conservation_violations],
            "pass": self.passed,
        }


def _species_counts(L: int) -> np.ndarray:
    counts = np.zeros((4**L, 2), dtype=np.int64)
    for c in all_configs(L):
        counts[index_of(c)] = c.counts()
    return counts


def validate_generator(g: RateMatrix | np.ndarray, row_sum_tolerance: float = 1e-12) -> GeneratorReport:
    """Row sums, sign of off-diagonal rates and per-species conservation."""
    if not isinstance(g, RateMatrix):
        dim = np.shape(g)[0]
        L = int(round(np.log(dim) / np.log(4)))
        g = RateMatrix(g, L)
    M = sp.csr_matrix(g.matrix)
    row_sums = np.asarray(M.sum(axis=1)).ravel()
    scale = float(np.abs(M).sum(axis=1).max()) if M.nnz else 0.0
    off = M - sp.diags(M.diagonal())
    off = sp.coo_matrix(off)
    min_off = float(off.data.min()) if off.nnz else 0.0
    violations = []
    if 4**g.L == g.dim:
        counts = _species_counts(g.L)
        for r, c, v in zip(off.row, off.col, off.data):
            if v != 0 and not np.array_equal(counts[r], counts[c]):
                violations.append((int(r), int(c)))
    return GeneratorReport(
        max_row_sum=float(np.abs(row_sums).max()),
        scale=scale,
        min_offdiagonal=min_off,
        conservation_violations=violations,
        row_sum_tolerance=row_sum_tolerance,
    )


def asep_generator(L: int, right: float, left: float) -> np.ndarray:
    """Single-species ASEP on {0,1}^L, closed boundaries, site 1 most significant."""
    dim = 2**L
    M = np.zeros((dim, dim))
    for idx in range(dim):
        bits = [(idx >> (L - 1 - x)) & 1 for x in range(L)]
        for x in range(L - 1):
            if bits[x] == 1 and bits[x + 1] == 0:
                rate, new = right, bits.copy()
            elif bits[x] == 0 and bits[x + 1] == 1:
                rate, new = left, bits.copy()
            else:
                continue
            new[x], new[x + 1] = new[x + 1], new[x]
            j = int("".join(map(str, new)), 2)
            M[idx, j] += rate
            # diagonal accumulated bond by bond
            M[idx, idx] -= rate
    return M


@dataclass
class SpeciesReductionReport:
    species: int
    right_rate: float
    left_rate: float
    max_deviation: float

    @property
    def passed(self) -> bool:
        return self.max_deviation == 0.0

    def as_dict(self) -> dict:
        return {"species": self.species, "right_rate": self.right_rate,
                "left_rate": self.left_rate, "max_deviation": self.max_deviation,
                "pass": self.passed}


def single_species_reduction(L: int, p: GeneratorParams, species: int):
    """Restrict the generator to one-species configurations and compare with ASEP.

    Returns ``(restricted, report)``; the restricted matrix is indexed by the
    binary occupation word of the chosen species.
    """
    if species not in (1, 2):
        raise ValueError("species must be 1 or 2")
    g = global_generator(L, p)
    M = sp.csr_matrix(g.matrix)
    rows = []
    for b in range(2**L):
        digits = [species * ((b >> (L - 1 - x)) & 1) for x in range(L)]
        rows.append(index_of(digits))
    restricted = M[rows][:, rows].toarray()
    right, left = hop_rates(p)
    reference = asep_generator(L, right, left)
    report = SpeciesReductionReport(species, right, left,
                                    float(np.abs(restricted - reference).max()))
    return RateMatrix(restricted, L, p), report
