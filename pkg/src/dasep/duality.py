"""Reversible measures and the q-Krawtchouk self-duality function.

The duality matrix is indexed ``D[eta, xi]`` (rows eta, columns xi, both
via ``index_of``). Its species factor at (eta, xi) is the site product

    prod_x K_{eta^x}(q^{-2 xi^x}, p^x, 1, q^2),
    p^x = alpha^{-1} q^{-2 (N^-_{x-1}(xi) - N^+_{x+1}(eta)) + 2x - 2},

equivalently the product over common sites of
1 - q^{2(x - N^-_{x-1}(xi) + N^+_{x+1}(eta))} / alpha.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .configspace import (
    _as_bits,
    _as_config,
    bits_of,
    filter_species,
    species_index_maps,
)
from .generator import GeneratorParams, global_generator
from .qspecial import q_krawtchouk
from .reports import CheckReport, tolerance

__all__ = [
    "MeasureParams",
    "DualityMatrix",
    "AlphaRangeWarning",
    "mu_measure",
    "nu_measure",
    "nu_vector",
    "duality_krawtchouk",
    "duality_common_sites",
    "species_duality_matrix",
    "duality_matrix",
    "check_interlacing",
    "check_detailed_balance",
    "check_orthogonality",
    "orthogonalizing_weights",
]

MAX_DENSE_L = 6


class AlphaRangeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MeasureParams:
    alpha1: float
    alpha2: float

    def __post_init__(self):
        if not (self.alpha1 > 0 and self.alpha2 > 0):
            raise ValueError("alpha1 and alpha2 must be positive")

    def literal_bound(self, q: float, L: int) -> float:
        """Upper end of (0, q^{-1+(2L+1)}) read literally, i.e. q^{2L}."""
        return q ** (-1 + (2 * L + 1))

    def in_literal_range(self, q: float, L: int) -> bool:
        bound = self.literal_bound(q, L)
        return self.alpha1 < bound and self.alpha2 < bound

    def range_flags(self, q: float, L: int) -> dict:
        return {
            "literal_bound": self.literal_bound(q, L),
            "in_literal_range": self.in_literal_range(q, L),
        }

    def as_dict(self) -> dict:
        return {"alpha1": self.alpha1, "alpha2": self.alpha2}


def mu_measure(v, alpha: float, q: float) -> float:
    """prod_x alpha^{v_x} q^{-2 x v_x}, sites 1-based."""
    out = 1.0
    for x, b in enumerate(_as_bits(v), start=1):
        if b:
            out *= alpha * q ** (-2 * x)
    return out


def nu_measure(c, mp: MeasureParams, q: float) -> float:
    c = _as_config(c)
    return (mu_measure(filter_species(c, 1), mp.alpha1, q)
            * mu_measure(filter_species(c, 2), mp.alpha2, q))


def nu_vector(L: int, mp: MeasureParams, q: float) -> np.ndarray:
    """nu over all 4^L configurations in index order."""
    m1 = np.array([mu_measure(bits_of(b, L), mp.alpha1, q) for b in range(2**L)])
    m2 = np.array([mu_measure(bits_of(b, L), mp.alpha2, q) for b in range(2**L)])
    s1, s2 = species_index_maps(L)
    return m1[s1] * m2[s2]


def _check_lengths(a, b):
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")


def duality_krawtchouk(xi, eta, alpha: float, q: float) -> float:
    """Single-species duality value as a product of site q-Krawtchouk polynomials."""
    xi, eta = _as_bits(xi), _as_bits(eta)
    _check_lengths(xi, eta)
    L = len(xi)
    out = 1.0
    left_xi = 0
    right_eta = sum(eta)
    for x in range(1, L + 1):
        right_eta -= eta[x - 1]
        p = q ** (-2 * (left_xi - right_eta) + 2 * x - 2) / alpha
        out *= q_krawtchouk(eta[x - 1], q ** (-2 * xi[x - 1]), p, 1, q * q)
        left_xi += xi[x - 1]
    return out


def duality_common_sites(xi, eta, alpha: float, q: float) -> float:
    """Same function written as a product over sites occupied in both arguments."""
    xi, eta = _as_bits(xi), _as_bits(eta)
    _check_lengths(xi, eta)
    out = 1.0
    for x in range(1, len(xi) + 1):
        if xi[x - 1] and eta[x - 1]:
            n_left = sum(xi[: x - 1])
            n_right = sum(eta[x:])
            out *= 1.0 - q ** (2 * (x - n_left + n_right)) / alpha
    return out


@lru_cache(maxsize=256)
def _species_matrix_cached(L: int, alpha: float, q: float, method: str) -> np.ndarray:
    fn = duality_krawtchouk if method == "krawtchouk" else duality_common_sites
    views = [bits_of(b, L) for b in range(2**L)]
    A = np.empty((2**L, 2**L))
    for i, eta in enumerate(views):
        for j, xi in enumerate(views):
            A[i, j] = fn(xi, eta, alpha, q)
    A.setflags(write=False)
    return A


def species_duality_matrix(L: int, alpha: float, q: float, method: str = "krawtchouk") -> np.ndarray:
    """2^L x 2^L single-species matrix, rows eta and columns xi (binary index)."""
    if method not in ("krawtchouk", "common_sites"):
        raise ValueError(f"unknown method {method!r}")
    return _species_matrix_cached(int(L), float(alpha), float(q), method)


@dataclass
class DualityMatrix:
    L: int
    params: MeasureParams
    q: float
    values: np.ndarray


def duality_matrix(L: int, mp: MeasureParams, q: float, method: str = "krawtchouk") -> DualityMatrix:
    if L < 1:
        raise ValueError("L must be >= 1")
    if L > MAX_DENSE_L:
        raise ValueError(f"dense duality matrix limited to L <= {MAX_DENSE_L}")
    if not mp.in_literal_range(q, L):
        warnings.warn(f"alpha outside the literal range (0, {mp.literal_bound(q, L):.3g}); "
                      "duality still holds, orthogonality claims are not made",
                      AlphaRangeWarning, stacklevel=2)
    A1 = species_duality_matrix(L, mp.alpha1, q, method)
    A2 = species_duality_matrix(L, mp.alpha2, q, method)
    s1, s2 = species_index_maps(L)
    values = A1[np.ix_(s1, s1)] * A2[np.ix_(s2, s2)]
    return DualityMatrix(L, mp, q, values)


def _quiet_duality(L, mp, q):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AlphaRangeWarning)
        return duality_matrix(L, mp, q).values


def _params(L, p, mp):
    return {"L": L, "q": p.q, "n": p.n, **mp.as_dict()}


def check_interlacing(L: int, p: GeneratorParams, mp: MeasureParams,
                      tol: float | None = None, D: np.ndarray | None = None) -> CheckReport:
    """Residual of the matrix identity L D = D L^T.

    ``D`` may be supplied to test a modified duality matrix.
    """
    tol = tolerance("interlacing") if tol is None else tol
    if L > 3:
        raise ValueError("dense interlacing check is limited to L <= 3")
    G = global_generator(L, p).toarray()
    if D is None:
        D = _quiet_duality(L, mp, p.q)
    lhs = G @ D
    rhs = D @ G.T
    absolute = float(np.abs(lhs - rhs).max())
    scale = float(np.abs(lhs).max())
    relative = absolute / scale if scale > 0 else absolute
    return CheckReport("interlacing", _params(L, p, mp), relative, tol, relative <= tol,
                       {"absolute_residual": absolute, "scale": scale})


def check_detailed_balance(L: int, p: GeneratorParams, mp: MeasureParams,
                           tol: float | None = None, G: np.ndarray | None = None) -> CheckReport:
    """max |nu(a) L(a,b) - nu(b) L(b,a)| relative to max nu(a) L(a,b)."""
    tol = tolerance("detailed_balance") if tol is None else tol
    if L > 4:
        raise ValueError("detailed balance check is limited to L <= 4")
    if G is None:
        G = global_generator(L, p).toarray()
    G = np.array(G, dtype=float)
    np.fill_diagonal(G, 0.0)
    w = nu_vector(L, mp, p.q)
    flux = w[:, None] * G
    absolute = float(np.abs(flux - flux.T).max())
    scale = float(np.abs(flux).max())
    relative = absolute / scale if scale > 0 else absolute
    return CheckReport("detailed_balance", _params(L, p, mp), relative, tol, relative <= tol,
                       {"absolute_residual": absolute, "scale": scale})


def _gram_ratio(D: np.ndarray, w: np.ndarray) -> tuple[float, np.ndarray]:
    G = D.T @ (w[:, None] * D)
    diag = np.abs(np.diag(G))
    off = np.abs(G - np.diag(np.diag(G)))
    return float(off.max() / diag.min()), G


def orthogonalizing_weights(L: int, alpha: float, q: float) -> dict:
    """Diagonal weights w with sum_eta w(eta) A[eta,xi] A[eta,xi'] = 0 (xi != xi').

    Solved as the null space of the pairwise-product system for the species
    matrix A. Reports its dimension, positivity, and how far w/mu spreads
    within each particle-number sector (0 means w is a sector-wise rescaling
    of mu, hence a reversible measure).
    """
    A = species_duality_matrix(L, alpha, q)
    n = A.shape[0]
    rows = [A[:, i] * A[:, j] for i in range(n) for j in range(i + 1, n)]
    if not rows:
        w = np.ones(n)
        nullity = 1
    else:
        S = np.array(rows)
        _, sv, vt = np.linalg.svd(S)
        sv_full = np.concatenate([sv, np.zeros(max(0, n - len(sv)))])
        nullity = int(np.sum(sv_full <= 1e-10 * sv_full.max()))
        w = vt[-1]
        w = w / w[0]
    mu = np.array([mu_measure(bits_of(b, L), alpha, q) for b in range(n)])
    counts = np.array([sum(bits_of(b, L)) for b in range(n)])
    sector_factor = {}
    spread = 0.0
    for N in range(L + 1):
        ratio = w[counts == N] / mu[counts == N]
        sector_factor[N] = float(ratio.mean())
        spread = max(spread, float(np.abs(ratio - ratio.mean()).max() / abs(ratio.mean())))
    gram, _ = _gram_ratio(A, w)
    return {
        "weights": w,
        "nullity": nullity,
        "positive": bool(np.all(w > 0)),
        "sector_factors": sector_factor,
        "sector_spread": spread,
        "gram_ratio": gram,
    }


def check_orthogonality(L: int, p: GeneratorParams, mp: MeasureParams,
                        tol: float | None = None) -> CheckReport:
    """Gram matrix D^T diag(nu) D over the full configuration space.

    PASS needs the off-diagonal maximum below tol * min |diagonal| and both
    alphas inside the literal range; outside it the numbers are reported
    without a PASS claim. Normalizations (the diagonal) are reported only.
    """
    tol = tolerance("orthogonality") if tol is None else tol
    if L > 3:
        raise ValueError("orthogonality check is limited to L <= 3")
    D = _quiet_duality(L, mp, p.q)
    w = nu_vector(L, mp, p.q)
    ratio, G = _gram_ratio(D, w)
    in_range = mp.in_literal_range(p.q, L)
    details = {
        **mp.range_flags(p.q, L),
        "norms": np.diag(G),
        "species": {},
    }
    for i, alpha in ((1, mp.alpha1), (2, mp.alpha2)):
        ow = orthogonalizing_weights(L, alpha, p.q)
        details["species"][i] = {
            "gram_ratio_mu": _gram_ratio(species_duality_matrix(L, alpha, p.q),
                                         np.array([mu_measure(bits_of(b, L), alpha, p.q)
                                                   for b in range(2**L)]))[0],
            "orthogonalizing_nullity": ow["nullity"],
            "orthogonalizing_positive": ow["positive"],
            "orthogonalizing_sector_spread": ow["sector_spread"],
            "orthogonalizing_sector_factors": ow["sector_factors"],
            "orthogonalizing_gram_ratio": ow["gram_ratio"],
        }
    passed = in_range and ratio <= tol
    return CheckReport("orthogonality", _params(L, p, mp), ratio, tol, passed, details)
