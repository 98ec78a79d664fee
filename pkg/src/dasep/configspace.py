"""Configuration space of the two-species exclusion process.

A site holds 0 (empty), 1 (class 1 only), 2 (class 2 only) or 3 (both).
Configurations of L sites are ordered lexicographically with site 1 most
significant, so index = sum_x c[x] * 4**(L - x). Site indices in the public
functions are 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

__all__ = [
    "Config",
    "SpeciesView",
    "index_of",
    "config_of",
    "all_configs",
    "filter_species",
    "left_count",
    "right_count",
    "common_sites",
    "species_index_maps",
    "bits_of",
]

STATES = (0, 1, 2, 3)


@dataclass(frozen=True)
class Config:
    sites: tuple[int, ...]

    def __post_init__(self):
        sites = tuple(int(s) for s in self.sites)
        if not sites:
            raise ValueError("a configuration needs at least one site")
        if any(s not in STATES for s in sites):
            raise ValueError(f"site states must be in {{0,1,2,3}}, got {sites}")
        object.__setattr__(self, "sites", sites)

    @classmethod
    def parse(cls, text: str) -> "Config":
        """Digit-string form, site 1 leftmost: ``Config.parse("031")``."""
        text = text.strip()
        if not text or not text.isdigit():
            raise ValueError(f"bad configuration string {text!r}")
        return cls(tuple(int(ch) for ch in text))

    def __str__(self) -> str:
        return "".join(str(s) for s in self.sites)

    def __len__(self) -> int:
        return len(self.sites)

    @property
    def L(self) -> int:
        return len(self.sites)

    def counts(self) -> tuple[int, int]:
        """(number of class 1 particles, number of class 2 particles)."""
        n1 = sum(1 for s in self.sites if s in (1, 3))
        n2 = sum(1 for s in self.sites if s in (2, 3))
        return n1, n2


@dataclass(frozen=True)
class SpeciesView:
    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError("species view entries must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    def __len__(self) -> int:
        return len(self.bits)

    def __getitem__(self, x):
        return self.bits[x]

    @property
    def count(self) -> int:
        return sum(self.bits)


def _as_config(c) -> Config:
    if isinstance(c, Config):
        return c
    if isinstance(c, str):
        return Config.parse(c)
    return Config(tuple(c))


def _as_bits(v) -> tuple[int, ...]:
    return v.bits if isinstance(v, SpeciesView) else tuple(v)


def index_of(c) -> int:
    c = _as_config(c)
    idx = 0
    for s in c.sites:
        idx = 4 * idx + s
    return idx


def config_of(idx: int, L: int) -> Config:
    if L < 1:
        raise ValueError("L must be >= 1")
    if not 0 <= idx < 4**L:
        raise IndexError(f"index {idx} out of range for L={L}")
    sites = []
    for _ in range(L):
        idx, s = divmod(idx, 4)
        sites.append(s)
    return Config(tuple(reversed(sites)))


def all_configs(L: int) -> Iterator[Config]:
    for idx in range(4**L):
        yield config_of(idx, L)


def filter_species(c, i: int) -> SpeciesView:
    """Occupancy of species ``i`` (1 or 2) with the other species removed."""
    if i not in (1, 2):
        raise ValueError("species must be 1 or 2")
    c = _as_config(c)
    return SpeciesView(tuple(1 if s in (i, 3) else 0 for s in c.sites))


def left_count(v, x: int) -> int:
    """Particles strictly left of site x (1-based)."""
    bits = _as_bits(v)
    if not 1 <= x <= len(bits):
        raise IndexError(f"site {x} outside 1..{len(bits)}")
    return sum(bits[: x - 1])


def right_count(v, x: int) -> int:
    """Particles strictly right of site x (1-based)."""
    bits = _as_bits(v)
    if not 1 <= x <= len(bits):
        raise IndexError(f"site {x} outside 1..{len(bits)}")
    return sum(bits[x:])


def common_sites(xi, eta) -> frozenset[int]:
    a, b = _as_bits(xi), _as_bits(eta)
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    return frozenset(x + 1 for x in range(len(a)) if a[x] and b[x])


@lru_cache(maxsize=None)
def species_index_maps(L: int) -> tuple[np.ndarray, np.ndarray]:
    """For every configuration index, the binary index of its two species views.

    Binary indices use the same most-significant-first order as ``index_of``.
    """
    idx = np.arange(4**L)
    s1 = np.zeros(4**L, dtype=np.int64)
    s2 = np.zeros(4**L, dtype=np.int64)
    for x in range(L):
        digit = (idx // 4 ** (L - 1 - x)) % 4
        s1 = 2 * s1 + (digit & 1)
        s2 = 2 * s2 + (digit >> 1)
    s1.setflags(write=False)
    s2.setflags(write=False)
    return s1, s2


def bits_of(idx: int, L: int) -> tuple[int, ...]:
    """Binary species view with index ``idx`` (site 1 most significant)."""
    return tuple((idx >> (L - 1 - x)) & 1 for x in range(L))

