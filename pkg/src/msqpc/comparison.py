"""Modulo-d arithmetic of the comparison pipeline.

Each user blinds a private digit ``p`` (in ``[0, h]``, ``h = (d-1)/2``) with
a shared key digit ``k`` and a private measurement digit ``m``::

    c = m + k + p            (mod d)   # user side
    f = c - m                (mod d)   # TP1 removes m
    R = f_n - f_n'           (mod d)   # = p_n - p_n'
    y = classify(R)

Because both private digits are at most ``h``, ``R`` lands in ``(0, h]`` when
``p_n > p_n'`` and in ``(h, 2h]`` when ``p_n < p_n'``.
"""
from __future__ import annotations

import enum
from typing import Sequence

import numpy as np

from .qudit import DomainError, check_dimension


class Relation(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


def half_range(d: int) -> int:
    return (check_dimension(d) - 1) // 2


def _digit(x, d: int, name: str = "digit") -> int:
    if isinstance(x, bool) or not isinstance(x, (int, np.integer)):
        raise DomainError(f"{name} must be an integer, got {x!r}")
    if not 0 <= x < d:
        raise DomainError(f"{name} must lie in [0, {d - 1}], got {x}")
    return int(x)


def _private(p, d: int, name: str = "private digit") -> int:
    h = half_range(d)
    if isinstance(p, bool) or not isinstance(p, (int, np.integer)):
        raise DomainError(f"{name} must be an integer, got {p!r}")
    if not 0 <= p <= h:
        # no silent wrapping: a reduced input would compare wrongly
        raise DomainError(f"{name} must lie in [0, h={h}] for d={d}, got {p}")
    return int(p)


def mod_add(a: int, b: int, d: int) -> int:
    return (_digit(a, d) + _digit(b, d)) % d


def mod_sub(a: int, b: int, d: int) -> int:
    return (_digit(a, d) - _digit(b, d)) % d


def encode(m: int, k: int, p: int, d: int) -> int:
    """User-side announcement ``c = m + k + p (mod d)``."""
    d = check_dimension(d)
    return (_digit(m, d, "m") + _digit(k, d, "k") + _private(p, d)) % d


def decode(c: int, m: int, d: int) -> int:
    """TP1-side unmasking ``f = c - m (mod d)``."""
    return mod_sub(c, m, d)


def pairwise_difference(f_first: int, f_second: int, d: int) -> int:
    return mod_sub(f_first, f_second, d)


def classify(r: int, d: int) -> Relation:
    """Map a difference to LESS / EQUAL / GREATER for the first operand."""
    r = _digit(r, check_dimension(d), "R")
    if r == 0:
        return Relation.EQUAL
    return Relation.GREATER if r <= (d - 1) // 2 else Relation.LESS


def direct_oracle(p_first: int, p_second: int) -> Relation:
    """Ground truth by ordinary integer comparison."""
    return Relation((p_first > p_second) - (p_first < p_second))


def relation_matrix(f: Sequence[int], d: int) -> np.ndarray:
    """``y[n, n'] = classify(f_n - f_n')`` with enforced antisymmetry."""
    n_users = len(f)
    y = np.zeros((n_users, n_users), dtype=np.int8)
    for a in range(n_users):
        for b in range(a + 1, n_users):
            rel = classify(pairwise_difference(f[a], f[b], d), d)
            y[a, b] = rel
            y[b, a] = -rel
    return y


def compare_pipeline(m: Sequence[int], k: int, p: Sequence[int], d: int) -> np.ndarray:
    """Run encode -> decode -> difference -> classify for every user pair."""
    d = check_dimension(d)
    if len(m) != len(p):
        raise DomainError("need exactly one measurement digit per user")
    if len(p) < 2:
        raise DomainError("a comparison needs at least 2 users")
    c = [encode(mi, k, pi, d) for mi, pi in zip(m, p)]
    f = [decode(ci, mi, d) for ci, mi in zip(c, m)]
    return relation_matrix(f, d)


def oracle_matrix(p: Sequence[int]) -> np.ndarray:
    n_users = len(p)
    y = np.zeros((n_users, n_users), dtype=np.int8)
    for a in range(n_users):
        for b in range(n_users):
            if a != b:
                y[a, b] = direct_oracle(p[a], p[b])
    return y


def ordering(relations: np.ndarray) -> str:
    """Render a consistent relation matrix as e.g. ``"p2 < p1 = p3 < p4"``."""
    n_users = relations.shape[0]
    # number of users strictly below each user
    below = [(int(np.sum(relations[n] == Relation.GREATER)), n) for n in range(n_users)]
    groups: dict[int, list[int]] = {}
    for rank, n in sorted(below):
        groups.setdefault(rank, []).append(n)
    return " < ".join(" = ".join(f"p{n + 1}" for n in members) for _, members in sorted(groups.items()))
