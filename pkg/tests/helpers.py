"""Shared test oracles and small builders.

The brute-force routines here are deliberately naive: they define what the
symbolic operations are supposed to mean, so the closed forms are always
judged against direct enumeration.
"""

from __future__ import annotations

import random
from fractions import Fraction

from mclcheck.symexpr import Poly, SymExpr


def brute_sum(p: Poly, var: str, lo: int, hi: int, env: dict[str, int] | None = None) -> Fraction:
    env = dict(env or {})
    total = Fraction(0)
    for v in range(lo, hi + 1):
        env[var] = v
        total += p.eval(env)
    return total


def brute_max(e: SymExpr, var: str, lo: int, hi: int, env: dict[str, int] | None = None) -> Fraction:
    env = dict(env or {})
    best = None
    for v in range(lo, hi + 1):
        env[var] = v
        val = e.eval(env)
        best = val if best is None else max(best, val)
    assert best is not None
    return best


def random_poly(rng: random.Random, variables: list[str], max_degree: int = 3,
                coeff_range: tuple[int, int] = (-5, 5), max_terms: int = 5) -> Poly:
    terms = {}
    for _ in range(rng.randint(1, max_terms)):
        degree = rng.randint(0, max_degree)
        mono: dict[str, int] = {}
        for _ in range(degree):
            v = rng.choice(variables)
            mono[v] = mono.get(v, 0) + 1
        key = tuple(sorted(mono.items()))
        coeff = rng.randint(*coeff_range)
        terms[key] = terms.get(key, Fraction(0)) + coeff
    return Poly.from_dict(terms)


def poly_of(env_free: dict[tuple[tuple[str, int], ...], int]) -> Poly:
    return Poly.from_dict({m: Fraction(c) for m, c in env_free.items()})
