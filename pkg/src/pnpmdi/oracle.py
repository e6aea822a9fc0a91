"""Brute-force photon-number oracle for the click-pattern distribution.

A phase-randomized coherent state is a Poisson mixture of Fock states, so the
phase average can be done exactly without any quadrature. Each Fock term is
pushed through the beamsplitter as a polynomial in output creation operators,
and detection applies binomial loss plus dark clicks to the photon numbers.

This deliberately shares no code with :mod:`pnpmdi.optics`; only the port
conventions (beamsplitter phases, SPD numbering, pattern index) are common.
"""

from __future__ import annotations

import math
from collections import defaultdict
from functools import lru_cache
from itertools import product

# Output modes are (port, pol, time) flattened to port*4 + pol*2 + time. Time
# slot 1 carries the part of Bob's pulse that does not overlap Alice's mode.
# Detector d = port*2 + pol therefore collects modes 2d and 2d+1.
N_MODES = 8
# Monomials are packed as sum(e_k * BASE**k); multiplying monomials adds keys.
# Degrees stay below BASE for any cutoff < 16.
BASE = 32


def _mode(port: int, pol: int, time: int) -> int:
    return port * 4 + pol * 2 + time


def _unpack(key: int) -> list[int]:
    exps = []
    for _ in range(N_MODES):
        key, e = divmod(key, BASE)
        exps.append(e)
    return exps


def _poly_mul(p: dict, q: dict) -> dict:
    out: dict = defaultdict(complex)
    for kp, cp in p.items():
        for kq, cq in q.items():
            out[kp + kq] += cp * cq
    return out


def _powers(poly: dict, n: int) -> list[dict]:
    res = [{0: 1.0 + 0j}]
    for _ in range(n):
        res.append(_poly_mul(res[-1], poly))
    return res


def _normalized(pol) -> tuple[complex, complex]:
    h, v = complex(pol[0]), complex(pol[1])
    norm = math.sqrt(abs(h) ** 2 + abs(v) ** 2)
    return h / norm, v / norm


@lru_cache(maxsize=256)
def _conditional_photon_counts(pol_a: tuple, pol_b: tuple, overlap: float, cutoff: int):
    """For each Fock input (na, nb): distribution of photons per detector."""
    r = 1 / math.sqrt(2)
    ah, av = pol_a
    bh, bv = pol_b
    sm, su = math.sqrt(overlap), math.sqrt(1 - overlap)

    # a_in -> (out1 + i out2)/sqrt2 ; b_in -> (i out1 + out2)/sqrt2
    alice: dict = defaultdict(complex)
    bob: dict = defaultdict(complex)
    for port in (0, 1):
        for pol, amp_a, amp_b in ((0, ah, bh), (1, av, bv)):
            alice[BASE ** _mode(port, pol, 0)] += amp_a * (r if port == 0 else 1j * r)
            for t, w in ((0, sm), (1, su)):
                bob[BASE ** _mode(port, pol, t)] += amp_b * w * (1j * r if port == 0 else r)

    alice = {k: c for k, c in alice.items() if c != 0}
    bob = {k: c for k, c in bob.items() if c != 0}
    alice_pows = _powers(alice, cutoff)
    bob_pows = _powers(bob, cutoff)
    table = {}
    for na, nb in product(range(cutoff + 1), repeat=2):
        norm = math.factorial(na) * math.factorial(nb)
        counts: dict = defaultdict(float)
        for key, coef in _poly_mul(alice_pows[na], bob_pows[nb]).items():
            exps = _unpack(key)
            p_fock = abs(coef) ** 2 * math.prod(math.factorial(e) for e in exps) / norm
            photons = tuple(exps[2 * d] + exps[2 * d + 1] for d in range(4))
            counts[photons] += p_fock
        table[na, nb] = dict(counts)
    return table


def _poisson(mu: float, n: int) -> float:
    return math.exp(-mu) * mu ** n / math.factorial(n)


def fock_pattern_distribution(pol_a, pol_b, mu_a: float, mu_b: float, overlap: float,
                              efficiency: float, dark_prob: float, cutoff: int = 4
                              ) -> list[float]:
    """Probabilities of the 16 click patterns, photon numbers truncated at ``cutoff``.

    Pattern index is ``8*c1 + 4*c2 + 2*c3 + c4`` over SPD1..SPD4. The truncated
    Poisson tail is dropped, not renormalized, so the result sums to
    ``P(na <= cutoff) * P(nb <= cutoff)``.
    """
    if not 0 <= cutoff < BASE // 2:
        raise ValueError(f"cutoff must lie in [0, {BASE // 2 - 1}]")
    table = _conditional_photon_counts(
        _normalized(pol_a), _normalized(pol_b), float(overlap), int(cutoff))

    counts: dict = defaultdict(float)
    for (na, nb), cond in table.items():
        weight = _poisson(mu_a, na) * _poisson(mu_b, nb)
        for photons, p in cond.items():
            counts[photons] += weight * p

    # P(detector stays silent | m photons) = (1 - eta)^m (1 - p_dark)
    dist = [0.0] * 16
    for photons, p_photons in counts.items():
        q = [(1 - efficiency) ** m * (1 - dark_prob) for m in photons]
        for k in range(16):
            p = p_photons
            for d in range(4):
                p *= (1 - q[d]) if (k >> (3 - d)) & 1 else q[d]
            dist[k] += p
    return dist
