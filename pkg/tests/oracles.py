"""Independent extended-precision reference values.

Nothing here imports the package: every route goes through mpmath directly.
"""

from __future__ import annotations

import itertools
import math

import mpmath as mp


def ml_series(alpha, rho, z, dps=50, max_terms=20000):
    """Power series of ``E_{alpha,rho}(z)`` at working precision ``dps``.

    The precision is raised by the size of the largest term so that
    cancellation on the negative axis cannot eat the answer.
    """
    a, r = mp.mpf(alpha), mp.mpf(rho)
    zz = mp.mpf(z)
    peak = 0 if abs(z) < 1 else abs(float(z)) ** (1.0 / float(alpha)) / math.log(10)
    with mp.workdps(dps + int(peak) + 10):
        total = mp.mpf(0)
        for k in range(max_terms):
            term = zz**k * mp.rgamma(a * k + r)
            total += term
            if k > 10 and abs(term) < mp.mpf(10) ** (-(dps + 5)) * max(1, abs(total)):
                break
        else:
            raise RuntimeError("series did not converge")
        return +total


def ml_reference(alpha, rho, z, dps=30):
    """Series where its terms stay moderate, Talbot inversion elsewhere."""
    if z >= 0 or abs(z) ** (1.0 / alpha) < 300:
        return ml_series(alpha, rho, z, dps)
    return ml_laplace(alpha, rho, z, dps)


def ml_laplace(alpha, rho, z, dps=30):
    """``E_{alpha,rho}(z)`` as the inverse Laplace transform of ``s^(a-r)/(s^a - z)`` at ``t = 1``."""
    a, r = mp.mpf(alpha), mp.mpf(rho)
    zz = mp.mpf(z)
    with mp.workdps(dps):
        return mp.invertlaplace(lambda s: s ** (a - r) / (s**a - zz), 1, method="talbot")


def multi_brute(alphas, lam, ws, dps=30, tail=1e-25, max_degree=400):
    """Direct multi-index sum of the multivariate Mittag-Leffler series.

    Terms are grouped by total degree only to decide when to stop; each
    multi-index is enumerated independently with its multinomial weight.
    """
    m = len(alphas)
    with mp.workdps(dps):
        al = [mp.mpf(a) for a in alphas]
        w = [mp.mpf(x) for x in ws]
        lam_ = mp.mpf(lam)
        total = mp.mpf(0)
        small = 0
        for k in range(max_degree + 1):
            block = mp.mpf(0)
            biggest = mp.mpf(0)
            for ls in itertools.product(range(k + 1), repeat=m):
                if sum(ls) != k:
                    continue
                coef = mp.factorial(k)
                for li in ls:
                    coef /= mp.factorial(li)
                num = coef
                for wi, li in zip(w, ls):
                    num *= wi**li
                term = num * mp.rgamma(lam_ + sum(a * li for a, li in zip(al, ls)))
                block += term
                biggest = max(biggest, abs(term))
            total += block
            small = small + 1 if biggest < tail else 0
            if small >= 3:
                return +total
        raise RuntimeError("brute-force sum did not settle")


def multiterm_laplace(alphas, gammas, mu, t, dps=30):
    """Mode factor of the multi-term equation by mpmath's Talbot inversion."""
    a = [mp.mpf(x) for x in alphas]
    g = [mp.mpf(1)] + [mp.mpf(x) for x in gammas]
    with mp.workdps(dps):

        def F(s):
            num = sum(gk * s ** (ak - 1) for gk, ak in zip(g, a))
            return num / (sum(gk * s**ak for gk, ak in zip(g, a)) + mu)

        return mp.invertlaplace(F, t, method="talbot")


# frozen values, regenerated with the functions above (see test_oracles.py)
E_HALF_AT_MINUS_ONE = 0.42758357615580700  # e * erfc(1)
MULTI_03_05 = 0.57552957806673055  # alphas (0.3, 0.5), lambda 1, w (-0.2, -0.4)
UPPER_BOUND_HALF_AT_ONE = 0.46984109573138115  # 1 / (1 + 1/Gamma(1.5))
MULTITERM_1_05_MU1_T1 = 0.59323879913782399  # alphas (1, 0.5), gamma 1, mu 1, t 1
