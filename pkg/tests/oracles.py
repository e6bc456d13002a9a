"""Independent reference implementations used as test oracles.

These are written from the model definitions directly, without touching
the package's own helpers, and favour clarity over speed.
"""
from fractions import Fraction

INF = float("inf")


def ramp(w, t):
    if t < 0:
        return 0
    return min(t + 1, w)


def step(w, t):
    return w if t >= 0 else 0


def brute_fire_time(weights, x, theta, ramp_model=True, horizon=64):
    """First t in [0, horizon] where the summed responses reach theta."""
    rho = ramp if ramp_model else step
    for t in range(horizon + 1):
        pot = sum(rho(w, t - xi) for w, xi in zip(weights, x) if xi != INF)
        if pot >= theta:
            return t
    return INF


def table1(s_in, s_out, w, w_max, mu_plus, mu_minus, mu_search):
    """New weight (exact rational) after one Table-1 style update."""
    half = Fraction(w_max, 2)
    f_plus = mu_plus if w >= half else mu_plus / 2
    f_minus = mu_minus if w < half else mu_minus / 2
    if s_in != INF and s_out != INF and s_in <= s_out:
        d = f_plus
    elif s_in != INF and s_out != INF:
        d = -f_minus
    elif s_in != INF:
        d = mu_search
    elif s_out != INF:
        d = -f_minus
    else:
        d = 0
    return min(max(w + d, Fraction(0)), Fraction(w_max))


def brute_cconv(patterns, clusters):
    """Nearest-centroid agreement with exact rational centroids.

    ``patterns`` is a list of integer tuples, ``clusters`` the cluster id of
    each. Returns (members, matches).
    """
    ids = sorted(set(clusters))
    cents = {}
    for k in ids:
        mem = [p for p, c in zip(patterns, clusters) if c == k]
        cents[k] = [Fraction(sum(col), len(mem)) for col in zip(*mem)]
    matches = 0
    for p, c in zip(patterns, clusters):
        dist = {k: sum(abs(Fraction(a) - b) for a, b in zip(p, cents[k])) for k in ids}
        if dist[c] == min(dist.values()):
            matches += 1
    return len(patterns), matches
