"""Independent agreement oracle used to cross-check the production metrics.

Deliberately takes a different route: exact Fraction arithmetic over raw
category counts, no confusion matrix construction, no shared code with the
package implementation.
"""

from collections import Counter
from fractions import Fraction


def oracle_kappa(a, b):
    """Returns (p_o, p_e, kappa) as Fractions for two equal-length codings."""
    n = len(a)
    if n == 0 or len(b) != n:
        raise ValueError("need two equal-length non-empty codings")
    p_o = Fraction(sum(1 for x, y in zip(a, b) if x == y), n)
    count_a = Counter(a)
    count_b = Counter(b)
    p_e = sum((Fraction(count_a[c], n) * Fraction(count_b.get(c, 0), n)
               for c in count_a), Fraction(0))
    if p_e == 1:
        kappa = Fraction(1) if p_o == 1 else Fraction(0)
    else:
        kappa = (p_o - p_e) / (1 - p_e)
    return p_o, p_e, kappa


def oracle_percent_agreement(a, b):
    if not a or len(a) != len(b):
        raise ValueError("need two equal-length non-empty codings")
    return Fraction(sum(1 for x, y in zip(a, b) if x == y), len(a))
