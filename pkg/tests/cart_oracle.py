"""Exhaustive-search reference tree in exact rational arithmetic.

Deliberately naive: for every node it enumerates every column and every
midpoint between consecutive distinct values, scores the split exactly with
``Fraction``, and keeps the first strict maximum (so ties go to the lower
column, then the lower threshold).  Used only as a test oracle.
"""

from fractions import Fraction


def gini_total(ys):
    n = len(ys)
    s = sum(Fraction(v) for v in ys)
    neg = n - s
    return n - (s * s + neg * neg) / n


def sse_total(ys):
    n = len(ys)
    s = sum(Fraction(v) for v in ys)
    s2 = sum(Fraction(v) * Fraction(v) for v in ys)
    return s2 - s * s / n


def oracle_tree(X, y, rows=None, *, criterion="gini", max_depth=30, min_split=20,
                min_leaf=7, cp=0.01):
    rows = list(range(len(y))) if rows is None else [int(r) for r in rows]
    impurity = gini_total if criterion == "gini" else sse_total
    p = len(X[0])
    root = impurity([y[r] for r in rows])
    cp = Fraction(cp)

    def grow(node_rows, depth):
        ys = [y[r] for r in node_rows]
        m = len(ys)
        imp = impurity(ys)
        leaf = {"leaf": float(sum(Fraction(v) for v in ys) / m), "n": m}
        if depth >= max_depth or m < min_split or m < 2 * min_leaf or imp == 0:
            return leaf
        best = None
        best_dec = Fraction(0)
        for f in range(p):
            values = sorted({float(X[r][f]) for r in node_rows})
            for a, b in zip(values, values[1:]):
                left = [r for r in node_rows if X[r][f] <= a]
                right = [r for r in node_rows if X[r][f] > a]
                if len(left) < min_leaf or len(right) < min_leaf:
                    continue
                dec = imp - impurity([y[r] for r in left]) - impurity([y[r] for r in right])
                if dec > best_dec:
                    t = 0.5 * (a + b)
                    if not t > a:
                        t = b
                    best, best_dec = (f, t, left, right), dec
        if best is None or best_dec < cp * root:
            return leaf
        f, t, left, right = best
        return {"split": (f, t), "left": grow(left, depth + 1), "right": grow(right, depth + 1)}

    return grow(rows, 0)
