"""Reference eigenvalues of the scalar Laplacian on the unit disk.

Bessel functions of integer order are evaluated by their power series and
zeros are located by scan-and-bisection.  Nothing here touches the finite
element path, so disk spectra computed this way serve as an independent
check on the solver chain.
"""

from __future__ import annotations


def bessel_j(order: int, x: float) -> float:
    """J_n(x) by the alternating power series, accurate for moderate x."""
    if order < 0:
        raise ValueError("order must be >= 0")
    x = float(x)
    half = 0.5 * x
    # term_t = (-1)^t (x/2)^(n + 2t) / (t! (n + t)!)
    term = 1.0
    for k in range(1, order + 1):
        term *= half / k
    total = term
    for t in range(1, 400):
        term *= -(half * half) / (t * (t + order))
        total += term
        if abs(term) < 1e-18 * max(abs(total), 1e-300):
            break
    return total


def bessel_j_derivative(order: int, x: float) -> float:
    """d/dx J_n(x) via the recurrence J_n' = (J_{n-1} - J_{n+1}) / 2."""
    if order == 0:
        return -bessel_j(1, x)
    return 0.5 * (bessel_j(order - 1, x) - bessel_j(order + 1, x))


def _kth_zero(f, start: float, k: int, step: float = 0.05) -> float:
    """k-th sign change of f after start, refined by bisection."""
    x = start
    fx = f(x)
    found = 0
    for _ in range(200000):
        x2 = x + step
        fx2 = f(x2)
        if fx == 0.0:
            found += 1
            if found == k:
                return x
        elif fx * fx2 < 0:
            found += 1
            if found == k:
                lo, hi = x, x2
                flo = fx
                for _ in range(200):
                    mid = 0.5 * (lo + hi)
                    fmid = f(mid)
                    if fmid == 0.0:
                        return mid
                    if flo * fmid < 0:
                        hi = mid
                    else:
                        lo, flo = mid, fmid
                    if hi - lo < 1e-14 * max(1.0, hi):
                        break
                return 0.5 * (lo + hi)
        x, fx = x2, fx2
    raise RuntimeError(f"did not find zero {k} starting from {start}")


def bessel_j_zero(order: int, k: int) -> float:
    """k-th positive zero of J_n (k = 1, 2, ...)."""
    if k < 1:
        raise ValueError("zero index starts at 1")
    return _kth_zero(lambda x: bessel_j(order, x), start=max(order, 0) + 1e-3, k=k)


def bessel_j_derivative_zero(order: int, k: int) -> float:
    """k-th positive zero of J_n' (the trivial zero of J_0' at 0 not counted)."""
    if k < 1:
        raise ValueError("zero index starts at 1")
    if order == 0:
        return bessel_j_zero(1, k)
    return _kth_zero(lambda x: bessel_j_derivative(order, x), start=order * 1e-2 + 1e-3, k=k)


def disk_dirichlet_eigenvalues(count: int) -> list[float]:
    """First eigenvalues of the Dirichlet Laplacian on the unit disk.

    Values are squared Bessel zeros j_{n,k}^2; angular orders n >= 1
    contribute with multiplicity two.  Returned sorted, repeated by
    multiplicity.
    """
    values = []
    for order in range(0, count + 2):
        for k in range(1, count + 2):
            z = bessel_j_zero(order, k)
            values.append((z * z, 1 if order == 0 else 2))
            if z * z > 4.0 * _dirichlet_cap(count):
                break
    return _flatten(values, count)


def disk_neumann_eigenvalues(count: int) -> list[float]:
    """First eigenvalues of the Neumann Laplacian on the unit disk.

    Zero (constant mode) first, then squared zeros of J_n'; angular orders
    n >= 1 contribute with multiplicity two.
    """
    values = [(0.0, 1)]
    for order in range(0, count + 2):
        for k in range(1, count + 2):
            z = bessel_j_derivative_zero(order, k)
            values.append((z * z, 1 if order == 0 else 2))
            if z * z > 4.0 * _dirichlet_cap(count):
                break
    return _flatten(values, count)


def _dirichlet_cap(count: int) -> float:
    # Weyl-style overestimate of the count-th disk eigenvalue.
    return 4.0 * (count + 4)


def _flatten(values, count: int) -> list[float]:
    flat = []
    for value, mult in sorted(values):
        flat.extend([value] * mult)
    return flat[:count]
