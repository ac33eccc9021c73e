"""Real and complex root extraction for solver polynomials.

Degrees one to four are solved in closed form by radicals: the cubic through
a Vieta-style substitution after normalizing to x^3 + 3a*x + 2 = 0, the
quartic through the resolvent-cubic factorization of the normalized form
x^4 + a*x^2 + b*x + 1 = 0.  Higher degrees go through a Durand-Kerner
simultaneous iteration with Newton polishing.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegreeUnsupported, NoConvergence


@dataclass(frozen=True)
class Polynomial:
    """Real-coefficient polynomial, coefficients in ascending degree."""

    coeffs: tuple

    def __init__(self, coeffs):
        cs = [float(c) for c in coeffs]
        while len(cs) > 1 and cs[-1] == 0.0:
            cs.pop()
        if not cs:
            raise ValueError("empty coefficient list")
        object.__setattr__(self, "coeffs", tuple(cs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        out = 0.0
        for c in reversed(self.coeffs):
            out = out * x + c
        return out

    def derivative(self) -> "Polynomial":
        if self.degree == 0:
            return Polynomial([0.0])
        return Polynomial([i * c for i, c in enumerate(self.coeffs)][1:])


def _strip_zero_roots(p: Polynomial):
    """Factor out x**k, returning (reduced coeffs, number of zero roots)."""
    cs = list(p.coeffs)
    k = 0
    while len(cs) > 1 and cs[0] == 0.0:
        cs.pop(0)
        k += 1
    return cs, k


def _cubic_depressed(p, q):
    """Roots of z^3 + p z + q = 0."""
    if q == 0.0:
        return [0j, cmath.sqrt(-p), -cmath.sqrt(-p)]
    if p == 0.0:
        r = (-q) ** (1.0 / 3.0) if q < 0 else -(q ** (1.0 / 3.0))
        w = cmath.exp(2j * cmath.pi / 3)
        return [r, r * w, r * w**2]
    # normalize to Y^3 + 3A*Y + 2 = 0 via z = g*Y with g = (q/2)^(1/3)
    g = complex(q / 2.0) ** (1.0 / 3.0)
    A = p / (3.0 * g * g)
    # substitution Y = y^(1/3) - A*y^(-1/3) turns it into y^2 + 2y - A^3 = 0
    y = -1.0 + cmath.sqrt(1.0 + A**3)
    if abs(y) < 1e-300:
        y = -1.0 - cmath.sqrt(1.0 + A**3)
    roots = []
    y3 = y ** (1.0 / 3.0)
    w = cmath.exp(2j * cmath.pi / 3)
    for k in range(3):
        cube = y3 * w**k
        roots.append(g * (cube - A / cube))
    return roots


def _solve_cubic(c0, c1, c2, c3):
    """All roots of c3 x^3 + c2 x^2 + c1 x + c0."""
    b, c, d = c2 / c3, c1 / c3, c0 / c3
    shift = b / 3.0
    p = c - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
    return [z - shift for z in _cubic_depressed(p, q)]


def _quadratic_pair(s, t):
    """Roots of z^2 + s z + t."""
    disc = cmath.sqrt(s * s - 4.0 * t)
    return [(-s + disc) / 2.0, (-s - disc) / 2.0]


def _quartic_depressed(p, q, r):
    """Roots of z^4 + p z^2 + q z + r = 0 via the resolvent cubic."""
    if q == 0.0:  # biquadratic
        roots = []
        for u in _quadratic_pair(p, r):
            s = cmath.sqrt(u)
            roots.extend([s, -s])
        return roots
    if r == 0.0:
        return [0j] + _solve_cubic(q, p, 0.0, 1.0)
    if r > 0.0:
        # normalize to Y^4 + a*Y^2 + b*Y + 1 = 0 with z = g*Y, g = r^(1/4);
        # then (Y^2 + sqrt(al)*Y + be)(Y^2 - sqrt(al)*Y + 1/be) = 0 with
        # be + 1/be = a + al and 1/be - be = b/sqrt(al), and the identity
        # (be + 1/be)^2 - (1/be - be)^2 = 4 gives a cubic for al
        g = r**0.25
        a = p / g**2
        b = q / g**3
        cands = [
            al.real
            for al in _solve_cubic(-b * b, a * a - 4.0, 2.0 * a, 1.0)
            if abs(al.imag) <= 1e-9 * max(1.0, abs(al)) and al.real > 1e-12
        ]
        if cands:
            al = max(cands)
            sal = math.sqrt(al)
            be = ((a + al) - b / sal) / 2.0
            inv_be = ((a + al) + b / sal) / 2.0
            roots = _quadratic_pair(sal, be) + _quadratic_pair(-sal, inv_be)
            return [g * z for z in roots]
    # depressed-form classic: split into two quadratics using any real
    # nonnegative root m of the resolvent m^3 + 2p m^2 + (p^2 - 4r) m - q^2
    cands = [
        m.real
        for m in _solve_cubic(-q * q, p * p - 4.0 * r, 2.0 * p, 1.0)
        if abs(m.imag) <= 1e-9 * max(1.0, abs(m)) and m.real > 1e-12
    ]
    m = max(cands) if cands else None
    if m is None:
        return list(np.roots([1.0, 0.0, p, q, r]))
    sm = math.sqrt(m)
    t1 = ((p + m) - q / sm) / 2.0
    t2 = ((p + m) + q / sm) / 2.0
    return _quadratic_pair(sm, t1) + _quadratic_pair(-sm, t2)


def _solve_quartic(c0, c1, c2, c3, c4):
    b, c, d, e = c3 / c4, c2 / c4, c1 / c4, c0 / c4
    shift = b / 4.0
    p = c - 3.0 * b * b / 8.0
    q = d - b * c / 2.0 + b**3 / 8.0
    r = e - b * d / 4.0 + b * b * c / 16.0 - 3.0 * b**4 / 256.0
    return [z - shift for z in _quartic_depressed(p, q, r)]


def _polish(roots, coeffs):
    """A few Newton steps per root against the full polynomial."""
    p = np.asarray(coeffs, dtype=complex)
    dp = p[1:] * np.arange(1, len(p))
    out = []
    for z in roots:
        z = complex(z)
        for _ in range(3):
            fz = np.polyval(p[::-1], z)
            dfz = np.polyval(dp[::-1], z)
            if dfz == 0:
                break
            step = fz / dfz
            if not (math.isfinite(step.real) and math.isfinite(step.imag)):
                break
            z -= step
        out.append(z)
    return out


def solve_radicals(p: Polynomial) -> list:
    """All complex roots (with multiplicity) of a degree 1..4 polynomial."""
    cs, nzeros = _strip_zero_roots(p)
    deg = len(cs) - 1
    if p.degree < 1 or p.degree > 4:
        raise DegreeUnsupported(f"radical solver supports degrees 1..4, got {p.degree}")
    if deg == 0:
        roots = []
    elif deg == 1:
        roots = [complex(-cs[0] / cs[1])]
    elif deg == 2:
        a, b, c = cs[2], cs[1], cs[0]
        disc = cmath.sqrt(b * b - 4.0 * a * c)
        roots = [(-b + disc) / (2.0 * a), (-b - disc) / (2.0 * a)]
    elif deg == 3:
        roots = _solve_cubic(*cs)
    else:
        roots = _solve_quartic(*cs)
    roots = _polish(roots, cs)
    return [0j] * nzeros + roots


def solve_iterative(p: Polynomial, tol: float = 1e-10, max_iter: int = 200) -> list:
    """Durand-Kerner simultaneous iteration with Newton polishing.

    Deterministic: starts from roots of unity scaled by the Cauchy
    coefficient bound (with a fixed phase offset so conjugate-symmetric
    configurations cannot trap the iteration on the real line).  Raises
    NoConvergence (best iterate attached) if the scaled residual
    |p(z)| / sum_i |c_i||z|^i still exceeds tol after max_iter sweeps.
    """
    cs, nzeros = _strip_zero_roots(p)
    deg = len(cs) - 1
    if p.degree < 1:
        raise DegreeUnsupported("iterative solver needs degree >= 1")
    if deg == 0:
        return [0j] * nzeros
    lead = cs[-1]
    monic = [c / lead for c in cs]
    radius = 1.0 + max(abs(c) for c in monic[:-1])
    z = np.array(
        [radius * cmath.exp(1j * (2.0 * math.pi * k / deg + 0.4)) for k in range(deg)],
        dtype=complex,
    )
    pc = np.array(monic[::-1], dtype=complex)
    for _ in range(max_iter):
        vals = np.polyval(pc, z)
        denom = np.ones(deg, dtype=complex)
        for k in range(deg):
            diff = z[k] - np.delete(z, k)
            denom[k] = np.prod(diff)
        step = vals / denom
        z = z - step
        if np.max(np.abs(step)) < 1e-14 * max(1.0, radius):
            break
    z = _polish(list(z), cs)
    abs_cs = np.array([abs(c) for c in cs])
    scaled_resid = max(
        abs(np.polyval(np.array(cs[::-1], dtype=complex), zk))
        / np.polyval(abs_cs[::-1], abs(zk))
        for zk in z
    )
    if scaled_resid > tol:
        raise NoConvergence(
            f"scaled residual {scaled_resid:.2e} > {tol:.1e} after {max_iter} sweeps",
            best=[0j] * nzeros + list(z),
        )
    return [0j] * nzeros + list(z)


def real_positive_roots(p: Polynomial, tol: float = 1e-10) -> list:
    """Sorted real roots > tol, deduplicated; imaginary dust filtered at tol."""
    if p.degree < 1:
        return []
    roots = solve_radicals(p) if p.degree <= 4 else solve_iterative(p)
    reals = [
        z.real
        for z in roots
        if abs(z.imag) <= tol * max(1.0, abs(z)) and z.real > tol
    ]
    reals.sort()
    out = []
    for r in reals:
        if not out or abs(r - out[-1]) > tol * max(1.0, abs(r)):
            out.append(r)
    return out
