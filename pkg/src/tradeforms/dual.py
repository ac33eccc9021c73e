"""Vectorized forward-mode automatic differentiation.

A Dual carries a numpy value array and a tangent array with one trailing
axis per differentiation direction, so evaluating the residual system once
on seeded duals yields the full Jacobian.  Only the primitives the
equilibrium residuals need are implemented.
"""

from __future__ import annotations

import numpy as np


def _tan(x, like):
    """Tangent of x, or a broadcast zero block when x is a constant."""
    if isinstance(x, Dual):
        return x.tan
    return np.zeros(np.shape(x) + (like.n_dirs,))


def _val(x):
    return x.val if isinstance(x, Dual) else np.asarray(x, dtype=float)


class Dual:
    __slots__ = ("val", "tan")

    # make ndarray <op> Dual defer to the reflected Dual methods
    __array_ufunc__ = None
    __array_priority__ = 1000

    def __init__(self, val, tan):
        self.val = np.asarray(val, dtype=float)
        self.tan = np.asarray(tan, dtype=float)

    @property
    def n_dirs(self) -> int:
        return self.tan.shape[-1]

    @staticmethod
    def seed(values):
        """Identity-seeded 1-D dual: d(values_i)/d(values_j) = delta_ij."""
        values = np.asarray(values, dtype=float)
        return Dual(values, np.eye(values.size))

    @staticmethod
    def constant(values, n_dirs):
        values = np.asarray(values, dtype=float)
        return Dual(values, np.zeros(values.shape + (n_dirs,)))

    # -- arithmetic ------------------------------------------------------
    def __add__(self, other):
        return Dual(self.val + _val(other), self.tan + _tan(other, self))

    __radd__ = __add__

    def __sub__(self, other):
        return Dual(self.val - _val(other), self.tan - _tan(other, self))

    def __rsub__(self, other):
        return Dual(_val(other) - self.val, _tan(other, self) - self.tan)

    def __neg__(self):
        return Dual(-self.val, -self.tan)

    def __mul__(self, other):
        ov, ot = _val(other), _tan(other, self)
        return Dual(self.val * ov, self.tan * ov[..., None] + ot * self.val[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        ov, ot = _val(other), _tan(other, self)
        val = self.val / ov
        tan = (self.tan * ov[..., None] - ot * self.val[..., None]) / (ov**2)[..., None]
        return Dual(val, tan)

    def __rtruediv__(self, other):
        ov, ot = _val(other), _tan(other, self)
        val = ov / self.val
        tan = (ot * self.val[..., None] - self.tan * ov[..., None]) / (self.val**2)[
            ..., None
        ]
        return Dual(val, tan)

    def __pow__(self, p: float):
        val = self.val**p
        return Dual(val, (p * self.val ** (p - 1.0))[..., None] * self.tan)

    # -- elementwise functions ------------------------------------------
    def log(self):
        return Dual(np.log(self.val), self.tan / self.val[..., None])

    def exp(self):
        val = np.exp(self.val)
        return Dual(val, val[..., None] * self.tan)

    def sqrt(self):
        val = np.sqrt(self.val)
        return Dual(val, self.tan / (2.0 * val)[..., None])

    # -- structure -------------------------------------------------------
    def __getitem__(self, idx):
        return Dual(self.val[idx], self.tan[idx])

    def reshape_value(self, shape):
        return Dual(self.val.reshape(shape), self.tan.reshape(shape + (self.n_dirs,)))

    def sum(self, axis=None):
        if axis is None:
            return Dual(self.val.sum(), self.tan.reshape(-1, self.n_dirs).sum(axis=0))
        axis = axis if axis >= 0 else self.val.ndim + axis
        return Dual(self.val.sum(axis=axis), self.tan.sum(axis=axis))

    def mean(self, axis=None):
        count = self.val.size if axis is None else self.val.shape[axis]
        out = self.sum(axis)
        return Dual(out.val / count, out.tan / count)

    def ravel(self):
        return Dual(self.val.ravel(), self.tan.reshape(-1, self.n_dirs))


def where(cond, a, b):
    """Branch select on a value-level condition; the untaken branch's
    tangent is discarded (valid away from the switching surface)."""
    cond = np.asarray(cond)
    n = a.n_dirs if isinstance(a, Dual) else b.n_dirs
    av, bv = _val(a), _val(b)
    at = a.tan if isinstance(a, Dual) else np.zeros(np.shape(av) + (n,))
    bt = b.tan if isinstance(b, Dual) else np.zeros(np.shape(bv) + (n,))
    val = np.where(cond, av, bv)
    tan = np.where(cond[..., None], at, bt)
    return Dual(val, tan)


def concat(parts):
    """Concatenate 1-D duals into one residual vector."""
    vals = [p.val.ravel() for p in parts]
    tans = [p.tan.reshape(-1, p.n_dirs) for p in parts]
    return Dual(np.concatenate(vals), np.concatenate(tans, axis=0))
