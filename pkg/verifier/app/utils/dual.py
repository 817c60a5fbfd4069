"""
Nested dual numbers over numpy arrays.

A ``Dual(real, eps)`` represents ``real + eps * e`` with ``e * e = 0``.
Both parts may themselves be ``Dual`` instances, so nesting ``k`` levels
carries every mixed derivative of order ``<= k`` along ``k`` seeded
directions. Leaves are numpy arrays (or Python scalars) and broadcast
the usual way, which lets one call evaluate a whole batch of points and
seed directions at once.

Evaluation procedures written against the functions of this module
(``sin``, ``cos``, ``sqrt``, ``stack``, ...) work unchanged on plain arrays.
"""
import numpy as np


class Dual:
    """Dual number with array (or nested dual) parts"""

    __slots__ = ('real', 'eps')

    # make numpy hand mixed operations back to the reflected dunder methods
    __array_ufunc__ = None

    def __init__(self, real, eps):
        self.real = real
        self.eps = eps

    def __repr__(self):
        return f"Dual({self.real!r}, {self.eps!r})"

    @property
    def shape(self):
        return np.broadcast_shapes(np.shape(_leaf(self.real)), np.shape(_leaf(self.eps)))

    @property
    def depth(self):
        return 1 + max(depth(self.real), depth(self.eps))

    def __getitem__(self, index):
        return Dual(_index(self.real, index), _index(self.eps, index))

    def __neg__(self):
        return Dual(-self.real, -self.eps)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.real + other.real, self.eps + other.eps)
        return Dual(self.real + other, self.eps)

    def __radd__(self, other):
        return Dual(other + self.real, self.eps)

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.real - other.real, self.eps - other.eps)
        return Dual(self.real - other, self.eps)

    def __rsub__(self, other):
        return Dual(other - self.real, -self.eps)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.real * other.real, self.real * other.eps + self.eps * other.real)
        return Dual(self.real * other, self.eps * other)

    def __rmul__(self, other):
        return Dual(other * self.real, other * self.eps)

    def __truediv__(self, other):
        if isinstance(other, Dual):
            return Dual(self.real / other.real,
                        (self.eps * other.real - self.real * other.eps) / (other.real * other.real))
        return Dual(self.real / other, self.eps / other)

    def __rtruediv__(self, other):
        return Dual(other / self.real, -(other * self.eps) / (self.real * self.real))

    def __pow__(self, power):
        if not isinstance(power, (int, np.integer)):
            raise TypeError("Dual supports integer powers only")
        if power == 0:
            return Dual(self.real ** 0, self.eps * 0)
        if power == 1:
            return self
        if power < 0:
            return 1.0 / self ** (-power)
        return Dual(self.real ** power, power * self.real ** (power - 1) * self.eps)


def _leaf(x):
    while isinstance(x, Dual):
        x = x.real
    return x


def _index(x, index):
    if isinstance(x, Dual):
        return x[index]
    if np.ndim(x) == 0:
        return x
    return np.asarray(x)[index]


def depth(x):
    """Nesting depth (0 for plain arrays)"""
    return x.depth if isinstance(x, Dual) else 0


def _parts(x):
    if isinstance(x, Dual):
        return x.real, x.eps
    return x, np.zeros_like(np.asarray(x, dtype=float))


def sin(x):
    if isinstance(x, Dual):
        return Dual(sin(x.real), cos(x.real) * x.eps)
    return np.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(cos(x.real), -(sin(x.real) * x.eps))
    return np.cos(x)


def exp(x):
    if isinstance(x, Dual):
        e = exp(x.real)
        return Dual(e, e * x.eps)
    return np.exp(x)


def sqrt(x):
    if isinstance(x, Dual):
        s = sqrt(x.real)
        return Dual(s, x.eps / (2.0 * s))
    return np.sqrt(x)


def sinh(x):
    if isinstance(x, Dual):
        return Dual(sinh(x.real), cosh(x.real) * x.eps)
    return np.sinh(x)


def cosh(x):
    if isinstance(x, Dual):
        return Dual(cosh(x.real), sinh(x.real) * x.eps)
    return np.cosh(x)


def sum(x, axis=-1):
    if isinstance(x, Dual):
        return Dual(sum(x.real, axis), sum(x.eps, axis))
    return np.sum(x, axis=axis)


def stack(items, axis=-1):
    """np.stack for a mix of duals and arrays (leaves are broadcast first)"""
    items = list(items)
    if not any(isinstance(item, Dual) for item in items):
        return np.stack(np.broadcast_arrays(*[np.asarray(i, dtype=float) for i in items]), axis=axis)
    reals, epss = zip(*(_parts(item) for item in items))
    return Dual(stack(reals, axis), stack(epss, axis))


def concatenate(items, axis=-1):
    """np.concatenate for a mix of duals and arrays of equal block shape"""
    items = list(items)
    if not any(isinstance(item, Dual) for item in items):
        return np.concatenate(np.broadcast_arrays(*[np.asarray(i, dtype=float) for i in items]), axis=axis)
    reals, epss = zip(*(_parts(item) for item in items))
    return Dual(concatenate(reals, axis), concatenate(epss, axis))


def zeros_like(x):
    """Zero with the same nesting structure as x"""
    if isinstance(x, Dual):
        return Dual(zeros_like(x.real), zeros_like(x.eps))
    return np.zeros_like(np.asarray(x, dtype=float))


def seed(x, directions):
    """Lift x by one dual level per seeded direction.

    ``directions[l]`` becomes the coefficient of the level-``l`` unit, so the
    coefficient of the product of all units is the mixed directional
    derivative along every direction.
    """
    out = x
    for direction in directions:
        tangent = np.asarray(direction, dtype=float)
        for _ in range(depth(out)):
            tangent = Dual(tangent, zeros_like(tangent))
        out = Dual(out, tangent)
    return out


def component(x, levels, order):
    """Coefficient of the product of the units in ``levels`` (0-based)"""
    for level in reversed(range(order)):
        take_eps = level in levels
        if isinstance(x, Dual):
            x = x.eps if take_eps else x.real
        elif take_eps:
            x = np.zeros_like(np.asarray(x, dtype=float))
    return _leaf(x)
