"""
前向模式自動微分：帶向量切向量的對偶數

Dual(val, tan) 中 tan 的形狀為 (n_dir,) + val.shape，第一軸為方向。
模組函數同時接受 ndarray 與 Dual，對 ndarray 直接呼叫 numpy。
"""
import logging

import numpy as np

# 設定日誌
logger = logging.getLogger(__name__)


def _lift(tan, ndim):
    """在方向軸之後補上單例軸，使切向量與 ndim 維的值對齊廣播"""
    missing = ndim - (tan.ndim - 1)
    if missing <= 0:
        return tan
    return tan.reshape(tan.shape[:1] + (1,) * missing + tan.shape[1:])


def _negative_axis(axis, ndim):
    return axis if axis < 0 else axis - ndim


class Dual:
    """對偶數陣列：值與各方向的一階導數"""

    # 讓 ndarray 與 Dual 的運算交由 Dual 的反射運算子處理
    __array_ufunc__ = None

    def __init__(self, val, tan):
        val = np.asarray(val)
        tan = np.asarray(tan)
        tan = _lift(tan, val.ndim)
        self.val = val
        self.tan = np.broadcast_to(tan, tan.shape[:1] + val.shape)

    @property
    def n_dir(self):
        return self.tan.shape[0]

    @property
    def shape(self):
        return self.val.shape

    @property
    def ndim(self):
        return self.val.ndim

    @property
    def real(self):
        return Dual(self.val.real, self.tan.real)

    @property
    def imag(self):
        return Dual(self.val.imag, self.tan.imag)

    @property
    def mT(self):
        return self.swapaxes(-1, -2)

    def __repr__(self):
        return f"Dual(shape={self.shape}, n_dir={self.n_dir})"

    def __len__(self):
        return len(self.val)

    def conj(self):
        return Dual(np.conj(self.val), np.conj(self.tan))

    def __neg__(self):
        return Dual(-self.val, -self.tan)

    def __add__(self, other):
        if isinstance(other, Dual):
            val = self.val + other.val
            return Dual(val, _lift(self.tan, val.ndim) + _lift(other.tan, val.ndim))
        val = self.val + other
        return Dual(val, _lift(self.tan, val.ndim))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            val = self.val * other.val
            n = val.ndim
            return Dual(val, _lift(self.tan, n) * other.val + self.val * _lift(other.tan, n))
        other = np.asarray(other)
        val = self.val * other
        return Dual(val, _lift(self.tan, val.ndim) * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            return self * other.reciprocal()
        other = np.asarray(other)
        val = self.val / other
        return Dual(val, _lift(self.tan, val.ndim) / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def reciprocal(self):
        inv = 1.0 / self.val
        return Dual(inv, -self.tan * inv ** 2)

    def __pow__(self, exponent):
        if not np.isscalar(exponent):
            raise TypeError("對偶數只支援純量指數")
        val = self.val ** exponent
        return Dual(val, exponent * self.val ** (exponent - 1) * self.tan)

    def __matmul__(self, other):
        if isinstance(other, Dual):
            val = self.val @ other.val
            n = val.ndim
            return Dual(val, _lift(self.tan, n) @ other.val + self.val @ _lift(other.tan, n))
        other = np.asarray(other)
        val = self.val @ other
        return Dual(val, _lift(self.tan, val.ndim) @ other)

    def __rmatmul__(self, other):
        other = np.asarray(other)
        val = other @ self.val
        return Dual(val, other @ _lift(self.tan, val.ndim))

    def __getitem__(self, index):
        if not isinstance(index, tuple):
            index = (index,)
        return Dual(self.val[index], self.tan[(slice(None),) + index])

    def sum(self, axis=None):
        if axis is None:
            return Dual(self.val.sum(), self.tan.reshape(self.n_dir, -1).sum(axis=1))
        axes = axis if isinstance(axis, tuple) else (axis,)
        axes = tuple(_negative_axis(a, self.ndim) for a in axes)
        return Dual(self.val.sum(axis=axes), self.tan.sum(axis=axes))

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        val = self.val.reshape(shape)
        return Dual(val, self.tan.reshape((self.n_dir,) + val.shape))

    def swapaxes(self, a, b):
        a = _negative_axis(a, self.ndim)
        b = _negative_axis(b, self.ndim)
        return Dual(self.val.swapaxes(a, b), self.tan.swapaxes(a, b))


def is_dual(x):
    return isinstance(x, Dual)


def value(x):
    """取出值部分 (ndarray 原樣回傳)"""
    return x.val if isinstance(x, Dual) else np.asarray(x)


def tangent(x, n_dir):
    """取出切向量；ndarray 視為常數，回傳零切向量"""
    if isinstance(x, Dual):
        return x.tan
    x = np.asarray(x)
    return np.zeros((n_dir,) + x.shape, dtype=x.dtype)


def seed(values):
    """
    以最後一軸的每個分量為方向建立對偶數

    Args:
        values: 形狀 (..., m) 的實數陣列

    Returns:
        Dual: m 個方向，方向 i 為 ∂/∂values[..., i]
    """
    values = np.asarray(values, dtype=float)
    m = values.shape[-1]
    tan = np.zeros((m,) + values.shape)
    for i in range(m):
        tan[i, ..., i] = 1.0
    return Dual(values, tan)


def pad_directions(x, before, after):
    """在方向軸前後補零，用於左右兩側分別播種的配對運算"""
    if not isinstance(x, Dual):
        return x
    widths = [(before, after)] + [(0, 0)] * x.ndim
    return Dual(x.val, np.pad(x.tan, widths))


def concatenate(items, axis=0):
    """沿指定軸串接 (可混合 Dual 與 ndarray)"""
    duals = [x for x in items if isinstance(x, Dual)]
    vals = [value(x) for x in items]
    val = np.concatenate(vals, axis=axis)
    if not duals:
        return val
    n_dir = duals[0].n_dir
    ax = _negative_axis(axis, val.ndim)
    tans = [np.broadcast_to(tangent(x, n_dir), (n_dir,) + value(x).shape) for x in items]
    return Dual(val, np.concatenate(tans, axis=ax))


def conj(x):
    return x.conj() if isinstance(x, Dual) else np.conj(x)


def real(x):
    return x.real if isinstance(x, Dual) else np.real(x)


def exp(x):
    if isinstance(x, Dual):
        e = np.exp(x.val)
        return Dual(e, e * x.tan)
    return np.exp(x)


def sqrt(x):
    """主值平方根"""
    if isinstance(x, Dual):
        s = np.sqrt(x.val.astype(complex) if np.iscomplexobj(x.val) else x.val)
        return Dual(s, x.tan / (2.0 * s))
    return np.sqrt(x)


def inv(M):
    """批次矩陣反矩陣 (最後兩軸)"""
    if isinstance(M, Dual):
        Vi = np.linalg.inv(M.val)
        return Dual(Vi, -(Vi @ _lift(M.tan, M.ndim) @ Vi))
    return np.linalg.inv(M)


def _trace_product(A, B):
    """tr(A B) 於最後兩軸，允許前置軸廣播"""
    return np.einsum('...ij,...ji->...', A, B)


def det(M):
    if isinstance(M, Dual):
        D = np.linalg.det(M.val)
        Vi = np.linalg.inv(M.val)
        return Dual(D, D * _trace_product(Vi, _lift(M.tan, M.ndim)))
    return np.linalg.det(M)


def inv_sqrt_det(M):
    """
    det(M)^{-1/2}，取各特徵值主值平方根之積

    對實部正定的複對稱矩陣，此分支在參數連續變化時保持連續。
    """
    val = 1.0 / np.prod(np.sqrt(np.linalg.eigvals(value(M)).astype(complex)), axis=-1)
    if isinstance(M, Dual):
        Vi = np.linalg.inv(M.val)
        return Dual(val, -0.5 * val * _trace_product(Vi, _lift(M.tan, M.ndim)))
    return val
