"""B-spline and natural cubic spline bases with analytic derivatives."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LOG_EPS = 1e-8


class SplineDomainError(ValueError):
    pass


def transform_time(t, kind: str = "identity"):
    """Time transform r(t); ``log`` clamps t below at 1e-8."""
    t = np.asarray(t, dtype=float)
    if kind == "identity":
        return t
    if kind == "log":
        return np.log(np.maximum(t, LOG_EPS))
    raise ValueError(f"unknown time transform {kind!r}")


def inverse_transform_time(r, kind: str = "identity"):
    r = np.asarray(r, dtype=float)
    return r if kind == "identity" else np.exp(r)


def clamped_knot_vector(interior, boundary, degree: int) -> np.ndarray:
    lo, hi = boundary
    return np.concatenate([[lo] * (degree + 1), np.sort(np.asarray(interior, float)), [hi] * (degree + 1)])


def bspline_design(x, knots, degree: int, deriv: int = 0) -> np.ndarray:
    """Evaluate all B-splines of a knot vector at ``x`` by Cox-de Boor recursion.

    Returns an array of shape ``(len(x), len(knots) - degree - 1)``. Points equal
    to the last knot are assigned to the last nonempty interval so the basis
    is right-closed on the domain. ``deriv`` up to ``degree`` is supported.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = np.asarray(knots, dtype=float)
    m = t.size
    nb = m - degree - 1
    if nb < 1:
        raise ValueError("knot vector too short for degree")
    if deriv > degree:
        return np.zeros((x.size, nb))
    # index of the knot span [t_j, t_{j+1}) that contains x
    span = np.searchsorted(t, x, side="right") - 1
    last = np.max(np.nonzero(t[:-1] < t[1:])[0])
    span = np.where(x >= t[last + 1], last, span)
    span = np.clip(span, 0, m - 2)
    order = degree - deriv
    B = np.zeros((x.size, m - 1))
    B[np.arange(x.size), span] = 1.0
    for k in range(1, order + 1):
        nxt = np.zeros((x.size, m - 1 - k))
        for j in range(m - 1 - k):
            d1 = t[j + k] - t[j]
            d2 = t[j + k + 1] - t[j + 1]
            acc = 0.0
            if d1 > 0:
                acc = (x - t[j]) / d1 * B[:, j]
            if d2 > 0:
                acc = acc + (t[j + k + 1] - x) / d2 * B[:, j + 1]
            nxt[:, j] = acc
        B = nxt
    # lift the lower-order basis to derivatives of degree-``degree`` splines
    for k in range(order + 1, degree + 1):
        nxt = np.zeros((x.size, m - 1 - k))
        for j in range(m - 1 - k):
            d1 = t[j + k] - t[j]
            d2 = t[j + k + 1] - t[j + 1]
            acc = 0.0
            if d1 > 0:
                acc = k * B[:, j] / d1
            if d2 > 0:
                acc = acc - k * B[:, j + 1] / d2
            nxt[:, j] = acc
        B = nxt
    return B


@dataclass(frozen=True)
class BSplineBasis:
    """Clamped B-spline basis on a transformed time axis.

    ``interior_knots`` and ``boundary_knots`` live on the transformed scale
    r(t); the number of basis functions is ``len(interior) + degree + 1``
    (one fewer when ``include_intercept`` is false).
    """

    degree: int
    interior_knots: tuple
    boundary_knots: tuple
    include_intercept: bool = True
    time_transform: str = "identity"

    def __post_init__(self):
        object.__setattr__(self, "interior_knots", tuple(float(k) for k in self.interior_knots))
        object.__setattr__(self, "boundary_knots", tuple(float(k) for k in self.boundary_knots))
        lo, hi = self.boundary_knots
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        if not lo < hi:
            raise ValueError("boundary knots must satisfy low < high")
        ik = np.asarray(self.interior_knots)
        if ik.size and (np.any(np.diff(ik) < 0) or ik[0] < lo or ik[-1] > hi):
            raise ValueError("interior knots must be nondecreasing and inside the boundary")

    @property
    def knots(self) -> np.ndarray:
        return clamped_knot_vector(self.interior_knots, self.boundary_knots, self.degree)

    @property
    def n_basis(self) -> int:
        return len(self.interior_knots) + self.degree + 1 - (0 if self.include_intercept else 1)

    def breakpoints(self) -> np.ndarray:
        """Distinct knots on the original time scale."""
        r = np.unique(np.concatenate([self.boundary_knots, self.interior_knots]))
        return inverse_transform_time(r, self.time_transform)

    def greville(self) -> np.ndarray:
        """Greville abscissae (transformed scale); linear functions have these as coefficients."""
        t = self.knots
        k = self.degree
        nb = t.size - k - 1
        if k == 0:
            g = 0.5 * (t[:-1] + t[1:])[:nb]
        else:
            g = np.array([t[j + 1:j + k + 1].mean() for j in range(nb)])
        return g if self.include_intercept else g[1:]

    def evaluate(self, t, deriv: int = 0, clamp: bool = False) -> np.ndarray:
        """Basis matrix at times ``t`` (derivatives are w.r.t. the transformed axis)."""
        r = transform_time(t, self.time_transform)
        lo, hi = self.boundary_knots
        if clamp:
            r = np.clip(r, lo, hi)
        elif np.any((r < lo) | (r > hi)):
            raise SplineDomainError(f"time outside spline domain [{lo}, {hi}] after transform")
        B = bspline_design(r, self.knots, self.degree, deriv)
        return B if self.include_intercept else B[:, 1:]

    def to_dict(self) -> dict:
        return {"degree": self.degree, "interior_knots": list(self.interior_knots),
                "boundary_knots": list(self.boundary_knots),
                "include_intercept": self.include_intercept, "time_transform": self.time_transform}

    @classmethod
    def from_dict(cls, d: dict) -> "BSplineBasis":
        return cls(int(d["degree"]), tuple(d["interior_knots"]), tuple(d["boundary_knots"]),
                   bool(d.get("include_intercept", True)), d.get("time_transform", "identity"))


def bspline_eval(basis: BSplineBasis, t) -> np.ndarray:
    """Basis vector(s) at ``t``; a scalar ``t`` returns a length-P vector."""
    out = basis.evaluate(np.atleast_1d(t))
    return out[0] if np.ndim(t) == 0 else out


def _householder_q(A: np.ndarray) -> np.ndarray:
    """Full orthogonal factor of the QR decomposition of ``A`` (n x p, n >= p)."""
    n, p = A.shape
    Q = np.eye(n)
    R = A.astype(float).copy()
    for j in range(p):
        x = R[j:, j]
        normx = np.linalg.norm(x)
        if normx == 0:
            continue
        v = x.copy()
        v[0] += np.copysign(normx, x[0])
        v /= np.linalg.norm(v)
        R[j:, :] -= 2.0 * np.outer(v, v @ R[j:, :])
        Q[:, j:] -= 2.0 * np.outer(Q[:, j:] @ v, v)
    return Q


@dataclass(frozen=True)
class NaturalSplineBasis:
    """Natural cubic spline basis without intercept (R ``splines::ns`` construction).

    A cubic B-spline basis on the clamped knot vector is projected onto the
    subspace whose second derivative vanishes at both boundary knots. Beyond
    the boundary the basis continues linearly.
    """

    internal_knots: tuple
    boundary_knots: tuple
    _proj: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ik = tuple(float(k) for k in self.internal_knots)
        lo, hi = (float(k) for k in self.boundary_knots)
        object.__setattr__(self, "internal_knots", ik)
        object.__setattr__(self, "boundary_knots", (lo, hi))
        if not lo < hi:
            raise ValueError("boundary knots must satisfy low < high")
        if any(not lo < k < hi for k in ik) or any(np.diff(ik) <= 0):
            raise ValueError("internal knots must be strictly increasing and strictly inside the boundary")
        const = bspline_design(np.array([lo, hi]), self.knots, 3, deriv=2)[:, 1:]
        Q = _householder_q(const.T)
        object.__setattr__(self, "_proj", Q[:, 2:])

    @property
    def knots(self) -> np.ndarray:
        return clamped_knot_vector(self.internal_knots, self.boundary_knots, 3)

    @property
    def df(self) -> int:
        return len(self.internal_knots) + 1

    def breakpoints(self) -> np.ndarray:
        return np.array([self.boundary_knots[0], *self.internal_knots, self.boundary_knots[1]])

    def _raw(self, x, deriv):
        return bspline_design(x, self.knots, 3, deriv)[:, 1:]

    def evaluate(self, t, deriv: int = 0) -> np.ndarray:
        if deriv not in (0, 1, 2):
            raise ValueError("derivative_order must be between 0 and 2")
        x = np.atleast_1d(np.asarray(t, dtype=float))
        lo, hi = self.boundary_knots
        below, above = x < lo, x > hi
        inside = np.clip(x, lo, hi)
        B = self._raw(inside, deriv)
        if below.any() or above.any():
            edge = np.where(below, lo, hi)
            out = below | above
            if deriv == 0:
                slope = self._raw(edge[out], 1)
                B[out] = self._raw(edge[out], 0) + (x[out] - edge[out])[:, None] * slope
            elif deriv == 1:
                B[out] = self._raw(edge[out], 1)
            else:
                B[out] = 0.0
        return B @ self._proj

    def to_dict(self) -> dict:
        return {"internal_knots": list(self.internal_knots), "boundary_knots": list(self.boundary_knots)}


def ns_eval(basis: NaturalSplineBasis, t, derivative_order: int = 0) -> np.ndarray:
    out = basis.evaluate(np.atleast_1d(t), derivative_order)
    return out[0] if np.ndim(t) == 0 else out


def quantile_baseline_basis(event_times, horizon: float, n_basis: int = 9, degree: int = 3,
                            time_transform: str = "log", lower: float | None = None) -> BSplineBasis:
    """Baseline-hazard basis with interior knots at equally spaced quantiles of event times."""
    et = np.asarray(event_times, dtype=float)
    et = et[et > 0]
    n_int = n_basis - degree - 1
    if n_int < 0:
        raise ValueError("n_basis must exceed the degree")
    r = transform_time(et, time_transform)
    lo = transform_time(lower if lower is not None else (0.5 * et.min() if et.size else LOG_EPS),
                        time_transform)
    if time_transform == "identity" and lower is None:
        lo = 0.0
    hi = transform_time(horizon, time_transform)
    probs = np.linspace(0, 1, n_int + 2)[1:-1]
    interior = np.quantile(r, probs) if (n_int and r.size) else np.linspace(lo, hi, n_int + 2)[1:-1]
    interior = np.clip(interior, lo, hi)
    return BSplineBasis(degree, tuple(interior), (float(lo), float(hi)), True, time_transform)
