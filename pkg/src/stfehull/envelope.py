"""Concave and convex envelopes of activation-after-affine functions on boxes.

The construction normalizes an instance sigma(w.x + b) over a general box to
strictly positive weights on the unit cube, partitions the cube into regions,
and evaluates the envelope recursively: the function itself where the argument
clears the tie point, a linear ray piece below it, and a perspective of a
one-lower-dimensional face envelope elsewhere.  Supergradients come from the
chain rule through the same recursion, which is what the separation oracle
turns into cutting planes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .activations import (
    ConcaveEnvelope1D,
    ConvexEnvelope1D,
    EnvelopeError,
    Interval,
    _profile_on,
)

__all__ = [
    "RawInstance",
    "ReindexMap",
    "NormalizedInstance",
    "RegionLabel",
    "Cut",
    "UPPER_BOUNDS_Y",
    "LOWER_BOUNDS_Y",
    "normalize",
    "classify",
    "conc_env",
    "conc_env_supergrad",
    "conv_env",
    "conv_env_subgrad",
    "h_overestimator",
    "h_supergrad",
    "h_underestimator",
    "h_under_subgrad",
    "separate",
    "SeparationOracle",
]

BOX_TOL = 1e-9
# Components this small cannot carry a perspective division; the ray piece and
# the perspective piece agree near the origin, so fall back to the ray formula.
PERSPECTIVE_EPS = 1e-12

UPPER_BOUNDS_Y = "upper"
LOWER_BOUNDS_Y = "lower"


@dataclass(frozen=True)
class RegionLabel:
    """Which piece of the unit-cube partition a point belongs to.

    kind is "f" (envelope equals the function), "l" (linear ray piece), or "i"
    (perspective piece); index is the distinguished coordinate for kind "i".
    """

    kind: str
    index: int | None = None

    def __post_init__(self):
        if self.kind not in ("f", "l", "i") or (self.kind == "i") != (self.index is not None):
            raise ValueError(f"bad region label ({self.kind!r}, {self.index!r})")

    def __repr__(self):
        return f"R{self.kind}" if self.index is None else f"R{self.kind}({self.index})"


@dataclass(frozen=True)
class Cut:
    """A halfspace in (x, y) space valid for the graph hull.

    sense "upper": normal . (x, y) <= offset, with the y coefficient +1, i.e.
    y <= offset - normal[:-1] . x.  sense "lower": normal . (x, y) >= offset.
    violation is the positive slack of the queried point.
    """

    normal: np.ndarray
    offset: float
    sense: str
    violation: float

    def violated_by(self, x, y):
        lhs = float(self.normal[:-1] @ np.asarray(x, dtype=float)) + self.normal[-1] * y
        return lhs - self.offset if self.sense == UPPER_BOUNDS_Y else self.offset - lhs


class RawInstance:
    """sigma(w.x + b) over a finite box; weights of any sign, zeros allowed."""

    def __init__(self, w, b, act, box):
        self.w = np.atleast_1d(np.asarray(w, dtype=float))
        self.b = float(b)
        self.act = act
        box = np.asarray(box, dtype=float)
        if box.ndim != 2 or box.shape[1] != 2:
            raise ValueError("box must be an (n, 2) array of [lo, hi] rows")
        if box.shape[0] != self.w.shape[0]:
            raise ValueError("box and weight dimensions differ")
        if not np.isfinite(box).all() or not np.isfinite(self.w).all() or not math.isfinite(self.b):
            raise ValueError("weights, bias and box must be finite")
        if np.any(box[:, 0] > box[:, 1]):
            raise ValueError("box has an empty coordinate interval")
        self.box = box

    @property
    def n(self):
        return self.w.shape[0]

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self.act.value(x @ self.w + self.b)


@dataclass(frozen=True)
class ReindexMap:
    """Per-coordinate affine change of variables between the original box and
    the unit cube of the normalized instance.

    Kept coordinate k satisfies x[kept[k]] = offset[k] + scale[k] * t[k] for
    t in [0, 1]; dropped coordinates (zero weight or pinned box edge) had their
    contribution absorbed into the normalized bias.
    """

    n_original: int
    kept: np.ndarray
    scale: np.ndarray
    offset: np.ndarray

    def to_unit(self, x, tol=BOX_TOL):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n_original:
            raise ValueError(f"expected point of dimension {self.n_original}")
        t = (x[..., self.kept] - self.offset) / self.scale
        if np.any(t < -tol - 1e-15) or np.any(t > 1 + tol + 1e-15):
            raise ValueError("point outside the instance box")
        return np.clip(t, 0.0, 1.0)

    def to_original(self, t, fill=None):
        t = np.asarray(t, dtype=float)
        x = np.empty(t.shape[:-1] + (self.n_original,), dtype=float)
        x[...] = np.nan if fill is None else fill
        x[..., self.kept] = self.offset + self.scale * t
        return x

    def map_gradient(self, g):
        """Coefficients alpha with g . t == alpha . x + const; returns (alpha, const)."""
        alpha = np.zeros(self.n_original)
        alpha[self.kept] = g / self.scale
        return alpha, -float(np.sum(g * self.offset / self.scale))


def _recursion_exact(act, lo, hi):
    """True when the activation is convex, concave, or convex-then-concave on
    [lo, hi]; that guarantees the secant-then-function form on every
    subinterval, which is what the recursive construction rests on."""
    if hi - lo == 0.0:
        return True
    signs = tuple(s for s, _a, _b in _profile_on(act, lo, hi))
    return signs in ((), ("-",), ("+",), ("+", "-"))


class NormalizedInstance:
    """Canonical instance: strictly positive weights over the unit cube.

    ``framework_exact`` reports whether the recursive construction yields the
    actual hull on this argument range.  The silu family on ranges straddling
    both of its curvature junctions is the one catalogued case where it does
    not; there the envelope queries fall back to the one-dimensional
    composition estimator, which stays a valid (concave) overestimator but is
    not tight.

    Lazily computes the argument-range envelope (hence the tie point) and
    memoizes face instances; both fills are idempotent, so concurrent readers
    are safe.
    """

    def __init__(self, w, b, act):
        self.w = np.asarray(w, dtype=float)
        self.b = float(b)
        self.act = act
        if self.w.ndim != 1:
            raise ValueError("w must be a vector")
        if np.any(self.w <= 0):
            raise ValueError("normalized weights must be strictly positive")
        self.arg_range = Interval(self.b, self.b + float(np.sum(self.w)))
        self.framework_exact = _recursion_exact(act, self.arg_range.lo, self.arg_range.hi)
        self._curve = None
        self._lower_curve = None
        self._faces = {}
        self._reflected = False

    @property
    def m(self):
        return self.w.shape[0]

    @property
    def curve(self):
        if self._curve is None:
            self._curve = ConcaveEnvelope1D(self.act, self.arg_range)
        return self._curve

    @property
    def lower_curve(self):
        if self._lower_curve is None:
            self._lower_curve = ConvexEnvelope1D(self.act, self.arg_range)
        return self._lower_curve

    @property
    def tie(self):
        tie = self.curve.tie
        if tie is None:
            raise EnvelopeError(
                f"{self.act.tag} has no secant-then-function envelope on "
                f"[{self.arg_range.lo}, {self.arg_range.hi}]"
            )
        return tie

    def face(self, i):
        """The instance restricted to the facet t_i = 1, one dimension lower."""
        inst = self._faces.get(i)
        if inst is None:
            inst = NormalizedInstance(np.delete(self.w, i), self.b + self.w[i], self.act)
            self._faces[i] = inst
        return inst

    def reflected_instance(self):
        """Instance whose concave envelope yields this one's convex envelope,
        or None when the activation's curvature puts that outside the
        secant-then-function framework."""
        if self._reflected is False:
            try:
                self._reflected = NormalizedInstance(
                    self.w, -(self.b + float(np.sum(self.w))), self.act.reflected()
                )
            except EnvelopeError:
                self._reflected = None
        return self._reflected

    def convex_on_range(self):
        signs = tuple(s for s, _a, _b in _profile_on(self.act, self.arg_range.lo, self.arg_range.hi))
        return signs in ((), ("+",))

    def value(self, t):
        t = np.asarray(t, dtype=float)
        return self.act.value(t @ self.w + self.b)


def normalize(raw):
    """Canonicalize a raw instance: rescale the box to the unit cube, flip
    negative weights, drop zero contributions, and (for the silu family) flip
    the whole cube when the argument range only supports the mirrored
    secant-then-function form.  Returns the instance and the coordinate map."""
    lo, hi = raw.box[:, 0], raw.box[:, 1]
    span = hi - lo
    eff = raw.w * span
    b = raw.b + float(raw.w @ lo)
    kept = np.flatnonzero(eff != 0.0)
    scale = span[kept].copy()
    offset = lo[kept].copy()
    w = eff[kept].copy()
    neg = w < 0
    # t -> 1 - t on flipped coordinates: x = hi - span * t
    b += float(np.sum(w[neg]))
    offset[neg] = hi[kept][neg]
    scale[neg] = -span[kept][neg]
    w[neg] = -w[neg]

    act = raw.act
    top = b + float(np.sum(w))
    if not _recursion_exact(act, b, top) and _recursion_exact(act.mirrored(), -top, -b):
        # mirror the whole cube; the silu family is convex-then-concave in the
        # reversed orientation when the argument range stays below its upper
        # curvature junction
        act = act.mirrored()
        b = -top
        offset = offset + scale
        scale = -scale

    inst = NormalizedInstance(w, b, act)
    remap = ReindexMap(raw.n, kept, scale, offset)
    return inst, remap


def _check_unit(inst, t):
    t = np.asarray(t, dtype=float)
    single = t.ndim == 1
    tt = t[None, :] if single else t
    if tt.shape[-1] != inst.m:
        raise ValueError(f"expected point of dimension {inst.m}")
    if inst.m and (np.any(tt < -BOX_TOL) or np.any(tt > 1 + BOX_TOL)):
        raise ValueError("point outside the unit cube")
    return np.clip(tt, 0.0, 1.0), single


def classify(inst, t):
    """Partition label of a unit-cube point; ties in the max coordinate break
    to the first index, matching the strict/non-strict split of the regions.

    A perspective label additionally requires w_i + b < tie, which any point
    of a nonempty perspective region satisfies (its basis vector belongs to
    it); this keeps labels stable when the ray and perspective pieces coincide
    and rounding makes the raw inequality flutter."""
    t, single = _check_unit(inst, t)
    if not single:
        raise ValueError("classify takes a single point")
    x = t[0]
    arg = float(x @ inst.w + inst.b)
    tie = inst.tie
    if arg >= tie:
        return RegionLabel("f")
    mx = float(np.max(x)) if inst.m else 0.0
    if (arg - inst.b) + inst.b * mx >= tie * mx:
        return RegionLabel("l")
    i = int(np.argmax(x))
    if not inst.w[i] + inst.b < tie:
        return RegionLabel("l")
    return RegionLabel("i", i)


def _eval_batch(inst, X, want_grad):
    """Values (and optionally supergradients) of the concave envelope at the
    rows of X, recursing on the face instances region by region."""
    n = X.shape[0]
    vals = np.empty(n)
    grads = np.empty((n, inst.m)) if want_grad else None
    if n == 0:
        return vals, grads
    if inst.m == 0:
        vals[:] = inst.act.value(inst.b)
        return vals, grads
    if not inst.framework_exact:
        # outside the recursion's validity (wide silu ranges): the exact 1-D
        # envelope composed with the argument, a valid concave overestimator
        arg = X @ inst.w + inst.b
        vals[:] = inst.curve.value(arg)
        if want_grad:
            grads[:] = inst.curve.supergrad(arg)[:, None] * inst.w
        return vals, grads

    w, b, act = inst.w, inst.b, inst.act
    arg = X @ w + b
    tie = inst.tie
    f_b = act.value(b)

    in_f = arg >= tie
    if in_f.any():
        vals[in_f] = act.value(arg[in_f])
        if want_grad:
            grads[in_f] = act.derivative(arg[in_f], "left")[:, None] * w
    rest = np.flatnonzero(~in_f)
    if rest.size == 0:
        return vals, grads

    Xr = X[rest]
    mx = Xr.max(axis=1)
    ray = (arg[rest] - b) + b * mx >= tie * mx
    idx = np.argmax(Xr, axis=1)
    xi = Xr[np.arange(Xr.shape[0]), idx]
    ray |= xi < PERSPECTIVE_EPS
    # degenerate-face guard, mirroring classify: the ray piece takes over when
    # w_i + b reaches the tie (the two formulas agree there by continuity)
    ray |= ~(w[idx] + b < tie)

    if ray.any():
        rows = rest[ray]
        slope = (act.value(tie) - f_b) / (tie - b)
        vals[rows] = f_b + slope * (arg[rows] - b)
        if want_grad:
            grads[rows] = slope * w

    persp = np.flatnonzero(~ray)
    if persp.size:
        for i in np.unique(idx[persp]):
            sel = persp[idx[persp] == i]
            rows = rest[sel]
            face = inst.face(i)
            ti = Xr[sel, i]
            Y = np.delete(Xr[sel], i, axis=1) / ti[:, None]
            fvals, fgrads = _eval_batch(face, Y, want_grad)
            vals[rows] = f_b + ti * (fvals - f_b)
            if want_grad:
                g = np.empty((sel.size, inst.m))
                g[:, np.arange(inst.m) != i] = fgrads
                g[:, i] = fvals - f_b - np.sum(fgrads * Y, axis=1)
                grads[rows] = g
    return vals, grads


def conc_env(inst, t):
    """Concave envelope of the instance at unit-cube point(s) t."""
    tt, single = _check_unit(inst, t)
    vals, _ = _eval_batch(inst, tt, want_grad=False)
    return float(vals[0]) if single else vals


def conc_env_supergrad(inst, t):
    """A supergradient of the concave envelope at unit-cube point(s) t."""
    tt, single = _check_unit(inst, t)
    _, grads = _eval_batch(inst, tt, want_grad=True)
    return grads[0] if single else grads


def _conv_parts(inst, t, want_grad):
    tt, single = _check_unit(inst, t)
    if inst.convex_on_range():
        arg = tt @ inst.w + inst.b
        vals = inst.act.value(arg)
        grads = inst.act.derivative(arg, "left")[:, None] * inst.w if want_grad else None
        return vals, grads, single
    refl = inst.reflected_instance()
    if refl is not None:
        vals, grads = _eval_batch(refl, 1.0 - tt, want_grad)
        return -vals, grads, single
    # Curvature outside the framework in both orientations (wide silu ranges):
    # fall back to the exact one-dimensional convex envelope composed with the
    # argument, a valid if not tight underestimator.
    arg = tt @ inst.w + inst.b
    curve = inst.lower_curve
    vals = curve.value(arg)
    grads = curve.subgrad(arg)[:, None] * inst.w if want_grad else None
    return vals, grads, single


def conv_env(inst, t):
    """Convex envelope of the instance at unit-cube point(s) t (see
    _conv_parts for the one documented fallback)."""
    vals, _, single = _conv_parts(inst, t, want_grad=False)
    return float(vals[0]) if single else vals


def conv_env_subgrad(inst, t):
    """A subgradient of the convex envelope at unit-cube point(s) t."""
    _, grads, single = _conv_parts(inst, t, want_grad=True)
    return grads[0] if single else grads


def h_overestimator(inst, t):
    """One-dimensional-envelope overestimator: conc envelope of the activation
    on the argument range, composed with the affine argument."""
    tt, single = _check_unit(inst, t)
    vals = inst.curve.value(tt @ inst.w + inst.b)
    return float(vals[0]) if single else vals


def h_supergrad(inst, t):
    tt, single = _check_unit(inst, t)
    g = inst.curve.supergrad(tt @ inst.w + inst.b)[:, None] * inst.w
    return g[0] if single else g


def h_underestimator(inst, t):
    """Convex-side analog of h_overestimator."""
    tt, single = _check_unit(inst, t)
    vals = inst.lower_curve.value(tt @ inst.w + inst.b)
    return float(vals[0]) if single else vals


def h_under_subgrad(inst, t):
    tt, single = _check_unit(inst, t)
    g = inst.lower_curve.subgrad(tt @ inst.w + inst.b)[:, None] * inst.w
    return g[0] if single else g


class SeparationOracle:
    """Hull membership test and cut generator for one instance.

    Normalization happens once at construction; every query maps through the
    cached coordinate change, so repeated separation against the same neuron is
    cheap.
    """

    def __init__(self, raw):
        self.raw = raw
        self.inst, self.remap = normalize(raw)

    def query(self, x, y, mode="env", tol=1e-9):
        """None when (x, y) lies between the mode's under- and over-estimator;
        otherwise a Cut through the more violated side's gradient at x,
        expressed in the original coordinates."""
        if mode not in ("env", "hest"):
            raise ValueError(f"mode must be 'env' or 'hest': {mode!r}")
        t = self.remap.to_unit(x)
        y = float(y)
        if mode == "env":
            upper = conc_env(self.inst, t)
            lower = conv_env(self.inst, t)
        else:
            upper = h_overestimator(self.inst, t)
            lower = h_underestimator(self.inst, t)
        if max(y - upper, lower - y) <= tol:
            return None
        if y - upper >= lower - y:
            if mode == "env":
                g = conc_env_supergrad(self.inst, t)
            else:
                g = h_supergrad(self.inst, t)
            return self._make_cut(x, y, t, upper, g, UPPER_BOUNDS_Y)
        if mode == "env":
            g = conv_env_subgrad(self.inst, t)
        else:
            g = h_under_subgrad(self.inst, t)
        return self._make_cut(x, y, t, lower, g, LOWER_BOUNDS_Y)

    def _make_cut(self, x, y, t, value, g, sense):
        # tangent plane y <=/>= value + g . (t' - t), rewritten over x
        alpha, const = self.remap.map_gradient(g)
        offset = value - float(g @ t) + const
        normal = np.append(-alpha, 1.0)
        violation = y - offset - float(alpha @ np.asarray(x, dtype=float))
        if sense == LOWER_BOUNDS_Y:
            violation = -violation
        return Cut(normal=normal, offset=offset, sense=sense, violation=violation)


def separate(raw, x, y, mode="env", tol=1e-9):
    """One-shot membership / cut query; see SeparationOracle for reuse."""
    return SeparationOracle(raw).query(x, y, mode=mode, tol=tol)
