"""Scalar activation catalog and exact one-dimensional concave envelopes.

Every activation carries curvature metadata (junctions between convex and
concave stretches, kink locations with one-sided derivatives, affine pieces).
The envelope builder uses it to resolve tie points exactly at kinks instead of
leaving bisection residue there, and to pick the right structural form of the
envelope on any interval.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Interval",
    "Convex",
    "Concave",
    "SShaped",
    "ReflectedSShaped",
    "Activation",
    "EnvelopeError",
    "UnknownActivationError",
    "make_activation",
    "activation_from_dict",
    "ACTIVATION_TAGS",
    "eval_activation",
    "derivative",
    "reflect",
    "tie_point",
    "conc_env_1d",
    "conc_env_1d_supergrad",
    "range_on_interval",
    "ConcaveEnvelope1D",
    "ConvexEnvelope1D",
    "sigmoid",
    "tanh",
    "softsign",
    "penalized_tanh",
    "bipolar_sigmoid",
    "relu",
    "leaky_relu",
    "softplus",
    "elu",
    "selu",
    "silu",
    "maxtanh",
    "SELU_LAMBDA",
    "SELU_ALPHA",
    "SILU_BEND",
    "SILU_STATIONARY",
]

SELU_LAMBDA = 1.0507
SELU_ALPHA = 1.67326

_INF = math.inf


class EnvelopeError(ValueError):
    """An envelope query falls outside what the construction supports."""


class UnknownActivationError(ValueError):
    """Activation tag not present in the catalog."""


@dataclass(frozen=True)
class Interval:
    """Closed finite interval [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"interval endpoints must be finite: [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise ValueError(f"empty interval: [{self.lo}, {self.hi}]")

    @property
    def width(self):
        return self.hi - self.lo

    def contains(self, z, tol=0.0):
        return self.lo - tol <= z <= self.hi + tol


# Shape metadata. SShaped means convex up to the inflection, concave after it;
# ReflectedSShaped is the point reflection of that pattern.
@dataclass(frozen=True)
class Convex:
    pass


@dataclass(frozen=True)
class Concave:
    pass


@dataclass(frozen=True)
class SShaped:
    inflection: float


@dataclass(frozen=True)
class ReflectedSShaped:
    inflection: float


def _sigmoid_arr(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


class Activation:
    """A catalogued scalar activation plus the metadata envelope code needs.

    Subclasses provide the pointwise formula, the almost-everywhere derivative,
    kinks with exact one-sided derivatives, the global curvature sign pattern
    ``curvature = (breaks, signs)``, affine pieces, and stationary points.
    All evaluation methods accept scalars or numpy arrays.
    """

    tag = "?"
    # signs[i] is the curvature on the stretch between breaks[i-1] and breaks[i].
    curvature = ((), ("+",))

    def params(self):
        return {}

    def _value(self, z):
        raise NotImplementedError

    def _deriv(self, z):
        raise NotImplementedError

    def kinks(self):
        """((location, left derivative, right derivative), ...) sorted by location."""
        return ()

    def affine_pieces(self):
        """((lo, hi, slope, intercept), ...) where the formula is exactly affine."""
        return ()

    def stationary_points(self):
        """Zeros of the derivative, for exact range computation."""
        return ()

    @property
    def shape(self):
        raise NotImplementedError

    def value(self, z):
        z = np.asarray(z, dtype=float)
        scalar = z.ndim == 0
        out = self._value(z[None] if scalar else z)
        return float(out[0]) if scalar else out

    def derivative(self, z, side="left"):
        if side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right': {side!r}")
        z = np.asarray(z, dtype=float)
        scalar = z.ndim == 0
        zz = z[None] if scalar else z
        out = np.asarray(self._deriv(zz), dtype=float)
        pick = 1 if side == "left" else 2
        for kink in self.kinks():
            out = np.where(zz == kink[0], kink[pick], out)
        return float(out[0]) if scalar else out

    def affine_on(self, lo, hi):
        """True when the formula is affine on all of [lo, hi]."""
        if hi < lo:
            raise ValueError("hi < lo")
        return any(a <= lo and hi <= b for a, b, _s, _c in self.affine_pieces())

    def reflected(self):
        """The point reflection z -> -value(-z)."""
        return _Reflected(self)

    def mirrored(self):
        """The domain reflection z -> value(-z)."""
        return _Mirrored(self)

    def to_dict(self):
        return {"tag": self.tag, "params": self.params()}

    def __repr__(self):
        ps = ", ".join(f"{k}={v:g}" for k, v in sorted(self.params().items()))
        return f"{self.tag}({ps})"

    def __eq__(self, other):
        return (
            isinstance(other, Activation)
            and self.tag == other.tag
            and self.params() == other.params()
        )

    def __hash__(self):
        return hash((self.tag, tuple(sorted(self.params().items()))))


class _Sigmoid(Activation):
    tag = "sigmoid"
    curvature = ((0.0,), ("+", "-"))
    shape = SShaped(0.0)

    def _value(self, z):
        return _sigmoid_arr(z)

    def _deriv(self, z):
        s = _sigmoid_arr(z)
        return s * (1.0 - s)


class _Tanh(Activation):
    tag = "tanh"
    curvature = ((0.0,), ("+", "-"))
    shape = SShaped(0.0)

    def _value(self, z):
        return np.tanh(z)

    def _deriv(self, z):
        t = np.tanh(z)
        return 1.0 - t * t


class _Softsign(Activation):
    tag = "softsign"
    curvature = ((0.0,), ("+", "-"))
    shape = SShaped(0.0)

    def _value(self, z):
        return z / (1.0 + np.abs(z))

    def _deriv(self, z):
        d = 1.0 + np.abs(z)
        return 1.0 / (d * d)


class _PenalizedTanh(Activation):
    tag = "penalized_tanh"
    shape = SShaped(0.0)
    curvature = ((0.0,), ("+", "-"))

    def __init__(self, alpha=0.25):
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"penalized_tanh needs 0 < alpha < 1, got {alpha}")
        self.alpha = float(alpha)

    def params(self):
        return {"alpha": self.alpha}

    def _value(self, z):
        return np.where(z > 0, np.tanh(z), np.tanh(self.alpha * z))

    def _deriv(self, z):
        t_pos = np.tanh(z)
        t_neg = np.tanh(self.alpha * z)
        return np.where(z > 0, 1.0 - t_pos * t_pos, self.alpha * (1.0 - t_neg * t_neg))

    def kinks(self):
        return ((0.0, self.alpha, 1.0),)


class _BipolarSigmoid(Activation):
    tag = "bipolar_sigmoid"
    curvature = ((0.0,), ("+", "-"))
    shape = SShaped(0.0)

    # (1 - e^-z) / (1 + e^-z) == tanh(z / 2)
    def _value(self, z):
        return np.tanh(0.5 * z)

    def _deriv(self, z):
        t = np.tanh(0.5 * z)
        return 0.5 * (1.0 - t * t)


class _ReLU(Activation):
    tag = "relu"
    shape = Convex()

    def _value(self, z):
        return np.maximum(z, 0.0)

    def _deriv(self, z):
        return np.where(z > 0, 1.0, 0.0)

    def kinks(self):
        return ((0.0, 0.0, 1.0),)

    def affine_pieces(self):
        return ((-_INF, 0.0, 0.0, 0.0), (0.0, _INF, 1.0, 0.0))


class _LeakyReLU(Activation):
    tag = "leaky_relu"
    shape = Convex()

    def __init__(self, eps=0.01):
        if not 0.0 < eps < 1.0:
            raise ValueError(f"leaky_relu needs 0 < eps < 1, got {eps}")
        self.eps = float(eps)

    def params(self):
        return {"eps": self.eps}

    def _value(self, z):
        return np.where(z > 0, z, self.eps * z)

    def _deriv(self, z):
        return np.where(z > 0, 1.0, self.eps)

    def kinks(self):
        return ((0.0, self.eps, 1.0),)

    def affine_pieces(self):
        return ((-_INF, 0.0, self.eps, 0.0), (0.0, _INF, 1.0, 0.0))


class _Softplus(Activation):
    tag = "softplus"
    shape = Convex()

    def _value(self, z):
        return np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0.0)

    def _deriv(self, z):
        return _sigmoid_arr(z)


class _Maxtanh(Activation):
    tag = "maxtanh"
    shape = Convex()

    # max(z, tanh z) equals tanh z for z <= 0 and z for z >= 0; C1 at 0.
    def _value(self, z):
        return np.maximum(z, np.tanh(z))

    def _deriv(self, z):
        t = np.tanh(z)
        return np.where(z > 0, 1.0, 1.0 - t * t)

    def affine_pieces(self):
        return ((0.0, _INF, 1.0, 0.0),)


class _ELU(Activation):
    tag = "elu"

    def __init__(self, alpha=1.0):
        if not alpha > 0.0:
            raise ValueError(f"elu needs alpha > 0, got {alpha}")
        self.alpha = float(alpha)

    def params(self):
        return {"alpha": self.alpha}

    @property
    def shape(self):
        return Convex() if self.alpha <= 1.0 else SShaped(0.0)

    @property
    def curvature(self):
        if self.alpha <= 1.0:
            return ((), ("+",))
        return ((0.0,), ("+", "-"))

    def _value(self, z):
        return np.where(z > 0, z, self.alpha * np.expm1(np.minimum(z, 0.0)))

    def _deriv(self, z):
        return np.where(z > 0, 1.0, self.alpha * np.exp(np.minimum(z, 0.0)))

    def kinks(self):
        if self.alpha == 1.0:
            return ()
        return ((0.0, self.alpha, 1.0),)

    def affine_pieces(self):
        return ((0.0, _INF, 1.0, 0.0),)


class _SELU(Activation):
    tag = "selu"
    shape = SShaped(0.0)
    curvature = ((0.0,), ("+", "-"))

    lam = SELU_LAMBDA
    alpha = SELU_ALPHA

    def params(self):
        return {"lambda": self.lam, "alpha": self.alpha}

    def _value(self, z):
        return self.lam * np.where(z > 0, z, self.alpha * np.expm1(np.minimum(z, 0.0)))

    def _deriv(self, z):
        return self.lam * np.where(z > 0, 1.0, self.alpha * np.exp(np.minimum(z, 0.0)))

    def kinks(self):
        return ((0.0, self.lam * self.alpha, self.lam),)

    def affine_pieces(self):
        return ((0.0, _INF, self.lam, 0.0),)


def _newton(f, df, x0):
    x = x0
    for _ in range(60):
        step = f(x) / df(x)
        x -= step
        if abs(step) < 1e-15:
            break
    return x


def _s(z):
    return 1.0 / (1.0 + math.exp(-z)) if z >= 0 else math.exp(z) / (1.0 + math.exp(z))


# Positive curvature junction of z * sigmoid(z): root of (z/2) tanh(z/2) = 1.
SILU_BEND = _newton(
    lambda x: 0.5 * x * math.tanh(0.5 * x) - 1.0,
    lambda x: 0.5 * math.tanh(0.5 * x) + 0.25 * x / math.cosh(0.5 * x) ** 2,
    2.4,
)
# Unique stationary point of z * sigmoid(z): root of 1 + z (1 - sigmoid(z)) = 0.
SILU_STATIONARY = _newton(
    lambda x: 1.0 + x * (1.0 - _s(x)),
    lambda x: (1.0 - _s(x)) - x * _s(x) * (1.0 - _s(x)),
    -1.28,
)


class _SiLU(Activation):
    tag = "silu"
    # Concave-convex-concave; the declared shape names the inflection of the
    # convex-then-concave restriction [-SILU_BEND, inf), which is the regime the
    # envelope machinery uses directly.  The far tail past the bend is why silu
    # envelopes go through the domain-reflection path for low argument ranges.
    curvature = ((-SILU_BEND, SILU_BEND), ("-", "+", "-"))
    shape = ReflectedSShaped(SILU_BEND)

    def _value(self, z):
        return z * _sigmoid_arr(z)

    def _deriv(self, z):
        s = _sigmoid_arr(z)
        return s * (1.0 + z * (1.0 - s))

    def stationary_points(self):
        return (SILU_STATIONARY,)


class _Reflected(Activation):
    """Point reflection -inner(-z).  Swaps convex and concave."""

    def __init__(self, inner):
        self.inner = inner

    @property
    def tag(self):
        return f"reflected({self.inner.tag})"

    def params(self):
        return self.inner.params()

    @property
    def shape(self):
        s = self.inner.shape
        if isinstance(s, Convex):
            return Concave()
        if isinstance(s, Concave):
            return Convex()
        # Point reflection maps an S to an S with the inflection negated.  For
        # the silu family this holds on the range the envelope code uses.
        return SShaped(-s.inflection)

    @property
    def curvature(self):
        breaks, signs = self.inner.curvature
        flip = {"+": "-", "-": "+"}
        return (
            tuple(-b for b in reversed(breaks)),
            tuple(flip[s] for s in reversed(signs)),
        )

    def _value(self, z):
        return -self.inner._value(-z)

    def _deriv(self, z):
        return self.inner._deriv(-z)

    def kinks(self):
        out = [(-k, dr, dl) for k, dl, dr in self.inner.kinks()]
        return tuple(sorted(out))

    def affine_pieces(self):
        return tuple((-b, -a, s, -c) for a, b, s, c in self.inner.affine_pieces())

    def stationary_points(self):
        return tuple(sorted(-p for p in self.inner.stationary_points()))

    def reflected(self):
        return self.inner


class _Mirrored(Activation):
    """Domain reflection inner(-z).  Reverses the curvature pattern."""

    def __init__(self, inner):
        self.inner = inner

    @property
    def tag(self):
        return f"mirrored({self.inner.tag})"

    def params(self):
        return self.inner.params()

    @property
    def shape(self):
        s = self.inner.shape
        if isinstance(s, (Convex, Concave)):
            return s
        if isinstance(s, SShaped):
            return ReflectedSShaped(-s.inflection)
        return SShaped(-s.inflection)

    @property
    def curvature(self):
        breaks, signs = self.inner.curvature
        return (tuple(-b for b in reversed(breaks)), tuple(reversed(signs)))

    def _value(self, z):
        return self.inner._value(-z)

    def _deriv(self, z):
        return -self.inner._deriv(-z)

    def kinks(self):
        out = [(-k, -dr, -dl) for k, dl, dr in self.inner.kinks()]
        return tuple(sorted(out))

    def affine_pieces(self):
        return tuple((-b, -a, -s, c) for a, b, s, c in self.inner.affine_pieces())

    def stationary_points(self):
        return tuple(sorted(-p for p in self.inner.stationary_points()))

    def mirrored(self):
        return self.inner


def sigmoid():
    return _Sigmoid()


def tanh():
    return _Tanh()


def softsign():
    return _Softsign()


def penalized_tanh(alpha=0.25):
    return _PenalizedTanh(alpha)


def bipolar_sigmoid():
    return _BipolarSigmoid()


def relu():
    return _ReLU()


def leaky_relu(eps=0.01):
    return _LeakyReLU(eps)


def softplus():
    return _Softplus()


def elu(alpha=1.0):
    return _ELU(alpha)


def selu():
    return _SELU()


def silu():
    return _SiLU()


def maxtanh():
    return _Maxtanh()


_REGISTRY = {
    "sigmoid": sigmoid,
    "tanh": tanh,
    "softsign": softsign,
    "penalized_tanh": penalized_tanh,
    "bipolar_sigmoid": bipolar_sigmoid,
    "relu": relu,
    "leaky_relu": leaky_relu,
    "softplus": softplus,
    "elu": elu,
    "selu": selu,
    "silu": silu,
    "maxtanh": maxtanh,
}

ACTIVATION_TAGS = tuple(sorted(_REGISTRY))


def make_activation(tag, **params):
    try:
        factory = _REGISTRY[tag]
    except KeyError:
        raise UnknownActivationError(
            f"unknown activation tag {tag!r}; known: {', '.join(ACTIVATION_TAGS)}"
        ) from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise UnknownActivationError(f"bad parameters for {tag!r}: {exc}") from None


def activation_from_dict(d):
    if not isinstance(d, dict) or "tag" not in d:
        raise UnknownActivationError(f"activation spec must be a dict with a 'tag': {d!r}")
    params = d.get("params", {}) or {}
    if not isinstance(params, dict):
        raise UnknownActivationError(f"activation params must be a dict: {params!r}")
    # selu serializes its constants; they are fixed, so accept and discard them.
    if d["tag"] == "selu":
        params = {}
    return make_activation(d["tag"], **params)


def eval_activation(act, z):
    return act.value(z)


def derivative(act, z, side="left"):
    return act.derivative(z, side)


def reflect(act):
    return act.reflected()


# ---------------------------------------------------------------------------
# One-dimensional envelopes


def _profile_on(act, lo, hi):
    """Curvature sign stretches of act restricted to [lo, hi]."""
    breaks, signs = act.curvature
    pts = [lo] + [b for b in breaks if lo < b < hi] + [hi]
    segs = []
    for a, b in zip(pts[:-1], pts[1:]):
        sign = signs[bisect_left(breaks, 0.5 * (a + b))]
        if segs and segs[-1][0] == sign:
            segs[-1] = (sign, segs[-1][1], b)
        else:
            segs.append((sign, a, b))
    return segs


def _tangency_from_left(act, anchor, lo, hi, width_scale):
    """Smallest t in [lo, hi] where the chord from (anchor, act(anchor)) meets act
    tangentially; act must be concave on [lo, hi] with anchor < lo.

    Returns None when the slope at hi still exceeds the chord slope, i.e. the
    transition point lies beyond hi and the envelope is a pure secant.
    """
    f_anchor = act.value(anchor)

    def psi(t, side):
        return (act.value(t) - f_anchor) - act.derivative(t, side) * (t - anchor)

    # psi with left derivatives is non-decreasing on a concave stretch and can
    # only jump upward at kinks; the transition is its first nonnegative point.
    if psi(hi, "left") < 0.0:
        return None
    # A point t hands the secant over to the function exactly when the chord
    # slope falls between the one-sided derivatives: psi(t, right) >= 0 and
    # psi(t, left) <= 0.  Both one-sided psi are non-decreasing along the
    # concave stretch, so the bracket invariant is psi(a, right) < 0 (handover
    # strictly after a) and psi(b, left) >= 0.
    a, b = lo, hi
    for k, _dl, _dr in act.kinks():
        if not (a <= k < b):
            continue
        pl, pr = psi(k, "left"), psi(k, "right")
        if pl <= 0.0 <= pr:
            return k
        if pl > 0.0:
            b = k
            break
        a = k
    if psi(a, "right") >= 0.0 and psi(a, "left") <= 0.0:
        return a
    tol = 1e-12 * max(1.0, width_scale)
    while b - a > tol:
        mid = 0.5 * (a + b)
        if psi(mid, "left") < 0.0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


class ConcaveEnvelope1D:
    """Concave envelope of an activation on a closed interval.

    ``tie`` is the smallest point where a leading secant from the left endpoint
    hands over to the function (the left endpoint itself when the envelope is
    the function, the right endpoint for a pure secant).  It is None for the
    two structural forms that do not start with a secant, which only occur for
    the silu family.
    """

    def __init__(self, act, interval):
        self.act = act
        self.lo = float(interval.lo)
        self.hi = float(interval.hi)
        self.tie = None
        self._inner = None  # domain-mirrored envelope for the "-+" form
        self._t1 = self._t2 = None  # ride boundaries for the "+-+" form
        self._build()

    # -- construction

    def _build(self):
        act, lo, hi = self.act, self.lo, self.hi
        if hi - lo == 0.0:
            self._set_tie(lo)
            return
        segs = _profile_on(act, lo, hi)
        signs = tuple(s for s, _a, _b in segs)
        width = hi - lo
        if signs == ("-",):
            self._set_tie(lo)
        elif signs == ("+",):
            self._set_tie(lo if act.affine_on(lo, hi) else hi)
        elif signs == ("+", "-"):
            t = _tangency_from_left(act, lo, segs[0][2], hi, width)
            self._set_tie(hi if t is None else t)
        elif signs == ("-", "+"):
            self._inner = ConcaveEnvelope1D(act.mirrored(), Interval(-hi, -lo))
        elif signs == ("-", "+", "-"):
            # Only the silu family reaches this: the function decreases into the
            # left concave stretch, so the envelope is still secant-then-function
            # with the tie on the right stretch.  Verified by the sweep below.
            t = _tangency_from_left(act, lo, segs[1][2], hi, width)
            self._set_tie(hi if t is None else t)
            self._verify()
        elif signs == ("+", "-", "+"):
            t1 = _tangency_from_left(act, lo, segs[0][2], segs[1][2], width)
            m = act.mirrored()
            t2m = _tangency_from_left(m, -hi, -segs[1][2], -segs[0][2], width)
            t2 = None if t2m is None else -t2m
            if t1 is not None and t2 is not None and t1 <= t2:
                self._t1, self._t2 = t1, t2
                self._chord_l = self._chord_through(lo, t1)
                self._chord_r = self._chord_through(t2, hi)
            else:
                self._set_tie(hi)
            self._verify()
        else:
            raise EnvelopeError(
                f"unsupported curvature pattern {signs} for {act.tag} on [{lo}, {hi}]"
            )

    def _set_tie(self, tie):
        self.tie = float(tie)
        f_lo = self.act.value(self.lo)
        if self.tie > self.lo:
            self._slope = (self.act.value(self.tie) - f_lo) / (self.tie - self.lo)
        else:
            self._slope = None
        self._f_lo = f_lo

    def _chord_through(self, a, b):
        fa, fb = self.act.value(a), self.act.value(b)
        slope = (fb - fa) / (b - a)
        return slope, fa - slope * a

    def _verify(self):
        # Cheap guard for the structural assumptions behind the exotic forms.
        zs = np.linspace(self.lo, self.hi, 129)
        gap = self.act.value(zs) - self.value(zs)
        scale = max(1.0, float(np.max(np.abs(self.act.value(zs)))))
        if np.max(gap) > 1e-9 * scale:
            raise EnvelopeError(
                f"internal: envelope of {self.act.tag} on [{self.lo}, {self.hi}] "
                f"fails to overestimate by {np.max(gap):.3e}"
            )

    # -- queries

    @property
    def secant_then_function(self):
        return self.tie is not None

    def value(self, z):
        z = np.asarray(z, dtype=float)
        scalar = z.ndim == 0
        zz = z[None] if scalar else z
        out = self._value(zz)
        return float(out[0]) if scalar else out

    def _value(self, z):
        if self._inner is not None:
            return self._inner._value(-z)
        if self._t1 is not None:
            sl, cl = self._chord_l
            sr, cr = self._chord_r
            return np.where(
                z < self._t1,
                sl * z + cl,
                np.where(z > self._t2, sr * z + cr, self.act.value(z)),
            )
        if self._slope is None:
            return self.act.value(z)
        return np.where(
            z < self.tie,
            self._f_lo + self._slope * (z - self.lo),
            self.act.value(z),
        )

    def supergrad(self, z):
        z = np.asarray(z, dtype=float)
        scalar = z.ndim == 0
        zz = z[None] if scalar else z
        out = self._supergrad(zz)
        return float(out[0]) if scalar else out

    def _supergrad(self, z):
        if self._inner is not None:
            return -self._inner._supergrad(-z)
        if self._t1 is not None:
            sl, _ = self._chord_l
            sr, _ = self._chord_r
            return np.where(
                z < self._t1,
                sl,
                np.where(z > self._t2, sr, self.act.derivative(z, "left")),
            )
        if self._slope is None:
            # envelope equals the function; the right derivative is the valid
            # one-sided choice at the left endpoint
            left = self.act.derivative(z, "left")
            return np.where(z == self.lo, self.act.derivative(z, "right"), left)
        return np.where(z <= self.tie, self._slope, self.act.derivative(z, "left"))

    def linear_pieces(self):
        """Affine overestimators (slope, intercept) supporting the envelope.

        Each returned line is valid on the whole interval: the leading secant,
        the chords of the two-sided form, and any affine pieces of the function
        inside the region where the envelope equals the function.
        """
        if self._inner is not None:
            return [(-s, c) for s, c in self._inner.linear_pieces()]
        pieces = []
        if self._t1 is not None:
            pieces.append(self._chord_l)
            pieces.append(self._chord_r)
            ride_lo, ride_hi = self._t1, self._t2
        elif self._slope is not None:
            pieces.append((self._slope, self._f_lo - self._slope * self.lo))
            ride_lo, ride_hi = self.tie, self.hi
        else:
            ride_lo, ride_hi = self.lo, self.hi
        for a, b, s, c in self.act.affine_pieces():
            a, b = max(a, ride_lo), min(b, ride_hi)
            if a < b:
                pieces.append((s, c))
        return pieces


class ConvexEnvelope1D:
    """Convex envelope of an activation on a closed interval.

    Built from the concave envelope of the point-reflected activation, which
    swaps convex and concave stretches. ``tie`` is the largest point where the
    function hands over to a trailing secant, when that form applies.
    """

    def __init__(self, act, interval):
        self.act = act
        self.lo = float(interval.lo)
        self.hi = float(interval.hi)
        self._inner = ConcaveEnvelope1D(
            act.reflected(), Interval(-self.hi, -self.lo)
        )
        self.tie = None if self._inner.tie is None else -self._inner.tie

    def value(self, z):
        z = np.asarray(z, dtype=float)
        out = -self._inner.value(-z)
        return float(out) if out.ndim == 0 else out

    def subgrad(self, z):
        z = np.asarray(z, dtype=float)
        out = self._inner.supergrad(-z)
        return float(out) if out.ndim == 0 else out

    def linear_pieces(self):
        """Affine underestimators (slope, intercept), each valid on the interval."""
        return [(s, -c) for s, c in self._inner.linear_pieces()]


def _check_in_interval(iv, z, tol=1e-9):
    z = np.asarray(z, dtype=float)
    if np.any(z < iv.lo - tol) or np.any(z > iv.hi + tol):
        raise ValueError(f"point outside [{iv.lo}, {iv.hi}]")
    return np.clip(z, iv.lo, iv.hi)


def tie_point(act, iv):
    """Smallest point of [lo, hi] where the leading secant of the concave
    envelope hands over to the function."""
    curve = ConcaveEnvelope1D(act, iv)
    if curve.tie is None:
        raise EnvelopeError(
            f"concave envelope of {act.tag} on [{iv.lo}, {iv.hi}] is not "
            "secant-then-function; no tie point exists"
        )
    return curve.tie


def conc_env_1d(act, iv, z):
    """Concave envelope of the activation on the interval, evaluated at z."""
    return ConcaveEnvelope1D(act, iv).value(_check_in_interval(iv, z))


def conc_env_1d_supergrad(act, iv, z):
    """A supergradient of the one-dimensional concave envelope at z."""
    return ConcaveEnvelope1D(act, iv).supergrad(_check_in_interval(iv, z))


def range_on_interval(act, iv):
    """Exact image of the interval under the activation."""
    zs = [iv.lo, iv.hi] + [p for p in act.stationary_points() if iv.lo < p < iv.hi]
    vals = act.value(np.asarray(zs, dtype=float))
    return Interval(float(np.min(vals)), float(np.max(vals)))
