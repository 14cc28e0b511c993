"""Bilateral birth-death rate models on the integers.

A model assigns to every state ``i`` a birth rate (jump ``i -> i+1``) and a
death rate (jump ``i -> i-1``), both of the form

    factor(i) * (base + sin_amp*sin(2*pi*freq*t) + cos_amp*cos(2*pi*freq*t))

organised as disjoint state bands that jointly cover the integers.  Every
rate is bounded above by ``factor(i) * (base + hypot(sin_amp, cos_amp))``,
and the declared horizon ``H`` guarantees that rates at ``|i| >= H`` do not
depend on ``i`` any more, which keeps all infima over the state index
finitely computable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelConfigError

_INF = math.inf
_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class RateExpr:
    """Time part of a rate: base + sin_amp*sin(2*pi*f*t) + cos_amp*cos(2*pi*f*t)."""

    base: float
    sin_amp: float = 0.0
    cos_amp: float = 0.0
    freq: float = 1.0

    def __post_init__(self):
        amp = math.hypot(self.sin_amp, self.cos_amp)
        if self.base < amp - 1e-12:
            raise ModelConfigError(
                f"negative rate expression: base {self.base} below amplitude {amp}"
            )
        if self.freq <= 0:
            raise ModelConfigError(f"rate frequency must be positive, got {self.freq}")

    def value(self, t):
        w = _TWO_PI * self.freq
        return self.base + self.sin_amp * np.sin(w * t) + self.cos_amp * np.cos(w * t)

    @property
    def peak(self) -> float:
        """Tight upper bound of the expression over all t."""
        return self.base + math.hypot(self.sin_amp, self.cos_amp)


@dataclass(frozen=True)
class StateFactor:
    """State-dependent multiplier: constant one, min(|i|, cap), or a table."""

    kind: str  # "one" | "min_linear" | "table"
    cap: int | None = None
    entries: dict[int, float] | None = None
    default: float | None = None

    @classmethod
    def one(cls) -> "StateFactor":
        return cls("one")

    @classmethod
    def min_linear(cls, cap: int) -> "StateFactor":
        return cls("min_linear", cap=cap)

    @classmethod
    def table(cls, entries: dict[int, float], default: float = 0.0) -> "StateFactor":
        return cls("table", entries=dict(entries), default=default)

    def __post_init__(self):
        if self.kind == "one":
            return
        if self.kind == "min_linear":
            if not isinstance(self.cap, int) or self.cap < 1:
                raise ModelConfigError("min_linear factor needs a positive integer cap")
        elif self.kind == "table":
            if self.entries is None:
                raise ModelConfigError("table factor needs entries")
            if any(v < 0 for v in self.entries.values()):
                raise ModelConfigError("table factor entries must be non-negative")
            if self.default is None or self.default < 0:
                raise ModelConfigError("table factor needs a non-negative default")
        else:
            raise ModelConfigError(f"unknown factor kind {self.kind!r}")

    def value(self, i: int) -> float:
        if self.kind == "one":
            return 1.0
        if self.kind == "min_linear":
            return float(min(abs(i), self.cap))
        return float(self.entries.get(i, self.default))

    def constant_from(self, h: int) -> bool:
        """True when value(i) is the same for all |i| >= h on each side."""
        if self.kind == "one":
            return True
        if self.kind == "min_linear":
            return self.cap <= h
        return all(abs(k) < h for k in self.entries)


@dataclass(frozen=True)
class RateBand:
    """One state interval [lo, hi] with a common rate expression and factor.

    ``lo``/``hi`` are integers or +-inf for the unbounded sides.
    """

    lo: float
    hi: float
    expr: RateExpr
    factor: StateFactor = field(default_factory=StateFactor.one)

    def __post_init__(self):
        for edge in (self.lo, self.hi):
            if math.isfinite(edge) and edge != int(edge):
                raise ModelConfigError(f"band edge {edge} is not an integer")
        if self.lo > self.hi:
            raise ModelConfigError(f"band has lo {self.lo} > hi {self.hi}")

    def covers(self, i: int) -> bool:
        return self.lo <= i <= self.hi

    def factor_max(self) -> float:
        """Max of the factor over the band's states."""
        f = self.factor
        if f.kind == "one":
            return 1.0
        if f.kind == "min_linear":
            if math.isinf(self.lo) or math.isinf(self.hi):
                return float(f.cap)
            return float(min(f.cap, max(abs(int(self.lo)), abs(int(self.hi)))))
        in_band = [v for k, v in f.entries.items() if self.covers(k)]
        if math.isfinite(self.lo) and math.isfinite(self.hi):
            width = int(self.hi) - int(self.lo) + 1
            if len(in_band) == width:
                return max(in_band)
        return max(in_band, default=f.default) if in_band else f.default


def _validate_bands(bands: tuple[RateBand, ...], direction: str) -> None:
    if not bands:
        raise ModelConfigError(f"{direction} bands are empty")
    if bands[0].lo != -_INF or bands[-1].hi != _INF:
        raise ModelConfigError(f"{direction} bands do not cover the integers")
    for a, b in zip(bands, bands[1:]):
        if b.lo != a.hi + 1:
            raise ModelConfigError(
                f"{direction} bands must tile the integers; gap or overlap at {a.hi}..{b.lo}"
            )


def _validate_horizon(bands: tuple[RateBand, ...], h: int, direction: str) -> None:
    pos = next(b for b in bands if b.covers(h))
    neg = next(b for b in bands if b.covers(-h))
    if pos.hi != _INF or neg.lo != -_INF:
        raise ModelConfigError(
            f"{direction} bands change at |i| >= horizon {h}; raise the horizon"
        )
    for band in (pos, neg):
        if not band.factor.constant_from(h):
            raise ModelConfigError(
                f"{direction} factor still varies at |i| >= horizon {h}"
            )


@dataclass(frozen=True)
class RateModel:
    """Bilateral birth-death process specification.

    ``birth_bands`` house the i -> i+1 rates, ``death_bands`` the i -> i-1
    rates.  ``horizon`` is the smallest H with rates independent of the state
    for |i| >= H (validated, not inferred).
    """

    birth_bands: tuple[RateBand, ...]
    death_bands: tuple[RateBand, ...]
    horizon: int
    name: str = ""

    def __post_init__(self):
        if not isinstance(self.horizon, int) or self.horizon < 1:
            raise ModelConfigError("horizon must be a positive integer")
        object.__setattr__(self, "birth_bands", tuple(sorted(self.birth_bands, key=lambda b: b.lo)))
        object.__setattr__(self, "death_bands", tuple(sorted(self.death_bands, key=lambda b: b.lo)))
        _validate_bands(self.birth_bands, "birth")
        _validate_bands(self.death_bands, "death")
        _validate_horizon(self.birth_bands, self.horizon, "birth")
        _validate_horizon(self.death_bands, self.horizon, "death")

    def _band(self, bands: tuple[RateBand, ...], i: int) -> RateBand:
        for b in bands:
            if b.covers(i):
                return b
        raise AssertionError("bands cover the integers by construction")

    def birth_band(self, i: int) -> RateBand:
        return self._band(self.birth_bands, i)

    def death_band(self, i: int) -> RateBand:
        return self._band(self.death_bands, i)


def birth_rate(m: RateModel, i: int, t):
    """Rate of the jump i -> i+1 at time t (t may be an array)."""
    b = m.birth_band(i)
    return b.factor.value(i) * b.expr.value(t)


def death_rate(m: RateModel, i: int, t):
    """Rate of the jump i -> i-1 at time t (t may be an array)."""
    b = m.death_band(i)
    return b.factor.value(i) * b.expr.value(t)


def birth_coeffs(m: RateModel, i: int) -> tuple[float, float, float, float]:
    """(A, B, C, freq) with birth rate A + B sin(2 pi f t) + C cos(2 pi f t)."""
    b = m.birth_band(i)
    f = b.factor.value(i)
    return (f * b.expr.base, f * b.expr.sin_amp, f * b.expr.cos_amp, b.expr.freq)


def death_coeffs(m: RateModel, i: int) -> tuple[float, float, float, float]:
    b = m.death_band(i)
    f = b.factor.value(i)
    return (f * b.expr.base, f * b.expr.sin_amp, f * b.expr.cos_amp, b.expr.freq)


def rate_upper_bounds(m: RateModel, i: int) -> tuple[float, float]:
    """Per-state bounds (lambda_bar_i, mu_bar_i); tight for this rate family."""
    bb = m.birth_band(i)
    db = m.death_band(i)
    return (bb.factor.value(i) * bb.expr.peak, db.factor.value(i) * db.expr.peak)


def global_bound(m: RateModel) -> float:
    """Uniform rate bound Delta = sup_i max(lambda_bar_i, mu_bar_i)."""
    best = 0.0
    for band in m.birth_bands + m.death_bands:
        best = max(best, band.factor_max() * band.expr.peak)
    return best


# ---------------------------------------------------------------------------
# Built-in models
# ---------------------------------------------------------------------------

def build_ex1() -> RateModel:
    """Randomized random walk: M/M/S-type service on each half axis.

    On the non-negative axis the particle moves up at rate 1 + sin(2 pi t)
    and down at rate 3 min(i, 2).  The negative axis mirrors the positive
    one, and from state 0 both neighbours are reached at rate 1 + sin(2 pi t).
    """
    trig = RateExpr(1.0, sin_amp=1.0)
    pull = RateExpr(3.0)
    two = StateFactor.min_linear(2)
    return RateModel(
        birth_bands=(
            RateBand(-_INF, -1, pull, two),
            RateBand(0, _INF, trig),
        ),
        death_bands=(
            RateBand(-_INF, 0, trig),
            RateBand(1, _INF, pull, two),
        ),
        horizon=2,
        name="ex1",
    )


def build_ex2() -> RateModel:
    """Double-ended queue: passengers arrive at rate 2 + sin(2 pi t)/4;
    taxis arrive at rate 1 + sin(2 pi t)/8 while none are queued
    (state <= 0) and 4 + cos(2 pi t)/4 while passengers wait (state >= 1).
    """
    return RateModel(
        birth_bands=(RateBand(-_INF, _INF, RateExpr(2.0, sin_amp=0.25)),),
        death_bands=(
            RateBand(-_INF, 0, RateExpr(1.0, sin_amp=0.125)),
            RateBand(1, _INF, RateExpr(4.0, cos_amp=0.25)),
        ),
        horizon=1,
        name="ex2",
    )


BUILTIN_MODELS = {"ex1": build_ex1, "ex2": build_ex2}


# ---------------------------------------------------------------------------
# JSON config
# ---------------------------------------------------------------------------

def _edge_from_json(v, which: str) -> float:
    if v == "-inf":
        return -_INF
    if v == "+inf" or v == "inf":
        return _INF
    if isinstance(v, int) and not isinstance(v, bool):
        return float(v)
    raise ModelConfigError(f"band {which} must be an integer, '-inf' or '+inf'")


def _edge_to_json(v: float):
    if v == -_INF:
        return "-inf"
    if v == _INF:
        return "+inf"
    return int(v)


def _factor_from_json(doc) -> StateFactor:
    if doc is None:
        return StateFactor.one()
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ModelConfigError("factor must be an object with a 'kind'")
    kind = doc["kind"]
    if kind == "one":
        return StateFactor.one()
    if kind == "min_linear":
        if "cap" not in doc:
            raise ModelConfigError("min_linear factor needs 'cap'")
        return StateFactor.min_linear(int(doc["cap"]))
    if kind == "table":
        try:
            entries = {int(k): float(v) for k, v in doc.get("entries", {}).items()}
        except (TypeError, ValueError) as e:
            raise ModelConfigError(f"bad table entries: {e}") from None
        return StateFactor.table(entries, default=float(doc.get("default", 0.0)))
    raise ModelConfigError(f"unknown factor kind {kind!r}")


def _factor_to_json(f: StateFactor) -> dict:
    if f.kind == "one":
        return {"kind": "one"}
    if f.kind == "min_linear":
        return {"kind": "min_linear", "cap": f.cap}
    return {
        "kind": "table",
        "entries": {str(k): v for k, v in sorted(f.entries.items())},
        "default": f.default,
    }


def _band_from_json(doc) -> RateBand:
    if not isinstance(doc, dict):
        raise ModelConfigError("band must be an object")
    try:
        lo = _edge_from_json(doc["lo"], "lo")
        hi = _edge_from_json(doc["hi"], "hi")
        expr = RateExpr(
            base=float(doc["base"]),
            sin_amp=float(doc.get("sin_amp", 0.0)),
            cos_amp=float(doc.get("cos_amp", 0.0)),
            freq=float(doc.get("freq", 1.0)),
        )
    except KeyError as e:
        raise ModelConfigError(f"band is missing field {e.args[0]!r}") from None
    except (TypeError, ValueError) as e:
        raise ModelConfigError(f"bad band field: {e}") from None
    return RateBand(lo, hi, expr, _factor_from_json(doc.get("factor")))


def _band_to_json(b: RateBand) -> dict:
    doc = {"lo": _edge_to_json(b.lo), "hi": _edge_to_json(b.hi), "base": b.expr.base}
    if b.expr.sin_amp:
        doc["sin_amp"] = b.expr.sin_amp
    if b.expr.cos_amp:
        doc["cos_amp"] = b.expr.cos_amp
    if b.expr.freq != 1.0:
        doc["freq"] = b.expr.freq
    doc["factor"] = _factor_to_json(b.factor)
    return doc


def load_model(document: str) -> RateModel:
    """Build a RateModel from a JSON config document or a built-in name."""
    name = document.strip()
    if name in BUILTIN_MODELS:
        return BUILTIN_MODELS[name]()
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as e:
        raise ModelConfigError(f"model config is not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ModelConfigError("model config must be a JSON object")
    if "horizon" not in doc:
        raise ModelConfigError("model config is missing 'horizon'")
    for key in ("birth", "death"):
        if key not in doc or not isinstance(doc[key], list):
            raise ModelConfigError(f"model config needs a '{key}' band list")
    return RateModel(
        birth_bands=tuple(_band_from_json(b) for b in doc["birth"]),
        death_bands=tuple(_band_from_json(b) for b in doc["death"]),
        horizon=int(doc["horizon"]),
        name=str(doc.get("name", "")),
    )


def serialize_model(m: RateModel) -> str:
    """Inverse of load_model up to rate-function equality."""
    doc = {
        "name": m.name,
        "horizon": m.horizon,
        "birth": [_band_to_json(b) for b in m.birth_bands],
        "death": [_band_to_json(b) for b in m.death_bands],
    }
    return json.dumps(doc, indent=2, sort_keys=True)
