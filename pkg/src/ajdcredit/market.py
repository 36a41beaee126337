"""Market-data files: schema validation and unit normalization.

Quoted numbers carry their unit in the field name (``*_pct``, ``*_bp`` or a
bare fraction/decimal); exactly one spelling per quantity is accepted and
everything is normalized to fractions and decimals per year on load.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from .calibration import MaturityQuotes, QuoteSet, TrancheQuote
from .errors import SchemaError, UnitError
from .laws import DiscreteLoss, FixedLoss
from .pricers import Basket, DiscountCurve


@dataclass(frozen=True)
class MarketFile:
    name: str
    valuation_date: str
    curve: DiscountCurve
    basket: Basket
    quotes: QuoteSet


def _require(obj, key, path, kind=None):
    if key not in obj:
        raise SchemaError(f"{path}.{key}", "missing required field")
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise SchemaError(f"{path}.{key}", f"expected {kind}, got {type(val).__name__}")
    return val


def _one_of(obj, path, *variants):
    """Exactly one of the unit-suffixed spellings, returned as (name, value)."""
    present = [v for v in variants if v in obj]
    if len(present) != 1:
        raise UnitError(path, f"need exactly one of {variants}, got {present or 'none'}")
    name = present[0]
    val = obj[name]
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        raise SchemaError(f"{path}.{name}", "expected a number")
    return name, float(val)


def _fraction(obj, path, stem):
    name, val = _one_of(obj, path, stem, f"{stem}_pct", f"{stem}_bp")
    if name.endswith("_pct"):
        return val / 100.0
    if name.endswith("_bp"):
        return val / 1e4
    return val


def _parse_discount(obj, path):
    kind = _require(obj, "type", path, str)
    if kind == "flat":
        return DiscountCurve.flat(float(_require(obj, "rate", path, (int, float))))
    if kind == "zeros":
        pts = _require(obj, "points", path, list)
        import math
        return DiscountCurve.from_points([(float(t), math.exp(-float(z) * float(t)))
                                          for t, z in pts])
    if kind == "factors":
        pts = _require(obj, "points", path, list)
        return DiscountCurve.from_points([(float(t), float(df)) for t, df in pts])
    raise SchemaError(f"{path}.type", f"unknown discount type {kind!r}")


def _parse_basket(obj, path):
    n_names = int(_require(obj, "n_names", path, int))
    notional = float(obj.get("notional", 1.0))
    if "recovery" in obj and "loss_points" in obj:
        raise UnitError(path, "give either recovery or loss_points, not both")
    if "loss_points" in obj:
        pts = tuple((float(l), float(w)) for l, w in obj["loss_points"])
        return Basket(n_names, DiscreteLoss(pts), notional)
    recovery = float(_require(obj, "recovery", path, (int, float)))
    return Basket(n_names, FixedLoss(1.0 - recovery), notional)


def _parse_tranche(obj, path):
    attach = _fraction(obj, path, "attach")
    detach = _fraction(obj, path, "detach")
    has_upfront = any(k in obj for k in ("upfront", "upfront_pct"))
    has_spread = any(k in obj for k in ("spread", "spread_bp"))
    if has_upfront == has_spread:
        raise UnitError(path, "tranche needs exactly one of upfront or spread quote")
    if has_upfront:
        mid = _fraction(obj, path, "upfront")
        running = _fraction(obj, path, "running")
        bid_ask = _fraction(obj, path, "bid_ask")
        return TrancheQuote(attach, detach, "upfront", mid, bid_ask, running)
    mid = _fraction(obj, path, "spread")
    bid_ask = _fraction(obj, path, "bid_ask")
    return TrancheQuote(attach, detach, "spread", mid, bid_ask)


def parse_market(doc: dict, path: str = "market") -> MarketFile:
    if not isinstance(doc, dict):
        raise SchemaError(path, "top level must be an object")
    curve = _parse_discount(_require(doc, "discount", path, dict), f"{path}.discount")
    basket = _parse_basket(_require(doc, "basket", path, dict), f"{path}.basket")
    raw_mats = _require(doc, "maturities", path, list)
    if not raw_mats:
        raise SchemaError(f"{path}.maturities", "empty quotes list")
    mats = []
    for i, m in enumerate(raw_mats):
        mp = f"{path}.maturities[{i}]"
        years = float(_require(m, "years", mp, (int, float)))
        if years <= 0:
            raise SchemaError(f"{mp}.years", "maturity must be positive")
        idx = _require(m, "index", mp, dict)
        price = _fraction(idx, f"{mp}.index", "price")
        running = _fraction(idx, f"{mp}.index", "running")
        tranches = tuple(_parse_tranche(t, f"{mp}.tranches[{j}]")
                         for j, t in enumerate(m.get("tranches", [])))
        mats.append(MaturityQuotes(years, price, running, tranches,
                                   str(m.get("label", f"{years:g}Y"))))
    mats.sort(key=lambda mq: mq.maturity)
    quotes = QuoteSet(tuple(mats), curve, basket)
    return MarketFile(str(doc.get("name", "")), str(doc.get("valuation_date", "")),
                      curve, basket, quotes)


def load_market(path: str) -> MarketFile:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise SchemaError(path, "file not found")
    except json.JSONDecodeError as exc:
        raise SchemaError(path, f"invalid JSON: {exc}")
    return parse_market(doc)


def load_bundled_market(name: str = "itraxx_s9_2009-09-30") -> MarketFile:
    """The shipped iTraxx Europe S9 / 30-Sep-2009 fixture."""
    text = resources.files("ajdcredit.data").joinpath(f"{name}.json").read_text()
    return parse_market(json.loads(text))
