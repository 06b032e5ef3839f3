"""Command line front end.

Subcommands: price, compare, greeks, segfund, validate.  Instruments are
described by a JSON file (schema below, shipped in docs/ with a worked
example).  Output formats: text (default), csv, json.  All computation
happens before anything is printed, so a failing run emits no partial
output.  Exit codes: 0 success, 1 invalid market data or failed
computation, 2 unreadable file or schema violation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass

import jsonschema
import numpy as np

from .fitting import ShiftedLognormalFit
from .greeks import analytic_greeks, fd_greeks, model_price_fn
from .market import (CorrelationMatrix, DiscountSpec, GuaranteeSpec, IndexSpec,
                     ObservationSchedule, SegFundSpec, build_basket,
                     build_schedule_from_dates, validate_market)
from .montecarlo import (AsianCallPayoff, McConfig, default_workers, mc_price)
from .pricing import (asian_call_price, levy_call_price, security_value,
                      segfund_put_price)

DEFAULT_PRECISION = 6
DEFAULT_SHIFTS = "-50,0,50,100"
COMPARE_HEADER = ["shift", "model", "mc", "mc_se", "levy"]
GREEKS_HEADER = ["hedge_ratio", "model", "mc", "levy"]

INSTRUMENT_SCHEMA = {
    "type": "object",
    "required": ["indices", "weights", "correlation", "rate", "observations"],
    "additionalProperties": False,
    "properties": {
        "description": {"type": "string"},
        "indices": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "spot", "vol"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "spot": {"type": "number"},
                    "vol": {"type": "number"},
                    "div_yield": {"type": "number"},
                    "drift_override": {"type": ["number", "null"]},
                },
            },
        },
        "weights": {"type": "array", "minItems": 1, "items": {"type": "number"}},
        "correlation": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "minItems": 1, "items": {"type": "number"}},
        },
        "rate": {"type": "number"},
        "observations": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["times", "maturity"],
                    "additionalProperties": False,
                    "properties": {
                        "times": {"type": "array", "minItems": 1,
                                  "items": {"type": "number"}},
                        "maturity": {"type": "number"},
                    },
                },
                {
                    "type": "object",
                    "required": ["valuation_date", "dates", "maturity_date"],
                    "additionalProperties": False,
                    "properties": {
                        "valuation_date": {"type": "string"},
                        "dates": {"type": "array", "minItems": 1,
                                  "items": {"type": "string"}},
                        "maturity_date": {"type": "string"},
                    },
                },
            ],
        },
        "guarantee": {"type": "number"},
        "segfund": {
            "type": "object",
            "required": ["principal", "allocations", "fee_times",
                         "mgmt_fees", "protection_fees", "maturity"],
            "additionalProperties": False,
            "properties": {
                "principal": {"type": "number"},
                "allocations": {"type": "array", "minItems": 1,
                                "items": {"type": "number"}},
                "fee_times": {"type": "array", "items": {"type": "number"}},
                "mgmt_fees": {"type": "array", "items": {"type": "number"}},
                "protection_fees": {"type": "array", "items": {"type": "number"}},
                "maturity": {"type": "number"},
            },
        },
    },
}


class InstrumentLoadError(Exception):
    """File unreadable, JSON malformed, or schema violated."""


@dataclass(frozen=True)
class Instrument:
    basket: object
    correlations: CorrelationMatrix
    schedule: ObservationSchedule
    discount: DiscountSpec
    guarantee: float = None
    segfund: SegFundSpec = None
    segfund_maturity: float = None


def load_instrument(path: str) -> Instrument:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise InstrumentLoadError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InstrumentLoadError(f"malformed JSON in {path}: {exc}") from exc
    try:
        jsonschema.validate(raw, INSTRUMENT_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise InstrumentLoadError(f"schema violation in {path}: {exc.message}") from exc

    indices = tuple(
        IndexSpec(name=d["name"], spot=d["spot"], vol=d["vol"],
                  div_yield=d.get("div_yield", 0.0),
                  drift_override=d.get("drift_override"))
        for d in raw["indices"])
    basket = build_basket(indices, raw["weights"])
    correlations = CorrelationMatrix(np.array(raw["correlation"], dtype=float))
    obs = raw["observations"]
    if "times" in obs:
        schedule = ObservationSchedule(obs["times"], obs["maturity"])
    else:
        schedule = build_schedule_from_dates(obs["valuation_date"], obs["dates"],
                                             obs["maturity_date"])
    discount = DiscountSpec(raw["rate"])
    seg = raw.get("segfund")
    segfund = None
    segfund_maturity = None
    if seg is not None:
        segfund = SegFundSpec(seg["principal"], seg["allocations"], seg["fee_times"],
                              seg["mgmt_fees"], seg["protection_fees"])
        segfund_maturity = float(seg["maturity"])
    return Instrument(basket, correlations, schedule, discount,
                      raw.get("guarantee"), segfund, segfund_maturity)


def apply_vol_shift(basket, shift_pct: float):
    """Relative shift: every vol becomes vol * (1 + shift/100)."""
    if shift_pct == 0.0:
        return basket
    return basket.with_vols(basket.vols * (1.0 + shift_pct / 100.0))


def fmt(value, precision: int) -> str:
    if value is None:
        return ""
    return f"{value:.{precision}g}"


def fit_line(fit) -> str:
    if fit is None:
        return "degenerate"
    if isinstance(fit, ShiftedLognormalFit):
        line = f"a={fit.shift:.4f} b={fit.mu:.4f} c={fit.sigma:.4f}"
        if fit.lognormal_fallback:
            line += " (two-moment fallback)"
        return line
    return f"b={fit.mu:.4f} c={fit.sigma:.4f}"


def render_table(header, rows, fmt_name: str) -> str:
    if fmt_name == "csv":
        lines = [",".join(header)]
        lines += [",".join(row) for row in rows]
        return "\n".join(lines) + "\n"
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(header)]
    out = []
    for cells in [header] + rows:
        padded = [cells[0].ljust(widths[0])]
        padded += [c.rjust(widths[i]) for i, c in enumerate(cells) if i > 0]
        out.append("  ".join(padded).rstrip())
    return "\n".join(out) + "\n"


def render_pairs(pairs, fmt_name: str) -> str:
    if fmt_name == "csv":
        lines = ["field,value"] + [f"{k},{v}" for k, v in pairs]
        return "\n".join(lines) + "\n"
    width = max(len(k) for k, _ in pairs)
    return "".join(f"{k.ljust(width)}  {v}\n" for k, v in pairs)


def render_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def mc_config_from(args) -> McConfig:
    return McConfig(n_paths=args.mc_paths, seed=args.seed,
                    antithetic=args.antithetic,
                    n_workers=args.workers if args.workers else default_workers())


def cmd_validate(args):
    try:
        inst = load_instrument(args.file)
    except ValueError as exc:
        return 1, f"violation: {exc}\n"
    report = validate_market(inst.basket, inst.correlations, inst.schedule,
                             inst.discount)
    problems = list(report.violations)
    if inst.segfund is not None:
        if len(inst.segfund.allocations) != inst.basket.n_indices:
            problems.append("segfund allocations do not match indices")
        if inst.segfund.fee_times and inst.segfund.fee_times[-1] > inst.segfund_maturity:
            problems.append("segfund fee time after maturity")
        if inst.segfund_maturity <= 0.0:
            problems.append("segfund maturity not positive")
    if not problems:
        return 0, "ok\n"
    return 1, "".join(f"violation: {p}\n" for p in problems)


def cmd_price(args):
    inst = load_instrument(args.file)
    basket = apply_vol_shift(inst.basket, args.vol_shift)
    result = asian_call_price(basket, inst.correlations, inst.schedule,
                              inst.discount)
    scale = 100.0 / basket.weight_total if args.notional_normalize else 1.0
    p = args.precision
    value = result.value * scale
    pairs = [("price", fmt(value, p)),
             ("fit", fit_line(result.fit)),
             ("discount_factor", fmt(result.discount_factor, p)),
             ("branch", result.branch)]
    security = None
    if inst.guarantee is not None:
        sec = security_value(GuaranteeSpec(inst.guarantee), basket,
                             inst.correlations, inst.schedule, inst.discount)
        security = sec.value * scale
        pairs.append(("security_value", fmt(security, p)))
    if args.format == "json":
        fit = result.fit
        obj = {
            "price": value,
            "fit": None if fit is None else {
                "a": fit.shift, "b": fit.mu, "c": fit.sigma,
                "two_moment_fallback": fit.lognormal_fallback},
            "discount_factor": result.discount_factor,
            "branch": result.branch,
            "normalized": bool(args.notional_normalize),
        }
        if security is not None:
            obj["security_value"] = security
        return 0, render_json(obj)
    return 0, render_pairs(pairs, args.format)


def cmd_compare(args):
    inst = load_instrument(args.file)
    shifts = [float(s) for s in args.shifts.split(",") if s.strip() != ""]
    if not shifts:
        raise ValueError("no shifts given")
    scale = 100.0 / inst.basket.weight_total if args.notional_normalize else 1.0
    p = args.precision
    rows = []
    raw_rows = []
    for shift in shifts:
        basket = apply_vol_shift(inst.basket, shift)
        model = asian_call_price(basket, inst.correlations, inst.schedule,
                                 inst.discount).value
        levy = levy_call_price(basket, inst.correlations, inst.schedule,
                               inst.discount).value
        mc_mean = mc_se = None
        if args.mc_paths > 0:
            est = mc_price(AsianCallPayoff(basket, inst.correlations,
                                           inst.schedule, inst.discount),
                           mc_config_from(args))
            mc_mean, mc_se = est.mean, est.std_error
        raw_rows.append((shift, model, mc_mean, mc_se, levy))
        rows.append([fmt(shift, p), fmt(model * scale, p),
                     fmt(None if mc_mean is None else mc_mean * scale, p),
                     fmt(None if mc_se is None else mc_se * scale, p),
                     fmt(levy * scale, p)])

    if args.format == "json":
        obj = [{"shift": s, "model": m * scale,
                "mc": None if mc is None else mc * scale,
                "mc_se": None if se is None else se * scale,
                "levy": l * scale}
               for s, m, mc, se, l in raw_rows]
        return 0, render_json({"normalized": bool(args.notional_normalize),
                               "rows": obj})
    out = render_table(COMPARE_HEADER, rows, args.format)
    if args.format == "text" and args.notional_normalize:
        raw = [[fmt(s, p), fmt(m, p), fmt(mc, p), fmt(se, p), fmt(l, p)]
               for s, m, mc, se, l in raw_rows]
        out += "\nraw values (weights total " + fmt(inst.basket.weight_total, p) + ")\n"
        out += render_table(COMPARE_HEADER, raw, "text")
    return 0, out


def _mc_fd_greeks(inst, basket, j, config):
    """Central-difference MC delta and vega for index j, common random numbers.

    The path draws depend only on (seed, path index), so bumped and base
    valuations reuse identical randomness and the difference is smooth.
    """
    spots = basket.spots
    vols = basket.vols
    h_s = 1e-4 * spots[j]

    def price_at(new_spots, new_vols):
        bumped = basket.with_spots(new_spots).with_vols(new_vols)
        payoff = AsianCallPayoff(bumped, inst.correlations, inst.schedule,
                                 inst.discount)
        return mc_price(payoff, config).mean

    up = spots.copy(); up[j] += h_s
    dn = spots.copy(); dn[j] -= h_s
    delta = (price_at(up, vols) - price_at(dn, vols)) / (2.0 * h_s)
    h_v = 1e-4
    vup = vols.copy(); vup[j] += h_v
    vdn = vols.copy(); vdn[j] -= h_v
    vega = (price_at(spots, vup) - price_at(spots, vdn)) / (2.0 * h_v)
    return delta, vega


def cmd_greeks(args):
    inst = load_instrument(args.file)
    basket = apply_vol_shift(inst.basket, args.vol_shift)
    j = args.index - 1
    if j < 0 or j >= basket.n_indices:
        raise ValueError(f"index {args.index} out of range 1..{basket.n_indices}")
    p = args.precision

    model_delta = model_vega = None
    mc_delta = mc_vega = None
    levy_delta = levy_vega = None

    if args.method in ("analytic", "mc-fd", "all"):
        res = analytic_greeks(basket, inst.correlations, inst.schedule,
                              inst.discount)
        model_delta, model_vega = res.deltas[j], res.vegas[j]
    if args.method == "fd":
        res = fd_greeks(model_price_fn(basket, inst.correlations, inst.schedule,
                                       inst.discount),
                        basket.spots, basket.vols, scheme="central4")
        model_delta, model_vega = res.deltas[j], res.vegas[j]
    if args.method in ("mc-fd", "all"):
        mc_delta, mc_vega = _mc_fd_greeks(inst, basket, j, mc_config_from(args))
    if args.method == "all":
        def levy_price(spots, vols):
            bumped = basket.with_spots(spots).with_vols(vols)
            return levy_call_price(bumped, inst.correlations, inst.schedule,
                                   inst.discount).value
        res = fd_greeks(levy_price, basket.spots, basket.vols)
        levy_delta, levy_vega = res.deltas[j], res.vegas[j]

    rows = [["delta", fmt(model_delta, p), fmt(mc_delta, p), fmt(levy_delta, p)],
            ["vega", fmt(model_vega, p), fmt(mc_vega, p), fmt(levy_vega, p)]]
    if args.format == "json":
        obj = {"index": args.index, "method": args.method,
               "delta": {"model": model_delta, "mc": mc_delta, "levy": levy_delta},
               "vega": {"model": model_vega, "mc": mc_vega, "levy": levy_vega}}
        return 0, render_json(obj)
    return 0, render_table(GREEKS_HEADER, rows, args.format)


def cmd_segfund(args):
    inst = load_instrument(args.file)
    if inst.segfund is None:
        raise ValueError("instrument file has no segfund block")
    fund = inst.segfund
    maturity = inst.segfund_maturity
    indices = inst.basket.indices
    result = segfund_put_price(fund, indices, inst.correlations, inst.discount,
                               maturity)
    p = args.precision
    units = fund.terminal_units(indices)
    pairs = [("terminal_units", " ".join(fmt(u, p) for u in units)),
             ("fit", fit_line(result.fit)),
             ("put_value", fmt(result.value, p)),
             ("discount_factor", fmt(result.discount_factor, p)),
             ("branch", result.branch)]
    mc_mean = mc_se = None
    if args.mc_paths > 0:
        from .montecarlo import SegFundPutPayoff
        est = mc_price(SegFundPutPayoff(fund, indices, inst.correlations,
                                        inst.discount, maturity),
                       mc_config_from(args))
        mc_mean, mc_se = est.mean, est.std_error
        pairs += [("mc_value", fmt(mc_mean, p)), ("mc_se", fmt(mc_se, p))]
    if args.format == "json":
        fit = result.fit
        obj = {"terminal_units": [float(u) for u in units],
               "fit": None if fit is None else {
                   "a": fit.shift, "b": fit.mu, "c": fit.sigma,
                   "two_moment_fallback": fit.lognormal_fallback},
               "put_value": result.value,
               "discount_factor": result.discount_factor,
               "branch": result.branch,
               "mc_value": mc_mean, "mc_se": mc_se}
        return 0, render_json(obj)
    return 0, render_pairs(pairs, args.format)


def add_common(parser, mc_default=0):
    parser.add_argument("file", help="instrument JSON file")
    parser.add_argument("--format", choices=["text", "csv", "json"],
                        default="text")
    parser.add_argument("--precision", type=int, default=DEFAULT_PRECISION,
                        help="significant digits in numeric output")
    parser.add_argument("--mc-paths", type=int, default=mc_default,
                        help="Monte Carlo paths (0 disables the MC column)")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--antithetic", action="store_true")
    parser.add_argument("--workers", type=int, default=0,
                        help="MC worker threads (default: EQLINK_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eqlink",
        description="Pricing of equity-linked securities on averaged index baskets")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="model price of the averaged basket call")
    add_common(p)
    p.add_argument("--vol-shift", type=float, default=0.0,
                   help="relative vol shift in percent")
    p.add_argument("--notional-normalize", action="store_true",
                   help="report values as percent of the weight total")
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("compare", help="model vs Monte Carlo vs Levy across vol shifts")
    add_common(p, mc_default=500_000)
    p.add_argument("--shifts", default=DEFAULT_SHIFTS,
                   help="comma-separated relative vol shifts in percent")
    p.add_argument("--notional-normalize", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("greeks", help="hedge ratios for one index")
    add_common(p, mc_default=500_000)
    p.add_argument("--index", type=int, default=1,
                   help="1-based index position")
    p.add_argument("--method", choices=["analytic", "fd", "mc-fd", "all"],
                   default="analytic")
    p.add_argument("--vol-shift", type=float, default=0.0)
    p.set_defaults(func=cmd_greeks)

    p = sub.add_parser("segfund", help="segregated fund maturity guarantee")
    add_common(p)
    p.set_defaults(func=cmd_segfund)

    p = sub.add_parser("validate", help="check an instrument file and report violations")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate, format="text")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code, output = args.func(args)
    except InstrumentLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(output)
    return code


def entrypoint():
    sys.exit(main())
