"""Command-line front end.

Every command writes one envelope::

    {"schema": ..., "command": ..., "config": {...}, "version": ...,
     "timing": {...}, "payload": {...}}

Re-running a command with the echoed ``config`` reproduces ``payload``
byte for byte; ``timing`` is the only field that varies between runs.

Exit codes: 0 success, 2 usage error, 3 domain or size-limit error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from pathlib import Path

from . import __version__, theory
from .core import CoinSpec, ContamRunsError, DomainError, RunParams
from .exact_oracle import (
    ENUM_MAX_N,
    WindowMode,
    brute_force_no_occurrence,
    dp_no_window_probability,
)
from .simulation import (
    EmpiricalDistribution,
    SimulationConfig,
    Theory,
    compare_new_old,
    ks_distance,
    lattice_cdf,
    run_hitting_experiment,
)

SCHEMA = "contam-runs.report/1"
DEFAULT_SEED = 20240607
THREADS_ENV = "CONTAM_RUNS_THREADS"
AUTO_HALF_WIDTH = 8

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN = 0, 2, 3


# -- argument types ------------------------------------------------------------


def _prob(text: str) -> float:
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid probability {text!r}") from None
    if not 0.0 < p < 1.0:
        raise argparse.ArgumentTypeError("p must be in (0,1)")
    return p


def _int_like(text: str) -> int:
    # accepts 1000000, 1e6, 10**6
    t = text.strip()
    try:
        if "**" in t:
            base, exp = t.split("**")
            return int(base) ** int(exp)
        v = float(t) if ("e" in t.lower() or "." in t) else int(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if v != int(v):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(v)


def _positive(text: str) -> int:
    v = _int_like(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _nonneg(text: str) -> int:
    v = _int_like(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return v


def _range(text: str) -> str | tuple[int, int]:
    """``auto`` or ``a..b`` (inclusive)."""
    if text == "auto":
        return "auto"
    try:
        a, b = text.split("..")
        lo, hi = int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a..b' or 'auto', got {text!r}") from None
    if hi < lo:
        raise argparse.ArgumentTypeError("empty range")
    return lo, hi


# -- output --------------------------------------------------------------------


def _round_sig(x: float, digits: int) -> float:
    if not math.isfinite(x) or x == 0:
        return x
    return float(f"{x:.{digits}g}")


def _format_payload(obj, key: str | None = None):
    """Fix the reported precision: KS distances to 4 decimals, other reals to
    12 significant digits."""
    if isinstance(obj, dict):
        return {k: _format_payload(v, k) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_format_payload(v, key) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return str(obj)
        if key == "distance":
            return round(obj, 4)
        return _round_sig(obj, 12)
    if hasattr(obj, "item"):
        return _format_payload(obj.item(), key)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _flatten(obj, prefix: str = ""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else k)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


def envelope_to_csv(env: dict) -> str:
    """Long-format projection ``section,path,value``; numbers use the JSON spelling."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["section", "path", "value"])
    for section in ("config", "payload"):
        for path, value in _flatten(env[section]):
            w.writerow([section, path, json.dumps(value)])
    w.writerow(["meta", "schema", json.dumps(env["schema"])])
    w.writerow(["meta", "command", json.dumps(env["command"])])
    w.writerow(["meta", "version", json.dumps(env["version"])])
    return buf.getvalue()


def payload_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _emit(env: dict, fmt: str, out: str | None) -> None:
    if fmt == "csv":
        text = envelope_to_csv(env)
    else:
        text = json.dumps(env, indent=2) + "\n"
    if out and out != "-":
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- commands ------------------------------------------------------------------


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _centering_dict(c: theory.CenteringResult) -> dict:
    return {"value": c.value, "integer_part": c.integer_part, "fractional_part": c.fractional_part}


def cmd_simulate_longest(args) -> tuple[dict, dict]:
    coin = CoinSpec(args.p)
    config = {"N": args.N, "s": args.s, "T": args.T, "p": args.p, "seed": args.seed}
    if args.T < 1:
        raise DomainError("the new accompanying distribution needs T >= 1")
    theory.m_center(args.N, args.T, coin)
    sim = SimulationConfig(N=args.N, s=args.s, T=args.T, coin=coin, seed=args.seed, workers=_threads(args))
    res = compare_new_old(sim)
    N, T = args.N, args.T
    cn, co = res.center_new, res.center_old
    lo = int(res.longest.min()) - min(cn.integer_part, co.integer_part) - 1
    hi = int(res.longest.max()) - max(cn.integer_part, co.integer_part) + 2
    per_k = []
    for k in range(lo, hi + 1):
        per_k.append(
            {
                "k": k,
                "empirical_new": float((res.longest - cn.integer_part < k).mean()),
                "theory_new": theory.accompanying_cdf_new(k, N, T, coin),
                "empirical_old": float((res.longest - co.integer_part < k).mean()),
                "theory_old": theory.accompanying_cdf_old(k, N, T, coin),
            }
        )
    payload = {
        "m_center": _centering_dict(cn),
        "m0_center": _centering_dict(co),
        "ks_new": res.ks_new.to_dict(),
        "ks_old": res.ks_old.to_dict(),
        "cdf_table": per_k,
        "longest_distribution": EmpiricalDistribution.from_samples(res.longest).to_dict(),
    }
    return config, payload


def cmd_simulate_hitting(args) -> tuple[dict, dict]:
    coin = CoinSpec(args.p)
    config = {
        "T": args.T,
        "p": args.p,
        "m": args.m,
        "s": args.s,
        "seed": args.seed,
        "cap_factor": args.cap_factor,
        "refined": args.refined,
    }
    scale = theory.tau_scale(args.m, args.T, coin, refined=args.refined)
    cap = max(args.m, math.ceil(args.cap_factor / scale))
    sim = SimulationConfig(N=cap, s=args.s, T=args.T, coin=coin, seed=args.seed, m_hit=args.m, workers=_threads(args))
    res = run_hitting_experiment(sim, refined=args.refined, cap_factor=args.cap_factor)
    ks = ks_distance(res.distribution, theory.hitting_cdf_limit, which=Theory.EXP_LIMIT, lattice=False)
    payload = {
        "alpha": theory.alpha(args.m, args.T, coin, args.refined),
        "p_a1": theory.p_a1(args.m, args.T, coin),
        "scale": res.scale,
        "cap": res.cap,
        "censored": res.censored,
        "ks": ks.to_dict(),
    }
    return config, payload


def _k_range(spec, center: int) -> range:
    if spec == "auto":
        return range(-AUTO_HALF_WIDTH, AUTO_HALF_WIDTH + 1)
    lo, hi = spec
    return range(lo, hi + 1)


def cmd_theory(args) -> tuple[dict, dict]:
    coin = CoinSpec(args.p)
    N, T = args.N, args.T
    config = {"N": N, "T": T, "p": args.p, "k": args.k if args.k == "auto" else f"{args.k[0]}..{args.k[1]}"}
    m0 = theory.m0_center(N, T, coin)
    payload: dict = {"m0_center": _centering_dict(m0), "c": coin.c, "q": coin.q}
    notes = []
    new = None
    if T < 1:
        notes.append("new centering refused: it is stated for T in {1,2} only")
    else:
        new = theory.m_center(N, T, coin)
        payload["m_center"] = _centering_dict(new)
        payload["q0"] = theory.q0(T, coin)
        if T > 2:
            notes.append("T > 2: new centering relies on the conjectured alpha = q - T/m")
    rows = []
    for k in _k_range(args.k, 0):
        row = {"k": k, "cdf_old": theory.accompanying_cdf_old(k, N, T, coin)}
        if new is not None:
            row["cdf_new"] = theory.accompanying_cdf_new(k, N, T, coin)
        rows.append(row)
    payload["table"] = rows
    payload["notes"] = notes
    return config, payload


def cmd_oracle(args) -> tuple[dict, dict]:
    coin = CoinSpec(args.p)
    N, T = args.N, args.T
    mode = WindowMode.parse(args.mode)
    if args.method == "enum" and N > ENUM_MAX_N:
        raise DomainError(f"enumeration limited to N <= {ENUM_MAX_N}")
    centre = None
    if T >= 1 and coin.q * N > 1:
        centre = theory.m_center(N, T, coin)
    if args.m is not None:
        ms = [args.m]
    else:
        spec = args.m_range
        if spec == "auto":
            c = centre if centre is not None else theory.m0_center(N, T, coin)
            ms = [m for m in range(c.integer_part - AUTO_HALF_WIDTH, c.integer_part + AUTO_HALF_WIDTH + 1) if m >= 1]
        else:
            ms = [m for m in range(spec[0], spec[1] + 1) if m >= 1]
    config = {
        "N": N,
        "T": T,
        "p": args.p,
        "mode": mode.value,
        "method": args.method,
        "m": ms,
        "compare": args.compare,
    }
    rows = []
    for m in ms:
        params = RunParams(T=T, m=m)
        if args.method == "enum":
            prob = brute_force_no_occurrence(N, params, coin, mode)
        else:
            prob = dp_no_window_probability(N, params, coin, mode)
        row: dict = {"m": m, "probability": prob}
        if args.compare:
            row.update(_compare_row(N, m, T, coin, prob))
        rows.append(row)
    payload = {"quantity": "P(no window of length m qualifies among X_1..X_N)", "table": rows}
    if args.compare and centre is not None:
        payload["m_center"] = _centering_dict(centre)
        payload["m0_center"] = _centering_dict(theory.m0_center(N, T, coin))
    return config, payload


def _compare_row(N: int, m: int, T: int, coin: CoinSpec, prob: float) -> dict:
    row: dict = {}
    if T >= 1 and coin.q * N > 1:
        kn = m - theory.m_center(N, T, coin).integer_part
        ko = m - theory.m0_center(N, T, coin).integer_part
        new = theory.accompanying_cdf_new(kn, N, T, coin)
        old = theory.accompanying_cdf_old(ko, N, T, coin)
        row.update({"k_new": kn, "cdf_new": new, "error_new": prob - new, "k_old": ko, "cdf_old": old, "error_old": prob - old})
    n1 = N - m + 1
    try:
        a = theory.alpha(m, T, coin, refined=(T == 2))
        if n1 >= 1 and 0 < a <= 1:
            eps = theory.default_epsilon(m, T, coin) / 10
            b = theory.cfk_sandwich(n1, m, T, coin, a, eps)
            row["sandwich"] = {"lower": b.lower, "upper": b.upper, "alpha": a, "epsilon": eps, "window_starts": n1}
    except DomainError:
        pass
    return row


def cmd_ks_report(args) -> tuple[dict, dict]:
    coin = CoinSpec(args.p)
    values = _read_values(args.input)
    config = {"input": str(args.input), "theory": args.theory, "N": args.N, "T": args.T, "p": args.p, "m": args.m}
    if args.theory == "exp":
        if args.m is None:
            raise DomainError("--m is required for the exponential limit")
        scale = theory.tau_scale(args.m, args.T, coin)
        emp = EmpiricalDistribution.from_samples([v * scale for v in values])
        rep = ks_distance(emp, theory.hitting_cdf_limit, which=Theory.EXP_LIMIT, lattice=False)
        return config, {"scale": scale, "ks": rep.to_dict()}
    if args.N is None:
        raise DomainError("--N is required for the accompanying distributions")
    N, T = args.N, args.T
    ints = [int(v) for v in values]
    if args.theory == "new":
        c = theory.m_center(N, T, coin)
        f = lambda k: theory.accompanying_cdf_new(k, N, T, coin)  # noqa: E731
        which = Theory.NEW
    else:
        c = theory.m0_center(N, T, coin)
        f = lambda k: theory.accompanying_cdf_old(k, N, T, coin)  # noqa: E731
        which = Theory.OLD
    emp = EmpiricalDistribution.from_samples([v - c.integer_part for v in ints])
    rep = ks_distance(emp, lattice_cdf(f), which=which)
    return config, {"center": _centering_dict(c), "ks": rep.to_dict()}


def _read_values(path: str) -> list[float]:
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    text = text.strip()
    if text.startswith("["):
        return [float(v) for v in json.loads(text)]
    return [float(tok) for tok in text.replace(",", " ").split()]


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contam-runs", description="Longest T-contaminated head runs: theory, exact oracles, simulation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common_out(p):
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--out", default=None, help="output path (default: stdout)")

    p = sub.add_parser("simulate-longest", help="simulate mu(N) and score both accompanying CDFs")
    p.add_argument("--N", type=_positive, required=True)
    p.add_argument("--s", type=_positive, default=2000)
    p.add_argument("--T", type=_nonneg, required=True)
    p.add_argument("--p", type=_prob, required=True)
    p.add_argument("--seed", type=_nonneg, default=DEFAULT_SEED)
    p.add_argument("--threads", type=_positive, default=None)
    common_out(p)
    p.set_defaults(func=cmd_simulate_longest)

    p = sub.add_parser("simulate-hitting", help="simulate the scaled first hitting time")
    p.add_argument("--T", type=_nonneg, required=True)
    p.add_argument("--p", type=_prob, required=True)
    p.add_argument("--m", type=_positive, required=True)
    p.add_argument("--s", type=_positive, default=2000)
    p.add_argument("--seed", type=_nonneg, default=DEFAULT_SEED)
    p.add_argument("--cap-factor", type=float, default=50.0, help="censor after this many mean lifetimes")
    p.add_argument("--refined", action="store_true", help="use the refined alpha for T=2")
    p.add_argument("--threads", type=_positive, default=None)
    common_out(p)
    p.set_defaults(func=cmd_simulate_hitting)

    p = sub.add_parser("theory", help="centerings and accompanying CDF tables")
    p.add_argument("--N", type=_positive, required=True)
    p.add_argument("--T", type=_nonneg, required=True)
    p.add_argument("--p", type=_prob, required=True)
    p.add_argument("--k", "--k-range", dest="k", type=_range, default="auto")
    common_out(p)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("oracle", help="exact window-avoidance probabilities")
    p.add_argument("--N", type=_nonneg, required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--m", type=_positive, default=None)
    g.add_argument("--m-range", type=_range, default="auto")
    p.add_argument("--T", type=_nonneg, default=1)
    p.add_argument("--p", type=_prob, default=0.5)
    p.add_argument("--mode", choices=("at_most", "exactly"), default="at_most")
    p.add_argument("--method", choices=("dp", "enum"), default="dp")
    p.add_argument("--compare", action="store_true", help="add accompanying-CDF errors and sandwich bounds")
    common_out(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("ks-report", help="Kolmogorov distance of observed values against a theory")
    p.add_argument("--input", required=True, help="file of values (JSON list or whitespace separated), '-' for stdin")
    p.add_argument("--theory", choices=("new", "old", "exp"), default="new")
    p.add_argument("--N", type=_positive, default=None)
    p.add_argument("--T", type=_nonneg, required=True)
    p.add_argument("--p", type=_prob, required=True)
    p.add_argument("--m", type=_positive, default=None)
    common_out(p)
    p.set_defaults(func=cmd_ks_report)
    return parser


_RANGE_FLAGS = ("--k", "--k-range", "--m-range")


def _join_range_values(argv: list[str]) -> list[str]:
    # "--k -5..10" would otherwise be read as an unknown option "-5..10"
    out: list[str] = []
    it = iter(argv)
    for tok in it:
        if tok in _RANGE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def run(argv: list[str] | None = None) -> dict:
    """Parse ``argv`` and return the envelope without writing it."""
    argv = sys.argv[1:] if argv is None else argv
    args = build_parser().parse_args(_join_range_values(list(argv)))
    return _execute(args)


def _execute(args) -> dict:
    t0 = time.perf_counter()
    config, payload = args.func(args)
    elapsed = time.perf_counter() - t0
    return {
        "schema": SCHEMA,
        "command": args.command,
        "config": config,
        "version": __version__,
        "timing": {"seconds": round(elapsed, 3)},
        "payload": _format_payload(payload),
    }


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    args = build_parser().parse_args(_join_range_values(list(argv)))
    try:
        env = _execute(args)
    except (ContamRunsError, ValueError) as exc:
        print(f"contam-runs {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    _emit(env, args.format, args.out)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
