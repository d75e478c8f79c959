"""Command-line front end.

Subcommands: ``equilibrium``, ``speed``, ``simulate``, ``wave``,
``kpp-compare`` and ``sweep``.  Settings come from defaults, then an optional
flat ``key = value`` config file, then command-line flags (highest priority).
Failures print one JSON line to stderr and exit non-zero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from . import kpp, pde, tw
from .errors import ConfigError, EpiwaveError, MissingRequired, MuOutOfRange, RBelowOne, TypeMismatch, UnknownKey
from .model import Params, m_star_bound, min_speed, principal_eigen, tail_exponents, validate_params
from .output import M_STYLE, U_STYLE, W_STYLE, CsvTable, Series, write_csv, write_svg_plot

REQUIRED = object()


def _to_bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(s)


def _to_float_list(s: str) -> list[float]:
    items = [t for t in s.replace(" ", "").split(",") if t]
    if not items:
        raise ValueError(s)
    return [float(t) for t in items]


CONVERTERS: dict[type, Callable[[str], Any]] = {float: float, int: int, str: str, bool: _to_bool, list: _to_float_list}

_COMMON = {
    "out": (str, "."),
    "plot": (bool, True),
}
_MODEL = {"r": (float, REQUIRED), "K": (float, REQUIRED), "mu": (float, REQUIRED)}
_SIM = {
    "dx": (float, 0.1),
    "dt": (float, 0.02),
    "t_end": (float, 120.0),
    "x_min": (float, 0.0),
    "x_max": (float, 400.0),
    "x0": (float, 10.0),
    "scheme": (str, "semi_implicit"),
    "ic": (str, "heaviside"),
    "theta": (float, pde.DEFAULT_THETA),
}
_WAVE = {"a": (float, 160.0), "n_per_unit": (float, 20.0)}

SCHEMA: dict[str, dict[str, tuple[type, Any]]] = {
    "equilibrium": {**_MODEL, **_COMMON},
    "speed": {"r": (float, REQUIRED), "mu": (float, REQUIRED), "K": (float, None), **_COMMON},
    "simulate": {**_MODEL, **_SIM, **_COMMON},
    "wave": {**_MODEL, **_WAVE, **_COMMON},
    "kpp-compare": {
        "r": (float, REQUIRED),
        "mu": (float, REQUIRED),
        "K_list": (list, REQUIRED),
        "a": (float, 80.0),
        "n_per_unit": (float, 20.0),
        **_COMMON,
    },
    "sweep": {
        "r_list": (list, REQUIRED),
        "K_list": (list, REQUIRED),
        "mu_list": (list, REQUIRED),
        "mode": (str, "wave"),
        "workers": (int, None),
        **_SIM,
        **_WAVE,
        **_COMMON,
    },
}

HELP = {
    "equilibrium": "interior equilibrium (w*, m*) and the bound on m*",
    "speed": "minimal speed c*, principal eigenvalue and tail exponents",
    "simulate": "time-dependent run from front-like data; measures the front speed",
    "wave": "traveling wave by domain continuation",
    "kpp-compare": "distance between the wild-type front and a KPP wave over a list of K",
    "sweep": "simulate or wave over a parameter grid, cells run concurrently",
}


@dataclass
class RunConfig:
    command: str
    values: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    @property
    def out(self) -> Path:
        return Path(self.values["out"])

    @property
    def plot(self) -> bool:
        return bool(self.values["plot"])


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` pairs; ``#`` starts a comment, blank lines are skipped."""
    entries: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (t.strip() for t in line.split("=", 1))
            entries[key.replace("-", "_")] = value
    return entries


def _convert(command: str, key: str, text: str) -> Any:
    typ = SCHEMA[command][key][0]
    try:
        return CONVERTERS[typ](text)
    except ValueError:
        kind = {list: "comma-separated list of numbers"}.get(typ, typ.__name__)
        raise TypeMismatch(f"{key}: expected {kind}, got {text!r}", key=key) from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="epiwave", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    for name, schema in SCHEMA.items():
        sp = sub.add_parser(name, help=HELP[name])
        sp.add_argument("--config", help="flat key = value file; flags take precedence")
        for key, (typ, default) in schema.items():
            if default is REQUIRED:
                note = "required"
            elif default is None:
                note = "optional"
            else:
                note = f"default {default}"
            sp.add_argument(_flag(key), dest=key, default=None, metavar=typ.__name__.upper(), help=note)
    return parser


def parse_args_and_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    args = build_parser().parse_args(argv)
    if args.command is None:
        raise ConfigError("missing subcommand; choose one of " + ", ".join(SCHEMA))
    command = args.command
    schema = SCHEMA[command]
    merged: dict[str, Any] = {k: d for k, (_, d) in schema.items()}
    if args.config:
        for key, text in read_config_file(args.config).items():
            if key not in schema:
                raise UnknownKey(f"unknown key {key!r} for '{command}'", key=key)
            merged[key] = _convert(command, key, text)
    for key in schema:
        text = getattr(args, key)
        if text is not None:
            merged[key] = _convert(command, key, text)
    for key, value in merged.items():
        if value is REQUIRED:
            raise MissingRequired(f"missing required setting {key!r} ({_flag(key)})", key=key)
    return RunConfig(command=command, values=merged)


# experiments -------------------------------------------------------------------

def _emit(lines: dict[str, Any], stream=None) -> None:
    stream = stream or sys.stdout
    for k, v in lines.items():
        if isinstance(v, float):
            v = format(v, ".10g")
        print(f"{k} = {v}", file=stream)


def _params(cfg: RunConfig) -> Params:
    return validate_params(cfg["r"], cfg["K"], cfg["mu"])


def cmd_equilibrium(cfg: RunConfig) -> dict:
    p = _params(cfg)
    summary = {
        "w_star": p.w_star,
        "m_star": p.m_star,
        "m_star_bound": m_star_bound(p),
        "nu0": p.nu0,
        "a0": p.a0,
    }
    _emit(summary)
    return summary


def _check_speed_args(r: float, mu: float) -> None:
    if not r > 1.0:
        raise RBelowOne(f"r must satisfy r > 1, got r={r}")
    bound = min(r / 2.0, 1.0 - 1.0 / r)
    if not 0.0 <= mu < bound:
        raise MuOutOfRange(f"mu must satisfy 0 <= mu < min(r/2, 1-1/r) = {bound:.6g}, got mu={mu}")


def cmd_speed(cfg: RunConfig) -> dict:
    r, mu = cfg["r"], cfg["mu"]
    if cfg["K"] is not None:
        validate_params(r, cfg["K"], mu)
    else:
        _check_speed_args(r, mu)
    h_plus, X = principal_eigen(r, mu)
    c_star = min_speed(r, mu)
    summary = {"c_star": c_star, "h_plus": h_plus, "X1": X[0], "X2": X[1]}
    _emit(summary)
    table = CsvTable(("c", "lambda_minus", "lambda_plus"))
    for f in (1.0, 1.05, 1.1, 1.25, 1.5, 2.0):
        lm, lp = tail_exponents(c_star * f, c_star)
        table.append((c_star * f, lm, lp))
    print(f"{'c':>12} {'lambda_minus':>14} {'lambda_plus':>14}")
    for c, lm, lp in table.rows:
        print(f"{c:12.6f} {lm:14.6f} {lp:14.6f}")
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_csv(table, cfg.out / "speed_table.csv")
    return summary


def _ic(cfg: RunConfig):
    kind = cfg["ic"]
    if kind == "heaviside":
        return pde.Heaviside(x0=cfg["x0"])
    if kind == "plateau":
        return pde.EquilibriumPlateau(x0=cfg["x0"])
    raise TypeMismatch(f"ic: expected 'heaviside' or 'plateau', got {kind!r}", key="ic")


def simulate_cell(p: Params, cfg: RunConfig) -> tuple[dict, pde.SimResult]:
    grid = pde.Grid.from_interval(cfg["x_min"], cfg["x_max"], cfg["dx"])
    box = pde.BoxMonitor()
    res = pde.run(p, grid, _ic(cfg), cfg["t_end"], cfg["dt"], cfg["scheme"], observers=[box], theta=cfg["theta"])
    speed, r2 = pde.estimate_speed(res.track)
    c_star = min_speed(p.r, p.mu)
    # shapes are defined relative to the pinning level (w + m)(0) = nu0
    xs, f = pde.shifted_profile(res.state, p.nu0)
    shape = tw.classify_profiles(xs, f.w, f.m).tag
    summary = {
        "r": p.r, "K": p.K, "mu": p.mu,
        "c_star": c_star, "c_measured": speed, "rel_err": speed / c_star - 1.0, "r2": r2,
        "shape_class": shape, "box_excess": box.worst,
    }
    return summary, res


def cmd_simulate(cfg: RunConfig) -> dict:
    p = _params(cfg)
    summary, res = simulate_cell(p, cfg)
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    x = res.state.grid.x
    f = res.state.fields
    write_csv(CsvTable.from_columns(x=x, w=f.w, m=f.m), out / "profile.csv")
    write_csv(CsvTable.from_columns(t=res.track.t, x_front=res.track.x), out / "track.csv")
    write_csv(CsvTable(tuple(summary), [tuple(summary.values())]), out / "summary.csv")
    if cfg.plot:
        write_svg_plot(
            [Series("w", x, f.w, **W_STYLE), Series("m", x, f.m, **M_STYLE)],
            out / "profile.svg",
            title=f"t = {res.state.t:g}",
            xlabel="x",
        )
    _emit(summary)
    return summary


def continuation_list(a: float, a_min: float = 40.0) -> list[float]:
    """``[..., a/4, a/2, a]`` down to the first value below ``2 a_min``."""
    out = [a]
    while out[0] / 2.0 >= a_min:
        out.insert(0, out[0] / 2.0)
    return out


def wave_cell(p: Params, a: float, n_per_unit: float) -> tuple[dict, tw.WaveSolution]:
    a_list = continuation_list(a, max(40.0, 2.0 * p.a0))
    sol = tw.continue_in_domain(p, a_list, n_per_unit)[-1]
    c_star = min_speed(p.r, p.mu)
    summary = {
        "r": p.r, "K": p.K, "mu": p.mu, "a": a,
        "c": sol.c, "c_star": c_star, "rel_err": sol.c / c_star - 1.0,
        "residual": tw.residual(sol), "shape_class": tw.classify_shape(sol).tag,
    }
    return summary, sol


def cmd_wave(cfg: RunConfig) -> dict:
    p = _params(cfg)
    summary, sol = wave_cell(p, cfg["a"], cfg["n_per_unit"])
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    profile = CsvTable.from_columns(x=sol.x, w=sol.w, m=sol.m)
    profile.meta = {"c": sol.c, "a": sol.a, "residual": summary["residual"]}
    write_csv(profile, out / "wave_profile.csv")
    write_csv(CsvTable(tuple(summary), [tuple(summary.values())]), out / "wave_summary.csv")
    if cfg.plot:
        write_svg_plot(
            [Series("w", sol.x, sol.w, **W_STYLE), Series("m", sol.x, sol.m, **M_STYLE)],
            out / "wave_profile.svg",
            title=f"c = {sol.c:.6f}",
            xlabel="x",
        )
    _emit(summary)
    return summary


def cmd_kpp_compare(cfg: RunConfig) -> CsvTable:
    r, mu = cfg["r"], cfg["mu"]
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    table = CsvTable(("K", "mu", "c", "beta", "beta_clamped", "level", "sup_err_left", "sup_err_right", "sup_err_total"))
    for K in cfg["K_list"]:
        p = validate_params(r, K, mu)
        _, sol = wave_cell(p, cfg["a"], cfg["n_per_unit"])
        rep = kpp.compare_to_kpp(sol.x, sol.w, p, sol.c)
        table.append((K, mu, sol.c, rep.beta, rep.beta_clamped, rep.level,
                      rep.sup_err_left, rep.sup_err_right, rep.sup_err_total))
        if cfg.plot:
            sel = (sol.x - rep.shift_w >= -30.0) & (sol.x - rep.shift_w <= 20.0)
            xs = sol.x[sel] - rep.shift_w
            write_svg_plot(
                [
                    Series("w", xs, sol.w[sel], **W_STYLE),
                    Series("m", xs, sol.m[sel], **M_STYLE),
                    Series("u", rep.x, rep.u, **U_STYLE),
                ],
                out / f"kpp_K{format(K, 'g')}.svg",
                title=f"K = {format(K, 'g')}",
                xlabel="x",
            )
    write_csv(table, out / "kpp_compare.csv")
    print(f"{'K':>8} {'beta':>8} {'sup_err_left':>14} {'sup_err_right':>14} {'sup_err_total':>14}")
    for row in table.rows:
        K, _, _, beta, _, _, left, right, total = row
        print(f"{K:8g} {beta:8.5f} {left:14.6e} {right:14.6e} {total:14.6e}")
    return table


def worker_count(requested: Optional[int] = None) -> int:
    env = os.environ.get("EPIWAVE_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise TypeMismatch(f"EPIWAVE_THREADS: expected int, got {env!r}", key="EPIWAVE_THREADS") from None
    else:
        n = requested or os.cpu_count() or 1
    return max(1, n)


SWEEP_HEADER = ("r", "K", "mu", "c_star", "c_measured", "shape_class")


def cmd_sweep(cfg: RunConfig) -> CsvTable:
    mode = cfg["mode"]
    if mode not in ("simulate", "wave"):
        raise TypeMismatch(f"mode: expected 'simulate' or 'wave', got {mode!r}", key="mode")
    cells = [(r, K, mu) for r in cfg["r_list"] for K in cfg["K_list"] for mu in cfg["mu_list"]]

    def run_cell(cell):
        r, K, mu = cell
        try:
            p = validate_params(r, K, mu)
            if mode == "simulate":
                s, _ = simulate_cell(p, cfg)
                c = s["c_measured"]
            else:
                s, _ = wave_cell(p, cfg["a"], cfg["n_per_unit"])
                c = s["c"]
            return (r, K, mu, s["c_star"], c, s["shape_class"]), None
        except EpiwaveError as exc:
            return None, (cell, exc)

    with ThreadPoolExecutor(max_workers=worker_count(cfg["workers"])) as pool:
        results = list(pool.map(run_cell, cells))
    table = CsvTable(SWEEP_HEADER)
    failures = []
    for row, err in results:
        if row is not None:
            table.append(row)
        else:
            failures.append(err)
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    write_csv(table, out / "sweep.csv")
    for row in table.rows:
        print(",".join(format(v, ".10g") if isinstance(v, float) else str(v) for v in row))
    if failures:
        (r, K, mu), exc = failures[0]
        raise SweepFailed(f"{len(failures)} of {len(cells)} cells failed; first at (r={r}, K={K}, mu={mu}): "
                          f"{type(exc).__name__}: {exc}")
    return table


class SweepFailed(EpiwaveError):
    pass


COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "speed": cmd_speed,
    "simulate": cmd_simulate,
    "wave": cmd_wave,
    "kpp-compare": cmd_kpp_compare,
    "sweep": cmd_sweep,
}


def error_line(exc: BaseException) -> str:
    return json.dumps(
        {"status": "error", "error": type(exc).__name__, "key": getattr(exc, "key", None), "message": str(exc)},
        sort_keys=True,
    )


def run_experiment(cfg: RunConfig) -> int:
    try:
        COMMANDS[cfg.command](cfg)
    except (EpiwaveError, OSError) as exc:
        print(error_line(exc), file=sys.stderr)
        return 1
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cfg = parse_args_and_config(argv)
    except (ConfigError, OSError) as exc:
        print(error_line(exc), file=sys.stderr)
        return 2
    return run_experiment(cfg)


if __name__ == "__main__":
    sys.exit(main())
