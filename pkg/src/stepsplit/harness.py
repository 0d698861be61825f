"""Command-line front end: ``simulate``, ``bounds`` and ``selftest``.

Exit status is 0 on success, 1 for configuration errors and 2 when a selftest
property fails.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, bounds
from .adversary import make_attack
from .protocol import SessionConfig, SessionStats, run_session_detailed
from .qcore import CODES
from .selftest import run_selftest

log = logging.getLogger("stepsplit")

EXIT_OK, EXIT_CONFIG, EXIT_SELFTEST = 0, 1, 2
SIG_DIGITS = 9


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: Optional[int] = None
    attack: str = "none"
    attack_basis: str = "Bz"
    attack_op: str = "U11"
    attack_p: float = 0.5
    attack_fraction: float = 1.0
    rounds: int = 1000
    message_length: Optional[int] = None
    reps: int = 1
    check_prob: float = 0.5
    basis_prob: float = 0.5
    receipt: bool = True
    auth_fraction: float = 0.1
    auth_threshold: float = 0.0
    abort_threshold: int = 1
    loss: float = 0.0
    depolarize: float = 0.0
    out: Optional[str] = None
    format: str = "json"

    def validate(self) -> None:
        if self.seed is None:
            raise ConfigError("a seed is required (--seed or 'seed' in the config file)")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        if self.format not in ("json", "csv"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.message_length is not None and self.message_length < 1:
            raise ConfigError("message_length must be positive")
        try:
            self.session_config(0)
            self.make_attack()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def session_config(self, seed: int) -> SessionConfig:
        return SessionConfig(
            rounds=self.rounds,
            check_probability=self.check_prob,
            basis_probability=self.basis_prob,
            receipt_enabled=self.receipt,
            auth_fraction=self.auth_fraction,
            auth_threshold=self.auth_threshold,
            abort_threshold=self.abort_threshold,
            loss=self.loss,
            depolarize=self.depolarize,
            seed=seed,
        )

    def make_attack(self):
        return make_attack(self.attack, basis=self.attack_basis, op=self.attack_op,
                           p=self.attack_p, fraction=self.attack_fraction)

    def resolved(self) -> dict:
        """Config entries that influence the report body."""
        out = asdict(self)
        out.pop("out")
        out.pop("format")
        return out


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value):
    kind = _FIELD_TYPES[key]
    if value is None:
        return None
    if "bool" in kind:
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected on/off, got {value!r}")
    try:
        if "int" in kind:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if "float" in kind:
            return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: cannot parse {value!r}") from exc
    return str(value)


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines (``#`` comments) or a JSON object."""
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            raw = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from exc
    else:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            raw[key] = value
    out = {}
    for key, value in raw.items():
        norm = key.replace("-", "_")
        if norm not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        out[norm] = _coerce(norm, value)
    return out


def build_run_config(path: Optional[str], overrides: dict) -> RunConfig:
    values = {}
    if path:
        try:
            values.update(parse_config_text(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for key, value in overrides.items():
        if value is not None:
            values[key] = _coerce(key, value)
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


# --------------------------------------------------------------------------
# simulation and aggregation
# --------------------------------------------------------------------------


def session_streams(seed: int, index: int) -> tuple[np.random.Generator, np.random.Generator]:
    """(message stream, protocol stream) for session ``index``.

    Both derive from ``SeedSequence(seed, spawn_key=(index, k))`` so sessions
    are independent and their results do not depend on execution order.
    """
    def stream(k: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index, k)))

    return stream(0), stream(1)


def _sig(x):
    if x is None:
        return None
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return None
    return float(f"{x:.{SIG_DIGITS}g}")


def _mean_se(values) -> dict:
    vals = np.array([v for v in values if v is not None and not math.isnan(v)], dtype=float)
    if vals.size == 0:
        return {"mean": None, "stderr": None, "n": 0}
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else None
    return {"mean": _sig(vals.mean()), "stderr": _sig(se), "n": int(vals.size)}


_PER_SESSION = (
    "bob_decode_accuracy",
    "eve_decode_accuracy",
    "eve_accuracy_all_rounds",
    "empirical_detection_rate",
)


def simulate(cfg: RunConfig) -> dict:
    attack = cfg.make_attack()
    per_session, totals = [], SessionStats()
    gammas, d_exacts = [], []
    n_msg = cfg.message_length or cfg.rounds
    for i in range(cfg.reps):
        msg_rng, rng = session_streams(cfg.seed, i)
        message = [CODES[k] for k in msg_rng.integers(4, size=n_msg)]
        result = run_session_detailed(cfg.session_config(cfg.seed), attack, message, rng)
        stats = result.stats
        totals = totals + stats
        gammas.extend(r.gamma for r in result.records if r.gamma is not None)
        d_exacts.extend(r.d_exact for r in result.records if r.d_exact is not None)
        row = {"session": i}
        row.update({k: _sig(v) for k, v in stats.summary().items()})
        per_session.append(row)
        log.debug("session %d: %s", i, row)

    summary = {name: _mean_se([r.get(name) for r in per_session]) for name in _PER_SESSION}
    summary["aborted"] = _mean_se([float(r["aborted_sessions"]) for r in per_session])
    summary["auth_failed"] = _mean_se([float(r["auth_failed_sessions"]) for r in per_session])

    d_emp = totals.empirical_detection_rate
    n_chk = totals.check_rounds
    gamma_mean = float(np.mean(gammas)) if gammas else float("nan")
    comparison = {
        "check_rounds": n_chk,
        "coincidences": totals.coincidences,
        "empirical_d": _sig(d_emp),
        "empirical_d_stderr": _sig(math.sqrt(d_emp * (1 - d_emp) / n_chk)) if n_chk else None,
        "gamma_mean": _sig(gamma_mean),
        "d_lower": _sig(gamma_mean / 2) if gammas else None,
        "d_exact_mean": _sig(np.mean(d_exacts)) if d_exacts else None,
        "s_max_bits": _sig(bounds.entropy_upper_bound(min(max(gamma_mean, 0.0), 1.0))) if gammas else None,
    }
    resolved = cfg.resolved()
    return {
        "provenance": {
            "seed": cfg.seed,
            "config_hash": config_hash(resolved),
            "version": __version__,
        },
        "config": resolved,
        "attack": attack.describe(),
        "totals": {k: _sig(v) for k, v in totals.summary().items()},
        "summary": summary,
        "bound_comparison": comparison,
        "sessions": per_session,
    }


def config_hash(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# --------------------------------------------------------------------------
# report I/O
# --------------------------------------------------------------------------


def _flatten(obj, prefix="") -> list[tuple[str, object]]:
    if isinstance(obj, dict):
        out = []
        for k, v in obj.items():
            out.extend(_flatten(v, f"{prefix}{k}."))
        return out
    if isinstance(obj, list):
        out = []
        for i, v in enumerate(obj):
            out.extend(_flatten(v, f"{prefix}{i}."))
        return out
    return [(prefix[:-1], obj)]


def _encode_scalar(v) -> str:
    return json.dumps(v)


def report_to_text(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for key, value in _flatten(report):
        w.writerow([key, _encode_scalar(value)])
    return buf.getvalue()


def _unflatten(pairs: list[tuple[str, object]]):
    root: dict = {}
    for key, value in pairs:
        parts = key.split(".")
        node = root
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value

    def fix(node):
        if not isinstance(node, dict):
            return node
        if node and all(k.isdigit() for k in node):
            return [fix(node[str(i)]) for i in range(len(node))]
        return {k: fix(v) for k, v in node.items()}

    return fix(root)


def read_report(path_or_text: str, fmt: Optional[str] = None) -> dict:
    """Parse a report written by :func:`report_to_text` (path or raw text)."""
    text = path_or_text
    p = Path(path_or_text) if "\n" not in path_or_text else None
    if p is not None and p.exists():
        text = p.read_text()
        fmt = fmt or ("csv" if p.suffix == ".csv" else "json")
    fmt = fmt or ("json" if text.lstrip().startswith("{") else "csv")
    if fmt == "json":
        return json.loads(text)
    rows = list(csv.reader(io.StringIO(text)))
    return _unflatten([(k, json.loads(v)) for k, v in rows[1:]])


def bounds_csv(rows: list[bounds.GammaPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["gamma", "s_max_bits", "d_lower", "d_exact_depolarizing"])
    for r in rows:
        w.writerow([f"{r.gamma:.{SIG_DIGITS}g}", f"{r.s_max_bits:.{SIG_DIGITS}g}",
                    f"{r.d_lower:.{SIG_DIGITS}g}", f"{r.d_exact:.{SIG_DIGITS}g}"])
    return buf.getvalue()


def read_bounds_csv(text: str) -> list[dict]:
    return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(io.StringIO(text))]


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# CLI
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stepsplit",
        description="Step-split EPR secure direct communication simulator.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser(
        "simulate",
        help="run seeded protocol sessions and write an aggregate report",
        description=(
            "Run independent sessions and aggregate them. With channel noise "
            "(--depolarize) honest rounds also coincide, so raise --abort-threshold "
            "(0 never aborts) when simulating noisy channels."
        ),
    )
    sim.add_argument("--config", help="key = value file or JSON object")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--attack", choices=["none", "intercept_resend_bell", "second_qubit_measure",
                                          "second_qubit_unitary", "delay_loss_hiding",
                                          "first_qubit_depolarize"])
    sim.add_argument("--attack-basis", choices=["Bz", "Bx"])
    sim.add_argument("--attack-op", choices=["U01", "U10", "U11"])
    sim.add_argument("--attack-p", type=float, help="FirstQubitDepolarize strength")
    sim.add_argument("--attack-fraction", type=float, help="share of rounds DelayLossHiding targets")
    sim.add_argument("--rounds", type=int, help="EPR pairs per session (budget)")
    sim.add_argument("--message-length", type=int, help="codes per message (default: rounds)")
    sim.add_argument("--reps", type=int, help="independent sessions")
    sim.add_argument("--check-prob", type=float)
    sim.add_argument("--basis-prob", type=float, help="probability of Bz in check rounds")
    sim.add_argument("--receipt", choices=["on", "off"])
    sim.add_argument("--auth-fraction", type=float)
    sim.add_argument("--auth-threshold", type=float)
    sim.add_argument("--abort-threshold", type=int, help="coincidences that stop a session; 0 = never")
    sim.add_argument("--loss", type=float)
    sim.add_argument("--depolarize", type=float)
    sim.add_argument("--out")
    sim.add_argument("--format", choices=["csv", "json"])

    bnd = sub.add_parser("bounds", help="tabulate the entropy bound and detection probabilities")
    bnd.add_argument("--gamma-grid", default="0:1:0.25", help="start:stop:step, stop inclusive")
    bnd.add_argument("--out")

    sub.add_parser("selftest", help="check the core quantum identities and bounds")
    return parser


_OVERRIDES = ("seed", "attack", "attack_basis", "attack_op", "attack_p", "attack_fraction",
              "rounds", "message_length", "reps", "check_prob", "basis_prob", "receipt",
              "auth_fraction", "auth_threshold", "abort_threshold", "loss", "depolarize",
              "out", "format")


def cmd_simulate(args) -> int:
    overrides = {k: getattr(args, k) for k in _OVERRIDES}
    try:
        cfg = build_run_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = simulate(cfg)
    _emit(report_to_text(report, cfg.format), cfg.out)
    return EXIT_OK


def cmd_bounds(args) -> int:
    try:
        grid = bounds.parse_grid(args.gamma_grid)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(bounds_csv(bounds.bound_sweep(grid)), args.out)
    return EXIT_OK


def cmd_selftest(args=None, **kwargs) -> int:
    checks = run_selftest(**kwargs)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_SELFTEST


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"simulate": cmd_simulate, "bounds": cmd_bounds, "selftest": cmd_selftest}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
