"""Command-line front end: ``pca``, ``solve``, ``simulate`` and ``bench``.

Each run writes one JSON result (sorted keys, so re-runs with the same
seed are byte-identical) and a CSV ledger with one row per pipeline stage.
A ``--config`` JSON file supplies defaults; explicit flags override it.
Set ``BLOCKENC_LOG`` to a logging level name for diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import hamsim, qlsa, qpca
from . import numerics as nx
from .encoding import StageRecord
from .errors import BlockEncError, ConfigError
from .stateprep import Dataset, pair_state, planted_dataset, prepare_state

log = logging.getLogger("blockenc")

COMMANDS = ("pca", "solve", "simulate", "bench")
DEFAULT_EPS = {"pca": 1e-3, "solve": 1e-2, "simulate": 1e-3, "bench": 1e-2}
LEDGER_FIELDS = ("stage", "lemma", "queries", "depth_proxy", "eps")


@dataclass
class ExperimentConfig:
    """Every parameter a run can take; ``None`` means "use the command default"."""

    command: str = "pca"
    input: str | None = None
    output: str | None = None
    ledger: str | None = None
    eps: float | None = None
    seed: int | None = None
    # pca
    r: int = 1
    method: str = "power"
    gap: float | None = None
    eta: float = 0.25
    T: int | None = None
    m: int = 32
    # solve
    path: str = "auto"
    planted_kappa: float | None = None
    definite: bool = False
    amplified: bool = False
    # simulate
    discretization: str = "central"
    direct: bool = False
    K: int = 1
    t: float = 1.0
    N: int | None = None
    psi0: str | None = None
    hseq: str | None = None
    # shared size for generated inputs
    n: int = 16
    # bench
    sweep: str | None = None
    trials: int = 4

    def validate(self) -> "ExperimentConfig":
        errs = []
        if self.command not in COMMANDS:
            errs.append(f"command: must be one of {', '.join(COMMANDS)}")
        if self.eps is None:
            self.eps = DEFAULT_EPS.get(self.command, 1e-2)
        if not 0 < self.eps < 0.5:
            errs.append(f"eps: must lie in (0, 1/2), got {self.eps}")
        if self.method not in ("power", "gd"):
            errs.append(f"method: must be power or gd, got {self.method!r}")
        if self.path not in ("psd", "general", "auto"):
            errs.append(f"path: must be psd, general or auto, got {self.path!r}")
        if self.discretization not in ("central", "multistep"):
            errs.append(f"discretization: must be central or multistep, got {self.discretization!r}")
        if self.r < 1:
            errs.append(f"r: must be ≥ 1, got {self.r}")
        if self.K < 1:
            errs.append(f"K: must be ≥ 1, got {self.K}")
        if self.t < 0:
            errs.append(f"t: must be ≥ 0, got {self.t}")
        if self.n < 2:
            errs.append(f"n: must be ≥ 2, got {self.n}")
        if not 0 < self.eta <= 0.25:
            errs.append(f"eta: must lie in (0, 1/4], got {self.eta}")
        if self.T is not None and self.T < 1:
            errs.append(f"T: must be ≥ 1, got {self.T}")
        if self.trials < 1:
            errs.append(f"trials: must be ≥ 1, got {self.trials}")
        if self.planted_kappa is not None and self.planted_kappa < 1:
            errs.append(f"planted_kappa: must be ≥ 1, got {self.planted_kappa}")
        if self.command == "bench" and not self.sweep:
            errs.append("sweep: bench needs --sweep like kappa=2,4,8")
        if self.command == "solve" and self.input is None and self.planted_kappa is None:
            errs.append("input: solve needs --input or --planted-kappa")
        if self.seed is None and self._randomized():
            errs.append("seed: required for randomized runs")
        if errs:
            raise ConfigError("; ".join(errs))
        return self

    def _randomized(self) -> bool:
        if self.command in ("pca", "bench"):
            return True
        if self.command == "solve":
            return self.input is None
        return self.input is None and self.hseq is None

    def hashed_fields(self) -> dict:
        """Parameters that determine the result (output locations excluded)."""
        d = asdict(self)
        for k in ("output", "ledger", "input", "hseq"):
            d.pop(k)
        return d


def config_hash(cfg: ExperimentConfig, input_digest: str | None) -> str:
    blob = json.dumps({"config": cfg.hashed_fields(), "input": input_digest}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


# -- I/O ---------------------------------------------------------------------------


def parse_number(cell: str) -> complex:
    """Parse ``3``, ``-1.5e-2`` or ``re+imi`` (``j`` also accepted)."""
    s = cell.strip().replace(" ", "")
    if not s:
        raise ValueError("empty cell")
    if s.endswith("i"):
        s = s[:-1] + "j"
    return complex(s)


def read_table(path: str) -> np.ndarray:
    """Numeric CSV as a 2-D array; a non-numeric first row is a header."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ConfigError(f"input: {path} has no rows")
    try:
        [parse_number(c) for c in rows[0]]
    except ValueError:
        rows = rows[1:]
    try:
        data = np.array([[parse_number(c) for c in r] for r in rows])
    except ValueError as exc:
        raise ConfigError(f"input: {path} has a non-numeric cell ({exc})") from exc
    if data.ndim != 2:
        raise ConfigError(f"input: {path} rows have unequal lengths")
    if np.all(data.imag == 0):
        return data.real
    return data


def file_digest(*paths: str | None) -> str | None:
    h = hashlib.sha256()
    seen = False
    for p in paths:
        if p:
            h.update(Path(p).read_bytes())
            seen = True
    return h.hexdigest() if seen else None


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return v if math.isfinite(v) else None
    return x


def _vec(prefix: str, v: np.ndarray) -> dict:
    v = np.asarray(v, dtype=complex)
    return {f"{prefix}_re": v.real.tolist(), f"{prefix}_im": v.imag.tolist()}


def dump_json(obj: dict) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def ledger_csv(stages) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LEDGER_FIELDS)
    for s in stages:
        w.writerow([s.stage, s.lemma, s.queries, repr(float(s.depth_proxy)), repr(float(s.eps))])
    return buf.getvalue()


def _write(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _ledger_path(cfg: ExperimentConfig) -> str | None:
    if cfg.ledger:
        return cfg.ledger
    if cfg.output and cfg.output != "-":
        return str(Path(cfg.output).with_suffix("")) + ".ledger.csv"
    return None


# -- pipelines ---------------------------------------------------------------------


def run_pca(cfg: ExperimentConfig) -> tuple[dict, tuple]:
    if cfg.input:
        X = Dataset.from_rows(read_table(cfg.input).real)
    else:
        rng = np.random.default_rng(cfg.seed)
        lam = np.concatenate([[1.0, 0.7, 0.45], rng.uniform(0.01, 0.3, max(cfg.n - 3, 0))])[: cfg.n]
        X = planted_dataset(rng, lam, max(cfg.m, cfg.n + 1))
    if cfg.method == "power":
        pcfg = qpca.PowerConfig(eps=cfg.eps, gap=cfg.gap, rng_seed=cfg.seed)
        pairs = qpca.top_r_power(X, cfg.r, pcfg)
    else:
        gcfg = qpca.GDConfig(eta=cfg.eta, T=cfg.T, eps=max(cfg.eps, 1e-6), rng_seed=cfg.seed)
        pairs = qpca.top_r_gd(X, cfg.r, gcfg)
    w, V = nx.hermitian_eig(qpca.covariance_oracle(X))
    out = []
    for j, p in enumerate(pairs):
        row = {
            "index": j,
            "value": p.value,
            "raw_value": p.raw_value,
            "eps_bound": p.eps_bound,
            "queries": int(p.ledger.queries),
            "depth_proxy": p.ledger.depth_proxy,
            "iterations": p.iterations,
            "gap": p.gap,
            "beta": p.beta,
            "gamma": p.gamma,
            "prob": p.prob,
            "converged": p.converged,
            "oracle_value": float(w[j]),
            "oracle_raw_value": float(w[j] * X.global_scale**2),
            "oracle_overlap": nx.overlap(p.vector, V[:, j]),
        }
        row.update(_vec("vector", p.vector))
        out.append(row)
    result = {"m": X.m, "n": X.n, "global_scale": X.global_scale, "method": cfg.method, "pairs": out}
    return result, pairs[-1].stages


def _read_system(path: str) -> qlsa.LinearSystem:
    T = read_table(path)
    n = T.shape[1]
    if T.shape[0] != n + 1:
        raise ConfigError(f"input: expected {n} rows of A then one row b, got {T.shape[0]} rows")
    return qlsa.LinearSystem.create(T[:n], T[n])


def run_solve(cfg: ExperimentConfig) -> tuple[dict, tuple]:
    if cfg.input:
        sys_ = _read_system(cfg.input)
    else:
        rng = np.random.default_rng(cfg.seed)
        sys_ = qlsa.planted_system(rng, cfg.n, cfg.planted_kappa, definite=cfg.definite)
    res = qlsa.solve(sys_, cfg.eps, path=cfg.path, amplified=cfg.amplified)
    x = nx.normalize(nx.inverse_oracle(sys_.A) @ sys_.b)
    result = {
        "n": sys_.n,
        "path": res.path,
        "kappa": res.kappa,
        "sparsity": sys_.sparsity,
        "ingest_scale": sys_.scale,
        "success_prob": res.success_prob,
        "oracle_success_prob": qlsa.success_probability(sys_),
        "fidelity": nx.overlap(res.state, x),
        "solution_norm": res.solution_norm,
        "eps_bound": res.eps_bound,
        "queries": int(res.ledger.queries),
        "depth_proxy": res.ledger.depth_proxy,
        "formula_cost": res.formula_cost,
        "shifted_cond": res.shifted_cond,
    }
    result.update(_vec("state", res.state))
    return result, res.stages


def _psi0(cfg: ExperimentConfig, n: int) -> np.ndarray:
    if cfg.psi0 is None:
        x = np.zeros(n, dtype=complex)
        x[0] = 1.0
        return x
    x = np.array([parse_number(c) for c in cfg.psi0.split(",")])
    if x.size != n:
        raise ConfigError(f"psi0: expected {n} entries, got {x.size}")
    return nx.normalize(x)


def _read_sequence(path: str) -> list[np.ndarray]:
    T = read_table(path)
    n = T.shape[1]
    if T.shape[0] % n:
        raise ConfigError(f"hseq: row count {T.shape[0]} is not a multiple of n = {n}")
    return [T[i:i + n] for i in range(0, T.shape[0], n)]


def run_simulate(cfg: ExperimentConfig) -> tuple[dict, tuple]:
    if cfg.hseq:
        H = _read_sequence(cfg.hseq)
        n = H[0].shape[0]
    elif cfg.input:
        H = read_table(cfg.input)
        n = H.shape[0]
    else:
        rng = np.random.default_rng(cfg.seed)
        H = nx.random_hermitian(rng, cfg.n)
        H = H / nx.spectral_norm(H)
        n = cfg.n
    p = hamsim.SimProblem(H, cfg.t, _psi0(cfg, n), cfg.eps, cfg.K)
    if cfg.direct:
        r = hamsim.simulate_direct(p)
        ref = nx.expm_oracle(p.H, p.t) @ p.psi0
        result = {
            "mode": "direct",
            "n": n,
            "t": p.t,
            "degree": r.poly.degree,
            "degree_bound": r.poly.degree_bound,
            "raw_norm": r.raw_norm,
            "eps_bound": r.eps_bound,
            "oracle_error": float(np.linalg.norm(r.state - ref)),
            "queries": int(r.ledger.queries),
        }
        result.update(_vec("state", r.state))
        return result, r.stages
    method = "time_dependent" if p.time_dependent else cfg.discretization
    tr = hamsim.simulate_via_solver(p, method, N=cfg.N)
    result = {
        "mode": method,
        "n": n,
        "t": p.t,
        "N": tr.N,
        "delta": tr.delta,
        "kappa_system": tr.kappa_system,
        "success_prob": tr.success_prob,
        "raw_norms": list(tr.raw_norms),
        "queries": int(tr.ledger.queries),
        "final_re": tr.states[-1].real.tolist(),
        "final_im": tr.states[-1].imag.tolist(),
    }
    if not p.time_dependent:
        truth = hamsim.exact_trajectory(p.H, p.t, tr.N, p.psi0)
        result["oracle_error"] = hamsim.trajectory_error(tr, truth)
    return result, tr.stages


# -- bench -------------------------------------------------------------------------


def parse_sweep(spec: str) -> tuple[str, list[float]]:
    if "=" not in spec:
        raise ConfigError(f"sweep: expected name=v1,v2,..., got {spec!r}")
    name, vals = spec.split("=", 1)
    name = name.strip()
    if name not in ("kappa", "n", "eps"):
        raise ConfigError(f"sweep: parameter must be kappa, n or eps, got {name!r}")
    try:
        values = [float(v) for v in vals.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"sweep: bad value list {vals!r}") from exc
    if not values:
        raise ConfigError("sweep: no values")
    return name, values


def bench_sweep(cfg: ExperimentConfig) -> list[dict]:
    """Measured ledger beside the constant-1 formula, per sweep point.

    Run ``i`` of a point uses seed ``seed + i``.  The ``kappa`` and ``eps``
    sweeps use amplified general-path solves; ``n`` sweeps state-preparation depth.
    """
    name, values = parse_sweep(cfg.sweep)
    rows = []
    for v in values:
        if name == "n":
            n = int(v)
            rng = np.random.default_rng(cfg.seed)
            st = prepare_state(rng.standard_normal(n) + 0.0)
            pst = pair_state(Dataset.from_rows(rng.standard_normal((n, n))))
            formula = math.log2(n)
            rows.append({
                "param": name, "value": n, "measured": st.ledger.depth_proxy,
                "pair_depth": pst.ledger.depth_proxy, "formula": formula,
                "formula_ratio": st.ledger.depth_proxy / formula,
            })
            continue
        kappa = v if name == "kappa" else (cfg.planted_kappa or 4.0)
        eps = v if name == "eps" else cfg.eps
        qs, fs = [], []
        for i in range(cfg.trials):
            rng = np.random.default_rng(cfg.seed + i)
            s = qlsa.planted_system(rng, cfg.n, kappa, definite=False)
            res = qlsa.solve_general(s, eps, amplified=True)
            qs.append(float(res.ledger.queries))
            fs.append(res.formula_cost)
        measured = float(np.mean(qs))
        formula = float(np.mean(fs))
        rows.append({
            "param": name, "value": v, "measured": measured, "pair_depth": float("nan"),
            "formula": formula, "formula_ratio": measured / formula,
        })
    # per_law: measured cost over the leading law (κ², log²(κ²/ε), or depth minus
    # log₂ n); ratio: per_law relative to the first point (a difference for n)
    for r in rows:
        if name == "kappa":
            r["per_law"] = r["measured"] / r["value"] ** 2
        elif name == "eps":
            kappa = cfg.planted_kappa or 4.0
            r["per_law"] = r["measured"] / math.log2(kappa**2 / r["value"]) ** 2
        else:
            r["per_law"] = r["measured"] - math.log2(r["value"])
    base = rows[0]["per_law"]
    for r in rows:
        r["ratio"] = r["per_law"] / base if name != "n" else r["per_law"] - base
    return rows


BENCH_FIELDS = (
    "param", "value", "measured", "pair_depth", "formula", "formula_ratio", "per_law", "ratio",
)


def bench_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_FIELDS)
    for r in rows:
        w.writerow([r["param"]] + [repr(float(r[k])) for k in BENCH_FIELDS[1:]])
    return buf.getvalue()


# -- entry point -------------------------------------------------------------------


def run(cfg: ExperimentConfig) -> dict:
    """Execute a validated config, write artifacts and return the result document."""
    cfg.validate()
    log.info("running %s", cfg.command)
    digest = file_digest(cfg.input, cfg.hseq)
    if cfg.command == "bench":
        rows = bench_sweep(cfg)
        _write(cfg.output, bench_csv(rows))
        return {"rows": rows}
    runner = {"pca": run_pca, "solve": run_solve, "simulate": run_simulate}[cfg.command]
    result, stages = runner(cfg)
    doc = {
        "command": cfg.command,
        "config": cfg.hashed_fields(),
        "config_hash": config_hash(cfg, digest),
        "input_sha256": digest,
        "versions": {"blockenc": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "ledger": [asdict(s) for s in stages],
        "result": result,
    }
    _write(cfg.output, dump_json(doc))
    lp = _ledger_path(cfg)
    if lp:
        Path(lp).write_text(ledger_csv(stages), encoding="utf-8")
    return doc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blockenc", description="Block-encoding PCA, linear solves and simulation.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file of defaults (flags override)")
    common.add_argument("--input", help="CSV input (dataset, A then b, or H)")
    common.add_argument("--output", help="result path (JSON, or CSV for bench); stdout if omitted")
    common.add_argument("--ledger", help="per-stage ledger CSV path (default: next to --output)")
    common.add_argument("--eps", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--n", type=int, help="dimension for generated inputs")
    specs = {
        "pca": [
            ("--r", dict(type=int)), ("--method", dict(choices=["power", "gd"])), ("--gap", dict(type=float)),
            ("--eta", dict(type=float)), ("--T", dict(type=int)), ("--m", dict(type=int)),
        ],
        "solve": [
            ("--path", dict(choices=["psd", "general", "auto"])), ("--planted-kappa", dict(type=float)),
            ("--definite", dict(action="store_true")), ("--amplified", dict(action="store_true")),
        ],
        "simulate": [
            ("--t", dict(type=float)), ("--discretization", dict(choices=["central", "multistep"])),
            ("--K", dict(type=int)), ("--N", dict(type=int)), ("--direct", dict(action="store_true")),
            ("--psi0", dict(help="comma-separated initial state")),
            ("--hseq", dict(help="CSV of stacked H_k blocks (time dependent)")),
        ],
        "bench": [
            ("--sweep", dict(help="kappa=..., n=... or eps=...")), ("--trials", dict(type=int)),
            ("--planted-kappa", dict(type=float)),
        ],
    }
    for name, opts in specs.items():
        p = sub.add_parser(name, parents=[common], argument_default=argparse.SUPPRESS)
        for flag, kw in opts:
            p.add_argument(flag, **kw)
    return parser


def config_from_args(argv) -> ExperimentConfig:
    ns = vars(build_parser().parse_args(argv))
    values: dict = {}
    path = ns.pop("config", None)
    if path:
        try:
            values.update(json.loads(Path(path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {path} ({exc})") from exc
    values.update(ns)
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"config: unknown field(s) {', '.join(unknown)}")
    return ExperimentConfig(**values)


def _setup_logging():
    level = os.environ.get("BLOCKENC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    try:
        cfg = config_from_args(argv)
        run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BlockEncError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0
