"""Config-driven Monte-Carlo sweeps and CSV emission.

A sweep walks one grid axis (``p``, ``n``, ``noise_variance`` or
``shift``), runs ``trials`` independent draws per grid point and reports
ID and OOD excess-risk means alongside bound and taxonomy values.

Every (grid point, trial) task owns the seed stream
``SeedSpec(master_seed, grid_index, (trial,))``, BLAS is pinned to one
thread while tasks run, and aggregation uses exactly rounded sums in
canonical order, so output bytes do not depend on ``workers``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from shiftlab.bounds import BoundConfig, variance_lower, variance_upper
from shiftlab.errors import InvalidParameterError, ShiftlabError
from shiftlab.interpolator import DEFAULT_TOL, SVDFactor
from shiftlab.risk import summarize
from shiftlab.sampling import RNG_ALGORITHM, SeedSpec, gen_labels, sample_design, sample_sphere_model
from shiftlab.spectra import DEFAULT_B, Multiplicative, Spectrum, SpectrumPair, apply_shift, rho_k, source_from_dict
from shiftlab.taxonomy import DEFAULT_BAND, DEFAULT_TOL_REL, classify_multiplicative

AXES = ("p", "n", "noise_variance", "shift")
RISK_MODES = ("expected", "sampled")


class ConfigError(ShiftlabError, ValueError):
    pass


@dataclass(frozen=True)
class ShiftConfig:
    name: str
    alpha: float
    beta: float
    k: int


@dataclass(frozen=True)
class SweepConfig:
    source: dict
    n: int
    axis: str
    values: tuple
    shifts: tuple[ShiftConfig, ...]
    trials: int
    master_seed: int = 0
    noise_variance: float = 1.0
    preset: str | None = None
    risk_mode: str = "expected"
    tol: float = DEFAULT_TOL
    b: float = DEFAULT_B
    band: float = DEFAULT_BAND
    tol_rel: float = DEFAULT_TOL_REL
    output: str | None = None
    notes: str = ""

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"axis must be one of {AXES}, got {self.axis!r}")
        if not self.values:
            raise ConfigError("grid is empty")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.risk_mode not in RISK_MODES:
            raise ConfigError(f"risk_mode must be one of {RISK_MODES}")
        if self.axis != "shift" and not self.shifts:
            raise ConfigError("at least one shift is required")
        names = [s.name for s in self.shifts]
        if len(set(names)) != len(names):
            raise ConfigError("shift names must be unique")
        if self.axis == "shift":
            for v in self.values:
                if len(v) != 2:
                    raise ConfigError("shift axis values must be [alpha, beta] pairs")

    # -- JSON ----------------------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        d["values"] = [list(v) if isinstance(v, (tuple, list)) else v for v in self.values]
        d["shifts"] = [asdict(s) for s in self.shifts]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        try:
            d = dict(d)
            d["shifts"] = tuple(ShiftConfig(**s) for s in d.get("shifts", ()))
            d["values"] = tuple(tuple(v) if isinstance(v, list) else v for v in d["values"])
            return cls(**d)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"invalid sweep config: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "SweepConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc


# --------------------------------------------------------------------------
# presets


def _log_grid(lo: int, hi: int, num: int) -> tuple[int, ...]:
    return tuple(int(v) for v in np.unique(np.round(np.geomspace(lo, hi, num)).astype(int)))


def preset(name: str) -> SweepConfig:
    """Built-in configs for the synthetic figures."""
    if name == "fig1":
        return SweepConfig(
            preset="fig1",
            source={"kind": "spiked", "k": 10, "delta": 1.0, "eps": 1e-6, "p": 1000},
            n=60,
            axis="p",
            values=_log_grid(20, 2000, 20),
            shifts=(ShiftConfig("ood", 2.0, 0.1, 10),),
            trials=100,
            notes="target spike delta~=2.0, eps~=1e-7",
        )
    if name == "fig5":
        return SweepConfig(
            preset="fig5",
            source={"kind": "spiked", "k": 70, "delta": 1.0, "eps": 0.005, "p": 4900},
            n=500,
            axis="noise_variance",
            values=(0.0, 0.5, 1.0, 2.0, 4.0),
            shifts=(
                ShiftConfig("beneficial", 1.125, 0.65, 70),
                ShiftConfig("malignant", 0.875, 1.35, 70),
            ),
            trials=25,
        )
    if name == "fig6":
        return SweepConfig(
            preset="fig6",
            source={"kind": "spiked", "k": 10, "delta": 1.0, "eps": 1e-6, "p": 1000},
            n=50,
            axis="p",
            values=_log_grid(75, 1000, 20),
            shifts=(ShiftConfig("ood", 1.5, 0.5, 10),),
            trials=100,
            notes="target spike delta~=1.5, eps~=5e-7",
        )
    if name == "fig7":
        return SweepConfig(
            preset="fig7",
            source={"kind": "power_log", "a": 1.0, "b": 2.0, "p": 2000},
            n=50,
            axis="p",
            values=_log_grid(12, 2000, 20),
            shifts=(
                ShiftConfig("head_up", 2.0, 0.1, 10),
                ShiftConfig("tail_up", 0.1, 2.0, 10),
            ),
            trials=50,
            noise_variance=2.0,
            notes="swap source for {'kind': 'power', 'a': 2} or {'kind': 'log_self'}",
        )
    raise ConfigError(f"unknown preset {name!r}; choose from fig1, fig5, fig6, fig7")


PRESETS = ("fig1", "fig5", "fig6", "fig7")


# --------------------------------------------------------------------------
# grid resolution


@dataclass(frozen=True)
class GridPoint:
    index: int
    axis_value: Any
    n: int
    p: int
    noise_variance: float
    source: Spectrum
    shifts: tuple[ShiftConfig, ...]
    targets: tuple[np.ndarray, ...] = field(repr=False)


def _default_k(cfg: SweepConfig) -> int:
    if cfg.shifts:
        return cfg.shifts[0].k
    if "k" in cfg.source:
        return int(cfg.source["k"])
    raise ConfigError("shift axis needs a k (from a shift entry or a spiked source)")


def resolve_grid(cfg: SweepConfig) -> list[GridPoint]:
    points = []
    for g, value in enumerate(cfg.values):
        n, v, shifts, p = cfg.n, cfg.noise_variance, cfg.shifts, None
        if cfg.axis == "p":
            p = int(value)
        elif cfg.axis == "n":
            n = int(value)
        elif cfg.axis == "noise_variance":
            v = float(value)
        else:
            shifts = (ShiftConfig("ood", float(value[0]), float(value[1]), _default_k(cfg)),)
        try:
            src = source_from_dict(cfg.source, p)
            targets = tuple(
                apply_shift(src, Multiplicative(s.k, s.alpha, s.beta)).target.values for s in shifts
            )
        except InvalidParameterError as exc:
            raise ConfigError(f"grid point {value!r}: {exc}") from exc
        if n < 1 or v < 0:
            raise ConfigError(f"grid point {value!r}: need n >= 1 and noise_variance >= 0")
        points.append(GridPoint(g, value, n, src.p, v, src, shifts, targets))
    return points


# --------------------------------------------------------------------------
# trials


def _run_trial(cfg: SweepConfig, gp: GridPoint, trial: int) -> np.ndarray:
    """[id_risk, id_bias, ood_risk_1, ood_bias_1, ...] for one draw."""
    seed = SeedSpec(cfg.master_seed, gp.index, (trial,))
    lam = gp.source.values
    X = sample_design(gp.n, gp.source, seed)
    theta = sample_sphere_model(gp.p, seed)
    f = SVDFactor.of(X, cfg.tol)
    if f.rank:
        fit_signal = f.solve(X @ theta)
        P = f.Vt.T / f.s
        row_sq = np.einsum("ij,ij->i", P, P)
    else:
        fit_signal = np.zeros(gp.p)
        row_sq = np.zeros(gp.p)
    resid = theta - fit_signal
    r2 = resid * resid
    if cfg.risk_mode == "sampled":
        y, _ = gen_labels(X, theta, gp.noise_variance, seed)
        err = (f.solve(y) if f.rank else np.zeros(gp.p)) - theta
        e2 = err * err

    out = []
    for w in (lam, *gp.targets):
        bias = math.fsum(w * r2)
        if cfg.risk_mode == "sampled":
            risk = math.fsum(w * e2)
        else:
            risk = bias + gp.noise_variance * math.fsum(w * row_sq)
        out.extend((risk, bias))
    return np.asarray(out)


def _near_threshold(n: int, p: int) -> bool:
    return abs(p - n) <= max(2.0, 0.1 * n)


def _point_theory(cfg: SweepConfig, gp: GridPoint, s: ShiftConfig) -> dict:
    flags = []
    nan = math.nan
    out = {"v_lower": nan, "v_upper": nan, "id_v_lower": nan, "id_v_upper": nan, "verdict": "", "regime": ""}
    try:
        pair = apply_shift(gp.source, Multiplicative(s.k, s.alpha, s.beta))
        bc = BoundConfig(gp.n, s.k, 1.0, cfg.b)
        bc.resolve_k(pair)
        out["v_lower"] = variance_lower(pair, bc)
        out["v_upper"] = variance_upper(pair, bc)
        ident = SpectrumPair.identity(gp.source)
        out["id_v_lower"] = variance_lower(ident, bc)
        out["id_v_upper"] = variance_upper(ident, bc)
        if rho_k(gp.source, s.k, gp.n) < cfg.b:
            flags.append("benign_violated")
    except (InvalidParameterError, ZeroDivisionError):
        flags.append("bounds_infeasible")
    try:
        rep = classify_multiplicative(
            gp.source, s.k, gp.n, s.alpha, s.beta, cfg.tol_rel, cfg.band, cfg.b
        )
        out["verdict"] = rep.verdict.value
        out["regime"] = rep.regime.value
    except (InvalidParameterError, ZeroDivisionError):
        flags.append("taxonomy_infeasible")
    out["flags"] = flags
    return out


def run_sweep(cfg: SweepConfig, workers: int = 1) -> "SweepTable":
    points = resolve_grid(cfg)
    tasks = [(gp, t) for gp in points for t in range(cfg.trials)]

    def one(task):
        gp, t = task
        return _run_trial(cfg, gp, t)

    with threadpool_limits(limits=1):
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                results = list(pool.map(one, tasks))
        else:
            results = [one(task) for task in tasks]

    by_point: dict[int, list[np.ndarray]] = {gp.index: [] for gp in points}
    for (gp, _), res in zip(tasks, results):
        by_point[gp.index].append(res)

    single = len(points[0].shifts) == 1
    rows = []
    for gp in points:
        R = np.vstack(by_point[gp.index])
        row: dict[str, Any] = {}
        if cfg.axis == "shift":
            row["alpha"], row["beta"] = gp.shifts[0].alpha, gp.shifts[0].beta
        else:
            row[cfg.axis] = gp.axis_value
        ids = summarize(R[:, 0])
        row["id_mean"], row["id_stderr"] = ids.mean, ids.stderr
        row["id_bias_mean"] = summarize(R[:, 1]).mean
        th0 = _point_theory(cfg, gp, gp.shifts[0])
        row["id_v_lower"], row["id_v_upper"] = th0["id_v_lower"], th0["id_v_upper"]
        flags: list[str] = []
        for j, s in enumerate(gp.shifts):
            sfx = "" if single else f"_{s.name}"
            ood = summarize(R[:, 2 + 2 * j])
            row[f"ood{sfx}_mean"], row[f"ood{sfx}_stderr"] = ood.mean, ood.stderr
            row[f"ood{sfx}_bias_mean"] = summarize(R[:, 3 + 2 * j]).mean
            th = _point_theory(cfg, gp, s)
            row[f"v_lower{sfx}"], row[f"v_upper{sfx}"] = th["v_lower"], th["v_upper"]
            row[f"verdict{sfx}"], row[f"regime{sfx}"] = th["verdict"], th["regime"]
            flags.extend(f"{fl}{sfx}" for fl in th["flags"])
        if cfg.axis != "p":
            row["p"] = gp.p
        if cfg.axis != "n":
            row["n"] = gp.n
        row["trials"] = cfg.trials
        row["near_threshold"] = int(_near_threshold(gp.n, gp.p))
        row["flags"] = ";".join(flags)
        rows.append(row)
    meta = {
        "config": cfg.to_dict(),
        "rng": RNG_ALGORITHM,
        "seed_layout": "SeedSpec(master_seed, grid_index, (trial,))",
    }
    return SweepTable(list(rows[0].keys()), rows, meta)


# --------------------------------------------------------------------------
# output


@dataclass
class SweepTable:
    columns: list[str]
    rows: list[dict]
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.asarray([r[name] for r in self.rows])

    def __len__(self) -> int:
        return len(self.rows)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def to_csv_text(table: SweepTable) -> str:
    if not table.rows:
        raise InvalidParameterError("refusing to emit an empty table")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([_fmt(r[c]) for c in table.columns])
    return buf.getvalue()


def emit_csv(table: SweepTable, path) -> Path:
    text = to_csv_text(table)
    path = Path(path)
    path.write_text(text)
    return path


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
