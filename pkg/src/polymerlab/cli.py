"""Config-driven command line runner.

Every command reads one JSON config (schema below, all defaults stated) and
writes UTF-8 CSV / NDJSON / JSON / SVG files into an output directory.
Independent (beta, replica) cells run on a process pool; results are
collected in submission order, so outputs do not depend on the worker count.
Replica r of a run uses the environment seed ``split(base_seed, r)``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Callable, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import __version__
from .disorder import BernoulliPM, Gaussian, TableLaw, Uniform, log_mgf, validate_beta
from .errors import PolymerLabError
from .lattice import DEFAULT_BUDGET_MB, DEFAULT_EPS_GRID, _eps_label, run_polymer
from .rng import derive, split

WORKERS_ENV = "POLYMERLAB_WORKERS"


class ConfigError(Exception):
    """Invalid or unreadable configuration; messages carry field paths."""


# --------------------------------------------------------------------------
# configuration schema


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GaussianConfig(_Model):
    kind: Literal["gaussian"] = "gaussian"
    mean: float = 0.0
    stddev: float = Field(1.0, gt=0)

    def to_spec(self):
        return Gaussian(self.mean, self.stddev)


class BernoulliConfig(_Model):
    kind: Literal["bernoulli_pm"]
    p: float = Field(0.5, gt=0, lt=1)

    def to_spec(self):
        return BernoulliPM(self.p)


class UniformConfig(_Model):
    kind: Literal["uniform"]
    a: float = -1.0
    b: float = 1.0

    @model_validator(mode="after")
    def _order(self):
        if not self.a < self.b:
            raise ValueError("uniform law needs a < b")
        return self

    def to_spec(self):
        return Uniform(self.a, self.b)


class TableConfig(_Model):
    kind: Literal["table"]
    values: list[float]
    probabilities: list[float]

    @model_validator(mode="after")
    def _valid(self):
        self.to_spec()  # raises ValueError with the law's own message
        return self

    def to_spec(self):
        return TableLaw(tuple(self.values), tuple(self.probabilities))


DisorderConfig = Annotated[Union[GaussianConfig, BernoulliConfig, UniformConfig, TableConfig],
                           Field(discriminator="kind")]


class SeedConfig(_Model):
    base_seed: int = Field(0, ge=0, lt=2 ** 64)
    replica_count: int = Field(8, ge=1)


class OutputConfig(_Model):
    dir: str = "polymerlab_out"
    format: Literal["csv", "ndjson", "both"] = "csv"
    snapshots: bool = False


class EnergyConfig(_Model):
    trajectories: int = Field(64, ge=2)
    replicas: int = Field(64, ge=1)


class ProfilesConfig(_Model):
    fixture: Optional[Literal["q", "r"]] = "q"
    input: Optional[str] = None
    n_values: list[int] = Field(default_factory=lambda: list(range(100, 1001, 100)))
    k_max: int = Field(4, ge=1)
    stabilization_window: int = Field(3, ge=2)
    divergence_threshold: float = Field(32.0, gt=0)
    mass_floor: float = Field(0.01, ge=0, lt=1)

    @model_validator(mode="after")
    def _source(self):
        if self.input is not None:
            self.fixture = None
        if self.fixture is None and self.input is None:
            raise ValueError("set either fixture or input")
        if any(n < 1 for n in self.n_values) or not self.n_values:
            raise ValueError("n_values must be nonempty positive integers")
        return self


class MetricCheckConfig(_Model):
    cases: int = Field(1000, ge=1)
    d: int = Field(1, ge=1)
    max_atoms: int = Field(6, ge=0, le=12)
    max_parts: int = Field(3, ge=1)
    seed: int = Field(0, ge=0)
    k_top: int = Field(16, ge=1)


class FixedPointConfig(_Model):
    probes: Optional[list[int]] = None
    cost: Literal["auto", "exact", "upper"] = "auto"

    @field_validator("probes")
    @classmethod
    def _probes(cls, v):
        if v is not None:
            _check_sorted(v, "probes")
            if v[0] < 0:
                raise ValueError("probes must be nonnegative")
        return v


class PlotConfig(_Model):
    input: str
    x: str
    y: list[str] = Field(min_length=1)
    kind: Literal["line", "scatter"] = "line"
    output: Optional[str] = None
    title: Optional[str] = None
    logx: bool = False
    logy: bool = False


def _check_sorted(v: Sequence, name: str, allow_descending: bool = False) -> None:
    if not v:
        raise ValueError(f"{name} must be nonempty")
    inc = all(a < b for a, b in zip(v, v[1:]))
    dec = all(a > b for a, b in zip(v, v[1:]))
    if not (inc or (allow_descending and dec)):
        raise ValueError(f"{name} must be strictly sorted")


class ExperimentConfig(_Model):
    """Schema of the JSON config file; every field has the default shown."""

    d: int = Field(1, ge=1)
    beta: float = Field(1.0, ge=0)
    beta_grid: Optional[list[float]] = None
    disorder: DisorderConfig = Field(default_factory=GaussianConfig)
    n_steps: int = Field(100, ge=1)
    seeds: SeedConfig = Field(default_factory=SeedConfig)
    thinning: int = Field(0, ge=0)
    k_top: int = Field(16, ge=1)
    snapshot_radius: int = Field(16, ge=0)
    snapshot_floor: float = Field(0.0, ge=0, lt=1)
    eps_grid: list[float] = Field(default_factory=lambda: list(DEFAULT_EPS_GRID))
    delta_grid: list[float] = Field(default_factory=list)
    K_grid: list[int] = Field(default_factory=list)
    cesaro_checkpoints: list[int] = Field(default_factory=list)
    prune_below: float = Field(0.0, ge=0, lt=1)
    budget_mb: float = Field(DEFAULT_BUDGET_MB, gt=0)
    output: OutputConfig = Field(default_factory=OutputConfig)
    energy: Optional[EnergyConfig] = None
    profiles: ProfilesConfig = Field(default_factory=ProfilesConfig)
    metric_check: MetricCheckConfig = Field(default_factory=MetricCheckConfig)
    fixed_point: FixedPointConfig = Field(default_factory=FixedPointConfig)
    plot: Optional[PlotConfig] = None

    @field_validator("beta_grid")
    @classmethod
    def _beta_grid(cls, v):
        if v is not None:
            _check_sorted(v, "beta_grid")
            if v[0] < 0:
                raise ValueError("beta_grid entries must be nonnegative")
        return v

    @field_validator("eps_grid")
    @classmethod
    def _eps(cls, v):
        _check_sorted(v, "eps_grid", allow_descending=True)
        if not all(0 < e < 1 for e in v):
            raise ValueError("eps_grid entries must lie in (0, 1)")
        return v

    @field_validator("delta_grid")
    @classmethod
    def _delta(cls, v):
        if v:
            _check_sorted(v, "delta_grid")
            if not all(0 < x < 1 for x in v):
                raise ValueError("delta_grid entries must lie in (0, 1)")
        return v

    @field_validator("K_grid")
    @classmethod
    def _K(cls, v):
        if v:
            _check_sorted(v, "K_grid")
            if v[0] < 0:
                raise ValueError("K_grid entries must be nonnegative")
        return v

    @field_validator("cesaro_checkpoints")
    @classmethod
    def _checkpoints(cls, v):
        if v:
            _check_sorted(v, "cesaro_checkpoints")
            if v[0] < 1:
                raise ValueError("cesaro_checkpoints must be positive")
        return v

    @model_validator(mode="after")
    def _consistent(self):
        if self.beta_grid is not None and "beta" in self.model_fields_set:
            raise ValueError("set beta or beta_grid, not both")
        if bool(self.delta_grid) != bool(self.K_grid):
            raise ValueError("delta_grid and K_grid must be given together")
        if self.cesaro_checkpoints and self.cesaro_checkpoints[-1] > self.n_steps:
            raise ValueError("cesaro_checkpoints must not exceed n_steps")
        spec = self.disorder.to_spec()
        for b in self.betas:
            validate_beta(spec, b)
        return self

    @property
    def betas(self) -> list[float]:
        return list(self.beta_grid) if self.beta_grid is not None else [self.beta]

    @property
    def spec(self):
        return self.disorder.to_spec()


def load_config(path: str | os.PathLike | None) -> ExperimentConfig:
    """Parse and validate a config file (``None`` gives all defaults)."""
    if path is None:
        return ExperimentConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from None
    return parse_config(obj)


def parse_config(obj) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(obj)
    except ValidationError as e:
        lines = []
        for err in e.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "<root>"
            lines.append(f"{loc}: {err['msg']}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines)) from None
    except PolymerLabError as e:  # e.g. beta outside the moment window
        raise ConfigError(f"invalid config: {e}") from None


# --------------------------------------------------------------------------
# orchestration


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                workers = int(env)
            except ValueError:
                raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
        else:
            workers = 1
    if workers < 1:
        raise ConfigError("workers must be at least 1")
    return workers


def run_cells(fn: Callable, cells: Sequence, workers: int) -> list:
    """Map ``fn`` over cells; results come back in cell order."""
    if workers == 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=min(workers, len(cells))) as pool:
        return list(pool.map(fn, cells))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _beta_tag(beta: float) -> str:
    return f"beta={beta!r}"


def _mean_se(x: Sequence[float]) -> tuple[float, float]:
    a = np.asarray(x, dtype=np.float64)
    m = math.fsum(a) / a.size
    se = float(np.std(a, ddof=1) / math.sqrt(a.size)) if a.size > 1 else float("nan")
    return m, se


# --------------------------------------------------------------------------
# simulate


@dataclass(frozen=True)
class _Cell:
    cfg: ExperimentConfig
    beta: float
    replica: int

    @property
    def seed(self) -> int:
        return split(self.cfg.seeds.base_seed, self.replica)


def _run_cell(cell: _Cell):
    c = cell.cfg
    return run_polymer(c.d, cell.beta, c.spec, c.n_steps, cell.seed, c.thinning,
                       eps_grid=c.eps_grid, delta_grid=c.delta_grid, K_grid=c.K_grid,
                       snapshot_k_top=c.k_top, snapshot_radius=c.snapshot_radius,
                       snapshot_floor=c.snapshot_floor, prune_below=c.prune_below,
                       budget_mb=c.budget_mb)


def _simulate_cell(cell: _Cell) -> dict:
    rec = _run_cell(cell)
    out = {"seed": cell.seed, "F_n": float(rec.F[-1]), "log_Z_n": float(rec.log_Z[-1]),
           "Z_tilde": rec.Z_tilde, "max_atom_n": float(rec.max_atom[-1]),
           "msd_n": float(rec.msd[-1]), "pruned_mass": rec.pruned_mass}
    fmt = cell.cfg.output.format
    if fmt in ("csv", "both"):
        out["csv"] = rec.to_csv()
    if fmt in ("ndjson", "both"):
        out["ndjson"] = rec.to_ndjson()
    if cell.cfg.output.snapshots and rec.snapshots:
        out["snapshots"] = "".join(
            json.dumps({"step": i, "pspm": rec.snapshots[i].to_json_obj()}) + "\n"
            for i in sorted(rec.snapshots))
    return out


def cmd_simulate(cfg: ExperimentConfig, out: Path, workers: int = 1) -> list[Path]:
    """Trajectory files per (beta, replica) plus a per-beta aggregate table."""
    out.mkdir(parents=True, exist_ok=True)
    R = cfg.seeds.replica_count
    cells = [_Cell(cfg, b, r) for b in cfg.betas for r in range(R)]
    results = run_cells(_simulate_cell, cells, workers)
    written = []
    summary, agg = [], []
    for cell, res in zip(cells, results):
        stem = f"trajectory_{_beta_tag(cell.beta)}_r{cell.replica:04d}"
        if "csv" in res:
            p = out / f"{stem}.csv"
            p.write_text(res["csv"], encoding="utf-8")
            written.append(p)
        if "ndjson" in res:
            p = out / f"{stem}.ndjson"
            p.write_text(res["ndjson"], encoding="utf-8")
            written.append(p)
        if "snapshots" in res:
            p = out / f"{stem}_snapshots.ndjson"
            p.write_text(res["snapshots"], encoding="utf-8")
            written.append(p)
        summary.append([cell.beta, cell.replica, res["seed"], res["F_n"], res["log_Z_n"],
                        res["Z_tilde"], res["max_atom_n"], res["msd_n"], res["pruned_mass"]])
    for b in cfg.betas:
        rs = [r for c, r in zip(cells, results) if c.beta == b]
        F, Fse = _mean_se([r["F_n"] for r in rs])
        Z, Zse = _mean_se([r["Z_tilde"] for r in rs])
        agg.append([b, cfg.n_steps, len(rs), F, Fse, Z, Zse])
    written.append(write_csv(out / "summary.csv",
                             ["beta", "replica", "seed", "F_n", "log_Z_n", "Z_tilde",
                              "max_atom_n", "msd_n", "pruned_mass"], summary))
    written.append(write_csv(out / "aggregate.csv",
                             ["beta", "n_steps", "replicas", "mean_F_n", "stderr_F_n",
                              "mean_Z_tilde", "stderr_Z_tilde"], agg))
    if cfg.energy is not None:
        written += _energy_outputs(cfg, out)
    return written


def _energy_outputs(cfg: ExperimentConfig, out: Path) -> list[Path]:
    from .dynamics import iterate_from_point, log_Z1_reference

    written = []
    for b in cfg.betas:
        res = iterate_from_point(cfg.spec, b, cfg.d, cfg.n_steps, cfg.seeds.base_seed,
                                 trajectories=cfg.energy.trajectories,
                                 replicas=cfg.energy.replicas, prune_below=cfg.prune_below,
                                 budget_mb=cfg.budget_mb)
        # f_0 is a point mass, whose energy is E log Z_1
        ref = log_Z1_reference(cfg.spec, b, cfg.d)
        rows = [[i, e.mean, e.stderr, e.replicas, ref if i == 0 else None]
                for i, e in enumerate(res.steps)]
        written.append(write_csv(out / f"energy_{_beta_tag(b)}.csv",
                                 ["step", "mean", "stderr", "replicas", "analytic"], rows))
    return written


# --------------------------------------------------------------------------
# scan


@dataclass
class PhaseScanResult:
    """Per-beta aggregates of a phase scan."""

    beta: float
    replicas: int
    n_steps: int
    p_hat: float
    p_stderr: float
    c_beta: float
    lambda_hat: float
    lambda_stderr: float
    cesaro_max: float
    cesaro_overlap: float
    cesaro_eps_mass: dict
    cesaro_G_fraction: dict
    cesaro_favorite_mass: dict
    cesaro_max_at: dict

    def row(self) -> dict:
        r = {"beta": self.beta, "replicas": self.replicas, "n_steps": self.n_steps,
             "p_hat": self.p_hat, "p_stderr": self.p_stderr, "c_beta": self.c_beta,
             "lambda_hat": self.lambda_hat, "lambda_stderr": self.lambda_stderr,
             "cesaro_max": self.cesaro_max, "cesaro_overlap": self.cesaro_overlap}
        r.update({f"cesaro_{k}": v for k, v in self.cesaro_eps_mass.items()})
        r.update({f"cesaro_G@{k}": v for k, v in self.cesaro_G_fraction.items()})
        r.update({f"cesaro_favorite@K={k}": v for k, v in self.cesaro_favorite_mass.items()})
        r.update({f"cesaro_max@n={k}": v for k, v in self.cesaro_max_at.items()})
        return r


def _scan_cell(cell: _Cell) -> dict:
    rec = _run_cell(cell)
    c = cell.cfg
    n = c.n_steps
    out = {"F_n": float(rec.F[-1]), "max": rec.cesaro(rec.max_atom),
           "overlap": rec.cesaro(rec.overlap),
           "eps": {_eps_label(e): rec.cesaro(rec.eps_mass[:, j]) for j, e in enumerate(rec.eps_grid)},
           "G": {}, "fav": {},
           "max_at": {m: rec.cesaro(rec.max_atom, m) for m in c.cesaro_checkpoints}}
    if c.delta_grid:
        for dl in c.delta_grid:
            for K in c.K_grid:
                out["G"][f"delta={dl!r},K={K}"] = float(np.mean(rec.in_G(dl, K)[:n]))
        for j, K in enumerate(rec.K_grid):
            out["fav"][K] = rec.cesaro(rec.favorite_mass[:, j])
    return out


def crossover_bracket(results: Sequence[PhaseScanResult], z: float = 2.0) -> dict:
    """Empirical bracket for the onset of lambda_hat > 0 (not an asserted value).

    ``lower`` is the largest scanned beta whose lambda_hat is within ``z``
    standard errors of zero, ``upper`` the next scanned beta, provided every
    beta from there on is positive beyond ``z`` standard errors.
    """
    pos = [r.lambda_hat > z * (r.lambda_stderr if math.isfinite(r.lambda_stderr) else 0.0)
           for r in results]
    lower = upper = None
    for k in range(len(results)):
        if all(pos[k:]):
            upper = results[k].beta
            lower = results[k - 1].beta if k > 0 else None
            break
    return {"lower": lower, "upper": upper, "z": z,
            "note": "empirical crossover bracket from the scanned grid, with finite-n bias"}


def cmd_scan(cfg: ExperimentConfig, out: Path, workers: int = 1) -> list[Path]:
    """One row per beta of free-energy and localization aggregates."""
    out.mkdir(parents=True, exist_ok=True)
    R = cfg.seeds.replica_count
    cells = [_Cell(cfg, b, r) for b in cfg.betas for r in range(R)]
    res = run_cells(_scan_cell, cells, workers)
    results = []
    for b in cfg.betas:
        rs = [r for c, r in zip(cells, res) if c.beta == b]
        p, se = _mean_se([r["F_n"] for r in rs])
        cb = log_mgf(cfg.spec, b) if b > 0 else 0.0

        def avg(key, sub=None):
            vals = [r[key] if sub is None else r[key][sub] for r in rs]
            return math.fsum(vals) / len(vals)

        results.append(PhaseScanResult(
            beta=b, replicas=len(rs), n_steps=cfg.n_steps, p_hat=p, p_stderr=se, c_beta=cb,
            lambda_hat=cb - p, lambda_stderr=se, cesaro_max=avg("max"),
            cesaro_overlap=avg("overlap"),
            cesaro_eps_mass={k: avg("eps", k) for k in rs[0]["eps"]},
            cesaro_G_fraction={k: avg("G", k) for k in rs[0]["G"]},
            cesaro_favorite_mass={k: avg("fav", k) for k in rs[0]["fav"]},
            cesaro_max_at={k: avg("max_at", k) for k in rs[0]["max_at"]}))
    rows = [r.row() for r in results]
    header = list(rows[0].keys())
    written = [write_csv(out / "scan.csv", header, [[r[h] for h in header] for r in rows])]
    written.append(write_json(out / "scan_summary.json", {
        "crossover": crossover_bracket(results),
        "rows": [{k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                  for k, v in r.items()} for r in rows]}))
    return written


# --------------------------------------------------------------------------
# profiles


def _read_fields(path: str) -> list[dict]:
    """NDJSON of sparse fields: one object {"atoms": [[x1,...,xd, mass], ...]} per line."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read profile input {path}: {e.strerror}") from None
    seq = []
    for k, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            seq.append({tuple(int(c) for c in a[:-1]): float(a[-1]) for a in obj["atoms"]})
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, IndexError):
            raise ConfigError(f"{path}:{k}: expected {{\"atoms\": [[x1,...,xd, mass], ...]}}") from None
    if not seq:
        raise ConfigError(f"profile input {path} holds no fields")
    return seq


def cmd_profiles(cfg: ExperimentConfig, out: Path, workers: int = 1) -> list[Path]:
    """Limit profile of a bundled fixture family or an NDJSON sequence."""
    import warnings

    from .errors import Unclassified
    from .profiles import ProfileParams, extract_sequence_detailed, q_family, r_family

    pc = cfg.profiles
    out.mkdir(parents=True, exist_ok=True)
    if pc.input is not None:
        seq = _read_fields(pc.input)
    else:
        family = q_family if pc.fixture == "q" else r_family
        seq = [family(n) for n in pc.n_values]
    params = ProfileParams(k_max=pc.k_max, stabilization_window=pc.stabilization_window,
                           divergence_threshold=pc.divergence_threshold, mass_floor=pc.mass_floor)
    if len(seq) < params.stabilization_window:
        raise ConfigError("profiles: sequence is shorter than stabilization_window")
    prof = extract_sequence_detailed(seq, params)
    if prof.unclassified:
        warnings.warn(Unclassified(prof.unclassified), stacklevel=2)
    p = out / "profile.json"
    p.write_text(prof.pspm.to_json() + "\n", encoding="utf-8")
    detail = write_json(out / "profile_detail.json", {
        "references": prof.references,
        "assignment": {str(k): v for k, v in prof.assignment.items()},
        "offsets": {str(k): list(v) for k, v in prof.offsets.items()},
        "masses": {str(k): v for k, v in prof.masses.items()},
        "unclassified": [list(t) for t in prof.unclassified],
        "total": prof.pspm.total})
    return [p, detail]


# --------------------------------------------------------------------------
# metric-check


def _metric_case(args: tuple) -> list:
    from .metric import distance_exact, distance_upper, random_pspm

    mc, i = args
    rng = np.random.default_rng(derive(mc.seed, i))
    f, g, h = (random_pspm(rng, mc.d, mc.max_atoms, mc.max_parts) for _ in range(3))
    fg, gf = distance_exact(f, g), distance_exact(g, f)
    fh, gh = distance_exact(f, h), distance_exact(g, h)
    up = distance_upper(f, g, mc.k_top)
    return [i, fg, up, up - fg, f.n_atoms, g.n_atoms, fg != gf, fh > fg + gh + 1e-12]


def cmd_metric_check(cfg: ExperimentConfig, out: Path, workers: int = 1) -> list[Path]:
    """Exact vs upper-bound oracle table on random triples, plus axiom counts."""
    mc = cfg.metric_check
    out.mkdir(parents=True, exist_ok=True)
    chunk = [(mc, i) for i in range(mc.cases)]
    rows = run_cells(_metric_case, chunk, workers)
    p = write_csv(out / "metric_oracle.csv",
                  ["case_id", "d_exact", "d_upper", "gap", "n_atoms_f", "n_atoms_g"],
                  [r[:6] for r in rows])
    summary = write_json(out / "metric_check.json", {
        "cases": mc.cases,
        "symmetry_violations": sum(r[6] for r in rows),
        "triangle_violations": sum(r[7] for r in rows),
        "upper_below_exact": sum(r[3] < -1e-12 for r in rows),
        "max_gap": max(r[3] for r in rows),
        "max_distance": max(r[1] for r in rows)})
    return [p, summary]


# --------------------------------------------------------------------------
# fixed-point


def _fixed_point_cell(cell: _Cell) -> list:
    from .empirical import fixed_point_residual

    c = cell.cfg
    rec = run_polymer(c.d, cell.beta, c.spec, c.n_steps, cell.seed, 0,
                      eps_grid=c.eps_grid, snapshot_k_top=c.k_top,
                      snapshot_radius=c.snapshot_radius, snapshot_floor=c.snapshot_floor,
                      prune_below=c.prune_below, budget_mb=c.budget_mb)
    rows = fixed_point_residual(rec, seed=derive(cell.seed, 1), probes=c.fixed_point.probes,
                                cost=c.fixed_point.cost)
    return [[cell.beta, r.n, r.residual, r.flagged_upper_bound, r.seed] for r in rows]


def cmd_fixed_point(cfg: ExperimentConfig, out: Path, workers: int = 1) -> list[Path]:
    """Residual series W(mu_n', T mu_n) per replica on a geometric probe grid."""
    out.mkdir(parents=True, exist_ok=True)
    fp = cfg.fixed_point
    if fp.probes is not None and fp.probes[-1] > cfg.n_steps - 1:
        raise ConfigError("fixed_point.probes must not exceed n_steps - 1")
    cells = [_Cell(cfg, b, r) for b in cfg.betas for r in range(cfg.seeds.replica_count)]
    res = run_cells(_fixed_point_cell, cells, workers)
    written = []
    for b in cfg.betas:
        rows = [row[1:] for rs in res for row in rs if row[0] == b]
        written.append(write_csv(out / f"residual_{_beta_tag(b)}.csv",
                                 ["n", "residual", "flagged_upper_bound", "seed"], rows))
    return written


# --------------------------------------------------------------------------
# plot


def _float_or_nan(s: str) -> float:
    try:
        return float(s)
    except ValueError:
        return float("nan")


def cmd_plot(cfg: ExperimentConfig, out: Path, workers: int = 1) -> list[Path]:
    """Render CSV columns to an SVG chart; never computes anything else."""
    pc = cfg.plot
    if pc is None:
        raise ConfigError("plot: config has no plot section")
    src = Path(pc.input)
    try:
        text = src.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"plot: cannot read {src}: {e.strerror}") from None
    table = list(csv.reader(io.StringIO(text)))
    if len(table) < 2:
        raise ConfigError(f"plot: {src} has no data rows")
    header, body = table[0], table[1:]
    for col in [pc.x, *pc.y]:
        if col not in header:
            raise ConfigError(f"plot: column {col!r} not in {src} (have {header})")
    cols = {h: np.array([_float_or_nan(r[k]) if k < len(r) else math.nan for r in body])
            for k, h in enumerate(header)}

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "polymerlab"
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for col in pc.y:
        if pc.kind == "line":
            ax.plot(cols[pc.x], cols[col], label=col, linewidth=1.2)
        else:
            ax.scatter(cols[pc.x], cols[col], label=col, s=8)
    ax.set_xlabel(pc.x)
    if len(pc.y) == 1:
        ax.set_ylabel(pc.y[0])
    else:
        ax.legend()
    if pc.logx:
        ax.set_xscale("log")
    if pc.logy:
        ax.set_yscale("log")
    if pc.title:
        ax.set_title(pc.title)
    fig.tight_layout()
    out.mkdir(parents=True, exist_ok=True)
    dest = Path(pc.output) if pc.output else out / (src.stem + ".svg")
    fig.savefig(dest, format="svg", metadata={"Date": None})
    plt.close(fig)
    return [dest]


# --------------------------------------------------------------------------
# entry point

COMMANDS = {
    "simulate": cmd_simulate,
    "scan": cmd_scan,
    "profiles": cmd_profiles,
    "metric-check": cmd_metric_check,
    "fixed-point": cmd_fixed_point,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polymerlab",
                                 description="Directed polymer experiments from a JSON config.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON config file (omit for all defaults)")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--workers", type=int, default=None,
                    help=f"worker processes (default: ${WORKERS_ENV} or 1)")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        workers = resolve_workers(args.workers)
        out = Path(args.out if args.out else cfg.output.dir)
        written = COMMANDS[args.command](cfg, out, workers)
    except ConfigError as e:
        print(f"polymerlab: {e}", file=sys.stderr)
        return 2
    except (PolymerLabError, ValueError) as e:
        print(f"polymerlab: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    for p in written:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
