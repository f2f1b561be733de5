"""Monte-Carlo scenarios: error of the weighted estimate versus rollout counts.

Scenario 1 sweeps N_r with ``N_p = ratio * N_r``; scenario 2 sweeps N_r
with N_p fixed; scenario 3 sweeps N_p with N_r fixed. Each (sweep point,
repetition) draws one fresh data set that every weight schedule is fit
on, so schedules are compared on common random numbers.
"""

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass, field
import json
import math
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .bounds import BoundInputs, theorem1_bound
from .estimator import WeightSchedule, error_metrics, wls
from .exceptions import ConfigurationError, SingularGramError
from .simulate import assemble_batch, simulate_rollouts
from .systems import SystemModel, load_model

TRUE_A = [[0.6, 0.5, 0.4], [0.0, 0.4, 0.3], [0.0, 0.0, 0.3]]
TRUE_B = [[1.0, 0.5], [0.5, 1.0], [0.5, 0.5]]
AUX_A = [[0.7, 0.5, 0.4], [0.0, 0.4, 0.3], [0.0, 0.0, 0.3]]
AUX_B = [[1.1, 0.5], [0.5, 1.0], [0.5, 0.5]]

SCENARIO_DEFAULTS = {
    1: {"sweep": [100, 200, 400, 800, 1600, 3200, 4000], "ratio": 3},
    2: {"sweep": [100, 200, 400, 800, 1600, 3200, 4000], "fixed": 2400},
    3: {"sweep": [100, 400, 1600, 4000], "fixed": 50},
}
DEFAULT_SCHEDULES = (
    WeightSchedule.constant(0),
    WeightSchedule.constant(0.3),
    WeightSchedule.constant(0.6),
    WeightSchedule.constant(1),
    WeightSchedule.constant(1e10),
    WeightSchedule.decaying(1),
)


def paper_models(horizon=2):
    """The 3-state, 2-input true/auxiliary pair with unit variances."""
    true = SystemModel.lti(TRUE_A, TRUE_B, horizon=horizon)
    aux = SystemModel.lti(AUX_A, AUX_B, horizon=horizon)
    return true, aux


def derive_seed(master_seed, *keys):
    """Deterministic 63-bit seed from a master seed and integer keys."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(keys))
    return int(ss.generate_state(1, np.uint64)[0]) >> 1


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    scenario: int
    sweep_points: tuple
    schedules: tuple = DEFAULT_SCHEDULES
    repetitions: int = 10
    master_seed: int = 0
    true_model: SystemModel = None
    aux_model: SystemModel = None
    fixed_count: int = None
    aux_ratio: float = 3
    delta: float = None
    workers: int = 1

    def __post_init__(self):
        if self.scenario not in (1, 2, 3):
            raise ConfigurationError(f"scenario must be 1, 2 or 3, got {self.scenario}")
        pts = tuple(int(v) for v in self.sweep_points)
        if not pts or any(b <= a for a, b in zip(pts, pts[1:])):
            raise ConfigurationError("sweep points must be nonempty and strictly increasing")
        if pts[0] < 1:
            raise ConfigurationError("sweep points must be positive")
        object.__setattr__(self, "sweep_points", pts)
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must be >= 1")
        if self.true_model is None or self.aux_model is None:
            true, aux = paper_models()
            object.__setattr__(self, "true_model", self.true_model or true)
            object.__setattr__(self, "aux_model", self.aux_model or aux)
        fixed = self.fixed_count
        if fixed is None and self.scenario != 1:
            fixed = SCENARIO_DEFAULTS[self.scenario]["fixed"]
            object.__setattr__(self, "fixed_count", fixed)
        labels = [s.label for s in self.schedules]
        if len(set(labels)) != len(labels):
            raise ConfigurationError("weight schedule labels must be unique")

    def counts(self, point):
        """``(N_r, N_p)`` at a sweep value."""
        if self.scenario == 1:
            return point, int(round(self.aux_ratio * point))
        if self.scenario == 2:
            return point, self.fixed_count
        return self.fixed_count, point


class ScenarioRow(NamedTuple):
    sweep: int
    label: str
    err_theta_mean: float
    err_theta_std: float
    err_a_mean: float
    err_a_std: float
    err_b_mean: float
    err_b_std: float
    bound_total: float | None = None
    singular: int = 0


@dataclass
class ScenarioResult:
    rows: list = field(default_factory=list)

    def get(self, sweep, label):
        for row in self.rows:
            if row.sweep == sweep and row.label == label:
                return row
        raise KeyError((sweep, label))

    def curve(self, label, metric="err_theta_mean"):
        rows = sorted((r for r in self.rows if r.label == label), key=lambda r: r.sweep)
        return [r.sweep for r in rows], [getattr(r, metric) for r in rows]


def _run_cell(spec, point_idx, rep):
    """Errors of every schedule on one freshly drawn data set.

    Returns a list aligned with ``spec.schedules`` of ErrorMetrics, or
    ``None`` where the Gram matrix was singular.
    """
    n_true, n_aux = spec.counts(spec.sweep_points[point_idx])
    seed = derive_seed(spec.master_seed, point_idx, rep)
    true_roll = simulate_rollouts(spec.true_model, n_true, seed, system="true")
    aux_roll = simulate_rollouts(spec.aux_model, n_aux, seed, system="aux")
    batch = assemble_batch(true_roll, aux_roll)
    theta = spec.true_model.theta()
    out = []
    for schedule in spec.schedules:
        try:
            out.append(error_metrics(wls(batch, schedule), theta))
        except SingularGramError:
            out.append(None)
    return out


def _run_point(spec, point_idx):
    return [_run_cell(spec, point_idx, rep) for rep in range(spec.repetitions)]


def run_scenario(spec):
    """Run every (sweep point, repetition, schedule) and aggregate.

    Means and population standard deviations are taken over repetitions
    whose Gram matrix was invertible; ``singular`` counts the others.
    """
    idx = range(len(spec.sweep_points))
    if spec.workers and spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            per_point = list(pool.map(_run_point, [spec] * len(idx), idx))
    else:
        per_point = [_run_point(spec, i) for i in idx]

    result = ScenarioResult()
    for i, cells in zip(idx, per_point):
        point = spec.sweep_points[i]
        n_true, n_aux = spec.counts(point)
        for j, schedule in enumerate(spec.schedules):
            metrics = [rep[j] for rep in cells if rep[j] is not None]
            singular = len(cells) - len(metrics)
            if metrics:
                arr = np.array(metrics, dtype=float)
                mean, std = arr.mean(axis=0), arr.std(axis=0)
            else:
                mean = std = np.full(3, math.nan)
            bound = None
            if spec.delta is not None:
                inputs = BoundInputs.from_models(spec.true_model, spec.aux_model,
                                                 n_true, n_aux, schedule, spec.delta)
                bound = theorem1_bound(inputs).total
            result.rows.append(ScenarioRow(
                point, schedule.label, mean[0], std[0], mean[1], std[1],
                mean[2], std[2], bound, singular))
    result.rows.sort(key=lambda r: (r.sweep, r.label))
    return result


# -- trend checks --------------------------------------------------------------

FLAT_RATIO = 1.5


def _mean(result, sweep, label):
    return result.get(sweep, label).err_theta_mean


def trend_crossover(result):
    """Scenario 1: q = 1 beats q = 0 at the smallest sweep point."""
    first = min(r.sweep for r in result.rows)
    return _mean(result, first, "q=1") < _mean(result, first, "q=0")


def trend_reversal(result):
    """Scenario 1: q = 0 beats q = 1 at the largest sweep point."""
    last = max(r.sweep for r in result.rows)
    return _mean(result, last, "q=1") > _mean(result, last, "q=0")


def trend_decaying(result, label="q=1/sqrt(Nr)"):
    """Scenario 1: the decaying weight is never worse than q = 0."""
    sweeps = sorted({r.sweep for r in result.rows})
    return all(_mean(result, s, label) <= _mean(result, s, "q=0") for s in sweeps)


def trend_flat(result, label="q=1e+10", ratio=FLAT_RATIO):
    """Scenario 2: with aux data dominating, error barely moves with N_r."""
    _, curve = result.curve(label)
    return max(curve) / min(curve) < ratio


def trend_balanced(result, balanced=("q=0.3", "q=0.6", "q=1")):
    """Scenario 3: a moderate weight beats both extremes at the largest N_p."""
    last = max(r.sweep for r in result.rows)
    best = min(_mean(result, last, lbl) for lbl in balanced)
    return best < _mean(result, last, "q=0") and best < _mean(result, last, "q=1e+10")


TRENDS = {
    "crossover": (1, trend_crossover),
    "reversal": (1, trend_reversal),
    "decaying": (1, trend_decaying),
    "flat": (2, trend_flat),
    "balanced": (3, trend_balanced),
}


def seed_majority(master_seeds=range(10), repetitions=10, workers=1):
    """Run each scenario once per master seed; count seeds where each trend holds.

    Returns ``{trend name: number of seeds}``.
    """
    counts = dict.fromkeys(TRENDS, 0)
    for scenario in (1, 2, 3):
        for seed in master_seeds:
            spec = ScenarioSpec(scenario, SCENARIO_DEFAULTS[scenario]["sweep"],
                                repetitions=repetitions, master_seed=seed, workers=workers)
            result = run_scenario(spec)
            for name, (sc, check) in TRENDS.items():
                if sc == scenario:
                    counts[name] += bool(check(result))
    return counts


# -- CSV ---------------------------------------------------------------------

CSV_HEADER = ["sweep", "label", "err_theta_mean", "err_theta_std", "err_a_mean",
              "err_a_std", "err_b_mean", "err_b_std", "bound_total"]


def emit_csv(result, path):
    """Write the result table; floats use 17 significant digits."""
    if not result.rows:
        raise ValueError("result has no rows")
    fmt = "{:.17g}".format
    rows = sorted(result.rows, key=lambda r: (r.sweep, r.label))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow([r.sweep, r.label] + [fmt(v) for v in r[2:8]]
                            + ["" if r.bound_total is None else fmt(r.bound_total)])


def read_csv(path):
    """Parse a file written by :func:`emit_csv`."""
    result = ScenarioResult()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            bound = rec["bound_total"]
            result.rows.append(ScenarioRow(
                int(rec["sweep"]), rec["label"],
                *(float(rec[k]) for k in CSV_HEADER[2:8]),
                bound_total=float(bound) if bound != "" else None))
    return result


# -- configuration -----------------------------------------------------------

def parse_schedule(item):
    """Schedule from config: a number, ``{"kind": ..., ...}``, or
    ``"c/sqrt(Nr)"``."""
    if isinstance(item, WeightSchedule):
        return item
    if isinstance(item, (int, float)):
        return WeightSchedule.constant(item)
    if isinstance(item, str):
        text = item.replace(" ", "")
        if text.endswith("/sqrt(Nr)"):
            return WeightSchedule.decaying(float(text[: -len("/sqrt(Nr)")]))
        try:
            return WeightSchedule.constant(float(text))
        except ValueError:
            raise ConfigurationError(f"cannot parse weight schedule {item!r}") from None
    if isinstance(item, dict):
        kind = item.get("kind", "constant")
        if kind == "constant":
            return WeightSchedule.constant(item["q"])
        if kind == "decaying":
            return WeightSchedule.decaying(item.get("c", 1.0))
        if kind == "per_step":
            return WeightSchedule.per_step(item["q"])
    raise ConfigurationError(f"cannot parse weight schedule {item!r}")


def spec_from_config(scenario, config=None, *, seed=None, delta=None, base_dir="."):
    """Build a ScenarioSpec from a config mapping (all keys optional).

    Keys: ``true_model``/``aux_model`` (paths, relative to `base_dir`),
    ``sweep``, ``fixed``, ``ratio``, ``repetitions``, ``schedules``,
    ``seed``, ``delta``, ``workers``.
    """
    config = dict(config or {})
    defaults = SCENARIO_DEFAULTS.get(scenario)
    if defaults is None:
        raise ConfigurationError(f"scenario must be 1, 2 or 3, got {scenario}")
    base = Path(base_dir)
    try:
        true_model = load_model(base / config["true_model"]) if "true_model" in config else None
        aux_model = load_model(base / config["aux_model"]) if "aux_model" in config else None
        schedules = tuple(parse_schedule(s) for s in config.get("schedules", DEFAULT_SCHEDULES))
        return ScenarioSpec(
            scenario=scenario,
            sweep_points=config.get("sweep", defaults["sweep"]),
            schedules=schedules,
            repetitions=int(config.get("repetitions", 10)),
            master_seed=int(seed if seed is not None else config.get("seed", 0)),
            true_model=true_model,
            aux_model=aux_model,
            fixed_count=config.get("fixed", defaults.get("fixed")),
            aux_ratio=config.get("ratio", defaults.get("ratio", 3)),
            delta=delta if delta is not None else config.get("delta"),
            workers=int(config.get("workers", 1)),
        )
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigurationError(str(exc)) from exc


def load_config(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
