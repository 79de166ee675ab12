"""Monte Carlo harness that turns a ScenarioConfig into result rows.

Each trial draws its channels from a generator seeded by (seed, trial), so
trial t sees the same channels at every sweep value and the output does not
depend on evaluation order. Infeasible trials are counted and left out of
the means.
"""

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from .config import ScenarioConfig
from .csa import csa_baseline, relay_csa_baseline
from .errors import DegenerateManifold, DegenerateNullspace, Infeasible
from .relay import RelayScenario, alternating_secrecy_max
from .robust import ErrorEllipsoid, robust_beamformer, sampled_worst_rate
from .simo import SimoScenario, design_power_min, design_rate_max

CSV_HEADER = ("sweep_value", "array_kind", "metric_kind", "mean", "std", "n", "infeasible")
ROBUST_KINDS = ("perfect", "nonrobust", "robust")
# outcomes that mean "no design exists for this draw" rather than a solver fault
TRIAL_FAILURES = (Infeasible, DegenerateManifold, DegenerateNullspace)

Trace = Optional[Callable[[str], None]]


@dataclass(frozen=True)
class ResultRow:
    sweep_value: float
    array_kind: str
    metric_kind: str
    mean_metric: float
    std_metric: float
    trial_count: int
    infeasible: int

    def __post_init__(self):
        if self.std_metric < 0:
            raise ValueError("std must be nonnegative")


def db(x: float) -> float:
    return 10.0 * math.log10(x)


def from_db(x: float) -> float:
    return 10.0 ** (x / 10.0)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for one trial, derived from (seed, trial index)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def complex_gaussian(rng: np.random.Generator, size, var: float = 1.0) -> np.ndarray:
    """Circular CN(0, var) draws: real and imaginary parts are N(0, var / 2)."""
    z = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return np.sqrt(var / 2.0) * z


def sample_channels(config: ScenarioConfig, rng: np.random.Generator) -> Union[SimoScenario, RelayScenario]:
    """Scenario for ``config`` with all channel coefficients drawn from ``rng``."""
    var = config.channel_var
    if config.network == "simo":
        h = complex_gaussian(rng, 2 + 2 * config.n_eve, var)
        n_e = config.n_eve
        return SimoScenario(
            n_d=config.n_antennas, n_e=n_e, desired=config.desired.to_doa(), jammer=config.jammer.to_doa(),
            h_sd=complex(h[0]), h_jd=complex(h[1]), h_se=h[2:2 + n_e], h_je=h[2 + n_e:],
            sigma2=config.sigma2, sigma_e2=config.sigma_e2, spacing=config.spacing)
    n = config.n_antennas
    h = complex_gaussian(rng, 5 + 2 * n, var)
    return RelayScenario(
        n_r=n, desired=config.desired.to_doa(), jammer=config.jammer.to_doa(),
        h_sr=complex(h[0]), h_jr=complex(h[1]), h_se=complex(h[2]), h_je=complex(h[3]), h_jd=complex(h[4]),
        h_rd=h[5:5 + n], h_re=h[5 + n:], p_s=from_db(config.p_s_db), p_r_max=from_db(config.p_r_max_db),
        p_j_max=from_db(config.p_j_max_db), corr_p=config.corr_p, sigma_r2=config.sigma_r2,
        sigma_d2=config.sigma_d2, sigma_e2=config.sigma_e2, spacing=config.spacing,
        ke_noise_variant=config.ke_noise_variant)


def array_kinds(config: ScenarioConfig) -> Sequence[str]:
    if config.mode == "robust":
        return ROBUST_KINDS
    return ("psa", "csa") if config.array == "both" else (config.array,)


def metric_kind(config: ScenarioConfig) -> str:
    return "total_power_db" if config.mode == "power_min" else "secrecy_rate_bits"


def _csa_direction(config: ScenarioConfig):
    return tuple(np.deg2rad(config.csa_pointing))


def _simo_metric(config: ScenarioConfig, scenario: SimoScenario, kind: str) -> float:
    if config.mode == "power_min":
        if kind == "psa":
            design = design_power_min(scenario, config.r_sec_0, config.power_rule)
        else:
            design = csa_baseline(scenario, "power_min", r_sec_0=config.r_sec_0,
                                  direction=_csa_direction(config))
        return db(design.allocation.total)
    p_max = from_db(config.p_max_db)
    if kind == "psa":
        return design_rate_max(scenario, p_max).secrecy_rate
    return csa_baseline(scenario, "rate_max", p_max=p_max, direction=_csa_direction(config)).secrecy_rate


def _relay_metric(config: ScenarioConfig, scenario: RelayScenario, kind: str, trace: Trace) -> float:
    if kind == "psa":
        design = alternating_secrecy_max(scenario, max_outer=config.max_outer,
                                         rel_tol=config.outer_tol, trace=trace)
    else:
        design = relay_csa_baseline(scenario, _csa_direction(config))
    return design.secrecy_rate


def _robust_metrics(config: ScenarioConfig, scenario: RelayScenario, rng: np.random.Generator,
                    trace: Trace) -> Dict[str, Optional[float]]:
    """Nominal rate and sampled worst cases of the nominal and robust relay matrices."""
    try:
        nominal = alternating_secrecy_max(scenario, max_outer=config.max_outer, rel_tol=config.outer_tol)
    except TRIAL_FAILURES:
        return dict.fromkeys(ROBUST_KINDS)
    ellipsoid = ErrorEllipsoid.scaled_identity(scenario.n_r, config.error_scale)
    errors = ellipsoid.sample(rng, config.robust_samples)
    out: Dict[str, Optional[float]] = {
        "perfect": nominal.secrecy_rate,
        "nonrobust": max(0.0, sampled_worst_rate(scenario, nominal.w, nominal.pointing, errors)),
    }
    try:
        design = robust_beamformer(scenario, nominal.pointing, ellipsoid, w_star=nominal.w, trace=trace)
        out["robust"] = max(0.0, sampled_worst_rate(scenario, design.w_rb, nominal.pointing, errors))
    except TRIAL_FAILURES:
        out["robust"] = None
    return out


def evaluate_trial(config: ScenarioConfig, trial: int, trace: Trace = None) -> Dict[str, Optional[float]]:
    """Metric per array kind for one channel draw; None marks an infeasible design."""
    rng = trial_rng(config.seed, trial)
    scenario = sample_channels(config, rng)
    if config.mode == "robust":
        return _robust_metrics(config, scenario, rng, trace)
    out: Dict[str, Optional[float]] = {}
    for kind in array_kinds(config):
        try:
            if config.network == "simo":
                out[kind] = _simo_metric(config, scenario, kind)
            else:
                out[kind] = _relay_metric(config, scenario, kind, trace)
        except TRIAL_FAILURES:
            out[kind] = None
    return out


def summarize(values: Sequence[float]):
    """(mean, population std) of the feasible values; NaN when there are none."""
    if len(values) == 0:
        return float("nan"), 0.0
    arr = np.asarray(values, dtype=float)
    return float(np.mean(arr)), float(np.std(arr))


def run_point(config: ScenarioConfig, sweep_value: float, trace: Trace = None) -> List[ResultRow]:
    kinds = array_kinds(config)
    values: Dict[str, List[float]] = {k: [] for k in kinds}
    for trial in range(config.trials):
        if trace is not None:
            trace(f"# sweep_value={sweep_value:g} trial={trial}")
        for kind, value in evaluate_trial(config, trial, trace).items():
            if value is not None:
                values[kind].append(value)
    rows = []
    for kind in kinds:
        mean, std = summarize(values[kind])
        n = len(values[kind])
        rows.append(ResultRow(sweep_value, kind, metric_kind(config), mean, std, n, config.trials - n))
    return rows


def run_sweep(config: ScenarioConfig, trace: Trace = None) -> List[ResultRow]:
    """One row per (sweep value, array kind), in sweep order."""
    rows: List[ResultRow] = []
    for value, point in config.points():
        rows.extend(run_point(point, value, trace))
    return rows


def _fmt(x: float) -> str:
    return repr(float(x))


def rows_to_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([_fmt(r.sweep_value), r.array_kind, r.metric_kind, _fmt(r.mean_metric),
                         _fmt(r.std_metric), r.trial_count, r.infeasible])
    return buf.getvalue()


def rows_to_gnuplot(rows: Sequence[ResultRow]) -> str:
    """One whitespace-separated block per array kind, blocks split by two blank lines."""
    out = []
    for kind in dict.fromkeys(r.array_kind for r in rows):
        out.append(f"# array_kind={kind}\n# sweep_value mean std n infeasible\n")
        for r in rows:
            if r.array_kind == kind:
                out.append(f"{_fmt(r.sweep_value)} {_fmt(r.mean_metric)} {_fmt(r.std_metric)} "
                           f"{r.trial_count} {r.infeasible}\n")
        out.append("\n\n")
    return "".join(out)


def read_csv(text: str) -> List[ResultRow]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ValueError("unexpected CSV header")
    return [ResultRow(float(r["sweep_value"]), r["array_kind"], r["metric_kind"], float(r["mean"]),
                      float(r["std"]), int(r["n"]), int(r["infeasible"])) for r in reader]
