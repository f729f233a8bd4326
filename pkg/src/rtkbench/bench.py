"""Benchmark orchestration: config parsing, NFE allocation, sweeps, CSV/SVG.

A run is a grid of (method, nfe_budget) work units.  Each unit owns an RNG
spawned from the master seed by (method index, budget index), so results are
byte-stable under any worker count; assembly is ordered by the grid, never
by completion.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .metrics import MetricsRow, marginal_accuracy, mode_mass, second_moment
from .samplers import (
    MalaSpec,
    UlaSpec,
    UldSpec,
    ddpm_run,
    default_projection_params,
    rtk_run,
)
from .schedule import FixedSchedule, RtkSchedule
from .targets import IsotropicGaussianMixture, ScoreOracle, sample_base, score

Array = np.ndarray

METHODS = ("ddpm", "ula", "uld", "mala", "mala_es")

__all__ = [
    "METHODS",
    "ExperimentConfig",
    "RunReport",
    "allocate_nfe",
    "config_from_text",
    "config_to_text",
    "emit_csv",
    "emit_plot",
    "load_config",
    "paper_preset",
    "run_experiment",
    "segment_curvature",
    "split_budget",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a benchmark run depends on, in one immutable record."""

    mixture: IsotropicGaussianMixture
    horizon: float = 6.0
    methods: tuple[str, ...] = METHODS
    nfe_budgets: tuple[int, ...] = (50, 100, 250, 500, 1000)
    n_samples: int = 2000
    master_seed: int = 0
    reference_size: int = 100_000
    bins_per_dim: int = 100
    metric_seed: int = 1_000_003
    schedule_kind: str = "fixed"
    fixed_times: tuple[float, ...] = ()
    eps: float = 0.1
    max_outer_steps: int = 64
    score_error: float = 0.0
    energy_error: float = 0.0
    error_seed: int = 0
    error_cell: float = 1e-6
    tau_multiplier: float = 1.0
    tau_cap: float = 0.4
    uld_tau_scale: float = 1.0
    uld_gamma_scale: float = 1.0
    taylor_order: int = 2
    taylor_dt: float | None = None
    record_wall: bool = True
    output_dir: str = "."

    def __post_init__(self):
        if not self.nfe_budgets:
            raise ValueError("nfe_budgets must be nonempty")
        if any(b <= a for a, b in zip(self.nfe_budgets, self.nfe_budgets[1:])):
            raise ValueError("nfe_budgets must be strictly increasing")
        if min(self.nfe_budgets) < 1:
            raise ValueError("nfe_budgets must be positive")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.schedule_kind not in ("fixed", "theory"):
            raise ValueError(f"unknown schedule kind {self.schedule_kind!r}")
        if self.schedule_kind == "fixed" and not self.fixed_times:
            raise ValueError("fixed schedule needs transition times")


@dataclass
class RunReport:
    """Config echo plus one MetricsRow and sample matrix per work unit."""

    config: ExperimentConfig
    rows: list[MetricsRow]
    samples: dict[tuple[str, int], Array]
    warnings: list[str] = field(default_factory=list)


def paper_preset() -> ExperimentConfig:
    """The 12-component ring study: d = 10, sigma^2 = 0.007, five methods.

    Times [0, 1.2, 2.4, 3.6, 4.8] over horizon 6.0 give five segments.  The
    score oracle carries a frozen worst-case bias field (score_error with one
    cell per query time), standing in for a trained network's systematic
    error; energy differences stay exact.  record_wall is off so repeated
    runs are byte-identical.
    """
    return ExperimentConfig(
        mixture=IsotropicGaussianMixture.ring(12, 10, radius=1.0, variance=0.007),
        horizon=6.0,
        methods=METHODS,
        nfe_budgets=(50, 100, 250, 500, 1000),
        n_samples=2000,
        master_seed=0,
        schedule_kind="fixed",
        fixed_times=(0.0, 1.2, 2.4, 3.6, 4.8),
        score_error=3.0,
        error_cell=1e6,
        tau_multiplier=5e10,
        tau_cap=0.4,
        uld_tau_scale=3.0,
        uld_gamma_scale=0.3,
        record_wall=False,
    )


def _diffused_variances(mix: IsotropicGaussianMixture, t: float) -> Array:
    decay = math.exp(-2.0 * t)
    return mix.variances * decay + (1.0 - decay)


def segment_curvature(mix: IsotropicGaussianMixture, t_base: float, eta: float) -> float:
    """Analytic curvature bound for one segment target: 1/min var + quad weight."""
    em2 = math.exp(-2.0 * eta)
    quad = em2 / (1.0 - em2)
    return 1.0 / float(_diffused_variances(mix, t_base).min()) + quad


def _diffused_second_moment(mix: IsotropicGaussianMixture, t: float) -> float:
    decay = math.exp(-2.0 * t)
    return decay * mix.second_moment() + (1.0 - decay) * mix.dim


def build_schedule(config: ExperimentConfig):
    """Schedule plus per-segment curvatures (None for theory schedules)."""
    mix = config.mixture
    if config.schedule_kind == "theory":
        L = 1.0 / float(mix.variances.min())
        grad0 = float(np.linalg.norm(score(mix, 0.0, np.zeros(mix.dim))))
        sched = RtkSchedule.theory(L, mix.dim, grad0, config.eps,
                                   max_outer_steps=config.max_outer_steps)
        return sched, None
    times = tuple(config.fixed_times)
    bounds = list(times) + [config.horizon]
    pairs = [(bounds[i], bounds[i + 1] - bounds[i]) for i in range(len(times))]
    curvatures = [segment_curvature(mix, t, eta) for t, eta in reversed(pairs)]
    sched = FixedSchedule(times=times, horizon=config.horizon,
                          L=max(curvatures) if curvatures else 1.0)
    return sched, curvatures


def split_budget(budget: int, segments: int) -> list[int]:
    """Equal per-segment shares, remainder to the earliest segments."""
    if segments < 1:
        raise ValueError("need at least one segment")
    if budget < segments:
        raise ValueError(
            f"budget {budget} cannot cover {segments} segments with one call each")
    base, extra = divmod(budget, segments)
    return [base + (1 if i < extra else 0) for i in range(segments)]


def allocate_nfe(budget: int, method: str, schedule, taylor_order: int = 2) -> list[int]:
    """Per-segment inner iteration counts for an RTK method under a budget.

    ULA/ULD spend one score call per step; MALA reserves one call per
    segment for the initial gradient; score-only MALA pays 2^(u-1) per
    proposal on top of that reservation.
    """
    segments = len(schedule.segments())
    shares = split_budget(budget, segments)
    if method in ("ula", "uld"):
        return shares
    if method == "mala":
        return [s - 1 for s in shares]
    if method == "mala_es":
        cost = 2 ** (taylor_order - 1)
        return [(s - 1) // cost for s in shares]
    raise ValueError(f"no segment allocation for method {method!r}")


def _practical_tau(config: ExperimentConfig, L_k: float, m2: float,
                   x0_norm: float, steps: int) -> float:
    dim = config.mixture.dim
    _, _, tau = default_projection_params(L_k, dim, m2, x0_norm,
                                          max(steps, 1), config.eps)
    return min(config.tau_multiplier * tau, config.tau_cap / L_k)


def build_specs(config: ExperimentConfig, schedule, method: str, budget: int,
                curvatures: list[float] | None):
    """Per-segment sampler specs for one RTK work unit."""
    segments = schedule.segments()
    steps = allocate_nfe(budget, method, schedule, config.taylor_order)
    warm = isinstance(schedule, FixedSchedule)
    mix = config.mixture
    specs = []
    for seg, s_k in zip(segments, steps):
        L_k = schedule.L if curvatures is None else curvatures[seg.index]
        if method in ("ula", "mala", "mala_es"):
            m2 = math.sqrt(_diffused_second_moment(mix, seg.t_base))
            x0 = math.sqrt(_diffused_second_moment(mix, seg.t_base + seg.eta))
            tau = _practical_tau(config, L_k, m2, x0, s_k)
            if method == "ula":
                specs.append(UlaSpec(steps=s_k, tau=tau))
            else:
                specs.append(MalaSpec(
                    steps=s_k, tau=tau,
                    estimator="taylor" if method == "mala_es" else "exact",
                    taylor_order=config.taylor_order,
                    taylor_dt=config.taylor_dt))
        elif method == "uld":
            tau = config.uld_tau_scale * config.eps / math.sqrt(mix.dim * L_k)
            gamma = config.uld_gamma_scale * 2.0 * math.sqrt(6.0 * L_k)
            specs.append(UldSpec(steps=s_k, tau=tau, gamma=gamma,
                                 init="warm" if warm else "gaussian"))
        else:
            raise ValueError(f"unknown method {method!r}")
    return specs


def _run_unit(config: ExperimentConfig, oracle: ScoreOracle, schedule,
              curvatures, reference: Array, method: str, budget: int,
              unit_rng: np.random.Generator):
    start = time.perf_counter()
    if method == "ddpm":
        state = ddpm_run(oracle, config.horizon, budget, config.n_samples, unit_rng)
        clamps = 0
    else:
        specs = build_specs(config, schedule, method, budget, curvatures)
        state, _ = rtk_run(oracle, schedule, specs, config.n_samples, unit_rng,
                           init_L=curvatures)
        clamps = state.noise_clamps
    wall = (time.perf_counter() - start) * 1000.0 if config.record_wall else 0.0
    x = state.positions
    mix = config.mixture
    modes = tuple(mode_mass(x, mix)) if mix.n_components > 1 else None
    row = MetricsRow(
        method=method,
        nfe=int(state.nfe.max()),
        seed=config.master_seed,
        marginal_accuracy=marginal_accuracy(x, reference, config.bins_per_dim),
        second_moment=second_moment(x),
        accept_rate=state.accept_rate(),
        wall_ms=wall,
        per_mode_mass=modes,
    )
    warn = []
    if clamps:
        warn.append(f"{method}@{budget}: clamped ULD noise covariance {clamps}x")
    if int(state.nfe.max()) > budget:
        warn.append(f"{method}@{budget}: realized NFE {int(state.nfe.max())} over budget")
    return row, x, warn


def run_experiment(config: ExperimentConfig) -> RunReport:
    """Run the full method x budget grid against one shared reference sample.

    Deterministic for a given config: each unit's RNG comes from
    SeedSequence(master_seed, spawn_key=(method_index, budget_index)), and
    the reference uses metric_seed.  RTKBENCH_WORKERS > 1 fans units out to
    a thread pool without changing any output byte.
    """
    for m in config.methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; expected one of {METHODS}")
    mix = config.mixture
    oracle = ScoreOracle(mix, score_error=config.score_error,
                         energy_error=config.energy_error,
                         error_seed=config.error_seed,
                         error_cell=config.error_cell)
    schedule, curvatures = build_schedule(config)
    reference = sample_base(mix, config.reference_size,
                            np.random.default_rng(np.random.SeedSequence(config.metric_seed)))
    units = [(mi, method, bi, budget)
             for mi, method in enumerate(config.methods)
             for bi, budget in enumerate(config.nfe_budgets)]

    def job(unit):
        mi, method, bi, budget = unit
        rng = np.random.default_rng(
            np.random.SeedSequence(config.master_seed, spawn_key=(mi, bi)))
        return _run_unit(config, oracle, schedule, curvatures, reference,
                         method, budget, rng)

    workers = int(os.environ.get("RTKBENCH_WORKERS", "1") or "1")
    if workers > 1 and len(units) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, units))
    else:
        results = [job(u) for u in units]

    report = RunReport(config, [], {})
    for (mi, method, bi, budget), (row, x, warn) in zip(units, results):
        report.rows.append(row)
        report.samples[(method, budget)] = x
        report.warnings.extend(warn)
    return report


# --- config text format -----------------------------------------------------

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_kv_text(text: str, origin: str = "<config>") -> dict[str, str]:
    """Flat `dotted.key = value` lines; # comments; errors carry line numbers."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{origin}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ValueError(f"{origin}:{lineno}: empty key")
        if key in out:
            raise ValueError(f"{origin}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _floats(value: str) -> tuple[float, ...]:
    return tuple(float(v) for v in value.split(",") if v.strip() != "")


def _ints(value: str) -> tuple[int, ...]:
    return tuple(int(v) for v in value.split(",") if v.strip() != "")


def _bool(value: str, key: str) -> bool:
    low = value.lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ValueError(f"{key}: cannot read boolean from {value!r}")


def mixture_from_mapping(kv: dict[str, str], origin: str = "<config>",
                         base_dir: str | Path = ".") -> IsotropicGaussianMixture:
    """Build the target mixture from mixture.* keys, inline or via a file."""
    if "mixture.file" in kv:
        path = Path(base_dir) / kv["mixture.file"]
        try:
            text = path.read_text()
        except OSError as exc:
            raise ValueError(f"{origin}: cannot read mixture file {path}: {exc}") from exc
        sub = parse_kv_text(text, origin=str(path))
        return mixture_from_mapping(sub, origin=str(path), base_dir=path.parent)
    kind = kv.get("mixture.kind")
    if kind is None:
        raise ValueError(f"{origin}: missing mixture.kind (or mixture.file)")
    if kind == "standard_normal":
        return IsotropicGaussianMixture.standard_normal(int(kv["mixture.dim"]))
    if kind == "ring":
        return IsotropicGaussianMixture.ring(
            int(kv.get("mixture.components", "12")),
            int(kv.get("mixture.dim", "10")),
            radius=float(kv.get("mixture.radius", "1.0")),
            variance=float(kv.get("mixture.variance", "0.007")),
        )
    if kind == "explicit":
        try:
            weights = np.array(_floats(kv["mixture.weights"]))
            variances = np.array(_floats(kv["mixture.variances"]))
            means = []
            for i in range(len(weights)):
                means.append(_floats(kv[f"mixture.means.{i}"]))
        except KeyError as exc:
            raise ValueError(f"{origin}: explicit mixture missing {exc.args[0]}") from exc
        return IsotropicGaussianMixture(weights, np.array(means), variances)
    raise ValueError(f"{origin}: unknown mixture.kind {kind!r}")


_CONFIG_KEYS = {
    "experiment.horizon": ("horizon", float),
    "experiment.methods": ("methods", lambda v: tuple(m.strip() for m in v.split(",") if m.strip())),
    "experiment.nfe_budgets": ("nfe_budgets", _ints),
    "experiment.n_samples": ("n_samples", int),
    "experiment.master_seed": ("master_seed", int),
    "experiment.reference_size": ("reference_size", int),
    "experiment.bins_per_dim": ("bins_per_dim", int),
    "experiment.metric_seed": ("metric_seed", int),
    "experiment.record_wall": ("record_wall", None),
    "experiment.output_dir": ("output_dir", str),
    "schedule.kind": ("schedule_kind", str),
    "schedule.times": ("fixed_times", _floats),
    "schedule.eps": ("eps", float),
    "schedule.max_outer_steps": ("max_outer_steps", int),
    "oracle.score_error": ("score_error", float),
    "oracle.energy_error": ("energy_error", float),
    "oracle.error_seed": ("error_seed", int),
    "oracle.error_cell": ("error_cell", float),
    "steps.tau_multiplier": ("tau_multiplier", float),
    "steps.tau_cap": ("tau_cap", float),
    "steps.uld_tau_scale": ("uld_tau_scale", float),
    "steps.uld_gamma_scale": ("uld_gamma_scale", float),
    "steps.taylor_order": ("taylor_order", int),
    "steps.taylor_dt": ("taylor_dt", float),
}


def config_from_text(text: str, origin: str = "<config>",
                     base_dir: str | Path = ".") -> ExperimentConfig:
    """Parse a flat key/value config document into an ExperimentConfig."""
    kv = parse_kv_text(text, origin=origin)
    mixture = mixture_from_mapping(kv, origin=origin, base_dir=base_dir)
    fields: dict = {"mixture": mixture}
    for key, value in kv.items():
        if key.startswith("mixture."):
            continue
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{origin}: unknown config key {key!r}")
        name, conv = _CONFIG_KEYS[key]
        if name == "record_wall":
            fields[name] = _bool(value, key)
        else:
            try:
                fields[name] = conv(value)
            except ValueError as exc:
                raise ValueError(f"{origin}: bad value for {key}: {value!r}") from exc
    return ExperimentConfig(**fields)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValueError(f"cannot read config {path}: {exc}") from exc
    return config_from_text(text, origin=str(path), base_dir=path.parent)


def config_to_text(config: ExperimentConfig) -> str:
    """Serialize a config (with an inline mixture) back to the flat format."""
    mix = config.mixture
    lines = [
        "# rtkbench experiment configuration",
        f"experiment.horizon = {config.horizon:.10g}",
        "experiment.methods = " + ",".join(config.methods),
        "experiment.nfe_budgets = " + ",".join(str(b) for b in config.nfe_budgets),
        f"experiment.n_samples = {config.n_samples}",
        f"experiment.master_seed = {config.master_seed}",
        f"experiment.reference_size = {config.reference_size}",
        f"experiment.bins_per_dim = {config.bins_per_dim}",
        f"experiment.metric_seed = {config.metric_seed}",
        f"experiment.record_wall = {'true' if config.record_wall else 'false'}",
        f"schedule.kind = {config.schedule_kind}",
    ]
    if config.schedule_kind == "fixed":
        lines.append("schedule.times = " + ",".join(f"{t:.10g}" for t in config.fixed_times))
    lines += [
        f"schedule.eps = {config.eps:.10g}",
        f"schedule.max_outer_steps = {config.max_outer_steps}",
        f"oracle.score_error = {config.score_error:.10g}",
        f"oracle.energy_error = {config.energy_error:.10g}",
        f"oracle.error_seed = {config.error_seed}",
        f"oracle.error_cell = {config.error_cell:.10g}",
        f"steps.tau_multiplier = {config.tau_multiplier:.10g}",
        f"steps.tau_cap = {config.tau_cap:.10g}",
        f"steps.uld_tau_scale = {config.uld_tau_scale:.10g}",
        f"steps.uld_gamma_scale = {config.uld_gamma_scale:.10g}",
        f"steps.taylor_order = {config.taylor_order}",
    ]
    if config.taylor_dt is not None:
        lines.append(f"steps.taylor_dt = {config.taylor_dt:.10g}")
    w = np.asarray(mix.weights)
    uniform_ring = _looks_like_ring(mix)
    if uniform_ring:
        lines += [
            "mixture.kind = ring",
            f"mixture.components = {mix.n_components}",
            f"mixture.dim = {mix.dim}",
            f"mixture.radius = {uniform_ring:.10g}",
            f"mixture.variance = {float(mix.variances[0]):.10g}",
        ]
    else:
        lines.append("mixture.kind = explicit")
        lines.append("mixture.weights = " + ",".join(f"{x:.17g}" for x in w))
        lines.append("mixture.variances = " + ",".join(f"{x:.17g}" for x in mix.variances))
        for i, mean in enumerate(mix.means):
            lines.append(f"mixture.means.{i} = " + ",".join(f"{x:.17g}" for x in mean))
    return "\n".join(lines) + "\n"


def _looks_like_ring(mix: IsotropicGaussianMixture) -> float | None:
    """Radius if the mixture reproduces IsotropicGaussianMixture.ring exactly."""
    k, d = mix.n_components, mix.dim
    if k < 2 or d < 2:
        return None
    if not np.allclose(mix.weights, 1.0 / k, rtol=0, atol=1e-15):
        return None
    if not np.all(mix.variances == mix.variances[0]):
        return None
    radius = float(np.hypot(mix.means[0, 0], mix.means[0, 1]))
    if radius <= 0:
        return None
    probe = IsotropicGaussianMixture.ring(k, d, radius=radius,
                                          variance=float(mix.variances[0]))
    return radius if np.array_equal(probe.means, mix.means) else None


# --- output ------------------------------------------------------------------


def emit_csv(report: RunReport, path: str | Path) -> Path:
    """Write one CSV row per work unit under the fixed schema."""
    path = Path(path)
    lines = [MetricsRow.CSV_HEADER] + [row.csv_row() for row in report.rows]
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc
    return path


_PLOT_COLORS = {
    "ddpm": "#7f7f7f",
    "ula": "#1f77b4",
    "uld": "#2ca02c",
    "mala": "#d62728",
    "mala_es": "#ff7f0e",
}

_SVG_W, _SVG_H = 800, 500
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 160, 30, 55


def emit_plot(report: RunReport, path: str | Path) -> Path:
    """Hand-rolled SVG: marginal accuracy vs NFE, one polyline per method."""
    series: dict[str, list[tuple[int, float]]] = {}
    for row in report.rows:
        series.setdefault(row.method, []).append((row.nfe, row.marginal_accuracy))
    for pts in series.values():
        pts.sort()
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    if xs:
        x_lo, x_hi = math.log10(min(xs)), math.log10(max(xs))
        if x_hi - x_lo < 1e-9:
            x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
        y_lo, y_hi = min(ys), max(ys)
        pad = max(0.02, 0.08 * (y_hi - y_lo))
        y_lo, y_hi = max(0.0, y_lo - pad), min(1.0, y_hi + pad)
    else:
        x_lo, x_hi, y_lo, y_hi = 1.0, 3.0, 0.5, 1.0
    plot_w = _SVG_W - _MARGIN_L - _MARGIN_R
    plot_h = _SVG_H - _MARGIN_T - _MARGIN_B

    def px(nfe: float) -> float:
        return _MARGIN_L + plot_w * (math.log10(nfe) - x_lo) / (x_hi - x_lo)

    def py(acc: float) -> float:
        return _MARGIN_T + plot_h * (1.0 - (acc - y_lo) / (y_hi - y_lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="black" stroke-width="1"/>',
    ]
    for k in range(6):
        acc = y_lo + (y_hi - y_lo) * k / 5
        y = py(acc)
        parts.append(f'<line x1="{_MARGIN_L - 4}" y1="{y:.2f}" x2="{_MARGIN_L}" '
                     f'y2="{y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{_MARGIN_L - 8}" y="{y + 4:.2f}" font-size="12" '
                     f'text-anchor="end">{acc:.3f}</text>')
    for nfe in sorted({x for x, _ in sum(series.values(), [])}):
        x = px(nfe)
        parts.append(f'<line x1="{x:.2f}" y1="{_MARGIN_T + plot_h}" x2="{x:.2f}" '
                     f'y2="{_MARGIN_T + plot_h + 4}" stroke="black"/>')
        parts.append(f'<text x="{x:.2f}" y="{_MARGIN_T + plot_h + 18}" font-size="12" '
                     f'text-anchor="middle">{nfe}</text>')
    parts.append(f'<text x="{_MARGIN_L + plot_w / 2:.2f}" y="{_SVG_H - 12}" '
                 f'font-size="14" text-anchor="middle">NFE (score calls, log scale)</text>')
    parts.append(f'<text x="18" y="{_MARGIN_T + plot_h / 2:.2f}" font-size="14" '
                 f'text-anchor="middle" transform="rotate(-90 18 '
                 f'{_MARGIN_T + plot_h / 2:.2f})">marginal accuracy</text>')
    legend_y = _MARGIN_T + 10
    for i, (method, pts) in enumerate(series.items()):
        color = _PLOT_COLORS.get(method, "#000000")
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                     f'stroke-width="2"/>')
        for x, y in pts:
            parts.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" '
                         f'fill="{color}"/>')
        ly = legend_y + 20 * i
        lx = _SVG_W - _MARGIN_R + 14
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 30}" y="{ly + 4}" font-size="13">{method}</text>')
    parts.append("</svg>")
    path = Path(path)
    try:
        path.write_text("\n".join(parts) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write SVG to {path}: {exc}") from exc
    return path
