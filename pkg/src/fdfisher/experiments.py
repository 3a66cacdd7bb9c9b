"""Canned verification experiments, report checking and persistence."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .functionals import fisher_J
from .grids import Field, Grid
from .oracles import (
    CounterexampleResult,
    certificate_field,
    certificate_grid,
    counterexample_search,
    grid_djdt,
    landau_coefficients,
    landau_counterexample_search,
    model_counterexample_search,
)
from .profiles import FDProfileSpec, QuantumParams, fd_equilibrium, fd_profile, mobility
from .solvers import ClipLedger, Flow, TrajectoryLog, periodic_wave, run_flow

THEOREMS = (
    "thm-heat",
    "thm-fp-i",
    "thm-fp-ii",
    "prop-model-i",
    "prop-model-ii",
    "thm-landau-i",
    "thm-landau-ii",
    "lemma-est",
)
SLACK = 0.02
FIT_FLOOR = 1e-12
CSV_COLUMNS = (
    "t", "mass", "entropy_E", "free_energy_H", "fisher_I", "fisher_J",
    "djdt_oracle", "F_inf", "clamp_count", "clip_mass",
)
# relative tolerance between quadrature and grid certificates
CERTIFICATE_RTOL = 0.25


# -- reports -----------------------------------------------------------------------


@dataclass
class Check:
    """One inequality ``lhs <= rhs`` (``lhs < rhs`` when strict)."""

    name: str
    lhs: float
    rhs: float
    strict: bool = False
    t: float | None = None

    @property
    def ok(self) -> bool:
        if not (math.isfinite(self.lhs) and math.isfinite(self.rhs)):
            return False
        return bool(self.lhs < self.rhs if self.strict else self.lhs <= self.rhs)

    def as_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "strict": self.strict,
                "t": self.t, "ok": self.ok}


@dataclass
class VerificationReport:
    theorem: str
    checks: list = dc_field(default_factory=list)
    fitted_rate: float = math.nan
    bound_rate: float = math.nan
    slack: float = SLACK
    snapshots: list = dc_field(default_factory=list)
    runtime_s: float = 0.0
    params: dict = dc_field(default_factory=dict)
    diagnostics: dict = dc_field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.ok for c in self.checks)

    @property
    def first_violation(self) -> Check | None:
        return next((c for c in self.checks if not c.ok), None)

    def as_dict(self) -> dict:
        bad = self.first_violation
        return {
            "theorem": self.theorem,
            "pass": self.passed,
            "fitted_rate": _finite_or_none(self.fitted_rate),
            "bound_rate": _finite_or_none(self.bound_rate),
            "slack": self.slack,
            "snapshots": self.snapshots,
            "runtime_s": self.runtime_s,
            "checks": [c.as_dict() for c in self.checks],
            "first_violation": bad.as_dict() if bad else None,
            "params": self.params,
            "diagnostics": self.diagnostics,
        }

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        lines = [f"{self.theorem}: {verdict}  ({len(self.checks)} checks, {self.runtime_s:.1f} s)"]
        if math.isfinite(self.fitted_rate):
            lines.append(f"  fitted rate {self.fitted_rate:.6g}, bound rate {self.bound_rate:.6g}")
        bad = self.first_violation
        if bad is not None:
            where = f" at t = {bad.t:.6g}" if bad.t is not None else ""
            lines.append(f"  first violation: {bad.name}{where}: {bad.lhs:.10g} vs {bad.rhs:.10g}")
        return "\n".join(lines)


def _finite_or_none(x):
    return float(x) if x is not None and math.isfinite(x) else None


def recheck_report(data: dict) -> bool:
    """Re-derive the verdict of a stored report from its own numbers."""
    checks = data.get("checks") or []
    if not checks:
        return False
    for c in checks:
        lhs, rhs = c["lhs"], c["rhs"]
        if lhs is None or rhs is None or not (math.isfinite(lhs) and math.isfinite(rhs)):
            return False
        if not (lhs < rhs if c["strict"] else lhs <= rhs):
            return False
    return True


# -- fitting and trajectory helpers ----------------------------------------------


def fit_decay_rate(times, values, floor: float = FIT_FLOOR) -> float:
    """Least-squares slope of -log(values) over points above ``floor`` times the first value."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    keep = y >= floor * y[0]
    keep &= y > 0
    if keep.sum() < 2:
        return math.nan
    slope = np.polyfit(t[keep], np.log(y[keep]), 1)[0]
    return float(-slope)


def oracle_fd_probe(flow: Flow, field: Field, times, delta: float, functional) -> list:
    """Compare the oracle with a centred difference of ``functional`` at each probe time.

    Returns tuples ``(t, oracle, centred_difference)``.
    """
    ledger, t, out = ClipLedger(), 0.0, []
    dt = flow.default_dt
    for tk in times:
        if tk - delta < t:
            raise ValueError("probe times must be spaced by more than twice delta")
        field, _ = flow.advance(field, tk - delta - t, dt, ledger)
        before = functional(field, flow.epsilon)
        field, _ = flow.advance(field, delta, dt, ledger)
        oracle = flow.oracle(field)
        field, _ = flow.advance(field, delta, dt, ledger)
        after = functional(field, flow.epsilon)
        t = tk + delta
        out.append((float(tk), oracle, (after - before) / (2 * delta)))
    return out


def _snapshot_dicts(log: TrajectoryLog) -> list:
    return [s.as_dict() for s in log.snapshots]


def _structure_checks(log: TrajectoryLog, slack_mass=1e-10, slack_clip=1e-8) -> list:
    return [
        Check("mass drift", max(log.mass_drift), slack_mass),
        Check("clipped mass fraction", log.clip_fraction, slack_clip),
    ]


# -- canned experiments ------------------------------------------------------------


def verify_heat(epsilon=0.3, n=128, extent=4.0, t_end=1.0, samples=50, **_) -> VerificationReport:
    grid = Grid("torus-2d", extent, n)
    flow = Flow("heat", grid, epsilon)
    log = run_flow(flow, periodic_wave(grid, epsilon), np.linspace(0, t_end, samples + 1))
    I, t = log.series("fisher_I"), log.times
    rep = VerificationReport("thm-heat", bound_rate=0.0)
    for k in range(1, len(I)):
        rep.checks.append(Check("I decreasing", I[k], I[k - 1], strict=True, t=t[k]))
    for s in log.snapshots:
        rep.checks.append(Check("dI/dt oracle <= 0", s.djdt_oracle, 0.0, t=s.t))
    rep.checks += _structure_checks(log)
    rep.fitted_rate = fit_decay_rate(t, I)
    rep.snapshots = _snapshot_dicts(log)
    rep.params = {"epsilon": epsilon, "n": n, "extent": extent, "t_end": t_end, "samples": samples}
    return rep


def _decay_report(theorem, log, bound_rate):
    J, t = log.series("fisher_J"), log.times
    rep = VerificationReport(theorem, bound_rate=bound_rate)
    for k in range(1, len(J)):
        rep.checks.append(Check("J nonincreasing", J[k], J[k - 1], t=t[k]))
    for k in range(len(J)):
        bound = (1 + SLACK) * J[0] * math.exp(-bound_rate * t[k])
        rep.checks.append(Check("J below exponential bound", J[k], bound, t=t[k]))
    rep.fitted_rate = fit_decay_rate(t, J)
    rep.checks.append(Check("fitted rate above bound", bound_rate * (1 - SLACK), rep.fitted_rate))
    rep.checks += _structure_checks(log)
    rep.snapshots = _snapshot_dicts(log)
    rep.diagnostics = {"dt": log.dt, "steps": log.steps, "clip_mass": log.clip_mass,
                       "max_violation": log.max_violation}
    return rep


def verify_fp_decay(epsilon=0.05, beta=1.0, n=192, extent=8.0, scale=0.9, t_end=1.0, samples=20,
                    **_) -> VerificationReport:
    QuantumParams(epsilon, beta).require(4)
    grid = Grid("tensor-2d", extent, n)
    mu = fd_equilibrium(QuantumParams(epsilon, beta), grid)
    log = run_flow(Flow("fdfp", grid, epsilon, beta), Field(grid, scale * mu.values),
                   np.linspace(0, t_end, samples + 1))
    rep = _decay_report("thm-fp-ii", log, 2 * (1 - 4 * epsilon / beta))
    H = log.series("free_energy_H")
    for k in range(1, len(H)):
        rep.checks.append(Check("H nonincreasing", H[k], H[k - 1], t=log.times[k]))
    rep.params = {"epsilon": epsilon, "beta": beta, "n": n, "extent": extent, "scale": scale,
                  "t_end": t_end, "samples": samples}
    return rep


def verify_landau_decay(epsilon=0.05, beta=1.0, n=192, m=128, extent=8.0, scale=0.9, t_end=0.5,
                        samples=10, **_) -> VerificationReport:
    QuantumParams(epsilon, beta).require(6)
    grid = Grid("polar-2d", extent, n, m)
    mu = fd_equilibrium(QuantumParams(epsilon, beta), grid)
    coeffs = landau_coefficients(epsilon, beta, grid.d)
    flow = Flow("landau", grid, epsilon, beta, coeffs)
    log = run_flow(flow, Field(grid, scale * mu.values), np.linspace(0, t_end, samples + 1))
    rate = 2 * (grid.d - 1) * coeffs.nu * (1 - 6 * epsilon / beta)
    rep = _decay_report("thm-landau-ii", log, rate)
    rep.params = {"epsilon": epsilon, "beta": beta, "n": n, "m": m, "extent": extent,
                  "scale": scale, "t_end": t_end, "samples": samples, "nu": coeffs.nu,
                  "nu_tilde": coeffs.nu_tilde}
    return rep


def counterexample_grid_value(result: CounterexampleResult, beta: float = 1.0, n: int = 192) -> float:
    """Re-evaluate the certificate with the grid oracle on a grid hosting the profile."""
    if result.equation == "model":
        grid = model_grid(result, n)
        field = fd_profile(FDProfileSpec(result.alpha, (result.u_norm, 0.0), result.epsilon), grid)
        return grid_djdt(result, field, beta)
    return grid_djdt(result, certificate_field(result, certificate_grid(result, n)), beta)


def model_grid(result: CounterexampleResult, n: int = 192, m: int = 128) -> Grid:
    extent = math.ceil(result.u_norm + 6.0 / math.sqrt(result.alpha))
    return Grid("polar-2d", extent, n, m)


def _certificate_checks(result, grid_value):
    q = result.djdt0
    return [
        Check("quadrature dJ/dt > 0", 0.0, q, strict=True),
        Check("grid dJ/dt > 0", 0.0, grid_value, strict=True),
        Check("grid/quadrature mismatch", abs(grid_value - q), CERTIFICATE_RTOL * abs(q)),
    ]


def _growth_checks(rep, log):
    J, t = log.series("fisher_J"), log.times
    rep.checks.append(Check("J grows on first step", J[0], J[1], strict=True, t=t[1]))
    rep.fitted_rate = -(math.log(J[1]) - math.log(J[0])) / t[1]
    rep.bound_rate = 0.0
    rep.snapshots = _snapshot_dicts(log)


def verify_fp_counterexample(epsilon=0.2, dim=2, n=192, t_first=1e-3, **_) -> VerificationReport:
    result = counterexample_search(epsilon, dim)
    grid_value = counterexample_grid_value(result, n=n)
    rep = VerificationReport("thm-fp-i", checks=_certificate_checks(result, grid_value))
    field = certificate_field(result, certificate_grid(result, n))
    log = run_flow(Flow("fdfp", field.grid, epsilon), field, [0.0, t_first])
    _growth_checks(rep, log)
    rep.checks += _structure_checks(log)
    rep.params = {"epsilon": epsilon, "dim": dim, "n": n, "t_first": t_first}
    rep.diagnostics = {"certificate": result.as_dict(), "grid_djdt": grid_value}
    return rep


def verify_model_counterexample(epsilon=0.3, alpha=1.0, n=192, m=128, t_first=1e-3,
                                **_) -> VerificationReport:
    result = model_counterexample_search(epsilon, alpha)
    grid = model_grid(result, n, m)
    field = fd_profile(FDProfileSpec(alpha, (result.u_norm, 0.0), epsilon), grid)
    grid_value = grid_djdt(result, field)
    rep = VerificationReport("prop-model-i", checks=_certificate_checks(result, grid_value))
    log = run_flow(Flow("model", grid, epsilon), field, [0.0, t_first])
    _growth_checks(rep, log)
    rep.params = {"epsilon": epsilon, "alpha": alpha, "n": n, "m": m, "extent": grid.extent}
    rep.diagnostics = {"certificate": result.as_dict(), "grid_djdt": grid_value}
    return rep


def model_bound(field: Field, epsilon: float) -> float:
    """eps * sup(|v|^4 m) over the grid."""
    g = field.grid
    return epsilon * float(np.max(g.speed2**2 * mobility(field.values, epsilon)))


def verify_model_bound(epsilon=0.3, alpha=1.0, n=192, m=128, t_end=1.0, samples=20,
                       **_) -> VerificationReport:
    result = model_counterexample_search(epsilon, alpha)
    grid = model_grid(result, n, m)
    field = fd_profile(FDProfileSpec(alpha, (result.u_norm, 0.0), epsilon), grid)
    times = np.linspace(0, t_end, samples + 1)
    flow = Flow("model", grid, epsilon)
    # keep the fields so the sup bound can be read at every snapshot
    bounds, f = [model_bound(field, epsilon)], field
    J = [fisher_J(field, epsilon)]
    for a, b in zip(times, times[1:]):
        f, _ = flow.advance(f, b - a, flow.default_dt, ClipLedger())
        bounds.append(model_bound(f, epsilon))
        J.append(fisher_J(f, epsilon))
    rep = VerificationReport("prop-model-ii")
    for k in range(1, len(J)):
        rate = 0.5 * (J[k] - J[k - 1]) / (times[k] - times[k - 1])
        # trapezoid average of the instantaneous bound over the interval
        cap = 0.5 * (bounds[k] * J[k] + bounds[k - 1] * J[k - 1])
        rep.checks.append(Check("(1/2) dJ/dt <= eps sup(|v|^4 m) J", rate, (1 + SLACK) * cap,
                                t=float(times[k])))
    rep.bound_rate = -2 * bounds[0]
    rep.fitted_rate = fit_decay_rate(times, J)
    rep.snapshots = [{"t": float(t), "fisher_J": j, "bound": b} for t, j, b in zip(times, J, bounds)]
    rep.params = {"epsilon": epsilon, "alpha": alpha, "u_norm": result.u_norm, "n": n, "m": m,
                  "extent": grid.extent, "t_end": t_end, "samples": samples}
    return rep


def verify_landau_counterexample(epsilon=0.1, beta=1.0, dim=2, n=192, **_) -> VerificationReport:
    result = landau_counterexample_search(epsilon, beta, dim)
    grid_value = counterexample_grid_value(result, beta, n)
    rep = VerificationReport("thm-landau-i", checks=_certificate_checks(result, grid_value))
    rep.params = {"epsilon": epsilon, "beta": beta, "dim": dim, "n": n}
    rep.diagnostics = {"certificate": result.as_dict(), "grid_djdt": grid_value}
    return rep


def verify_lemma(epsilon=0.05, beta=1.0, n=192, extent=8.0, scale=0.9, t_end=0.2, samples=10,
                 **_) -> VerificationReport:
    grid = Grid("tensor-2d", extent, n)
    mu = fd_equilibrium(QuantumParams(epsilon, beta), grid)
    log = run_flow(Flow("fdfp", grid, epsilon, beta), Field(grid, scale * mu.values),
                   np.linspace(0, t_end, samples + 1))
    rep = VerificationReport("lemma-est")
    for s in log.snapshots:
        rhs = -s.F_inf * s.fisher_J
        rep.checks.append(Check("(1/2) dJ/dt <= -inf F J", 0.5 * s.djdt_oracle, rhs + SLACK * abs(rhs),
                                t=s.t))
        rep.checks.append(Check("inf F > 0", 0.0, s.F_inf, strict=True, t=s.t))
    rep.fitted_rate = fit_decay_rate(log.times, log.series("fisher_J"))
    rep.bound_rate = 2 * min(s.F_inf for s in log.snapshots)
    rep.snapshots = _snapshot_dicts(log)
    rep.params = {"epsilon": epsilon, "beta": beta, "n": n, "extent": extent, "scale": scale,
                  "t_end": t_end, "samples": samples}
    return rep


EXPERIMENTS = {
    "thm-heat": verify_heat,
    "thm-fp-i": verify_fp_counterexample,
    "thm-fp-ii": verify_fp_decay,
    "prop-model-i": verify_model_counterexample,
    "prop-model-ii": verify_model_bound,
    "thm-landau-i": verify_landau_counterexample,
    "thm-landau-ii": verify_landau_decay,
    "lemma-est": verify_lemma,
}


def run_verification(theorem: str, **overrides) -> VerificationReport:
    if theorem not in EXPERIMENTS:
        raise KeyError(f"unknown theorem id {theorem!r}; expected one of {THEOREMS}")
    start = time.perf_counter()
    params = {k: v for k, v in overrides.items() if v is not None}
    rep = EXPERIMENTS[theorem](**params)
    rep.runtime_s = time.perf_counter() - start
    return rep


# -- persistence ---------------------------------------------------------------------


def _cell(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(snapshots, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for s in snapshots:
            row = s if isinstance(s, dict) else s.as_dict()
            writer.writerow([_cell(row[c]) for c in CSV_COLUMNS])


def csv_text(snapshots) -> str:
    rows = [",".join(CSV_COLUMNS)]
    for s in snapshots:
        row = s if isinstance(s, dict) else s.as_dict()
        rows.append(",".join(_cell(row[c]) for c in CSV_COLUMNS))
    return "\n".join(rows) + "\n"


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def json_safe(obj):
    # JSON has no NaN/inf; map them to null
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    return obj


def json_text(data) -> str:
    return json.dumps(json_safe(data), indent=2, default=_json_default, allow_nan=False)


def write_json(data: dict, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json_text(data) + "\n", encoding="utf-8")
