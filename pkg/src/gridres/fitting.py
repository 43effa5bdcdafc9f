"""Curve fitting for zone fragility and restoration-time models.

Two model families:

  fragility     y(x) = a * exp(b * x)             x = weather intensity
  restoration   y(x) = c - a1 * exp(-b1 * x)
                       - a2 * exp(-b2 * x)        x = outages in the event

Both are fitted by damped Gauss-Newton (Levenberg-Marquardt) least squares
on the raw observations, with documented closed-form initializers. Raw
counts rather than log counts keep zero-outage samples usable and give the
big events the weight they deserve; the log-linear pass is initialization
only.

Bound constraints are enforced by projecting the iterate after each step,
which keeps the solver readable at the price of theoretical elegance.
The damping factor is multiplicative: divided by 10 after an accepted step,
multiplied by 10 after a rejected one.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EvaluationError, FitError, ValidationError

log = logging.getLogger(__name__)

FORM_EXPONENTIAL = "exp"
FORM_RESTORATION = "sat2exp"

# strictly-positive lower bounds use a tiny floor instead of an open interval
POSITIVE_FLOOR = 1e-12
RATE_FLOOR = 1e-9


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 200
    gradient_tol: float = 1e-10
    step_tol: float = 1e-12
    initial_damping: float = 1e-3


@dataclass(frozen=True)
class FitDiagnostics:
    n_samples: int
    sse: float
    r_squared: float
    iterations: int       # accepted steps
    converged: bool
    initializer: str
    gradient_norm: float = float("nan")
    stop_reason: str = ""


@dataclass(frozen=True)
class ExponentialModel:
    a: float
    b: float
    zone_id: str = ""
    hazard_class: str = ""


@dataclass(frozen=True)
class SaturatingRestorationModel:
    c: float
    a1: float
    b1: float
    a2: float
    b2: float
    zone_id: str = ""


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------

def levenberg_marquardt(
    residuals: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    init: np.ndarray,
    bounds: tuple[np.ndarray, np.ndarray],
    opts: SolverOptions | None = None,
) -> tuple[np.ndarray, FitDiagnostics]:
    """Minimize ||residuals(p)||^2 from init, projecting onto [lo, hi].

    Convergence is declared when the gradient satisfies
    ||J^T r||_inf <= gradient_tol * max(1, sse), or when an accepted step
    moves the iterate by less than step_tol * (1 + ||p||). A step is
    accepted only if it does not increase the objective, so the accepted
    SSE sequence is nonincreasing.
    """
    opts = opts or SolverOptions()
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    p = np.clip(np.asarray(init, dtype=float), lo, hi)

    with np.errstate(over="ignore", invalid="ignore"):
        r = np.asarray(residuals(p), dtype=float)
    if not np.all(np.isfinite(r)):
        raise FitError("residuals are not finite at the initial point")
    sse = float(r @ r)

    lam = opts.initial_damping
    accepted = 0
    converged = False
    reason = "max_iterations"

    while accepted < opts.max_iterations:
        J = np.asarray(jacobian(p), dtype=float)
        g = J.T @ r
        g_norm = float(np.max(np.abs(g))) if g.size else 0.0
        if g_norm <= opts.gradient_tol * max(1.0, sse):
            converged = True
            reason = "gradient"
            break

        A = J.T @ J
        d = np.diag(A).copy()
        d[d <= 0.0] = 1e-30

        stepped = False
        while lam <= 1e12:
            try:
                step = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            p_new = np.clip(p + step, lo, hi)
            with np.errstate(over="ignore", invalid="ignore"):
                r_new = np.asarray(residuals(p_new), dtype=float)
            if np.all(np.isfinite(r_new)):
                sse_new = float(r_new @ r_new)
                if sse_new <= sse:
                    moved = float(np.linalg.norm(p_new - p))
                    p, r, sse = p_new, r_new, sse_new
                    lam = max(lam / 10.0, 1e-12)
                    accepted += 1
                    stepped = True
                    if moved <= opts.step_tol * (1.0 + float(np.linalg.norm(p))):
                        converged = True
                        reason = "step"
                    break
            lam *= 10.0
        if not stepped:
            reason = "damping_limit"
            break
        if converged:
            break

    with np.errstate(over="ignore", invalid="ignore"):
        g_final = np.asarray(jacobian(p), dtype=float).T @ r
    diagnostics = FitDiagnostics(
        n_samples=int(r.size),
        sse=sse,
        r_squared=float("nan"),
        iterations=accepted,
        converged=converged,
        initializer="",
        gradient_norm=float(np.max(np.abs(g_final))) if g_final.size else 0.0,
        stop_reason=reason,
    )
    return p, diagnostics


def _restart_factors(n_params: int) -> list[np.ndarray]:
    """8 deterministic +-50% perturbation vectors, fixed order."""
    out = []
    for k in range(1, 9):
        out.append(np.array([0.5 if (k >> j) & 1 else 1.5
                             for j in range(n_params)]))
    return out


def _fit_with_restarts(
    residuals: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    init: np.ndarray,
    bounds: tuple[np.ndarray, np.ndarray],
    opts: SolverOptions | None,
    initializer_label: str,
) -> tuple[np.ndarray, FitDiagnostics]:
    """Run the solver; on non-convergence retry from perturbed initializers
    and keep the lowest-SSE result (first on ties)."""
    params, diag = levenberg_marquardt(residuals, jacobian, init, bounds, opts)
    label = initializer_label
    if not diag.converged:
        best = (params, diag, label)
        for k, factors in enumerate(_restart_factors(len(init)), start=1):
            try:
                p_k, d_k = levenberg_marquardt(
                    residuals, jacobian, init * factors, bounds, opts)
            except FitError:
                continue
            if d_k.sse < best[1].sse:
                best = (p_k, d_k, f"{initializer_label}+restart{k}")
        params, diag, label = best
    diag = FitDiagnostics(
        n_samples=diag.n_samples, sse=diag.sse, r_squared=diag.r_squared,
        iterations=diag.iterations, converged=diag.converged,
        initializer=label, gradient_norm=diag.gradient_norm,
        stop_reason=diag.stop_reason)
    return params, diag


def exponential_system(x: np.ndarray, y: np.ndarray):
    """Residual and analytic-Jacobian closures for y_hat = a * exp(b*x).

    Parameter vector p = (a, b)."""
    def residuals(p: np.ndarray) -> np.ndarray:
        a, b = p
        return a * np.exp(b * x) - y

    def jacobian(p: np.ndarray) -> np.ndarray:
        a, b = p
        e = np.exp(b * x)
        return np.column_stack([e, a * x * e])

    return residuals, jacobian


def restoration_system(x: np.ndarray, y: np.ndarray):
    """Residual and analytic-Jacobian closures for
    y_hat = c - a1 * exp(-b1*x) - a2 * exp(-b2*x).

    Parameter vector p = (c, a1, b1, a2, b2)."""
    def residuals(p: np.ndarray) -> np.ndarray:
        c, a1, b1, a2, b2 = p
        return c - a1 * np.exp(-b1 * x) - a2 * np.exp(-b2 * x) - y

    def jacobian(p: np.ndarray) -> np.ndarray:
        c, a1, b1, a2, b2 = p
        e1 = np.exp(-b1 * x)
        e2 = np.exp(-b2 * x)
        return np.column_stack([
            np.ones_like(x), -e1, a1 * x * e1, -e2, a2 * x * e2,
        ])

    return residuals, jacobian


def _r_squared(y: np.ndarray, sse: float) -> float:
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst > 0.0:
        return 1.0 - sse / sst
    return 1.0 if sse <= 1e-30 else float("nan")


# ---------------------------------------------------------------------------
# Fragility: y = a * exp(b x)
# ---------------------------------------------------------------------------

def fit_exponential(
    samples: list[tuple[float, float]],
    zone_id: str = "",
    hazard_class: str = "",
    opts: SolverOptions | None = None,
) -> tuple[ExponentialModel, FitDiagnostics]:
    """Fit y = a*exp(b*x) to (intensity, outage_count) pairs.

    Initializer: ordinary least squares on (x, ln y) over the y > 0 subset.
    Refinement: bounded least squares on all samples, zeros included.
    """
    where = f" for zone {zone_id}" if zone_id else ""
    if len(samples) < 3:
        raise FitError(f"need at least 3 fragility samples{where}, "
                       f"got {len(samples)}")
    x = np.array([s[0] for s in samples], dtype=float)
    y = np.array([s[1] for s in samples], dtype=float)
    if len(np.unique(x)) < 2:
        raise FitError(f"fragility samples{where} have no intensity spread")
    pos = y > 0.0
    if int(pos.sum()) == 0:
        raise FitError(f"degenerate fragility data{where}: every sample "
                       f"has zero outages")
    if int(pos.sum()) < 2:
        raise FitError(f"fragility samples{where} need at least 2 nonzero "
                       f"outage counts")

    xp, yp = x[pos], y[pos]
    design = np.column_stack([xp, np.ones_like(xp)])
    coef, *_ = np.linalg.lstsq(design, np.log(yp), rcond=None)
    b0, log_a0 = float(coef[0]), float(coef[1])
    init = np.array([math.exp(log_a0), b0])

    residuals, jacobian = exponential_system(x, y)
    bounds = (np.array([POSITIVE_FLOOR, -np.inf]), np.array([np.inf, np.inf]))
    params, diag = _fit_with_restarts(
        residuals, jacobian, init, bounds, opts, "loglinear-ols")
    model = ExponentialModel(a=float(params[0]), b=float(params[1]),
                             zone_id=zone_id, hazard_class=hazard_class)
    diag = FitDiagnostics(
        n_samples=diag.n_samples, sse=diag.sse, r_squared=_r_squared(y, diag.sse),
        iterations=diag.iterations, converged=diag.converged,
        initializer=diag.initializer, gradient_norm=diag.gradient_norm,
        stop_reason=diag.stop_reason)
    return model, diag


# ---------------------------------------------------------------------------
# Restoration: y = c - a1 exp(-b1 x) - a2 exp(-b2 x)
# ---------------------------------------------------------------------------

def fit_restoration(
    samples: list[tuple[float, float]],
    zone_id: str = "",
    opts: SolverOptions | None = None,
) -> tuple[SaturatingRestorationModel, FitDiagnostics]:
    """Fit the saturating restoration curve to (n_outages, hours) pairs.

    Initializer: c0 = 1.05 * max(y); the gap c0 - min(y) split 90/10 into
    the slow and fast amplitudes; rates 1/max(x) and 10/max(x). Output is
    canonically ordered with b1 <= b2 (slow decay first).
    """
    where = f" for zone {zone_id}" if zone_id else ""
    if len(samples) < 6:
        raise FitError(f"need at least 6 restoration samples{where}, "
                       f"got {len(samples)}")
    x = np.array([s[0] for s in samples], dtype=float)
    y = np.array([s[1] for s in samples], dtype=float)
    if float(x.max()) < 10.0:
        log.warning("restoration samples%s span only x <= %g; saturation "
                    "level is weakly identified", where, float(x.max()))

    c0 = 1.05 * float(y.max())
    gap = c0 - float(y.min())
    init = np.array([c0, 0.9 * gap, 1.0 / float(x.max()),
                     0.1 * gap, 10.0 / float(x.max())])

    residuals, jacobian = restoration_system(x, y)
    bounds = (np.array([0.0, 0.0, RATE_FLOOR, 0.0, RATE_FLOOR]),
              np.full(5, np.inf))
    params, diag = _fit_with_restarts(
        residuals, jacobian, init, bounds, opts, "saturating-heuristic")

    c, a1, b1, a2, b2 = (float(v) for v in params)
    if b1 > b2:
        a1, b1, a2, b2 = a2, b2, a1, b1
    model = SaturatingRestorationModel(c=c, a1=a1, b1=b1, a2=a2, b2=b2,
                                       zone_id=zone_id)
    diag = FitDiagnostics(
        n_samples=diag.n_samples, sse=diag.sse, r_squared=_r_squared(y, diag.sse),
        iterations=diag.iterations, converged=diag.converged,
        initializer=diag.initializer, gradient_norm=diag.gradient_norm,
        stop_reason=diag.stop_reason)
    return model, diag


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def evaluate(model: ExponentialModel | SaturatingRestorationModel, x: float) -> float:
    """Closed-form model value at x >= 0.

    Restoration values are clamped at zero: the curve family can dip
    (harmlessly) below zero near the origin when y(0) < 0.
    """
    x = float(x)
    if x < 0.0:
        raise ValidationError(f"model evaluation needs x >= 0, got {x}")
    if isinstance(model, ExponentialModel):
        try:
            value = model.a * math.exp(model.b * x)
        except OverflowError:
            raise EvaluationError(
                f"fragility model overflowed at x = {x}") from None
        if not math.isfinite(value):
            raise EvaluationError(f"fragility model overflowed at x = {x}")
        return value
    value = (model.c - model.a1 * math.exp(-model.b1 * x)
             - model.a2 * math.exp(-model.b2 * x))
    if not math.isfinite(value):
        raise EvaluationError(f"restoration model is non-finite at x = {x}")
    return max(value, 0.0)


# ---------------------------------------------------------------------------
# Model store (JSON round trip)
# ---------------------------------------------------------------------------

KIND_FRAGILITY = "fragility"
KIND_RESTORATION = "restoration"


def _diagnostics_doc(diag: FitDiagnostics) -> dict:
    r2 = diag.r_squared
    return {
        "n_samples": diag.n_samples,
        "sse": diag.sse,
        "r_squared": None if isinstance(r2, float) and math.isnan(r2) else r2,
        "iterations": diag.iterations,
        "converged": diag.converged,
        "initializer": diag.initializer,
        "gradient_norm": diag.gradient_norm,
        "stop_reason": diag.stop_reason,
    }


@dataclass(frozen=True)
class ModelRecord:
    """One stored fit: functional form, parameters, diagnostics, x-range."""
    form: str
    params: dict[str, float]
    diagnostics: dict = field(default_factory=dict)
    fit_domain: tuple[float, float] = (0.0, 0.0)

    def to_model(self, zone_id: str = "", hazard_class: str = ""):
        if self.form == FORM_EXPONENTIAL:
            return ExponentialModel(a=self.params["a"], b=self.params["b"],
                                    zone_id=zone_id, hazard_class=hazard_class)
        if self.form == FORM_RESTORATION:
            return SaturatingRestorationModel(
                c=self.params["c"], a1=self.params["a1"], b1=self.params["b1"],
                a2=self.params["a2"], b2=self.params["b2"], zone_id=zone_id)
        raise ValidationError(f"unknown model form {self.form!r}")


def exponential_record(
    model: ExponentialModel, diag: FitDiagnostics | None,
    fit_domain: tuple[float, float],
) -> ModelRecord:
    return ModelRecord(
        form=FORM_EXPONENTIAL,
        params={"a": model.a, "b": model.b},
        diagnostics=_diagnostics_doc(diag) if diag else {},
        fit_domain=(float(fit_domain[0]), float(fit_domain[1])))


def restoration_record(
    model: SaturatingRestorationModel, diag: FitDiagnostics | None,
    fit_domain: tuple[float, float],
) -> ModelRecord:
    return ModelRecord(
        form=FORM_RESTORATION,
        params={"c": model.c, "a1": model.a1, "b1": model.b1,
                "a2": model.a2, "b2": model.b2},
        diagnostics=_diagnostics_doc(diag) if diag else {},
        fit_domain=(float(fit_domain[0]), float(fit_domain[1])))


@dataclass
class ModelStore:
    """All fitted models for one hazard class, keyed zone_id -> kind."""
    hazard_class: str
    zones: dict[str, dict[str, ModelRecord]]

    def require(self, zone_id: str, kind: str) -> ModelRecord:
        try:
            return self.zones[zone_id][kind]
        except KeyError:
            raise ValidationError(
                f"model store for {self.hazard_class!r} has no {kind} model "
                f"for zone {zone_id!r}") from None

    def to_json(self) -> str:
        doc = {
            "hazard_class": self.hazard_class,
            "zones": {
                zone_id: {
                    kind: {
                        "form": rec.form,
                        "params": rec.params,
                        "diagnostics": rec.diagnostics,
                        "fit_domain": list(rec.fit_domain),
                    }
                    for kind, rec in kinds.items()
                }
                for zone_id, kinds in self.zones.items()
            },
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ModelStore":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"model store is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict) or "hazard_class" not in doc \
                or "zones" not in doc:
            raise ValidationError("model store must carry hazard_class and zones")
        zones: dict[str, dict[str, ModelRecord]] = {}
        for zone_id, kinds in doc["zones"].items():
            zones[zone_id] = {}
            for kind, rec in kinds.items():
                if kind not in (KIND_FRAGILITY, KIND_RESTORATION):
                    raise ValidationError(
                        f"model store zone {zone_id!r} has unknown entry {kind!r}")
                if rec.get("form") not in (FORM_EXPONENTIAL, FORM_RESTORATION):
                    raise ValidationError(
                        f"model store zone {zone_id!r} {kind} entry has "
                        f"unknown form {rec.get('form')!r}")
                zones[zone_id][kind] = ModelRecord(
                    form=rec["form"],
                    params={k: float(v) for k, v in rec["params"].items()},
                    diagnostics=rec.get("diagnostics", {}),
                    fit_domain=tuple(rec.get("fit_domain", (0.0, 0.0))),
                )
        return cls(hazard_class=doc["hazard_class"], zones=zones)
