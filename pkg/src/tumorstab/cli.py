"""Command-line front end: ``tumorstab {orbit,threshold,modes,evolve}``.

Configuration is a YAML file (see README); flags override its fields.  All
CSV floats are written with 17 significant digits and JSON with sorted keys,
so identical inputs give byte-identical files.

Exit codes: 0 success, 1 invalid configuration, 2 inadmissible supply
(mean nutrient not above the apoptosis threshold), 3 solver did not
converge, 4 decay requested but the base state is not stable.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import yaml

from .base_state import mu_star_2d, mu_star_3d, solve_base_state
from .errors import AdmissibilityError, ConvergenceError, DomainError, TrajectoryError
from .mode_dynamics import DEFAULT_N_SCAN, classify, mu_star_from_multiplier
from .periodic_orbit import DEFAULT_STEPS, ModelParams, NutrientProfile, check_admissible
from .perturbation import DEFAULT_N_MAX, BoundaryPerturbation, evolve_boundary, mode1_center

OUTPUT_ENV = "TUMORSTAB_OUTPUT_DIR"
EXIT_CONFIG, EXIT_ADMISSIBILITY, EXIT_CONVERGENCE, EXIT_NOT_STABLE = 1, 2, 3, 4


class ConfigError(Exception):
    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def _number(d, key, where, default=None, positive=False):
    value = d.get(key, default)
    if value is None:
        raise ConfigError(f"{where}.{key}", "is required")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key}", f"must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value) or (positive and value <= 0):
        raise ConfigError(f"{where}.{key}", f"must be a {'positive ' if positive else ''}"
                          f"finite number, got {value!r}")
    return value


def _integer(d, key, where, default, minimum=0):
    value = d.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{where}.{key}", f"must be an integer >= {minimum}, got {value!r}")
    return value


@dataclass(frozen=True)
class RunConfig:
    mu: float
    sigma_tilde: float
    period: float
    profile: dict
    n_scan: int = DEFAULT_N_SCAN
    n_max: int = DEFAULT_N_MAX
    t_end: float | None = None
    dim: int = 3
    steps: int = DEFAULT_STEPS
    tol: float = 1e-11
    decay_factor: float = 1e-3
    require_decay: bool = True
    init: str | None = None
    seed: int = 0
    out: str | None = None

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be a mapping")
        unknown = set(data) - {"params", "profile", "options", "seed"}
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown section")
        params = data.get("params")
        if not isinstance(params, dict):
            raise ConfigError("params", "section is required")
        profile = data.get("profile")
        if not isinstance(profile, dict):
            raise ConfigError("profile", "section is required")
        opts = data.get("options") or {}
        if not isinstance(opts, dict):
            raise ConfigError("options", "must be a mapping")
        known = {f for f in cls.__dataclass_fields__} - {"mu", "sigma_tilde", "period",
                                                        "profile", "seed"}
        for key in opts:
            if key not in known:
                raise ConfigError(f"options.{key}", "unknown option")
        t_end = opts.get("t_end")
        cfg = cls(
            mu=_number(params, "mu", "params", positive=True),
            sigma_tilde=_number(params, "sigma_tilde", "params", positive=True),
            period=_number(params, "period", "params", positive=True),
            profile=_profile_spec(profile),
            n_scan=_integer(opts, "n_scan", "options", DEFAULT_N_SCAN, 2),
            n_max=_integer(opts, "n_max", "options", DEFAULT_N_MAX, 0),
            t_end=None if t_end is None else _number(opts, "t_end", "options", positive=True),
            dim=_integer(opts, "dim", "options", 3, 2),
            steps=_integer(opts, "steps", "options", DEFAULT_STEPS, 64),
            tol=_number(opts, "tol", "options", 1e-11, positive=True),
            decay_factor=_number(opts, "decay_factor", "options", 1e-3, positive=True),
            require_decay=opts.get("require_decay", True),
            init=opts.get("init"),
            seed=_integer(data, "seed", "config", 0, 0),
            out=opts.get("out"),
        )
        if cfg.dim not in (2, 3):
            raise ConfigError("options.dim", f"must be 2 or 3, got {cfg.dim!r}")
        if not isinstance(cfg.require_decay, bool):
            raise ConfigError("options.require_decay", "must be true or false")
        if cfg.steps % 8:
            raise ConfigError("options.steps", "must be a multiple of 8")
        return cfg

    def to_dict(self):
        opts = {k: v for k, v in asdict(self).items()
                if k not in ("mu", "sigma_tilde", "period", "profile", "seed") and v is not None}
        return {"params": {"mu": self.mu, "sigma_tilde": self.sigma_tilde,
                           "period": self.period},
                "profile": dict(self.profile), "options": opts, "seed": self.seed}

    def dump(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def parse(cls, text):
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError("config", f"not valid YAML: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("--config", str(exc)) from exc
        return cls.parse(text)

    def model_params(self, mu=None):
        return ModelParams(self.mu if mu is None else mu, self.sigma_tilde, self.period)

    def nutrient(self):
        p = self.profile
        try:
            if p["kind"] == "cosine":
                return NutrientProfile.cosine(p["mean"], p.get("amplitude", 0.0), self.period,
                                              p.get("phase", 0.0))
            if p["kind"] == "constant":
                return NutrientProfile.constant(p["value"], self.period)
            if p["kind"] == "tabulated":
                return NutrientProfile.tabulated(p["samples"], self.period)
            phi = NutrientProfile.from_csv(p["path"])
        except (DomainError, OSError) as exc:
            raise ConfigError("profile", str(exc)) from exc
        if abs(phi.period - self.period) > 1e-12 * self.period:
            raise ConfigError("profile.path", f"table spans {phi.period!r}, "
                              f"params.period is {self.period!r}")
        return phi

    def horizon(self):
        return 10.0 * self.period if self.t_end is None else self.t_end


def _profile_spec(p):
    kind = p.get("kind")
    if kind == "cosine":
        spec = {"kind": kind, "mean": _number(p, "mean", "profile", positive=True),
                "amplitude": _number(p, "amplitude", "profile", 0.0),
                "phase": _number(p, "phase", "profile", 0.0)}
        if abs(spec["amplitude"]) >= spec["mean"]:
            raise ConfigError("profile.amplitude", "must be smaller than profile.mean")
        return spec
    if kind == "constant":
        return {"kind": kind, "value": _number(p, "value", "profile", positive=True)}
    if kind == "tabulated":
        samples = p.get("samples")
        if not isinstance(samples, list) or len(samples) < 3:
            raise ConfigError("profile.samples", "needs a list of at least 3 numbers")
        return {"kind": kind, "samples": [_number({"s": s}, "s", "profile.samples")
                                          for s in samples]}
    if kind == "csv":
        if not isinstance(p.get("path"), str):
            raise ConfigError("profile.path", "is required for kind 'csv'")
        return {"kind": kind, "path": p["path"]}
    raise ConfigError("profile.kind", f"must be cosine, constant, tabulated or csv, got {kind!r}")


def _fmt(x):
    return format(float(x), ".17g")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _orbit_summary(orbit):
    return {"iterations": int(orbit.iterations),
            "periodicity_residual": float(orbit.periodicity_residual),
            "ode_residual": float(orbit.ode_residual()),
            "radius_min": float(orbit.values.min()),
            "radius_max": float(orbit.values.max())}


def cmd_orbit(cfg, out):
    phi = cfg.nutrient()
    params = cfg.model_params()
    check_admissible(params, phi)
    state = solve_base_state(params, phi, steps=cfg.steps, tol=cfg.tol)
    orbit = state.orbit
    _write_csv(out / "orbit.csv", ["t", "R", "dR_dt"],
               zip(orbit.times, orbit.values, orbit.derivs))
    _write_json(out / "orbit.json", _orbit_summary(orbit))
    print(f"orbit: R* in [{orbit.values.min():.6g}, {orbit.values.max():.6g}], "
          f"periodicity residual {orbit.periodicity_residual:.2e}")
    return 0


def cmd_threshold(cfg, out):
    phi = cfg.nutrient()
    check_admissible(cfg.model_params(), phi)
    ms = mu_star_3d(cfg.sigma_tilde, phi, steps=cfg.steps, tol=cfg.tol)
    root = mu_star_from_multiplier(cfg.sigma_tilde, phi, steps=cfg.steps, tol=cfg.tol)
    state = solve_base_state(cfg.model_params(ms), phi, steps=cfg.steps, tol=cfg.tol)
    report = {"mu_star_3d": ms, "lambda2_root": root,
              "relative_gap": abs(ms - root) / ms, "orbit_at_mu_star": _orbit_summary(state.orbit)}
    if cfg.dim == 2:
        report["mu_star_2d"] = mu_star_2d(cfg.sigma_tilde, phi, use_3d_orbit=True,
                                          steps=cfg.steps, tol=cfg.tol)
    _write_json(out / "threshold.json", report)
    print(f"mu* = {ms:.12g} (Lambda_2 root {root:.12g})")
    return 0


def _mode_label(n, lam, tol=1e-9):
    if n == 1:
        return "neutral"
    if lam > tol:
        return "growing"
    if lam < -tol:
        return "decaying"
    return "threshold"


def cmd_modes(cfg, out):
    phi = cfg.nutrient()
    params = cfg.model_params()
    check_admissible(params, phi)
    state = solve_base_state(params, phi, steps=cfg.steps, tol=cfg.tol)
    result = classify(cfg.mu, state, n_scan=cfg.n_scan)
    T = cfg.period
    rows, deltas = [], []
    for n, lam in enumerate(result.log_multipliers):
        delta = ""
        if n >= 2:
            d = -lam / (T * (n**3 + 1))
            deltas.append(d)
            delta = _fmt(d)
        rows.append([str(n), _fmt(lam), _mode_label(n, lam), delta])
    _write_csv(out / "modes.csv", ["n", "Lambda", "classification", "delta"], rows)
    delta = max(min(deltas), 0.0) if result.verdict == "stable" else 0.0
    _write_json(out / "modes.json", {"verdict": result.label, "delta": delta,
                                     "first_unstable_n": result.first_unstable_n})
    print(f"verdict: {result.label}")
    return 0


def _initial_perturbation(cfg):
    if cfg.init:
        try:
            init = BoundaryPerturbation.from_csv(cfg.init, n_max=cfg.n_max)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError("options.init", str(exc)) from exc
        return init
    rng = np.random.default_rng(cfg.seed)
    return BoundaryPerturbation.random(cfg.n_max, rng, scale=0.05,
                                       modes=range(min(cfg.n_max, 8) + 1))


def cmd_evolve(cfg, out):
    phi = cfg.nutrient()
    params = cfg.model_params()
    check_admissible(params, phi)
    state = solve_base_state(params, phi, steps=cfg.steps, tol=cfg.tol)
    verdict = classify(cfg.mu, state, n_scan=cfg.n_scan)
    if cfg.require_decay and verdict.verdict != "stable":
        print(f"error: decay requested but base state is {verdict.label}; "
              f"mu = {cfg.mu!r} is not below mu*", file=sys.stderr)
        return EXIT_NOT_STABLE
    init = _initial_perturbation(cfg)
    try:
        init.check_positive(float(state.orbit(0.0)))
        evo = evolve_boundary(init, state, cfg.horizon())
    except DomainError as exc:
        raise ConfigError("options", str(exc)) from exc
    n_max = init.n_max
    _write_csv(out / "deviation.csv", ["t", "d"], zip(evo.times, evo.deviation))
    amplitudes = np.sqrt(np.sum(evo.coeffs**2, axis=2))
    _write_csv(out / "amplitudes.csv", ["t"] + [f"n{n}" for n in range(n_max + 1)],
               (np.concatenate(([t], a)) for t, a in zip(evo.times, amplitudes)))
    _write_csv(out / "center.csv", ["t", "a1", "a2", "a3"],
               (np.concatenate(([t], c)) for t, c in zip(evo.times, evo.centers)))
    d0, d_end = float(evo.deviation[0]), float(evo.deviation[-1])
    ratio = d_end / d0 if d0 > 0 else 0.0
    converged = ratio < cfg.decay_factor
    center0 = mode1_center(init.mode(1)) if n_max >= 1 else np.zeros(3)
    _write_json(out / "evolve.json", {
        "deviation_initial": d0, "deviation_final": d_end, "ratio": ratio,
        "converged": converged, "center_final": [float(x) for x in evo.centers[-1]],
        "center_initial": [float(x) for x in center0],
        "log_multipliers": [float(x) for x in evo.log_multipliers]})
    print("converged to translated sphere" if converged
          else f"not converged: d(t_end)/d(0) = {ratio:.3g}")
    return 0


COMMANDS = {"orbit": cmd_orbit, "threshold": cmd_threshold, "modes": cmd_modes,
            "evolve": cmd_evolve}


def build_parser():
    ap = argparse.ArgumentParser(prog="tumorstab", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="YAML run configuration")
    ap.add_argument("--out", help=f"output directory (default: ${OUTPUT_ENV} or options.out or .)")
    ap.add_argument("--dim", type=int, choices=(2, 3))
    ap.add_argument("--n-scan", type=int)
    ap.add_argument("--t-end", type=float)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--init", help="initial coefficient CSV (columns n, m, value)")
    return ap


def _apply_overrides(cfg, args):
    changes = {k: v for k, v in (("dim", args.dim), ("n_scan", args.n_scan),
                                 ("t_end", args.t_end), ("seed", args.seed),
                                 ("init", args.init)) if v is not None}
    if not changes:
        return cfg
    # re-validate through the dict form so flags obey the same rules
    data = cfg.to_dict()
    for key, value in changes.items():
        if key == "seed":
            data["seed"] = value
        else:
            data["options"][key] = value
    return RunConfig.from_dict(data)


def output_dir(args, cfg):
    out = args.out or os.environ.get(OUTPUT_ENV) or cfg.out or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(RunConfig.load(args.config), args)
        return COMMANDS[args.command](cfg, output_dir(args, cfg))
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AdmissibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ADMISSIBILITY
    except (ConvergenceError, TrajectoryError) as exc:
        print(f"error: no convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except DomainError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
