"""Command-line front end: ``ksminimax {bound,pack,simulate,rip}``.

Configuration is a flat key-value file whose keys carry a block prefix::

    model.m1 = 4
    coeff.type = "sparse_gaussian"
    experiment.N_grid = [1, 5, 25, 125]

(the syntax is TOML, so dotted keys and ``[block]`` tables both work).  Every
key is type-checked before any work starts.  Exit codes: 0 success,
1 runtime or verification failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import bounds, packing
from ._io import read_matrix_csv, write_csv, write_json
from .generative import VARIANTS, CoefficientModel, random_ks_dictionary
from .simulate import (
    FULL_X,
    SUPPORT_ONLY,
    ExperimentSpec,
    fano_consistency_check,
    run_mse_experiment,
    write_error_curve,
    write_trial_log,
)
from .svgplot import loglog_svg

BOUND_SCHEMA = "ksminimax.bound_sweep/v1"
REQUIRED = object()


class ConfigError(ValueError):
    pass


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _grid(v):
    return (len(v) > 0 and all(isinstance(n, int) and not isinstance(n, bool) and n >= 1 for n in v)
            and all(b > a for a, b in zip(v, v[1:])))


# key -> (type, default, check, description of check)
SCHEMA = {
    "model.m1": (int, REQUIRED, _positive, "a positive integer"),
    "model.m2": (int, REQUIRED, _positive, "a positive integer"),
    "model.p1": (int, REQUIRED, _positive, "a positive integer"),
    "model.p2": (int, REQUIRED, _positive, "a positive integer"),
    "coeff.type": (str, "sparse_gaussian", lambda v: v in VARIANTS, f"one of {VARIANTS}"),
    "coeff.s": (int, 2, _positive, "a positive integer"),
    "coeff.sigma_a": (float, 1.0, _nonneg, "nonnegative"),
    "noise.sigma": (float, 1.0, _nonneg, "nonnegative"),
    "packing.t": (float, 0.5, lambda v: 0 < v < 1, "in (0, 1)"),
    "packing.c1": (float, 0.044, _positive, "positive"),
    "packing.eps_prime": (float, None, _positive, "positive"),
    "packing.r": (float, 1.0, _positive, "positive"),
    "packing.alpha": (float, None, _positive, "positive"),
    "packing.L_target": (int, None, lambda v: v >= 2, "an integer >= 2"),
    "packing.seed": (int, 0, _nonneg, "a nonnegative integer"),
    "packing.mode": (str, None, lambda v: v in ("general", "sparse"), "'general' or 'sparse'"),
    "experiment.N_grid": (list, [1, 5, 25, 125], _grid, "a strictly increasing list of positive integers"),
    "experiment.trials": (int, 200, _positive, "a positive integer"),
    "experiment.side_info": (str, FULL_X, lambda v: v in (FULL_X, SUPPORT_ONLY),
                             f"'{FULL_X}' or '{SUPPORT_ONLY}'"),
    "experiment.master_seed": (int, 0, _nonneg, "a nonnegative integer"),
    "experiment.ensemble": (str, None, lambda v: True, ""),
    "experiment.trial_log": (bool, False, lambda v: True, ""),
    "rip.s": (int, 2, _positive, "a positive integer"),
    "rip.threshold": (float, 0.5, _nonneg, "nonnegative"),
    "rip.matrix": (str, None, lambda v: True, ""),
    "rip.target": (str, "D", lambda v: v in ("D", "A", "B"), "'D', 'A' or 'B'"),
    "rip.budget": (int, 2_000_000, _positive, "a positive integer"),
    "output.directory": (str, "out", lambda v: True, ""),
    "output.formats": (list, ["csv", "svg"],
                       lambda v: all(f in ("csv", "svg") for f in v), "a list drawn from 'csv', 'svg'"),
}


def _flatten(d, prefix=""):
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        else:
            yield key, v


def _coerce(key, value, typ):
    if typ is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if typ is int and isinstance(value, bool):
        raise ConfigError(f"{key}: expected int, got bool")
    if not isinstance(value, typ):
        raise ConfigError(f"{key}: expected {typ.__name__}, got {type(value).__name__} {value!r}")
    return value


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def from_mapping(cls, raw: dict, require_model: bool = True) -> "RunConfig":
        flat = dict(_flatten(raw))
        unknown = sorted(set(flat) - set(SCHEMA))
        if unknown:
            raise ConfigError(f"{unknown[0]}: unknown key")
        values = {}
        for key, (typ, default, check, desc) in SCHEMA.items():
            if key not in flat:
                if default is REQUIRED and require_model:
                    raise ConfigError(f"{key}: required")
                values[key] = None if default is REQUIRED else default
                continue
            v = _coerce(key, flat[key], typ)
            if not check(v):
                raise ConfigError(f"{key}: must be {desc}, got {v!r}")
            values[key] = v
        return cls(values)

    @classmethod
    def load(cls, path, require_model: bool = True) -> "RunConfig":
        try:
            raw = tomllib.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"--config: no such file {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"--config: cannot parse {path}: {exc}") from None
        return cls.from_mapping(raw, require_model)

    def with_overrides(self, seed=None, out=None) -> "RunConfig":
        v = dict(self.values)
        if seed is not None:
            v["packing.seed"] = seed
            v["experiment.master_seed"] = seed
        if out is not None:
            v["output.directory"] = str(out)
        return RunConfig(v)

    # derived objects ---------------------------------------------------

    @property
    def dims(self):
        return tuple(self[f"model.{k}"] for k in ("m1", "m2", "p1", "p2"))

    @property
    def p(self):
        return self["model.p1"] * self["model.p2"]

    @property
    def mode(self):
        if self["packing.mode"] is not None:
            return self["packing.mode"]
        return "general" if self["coeff.type"] == "general" else "sparse"

    def coefficient_model(self) -> CoefficientModel:
        t, sa = self["coeff.type"], self["coeff.sigma_a"]
        if t == "general":
            # isotropic covariance sigma_a^2 I
            return CoefficientModel.general(sa**2 * np.eye(self.p))
        s = self["coeff.s"]
        if s > self.p:
            raise ConfigError(f"coeff.s: must not exceed p = {self.p}, got {s}")
        if t == "sparse_gaussian":
            return CoefficientModel.sparse_gaussian(s, sa)
        return CoefficientModel.sparse_uniform(s, sa)

    def packing_params(self) -> packing.PackingParams:
        mode = self.mode
        s = self["coeff.s"] if mode == "sparse" else 1
        eps = self["packing.eps_prime"]
        if eps is None:
            eps = 0.5 * packing.eps_prime_cap(self.p, self["packing.r"], mode, s)
        try:
            params = packing.PackingParams(t=self["packing.t"], c1=self["packing.c1"],
                                           eps_prime=eps, r=self["packing.r"],
                                           alpha=self["packing.alpha"], s=s)
            packing.check_eps_prime(params, self.p, mode)
            m1, m2, p1, p2 = self.dims
            packing.codebook_alpha(1, (m1 - 1) * p1 + (m2 - 1) * p2, params)
        except packing.InadmissibleParameters as exc:
            msg = str(exc)
            field = ("packing.alpha" if msg.startswith("alpha")
                     else "packing.eps_prime" if "eps_prime" in msg else "packing.c1")
            raise ConfigError(f"{field}: {msg}") from None
        return params

    def bound_inputs(self, N) -> bounds.BoundInputs:
        m1, m2, p1, p2 = self.dims
        model = self.coefficient_model()
        try:
            return bounds.BoundInputs(
                N=N, m1=m1, m2=m2, p1=p1, p2=p2, r=self["packing.r"], sigma=self["noise.sigma"],
                t=self["packing.t"], c1=self["packing.c1"], sigma_a=self["coeff.sigma_a"],
                s=self["coeff.s"], sigma_x_norm=model.covariance_spectral_norm(self.p))
        except ValueError as exc:
            raise ConfigError(f"bound inputs: {exc}") from None

    def out_dir(self) -> Path:
        d = Path(self["output.directory"])
        d.mkdir(parents=True, exist_ok=True)
        return d

    def wants(self, fmt) -> bool:
        return fmt in self["output.formats"]


def _log(msg):
    print(msg, file=sys.stderr)


# ------------------------------------------------------------------ commands

def cmd_bound(cfg: RunConfig) -> int:
    if cfg["noise.sigma"] <= 0:
        raise ConfigError("noise.sigma: bounds need a positive noise level")
    m1, m2, p1, p2 = cfg.dims
    if cfg["coeff.sigma_a"] <= 0:
        raise ConfigError("coeff.sigma_a: bounds need a positive coefficient scale")
    header = ("m1", "m2", "p1", "p2", "N", "r", "sigma", "sigma_a", "s", "t", "c1", "snr",
              "bound_name", "value", "vacuous", "L", "mi_upper", "fano_threshold")
    rows, series = [], {}
    for N in cfg["experiment.N_grid"]:
        inp = cfg.bound_inputs(N)
        snr = inp.snr()
        common = (m1, m2, p1, p2, N, inp.r, inp.sigma, inp.sigma_a, inp.s, inp.t, inp.c1, snr)
        for fn in (bounds.thm1_bound, bounds.cor1_bound, bounds.thm2_bound):
            res = fn(inp)
            rows.append(common + (res.name, res.value, res.vacuous, res.L, res.mi_upper,
                                  res.fano_threshold))
            series.setdefault(res.name, []).append((N, res.value))
        for dist, struct in bounds.TABLE1_CELLS:
            v = bounds.table1_scaling(dist, struct, m1, m2, p1, p2, N, inp.r, snr)
            name = f"table1_{dist}_{struct}"
            rows.append(common + (name, v, False, None, None, None))
            series.setdefault(name, []).append((N, v))
    out = cfg.out_dir()
    if cfg.wants("csv"):
        write_csv(out / "bounds.csv", BOUND_SCHEMA, header, rows)
    if cfg.wants("svg"):
        loglog_svg([(k, [x for x, _ in v], [y for _, y in v]) for k, v in series.items()],
                   out / "bounds.svg", title="Minimax risk lower bounds", xlabel="N",
                   ylabel="squared Frobenius error")
    vac = [r for r in rows if r[12] in ("thm1", "cor1", "thm2") and r[14]]
    if vac:
        _log(f"warning: {len(vac)} theorem rows are vacuous "
             f"(c1 * degrees of freedom - 3 = {cfg.bound_inputs(1).degrees_term:.4g} <= 0)")
    _log(f"wrote {len(rows)} bound rows to {out}")
    return 0


def _reference(cfg: RunConfig, rng):
    return random_ks_dictionary(*cfg.dims, rng)


def _build_ensemble(cfg: RunConfig):
    params = cfg.packing_params()
    model = cfg.coefficient_model()
    sigma = cfg["noise.sigma"] if cfg["noise.sigma"] > 0 else 1.0
    seed = cfg["packing.seed"]
    rng = np.random.default_rng(seed)
    D0 = _reference(cfg, rng)
    return packing.build_ensemble(D0, params, cfg.mode, rng, model=model, sigma=sigma,
                                  L_target=cfg["packing.L_target"], seed=seed)


def cmd_pack(cfg: RunConfig) -> int:
    cfg.packing_params()  # config-level admissibility before any work
    out = cfg.out_dir()
    try:
        ens = _build_ensemble(cfg)
    except (packing.DegenerateCodebookError, packing.VerificationError) as exc:
        _log(f"error: {exc}")
        return 1
    packing.save_ensemble(ens, out / "ensemble")
    write_json(out / "pack_report.json", ens.report.to_dict())
    r = ens.report
    _log(f"ensemble of {r.L} members; pairwise squared distances in "
         f"[{r.min_pair_sq:.6g}, {r.max_pair_sq:.6g}] within [{r.lower_bound:.6g}, {r.upper_bound:.6g}]; "
         f"max ||Dl - D0||_F = {r.max_dist_to_ref:.6g} < r = {r.radius}")
    return 0 if r.passed else 1


def cmd_simulate(cfg: RunConfig) -> int:
    path = cfg["experiment.ensemble"]
    model = cfg.coefficient_model()
    if path is not None:
        if not (Path(path) / "manifest.json").exists():
            raise ConfigError(f"experiment.ensemble: no ensemble at {path}")
        ens = packing.load_ensemble(path)
    else:
        cfg.packing_params()
        try:
            ens = _build_ensemble(cfg)
        except (packing.DegenerateCodebookError, packing.VerificationError) as exc:
            _log(f"error: {exc}")
            return 1
    try:
        spec = ExperimentSpec(ens, model, cfg["noise.sigma"], list(cfg["experiment.N_grid"]),
                              cfg["experiment.trials"], cfg["experiment.side_info"],
                              cfg["experiment.master_seed"])
    except ValueError as exc:
        raise ConfigError(f"experiment: {exc}") from None
    curve = run_mse_experiment(spec)
    fano = fano_consistency_check(curve, spec)
    out = cfg.out_dir()
    if cfg.wants("csv"):
        write_error_curve(curve, out / "error_curve.csv")
        if cfg["experiment.trial_log"]:
            write_trial_log(curve, out / "trial_log.csv")
    if cfg.wants("svg"):
        Ns = [pt.N for pt in curve.points]
        loglog_svg([("error rate", Ns, [pt.error_rate for pt in curve.points]),
                    ("mean MSE", Ns, [pt.mean_mse for pt in curve.points]),
                    ("worst MSE", Ns, [pt.worst_mse for pt in curve.points])],
                   out / "error_curve.svg", title=f"Decoding over L = {curve.L} hypotheses",
                   xlabel="N", ylabel="rate / squared Frobenius error")
    write_json(out / "fano_report.json", {"passed": fano.passed, "violations": fano.violations,
                                          "rows": fano.rows})
    for row in fano.rows:
        _log(f"N={row['N']}: (1 - P_err_hi) log2 L - 1 = {row['lhs_bits']:.4g} "
             f"<= MI bound {row['mi_upper_bits']:.4g} bits: {'ok' if row['ok'] else 'VIOLATED'}")
    return 0 if fano.passed else 1


def cmd_rip(cfg: RunConfig | None, matrix=None, s=None, threshold=None) -> int:
    s = s if s is not None else (cfg["rip.s"] if cfg else 2)
    threshold = threshold if threshold is not None else (cfg["rip.threshold"] if cfg else 0.5)
    budget = cfg["rip.budget"] if cfg else 2_000_000
    matrix = matrix if matrix is not None else (cfg["rip.matrix"] if cfg else None)
    if matrix is not None:
        if not Path(matrix).exists():
            raise ConfigError(f"rip.matrix: no such file {matrix}")
        D = read_matrix_csv(matrix)
        source = str(matrix)
    else:
        if cfg is None or cfg["model.m1"] is None:
            raise ConfigError("rip.matrix: give a matrix file or model dimensions")
        ref = _reference(cfg, np.random.default_rng(cfg["packing.seed"]))
        target = cfg["rip.target"]
        D = {"D": ref.D, "A": ref.A, "B": ref.B}[target]
        source = f"reference {target} (seed {cfg['packing.seed']})"
    if s > D.shape[1]:
        raise ConfigError(f"rip.s: order {s} exceeds the {D.shape[1]} columns")
    try:
        rep = bounds.rip_constant(D, s, budget=budget)
    except ValueError as exc:
        _log(f"error: {exc}")
        return 1
    passed = rep.satisfies(threshold)
    report = {"source": source, "shape": list(D.shape), "s": rep.s, "delta": rep.delta,
              "witness": list(rep.witness), "supports_checked": rep.supports_checked,
              "threshold": threshold, "passed": passed}
    out_dir = Path(cfg["output.directory"]) if cfg else Path("out")
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "rip_report.json", report)
    print(f"delta_{s} = {rep.delta:.12g} (witness {list(rep.witness)}): "
          f"{'pass' if passed else 'fail'} against threshold {threshold}")
    return 0 if passed else 1


# ---------------------------------------------------------------------- main

def build_parser():
    ap = argparse.ArgumentParser(prog="ksminimax", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("bound", "sweep the lower-bound formulas over N"),
                        ("pack", "build and verify a dictionary ensemble"),
                        ("simulate", "Monte Carlo decoding experiment with Fano check"),
                        ("rip", "exhaustive RIP constant of a matrix")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=name != "rip", help="configuration file")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--seed", type=int, help="overrides packing.seed and experiment.master_seed")
        if name == "rip":
            p.add_argument("--matrix", help="CSV matrix file (overrides rip.matrix)")
            p.add_argument("--s", type=int, help="RIP order (overrides rip.s)")
            p.add_argument("--threshold", type=float, help="pass threshold (overrides rip.threshold)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "rip":
            cfg = None
            if args.config:
                cfg = RunConfig.load(args.config, require_model=False)
            elif args.out:
                cfg = RunConfig.from_mapping({}, require_model=False)
            if cfg is not None:
                cfg = cfg.with_overrides(args.seed, args.out)
            return cmd_rip(cfg, args.matrix, args.s, args.threshold)
        cfg = RunConfig.load(args.config).with_overrides(args.seed, args.out)
        return {"bound": cmd_bound, "pack": cmd_pack, "simulate": cmd_simulate}[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
