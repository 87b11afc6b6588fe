"""Command-line front end.

Subcommands::

    rosce fit        fit one method, write effect.csv, ci.csv, model.json, run.json
    rosce baselines  fit every applicable method, write baselines.csv, run.json
    rosce synth      write a synthetic dataset (data.csv) and its truth (truth.csv)
    rosce mc         Monte Carlo dispersion of estimates, write dispersion.csv, run.json

Exit codes: 0 success, 2 invalid configuration or input data, 3 degenerate
exposure (effect not identified), 4 numerical failure. Diagnostics go to
stderr; stdout receives a single JSON summary line.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from . import bootstrap as bs
from . import estimator as est
from . import synth
from .data import Dataset, ResidualDataset, dataset_to_csv, location_columns, read_dataset_csv
from .errors import ConfigError, DataError, DegenerateExposureError, DomainError, MissingRegionError, RosceError
from .kernels import MaternKernel
from .spatial_basis import BasisSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_NUMERICAL = 4

SYNTH_NAMES = ("gp-example", "2d", "discrete-5", "discrete", "eiv", "linear")
DEFAULT_LEVELS = [(10, 0.2)]


@dataclass
class RunConfig:
    input: str | None = None
    synth: str | None = None
    n: int | None = None
    case: str = "fixed-zero"
    d: int | None = None
    basis: dict | None = None
    method: str = "rosce"
    B: int = 1000
    alpha: float = 0.05
    seed: int = 0
    refit_nuisance: bool = True
    standardize: bool = False
    grid_points: int = 101
    kernel: dict | None = None
    out: str = "."

    def validate(self) -> None:
        if (self.input is None) == (self.synth is None):
            raise ConfigError("give exactly one of 'input' or 'synth'")
        if self.synth is not None and self.synth not in SYNTH_NAMES:
            raise ConfigError(f"unknown synth name {self.synth!r}; choose from {list(SYNTH_NAMES)}")
        if self.n is not None and self.n < 2:
            raise ConfigError("n must be at least 2")
        if self.B < 100:
            raise ConfigError("B must be at least 100")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.grid_points < 2:
            raise ConfigError("grid_points must be at least 2")
        if self.kernel is not None:
            _kernel_from(self.kernel, 1.0)


@dataclass
class McConfig:
    synth: str = "eiv"
    sims: int = 100
    methods: list = field(default_factory=lambda: ["rosce", "ls"])
    quantiles: list = field(default_factory=lambda: [0.05, 0.95])
    n: int | None = None
    case: str = "fixed-zero"
    d: int | None = None
    d_theta: int = 10
    theta_seed: int | None = None
    basis: dict | None = None
    seed: int = 0
    grid_points: int = 101
    kernel: dict | None = None
    out: str = "."

    def validate(self) -> None:
        if self.synth not in SYNTH_NAMES:
            raise ConfigError(f"unknown synth name {self.synth!r}; choose from {list(SYNTH_NAMES)}")
        if self.sims < 1:
            raise ConfigError("sims must be at least 1")
        if len(self.quantiles) != 2:
            raise ConfigError("quantiles needs two values")
        for m in self.methods:
            est.resolve_method(m, None)


# -- config plumbing --------------------------------------------------------------


def _load_config(cls, path: str | None, overrides: dict[str, Any]):
    base: dict[str, Any] = {}
    if path:
        try:
            base = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(base, dict):
            raise ConfigError("config file must hold a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(base) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    base.update({k: v for k, v in overrides.items() if v is not None})
    cfg = cls(**base)
    cfg.validate()
    return cfg


def _basis_with_bounds(basis: dict, bounds) -> dict:
    basis = dict(basis)
    if basis.get("kind", "continuous") == "continuous":
        basis.setdefault("kind", "continuous")
        basis.setdefault("bounds", [list(b) for b in bounds])
    return basis


def _kernel_from(cfg: dict | None, width: float) -> MaternKernel:
    cfg = dict(cfg or {})
    unknown = set(cfg) - {"lengthscale", "variance", "noise", "nu"}
    if unknown:
        raise ConfigError(f"unknown kernel keys: {sorted(unknown)}")
    cfg.setdefault("lengthscale", 0.1 * width)
    return MaternKernel(**cfg)


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _err(msg: str) -> None:
    print(f"rosce: {msg}", file=sys.stderr)


# -- data acquisition ---------------------------------------------------------------


def _generate(name: str, n, seed: int, case: str = "fixed-zero", d=None, **extra):
    """Run a named generator; returns ``(SynthOutput, default BasisSpec or None)``."""
    kw = {} if n is None else {"n": n}
    if name == "gp-example":
        out = synth.gen_gp_example(case, seed=seed, **kw)
        return out, BasisSpec.bsplines([synth.GP_RANGE], DEFAULT_LEVELS)
    if name == "2d":
        return synth.gen_2d_experiment(seed=seed, **kw), synth.effect_basis_2d()
    if name in ("discrete-5", "discrete"):
        regions = 5 if name == "discrete-5" else (d or 5)
        if name == "discrete-5" and d not in (None, 5):
            raise ConfigError("discrete-5 has exactly 5 regions; use 'discrete' with d")
        return synth.gen_discrete_experiment(seed=seed, d=regions, **kw), BasisSpec.indicators(regions)
    if name == "eiv":
        cfg = synth.EivConfig(
            n=kw.get("n", 41), d_theta=extra.get("d_theta", 10),
            theta_seed=seed if extra.get("theta_seed") is None else extra["theta_seed"],
        )
        return cfg.sample(seed), cfg.spec
    if name == "linear":
        return synth.linear_config(**kw).sample(seed), BasisSpec.bsplines([synth.GP_RANGE], DEFAULT_LEVELS)
    raise ConfigError(f"unknown synth name {name!r}; choose from {list(SYNTH_NAMES)}")


def _acquire(cfg: RunConfig):
    """Load or generate the data; returns ``(data, truth or None, spec, provenance)``."""
    if cfg.synth is not None:
        out, default_spec = _generate(cfg.synth, cfg.n, cfg.seed, cfg.case, cfg.d)
        data, truth = out.data, out.truth
        provenance = {"synth": cfg.synth, "n": data.n, "seed": cfg.seed}
    else:
        path = Path(cfg.input)
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise DataError(f"cannot read input {path}: {exc}") from None
        bounds = None
        if cfg.basis is not None and cfg.basis.get("kind", "continuous") == "continuous":
            bounds = cfg.basis.get("bounds")
        data = read_dataset_csv(raw.decode("utf-8"), bounds=bounds, d=cfg.d)
        truth, default_spec = None, None
        provenance = {"input": str(path), "sha256": hashlib.sha256(raw).hexdigest()}
    if cfg.basis is not None:
        bounds = [] if data.domain.is_discrete else data.domain.bounds
        spec = BasisSpec.from_dict(_basis_with_bounds(cfg.basis, bounds))
    elif default_spec is not None:
        spec = default_spec
    elif data.domain.is_discrete:
        spec = BasisSpec.indicators(data.domain.d)
    else:
        spec = BasisSpec.bsplines(data.domain.bounds, DEFAULT_LEVELS)
    if spec.domain != data.domain:
        raise ConfigError("basis domain does not match the data domain")
    return data, truth, spec, provenance


def _standardize(data):
    """z-score the outcome and exposure columns; returns the new data and the scaling used."""
    if isinstance(data, ResidualDataset):
        a, b, names = data.w_hat, data.v_hat, ("w_hat", "v_hat")
    else:
        a, b, names = data.y, data.z, ("y", "z")
    stats = {}
    cols = []
    for name, col in zip(names, (a, b)):
        mean, sd = float(col.mean()), float(col.std())
        if sd == 0:
            raise DegenerateExposureError(f"column {name!r} is constant; cannot standardize")
        stats[name] = {"mean": mean, "sd": sd}
        cols.append((col - mean) / sd)
    # effect on the original scale = standardized effect * sd(outcome) / sd(exposure)
    stats["effect_scale"] = stats[names[0]]["sd"] / stats[names[1]]["sd"]
    return type(data)(cols[0], cols[1], data.s, data.domain), stats


def _kernel_for(cfg_kernel, data) -> MaternKernel | None:
    if data.domain.is_discrete:
        return None
    width = max(hi - lo for lo, hi in data.domain.bounds)
    return _kernel_from(cfg_kernel, width)


def _grid_csv(domain, grid, columns: dict[str, np.ndarray]) -> str:
    lines = [",".join(location_columns(domain) + list(columns))]
    for i in range(len(grid)):
        loc = [str(int(grid[i]))] if domain.is_discrete else [repr(float(v)) for v in np.atleast_1d(grid[i])]
        lines.append(",".join(loc + [repr(float(col[i])) for col in columns.values()]))
    return "\n".join(lines) + "\n"


def _recorded(cfg) -> dict:
    # the output directory does not affect results, so it stays out of run.json
    rec = dataclasses.asdict(cfg)
    rec.pop("out", None)
    return rec


def _rmse(a, b) -> float:
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


# -- subcommands --------------------------------------------------------------------


def cmd_fit(cfg: RunConfig) -> dict:
    data, truth, spec, provenance = _acquire(cfg)
    scaling = None
    if cfg.standardize:
        data, scaling = _standardize(data)
    method = est.resolve_method(cfg.method, data)
    kernel = _kernel_for(cfg.kernel, data) if method == "gls_sre" else None
    grid = bs.default_grid(data, cfg.grid_points)
    model = est.fit(data, method, spec, kernel=kernel)
    effect = est.effect_on(model, grid)
    band = bs.bootstrap_band(
        data, spec, grid, cfg.B, cfg.alpha, cfg.seed,
        method=method, refit_nuisance=cfg.refit_nuisance, kernel=kernel,
    )
    out = Path(cfg.out)
    _write_atomic(out / "effect.csv", _grid_csv(data.domain, grid, {"effect": effect}))
    _write_atomic(out / "ci.csv", band.to_csv(data.domain))
    _write_atomic(out / "model.json", _dump_json(model.to_dict()))
    run = {
        "command": "fit",
        "version": __version__,
        "config": _recorded(cfg),
        "data": provenance,
        "basis": spec.to_dict(),
        "method": method,
        "kernel": None if kernel is None else kernel.to_dict(),
        "standardization": scaling,
    }
    _write_atomic(out / "run.json", _dump_json(run))
    summary = {"command": "fit", "method": method, "n": data.n, "grid_points": len(grid), "out": str(out)}
    if truth is not None and scaling is None:
        summary["rmse"] = _rmse(effect, truth.tau(grid))
        summary["coverage"] = float(band.contains(truth.tau(grid)).mean())
    return summary


def _applicable_methods(data) -> list[str]:
    if isinstance(data, ResidualDataset):
        return ["rosce", "residual_ls"]
    if data.domain.is_discrete:
        return ["rosce", "direct_ls", "naive_region_ls"]
    return ["rosce", "direct_ls", "gls_sre"]


def cmd_baselines(cfg: RunConfig) -> dict:
    data, truth, spec, provenance = _acquire(cfg)
    scaling = None
    if cfg.standardize:
        data, scaling = _standardize(data)
    grid = bs.default_grid(data, cfg.grid_points)
    kernel = _kernel_for(cfg.kernel, data)
    columns: dict[str, np.ndarray] = {}
    for m in _applicable_methods(data):
        columns[m] = est.effect_on(est.fit(data, m, spec, kernel=kernel), grid)
    if truth is not None and scaling is None:
        columns["truth"] = truth.tau(grid)
    out = Path(cfg.out)
    _write_atomic(out / "baselines.csv", _grid_csv(data.domain, grid, columns))
    run = {
        "command": "baselines",
        "version": __version__,
        "config": _recorded(cfg),
        "data": provenance,
        "basis": spec.to_dict(),
        "kernel": None if kernel is None else kernel.to_dict(),
        "standardization": scaling,
    }
    _write_atomic(out / "run.json", _dump_json(run))
    summary: dict[str, Any] = {"command": "baselines", "methods": [m for m in columns if m != "truth"], "out": str(out)}
    if "truth" in columns:
        summary["rmse"] = {m: _rmse(v, columns["truth"]) for m, v in columns.items() if m != "truth"}
    return summary


def _truth_csv(out: synth.SynthOutput) -> str:
    data, truth = out.data, out.truth
    cols: dict[str, np.ndarray] = {"tau": truth.tau_values, "beta": truth.beta}
    if truth.v_tilde is not None:
        cols["v_tilde"] = truth.v_tilde
    return _grid_csv(data.domain, data.s, cols)


def cmd_synth(name: str, n, seed: int, case: str, d, d_theta: int, theta_seed, out_dir: str) -> dict:
    out, spec = _generate(name, n, seed, case, d, d_theta=d_theta, theta_seed=theta_seed)
    dest = Path(out_dir)
    _write_atomic(dest / "data.csv", dataset_to_csv(out.data))
    _write_atomic(dest / "truth.csv", _truth_csv(out))
    summary = {"command": "synth", "name": name, "n": out.data.n, "seed": seed, "out": str(dest)}
    if "theta0" in out.truth.params:
        summary["theta0"] = out.truth.params["theta0"].tolist()
    return summary


def _dgp(cfg: McConfig):
    kw = {} if cfg.n is None else {"n": cfg.n}
    if cfg.synth == "eiv":
        theta_seed = cfg.seed if cfg.theta_seed is None else cfg.theta_seed
        dgp = synth.EivConfig(n=kw.get("n", 41), d_theta=cfg.d_theta, theta_seed=theta_seed)
        return dgp, dgp.spec, np.linspace(0.0, 10.0, cfg.grid_points)
    if cfg.synth == "gp-example":
        return synth.gp_example_config(cfg.case, **kw), BasisSpec.bsplines([synth.GP_RANGE], DEFAULT_LEVELS), None
    if cfg.synth == "2d":
        return synth.experiment_2d_config(**kw), synth.effect_basis_2d(), None
    if cfg.synth in ("discrete-5", "discrete"):
        regions = 5 if cfg.synth == "discrete-5" else (cfg.d or 5)
        return synth.discrete_config(d=regions, **kw), BasisSpec.indicators(regions), np.arange(1, regions + 1)
    return synth.linear_config(**kw), BasisSpec.bsplines([synth.GP_RANGE], DEFAULT_LEVELS), None


def cmd_mc(cfg: McConfig) -> dict:
    dgp, spec, grid = _dgp(cfg)
    if cfg.basis is not None:
        spec = BasisSpec.from_dict(_basis_with_bounds(cfg.basis, spec.domain.bounds))
    if grid is None and not spec.domain.is_discrete:
        axes = [np.linspace(lo, hi, cfg.grid_points) for lo, hi in spec.domain.bounds]
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.column_stack([m.reshape(-1) for m in mesh])
    kernel = None
    if "gls_sre" in cfg.methods:
        kernel = _kernel_from(cfg.kernel, max(hi - lo for lo, hi in spec.domain.bounds))
    disp = bs.mc_dispersion(
        dgp, cfg.sims, tuple(cfg.quantiles), grid, cfg.seed, methods=cfg.methods, spec=spec, kernel=kernel
    )
    out = Path(cfg.out)
    _write_atomic(out / "dispersion.csv", disp.to_csv(spec.domain))
    run = {"command": "mc", "version": __version__, "config": _recorded(cfg), "basis": spec.to_dict()}
    if isinstance(dgp, synth.EivConfig):
        run["theta0"] = dgp.theta0.tolist()
    _write_atomic(out / "run.json", _dump_json(run))
    return {"command": "mc", "synth": cfg.synth, "sims": cfg.sims, "methods": list(cfg.methods), "out": str(out)}


# -- argument parsing ---------------------------------------------------------------


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _add_run_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", help="CSV dataset (y,z,s1[,s2,s3] | y,z,region | w_hat,v_hat,...)")
    src.add_argument("--synth", choices=SYNTH_NAMES, help="generate the data instead of reading it")
    p.add_argument("--config", help="JSON file with run settings; flags override it")
    p.add_argument("--n", type=int, help="sample size for --synth")
    p.add_argument("--case", choices=("fixed-zero", "heterogeneous"), help="gp-example effect")
    p.add_argument("--d", type=int, help="number of regions (discrete data)")
    p.add_argument("--basis", type=json.loads, help='basis as JSON, e.g. \'{"levels": [{"n_components": 10, "support_fraction": 0.2}]}\'')
    p.add_argument("--method", help=f"one of {', '.join(est.METHODS)} or ls")
    p.add_argument("--B", type=int, help="bootstrap replicates (default 1000)")
    p.add_argument("--alpha", type=float, help="1 - confidence level (default 0.05)")
    p.add_argument("--seed", type=int, help="seed for data generation and resampling (default 0)")
    p.add_argument("--refit-nuisance", dest="refit_nuisance", type=_bool, help="refit the nuisance per replicate (default true)")
    p.add_argument("--standardize", action="store_true", default=None, help="z-score outcome and exposure first")
    p.add_argument("--grid-points", dest="grid_points", type=int, help="grid points per axis (default 101)")
    p.add_argument("--kernel", type=json.loads, help="Matérn kernel for gls_sre as JSON")
    p.add_argument("--out", help="output directory (default .)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rosce", description="Spatially varying causal effects under spatial confounding.")
    parser.add_argument("--version", action="version", version=f"rosce {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_args(sub.add_parser("fit", help="fit one method with a bootstrap band"))
    _add_run_args(sub.add_parser("baselines", help="fit all applicable methods side by side"))

    ps = sub.add_parser("synth", help="write a synthetic dataset and its truth")
    ps.add_argument("name", choices=SYNTH_NAMES)
    ps.add_argument("--n", type=int)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--case", choices=("fixed-zero", "heterogeneous"), default="fixed-zero")
    ps.add_argument("--d", type=int)
    ps.add_argument("--d-theta", dest="d_theta", type=int, default=10)
    ps.add_argument("--theta-seed", dest="theta_seed", type=int)
    ps.add_argument("--out", default=".")

    pm = sub.add_parser("mc", help="Monte Carlo dispersion of estimates")
    pm.add_argument("synth", choices=SYNTH_NAMES)
    pm.add_argument("--config")
    pm.add_argument("--sims", type=int)
    pm.add_argument("--methods", type=lambda t: [m.strip() for m in t.split(",") if m.strip()])
    pm.add_argument("--quantiles", type=lambda t: [float(q) for q in t.split(",")])
    pm.add_argument("--n", type=int)
    pm.add_argument("--case", choices=("fixed-zero", "heterogeneous"))
    pm.add_argument("--d", type=int)
    pm.add_argument("--d-theta", dest="d_theta", type=int)
    pm.add_argument("--theta-seed", dest="theta_seed", type=int)
    pm.add_argument("--basis", type=json.loads)
    pm.add_argument("--seed", type=int)
    pm.add_argument("--grid-points", dest="grid_points", type=int)
    pm.add_argument("--kernel", type=json.loads)
    pm.add_argument("--out")
    return parser


def _run(args: argparse.Namespace) -> dict:
    opts = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    if args.command in ("fit", "baselines"):
        cfg = _load_config(RunConfig, args.config, opts)
        return cmd_fit(cfg) if args.command == "fit" else cmd_baselines(cfg)
    if args.command == "mc":
        return cmd_mc(_load_config(McConfig, args.config, opts))
    if args.n is not None and args.n < 2:
        raise ConfigError("n must be at least 2")
    return cmd_synth(args.name, args.n, args.seed, args.case, args.d, args.d_theta, args.theta_seed, args.out)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        summary = _run(args)
    except (ConfigError, DataError, DomainError) as exc:
        _err(f"invalid input: {exc}")
        return EXIT_CONFIG
    except (DegenerateExposureError, MissingRegionError) as exc:
        _err(f"effect not identified: {exc}")
        return EXIT_DEGENERATE
    except (RosceError, np.linalg.LinAlgError, FloatingPointError) as exc:
        _err(f"numerical failure: {exc}")
        return EXIT_NUMERICAL
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
