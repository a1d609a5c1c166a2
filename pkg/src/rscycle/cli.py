"""Command-line experiment drivers.

Five subcommands cover the standard runs: a single trajectory, the
cluster-count feedback sweep, the two-cluster return map, the cyclic
solution atlas (case regions plus spectra), and the steady transport
profile.  Every command is deterministic given (config, seed): outputs are
CSV files plus a metadata sidecar holding the tool version, the config
hash, and the seed, so repeated runs are byte-identical.

Exit codes: 0 on success, 2 on validation errors, 3 when a numerical
certificate fails.
"""

import argparse
import hashlib
import json
import multiprocessing
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .clusters import count_clusters_histogram, write_sweep_csv
from .cyclic import (
    Case,
    CertificateError,
    classify_case,
    cyclic_spacing,
    saturating_feedback,
    spectrum,
    write_region_csv,
    write_spectrum_csv,
)
from .model import (
    FeedbackSpec,
    Population,
    RegionParams,
    ValidationError,
    max_isolated_clusters,
)
from .pde import flux_residual, mass, steady_profile, write_profile_csv
from .returnmap import (
    analytic_F_k2,
    as_piecewise,
    compose,
    fixed_points,
    numeric_F,
    write_return_map_csv,
)
from .simulate import (
    NoiseSpec,
    simulate_exact,
    simulate_sde,
    write_events_csv,
    write_trajectory_csv,
)

_DEFAULTS = {
    "simulate": {
        "engine": "exact",
        "n": 200,
        "s": 0.25,
        "r": 0.75,
        "feedback": {"kind": "linear", "gamma": -0.6},
        "cycles": 10.0,
        "sigma": 1e-6,
        "dt": 0.02,
        "initial": "random",
        "sample_every": 1,
    },
    "sweep-fig4": {
        "gamma": 0.6,
        "n": 1000,
        "points": 60,
        "cycles": 100.0,
        "sigma": 1e-6,
        "dt": 0.02,
        "bins": 120,
        "occupancy_threshold": 2.0,
        "lo": 1.0,
        "hi": 6.0,
    },
    "retmap": {
        "s": 0.2,
        "r": 0.6,
        "alpha": 0.5,
        "grid": 1000,
    },
    "cyclic": {
        "k_min": 2,
        "k_max": 8,
        "beta_lo": -0.5,
        "beta_hi": 0.5,
        "beta_points": 50,
        "region_grid": 120,
    },
    "pde-steady": {
        "c": 1.0,
        "s": 0.25,
        "r": 0.75,
        "feedback": {"kind": "linear", "gamma": 0.6},
        "grid": 512,
    },
}


def _feedback_from_config(cfg) -> FeedbackSpec:
    kind = cfg.get("kind", "linear")
    if kind == "linear":
        return FeedbackSpec.linear(cfg["gamma"])
    if kind == "hill":
        return FeedbackSpec.hill(cfg["gamma"], cfg["theta"], cfg["h"])
    if kind == "tabulated":
        return FeedbackSpec.tabulated(cfg["points"])
    raise ValidationError(f"unknown feedback kind {kind!r}")


def _load_config(path, command: str, overrides: dict) -> dict:
    cfg = dict(_DEFAULTS[command])
    if path is not None:
        with open(path) as fh:
            user = json.load(fh)
        for key, value in user.items():
            if key not in cfg:
                raise ValidationError(f"unknown config key {key!r} for {command}")
            cfg[key] = value
    cfg.update(overrides)
    return cfg


def _write_metadata(out: Path, command: str, cfg: dict, seed: int) -> None:
    blob = json.dumps(cfg, sort_keys=True).encode()
    meta = {
        "tool": "rscycle",
        "version": __version__,
        "command": command,
        "seed": seed,
        "config": cfg,
        "config_hash": hashlib.sha256(blob).hexdigest(),
    }
    with open(out / "metadata.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_simulate(cfg: dict, seed: int, out: Path, threads: int) -> int:
    rp = RegionParams(s=cfg["s"], r=cfg["r"])
    fs = _feedback_from_config(cfg["feedback"])
    rng = np.random.default_rng(seed)
    n = int(cfg["n"])
    initial = cfg["initial"]
    if initial == "random":
        phases = np.sort(rng.random(n))
    elif initial == "uniform":
        phases = np.arange(n) / n
    else:
        phases = np.asarray(initial, dtype=float)
    pop = Population(phases)
    duration = float(cfg["cycles"])
    if cfg["engine"] == "exact":
        traj = simulate_exact(pop, rp, fs, duration)
        write_events_csv(traj, out / "events.csv")
    elif cfg["engine"] == "sde":
        traj = simulate_sde(
            pop, rp, fs, NoiseSpec(sigma=cfg["sigma"], dt=cfg["dt"]),
            duration, seed=rng, sample_every=int(cfg["sample_every"]),
        )
    else:
        raise ValidationError(f"unknown engine {cfg['engine']!r}")
    write_trajectory_csv(traj, out / "trajectory.csv")
    return 0


def _sweep_point(args):
    index, value, cfg, seed = args
    w = 1.0 / value
    rp = RegionParams(s=w / 2.0, r=1.0 - w / 2.0)
    fs = FeedbackSpec.linear(cfg["gamma"])
    M = max_isolated_clusters(rp)
    rng = np.random.default_rng([seed, index])
    n = int(cfg["n"])
    pop = Population(rng.random(n))
    steps_total = int(round(cfg["cycles"] / cfg["dt"]))
    traj = simulate_sde(
        pop, rp, fs, NoiseSpec(sigma=cfg["sigma"], dt=cfg["dt"]),
        float(cfg["cycles"]), seed=rng, sample_every=steps_total,
    )
    N = count_clusters_histogram(
        traj.final_population(), bins=int(cfg["bins"]),
        occupancy_threshold=cfg["occupancy_threshold"],
    )
    if N == 0:
        verdict = "none"
    elif N <= M:
        verdict = "le_M"
    else:
        verdict = "ge_M_plus_1"
    return index, (value, M, N, verdict)


def cmd_sweep_fig4(cfg: dict, seed: int, out: Path, threads: int) -> int:
    points = int(cfg["points"])
    values = np.linspace(cfg["lo"], cfg["hi"], points + 1)[1:]
    jobs = [(i, float(v), cfg, seed) for i, v in enumerate(values)]
    if threads > 1:
        with multiprocessing.Pool(threads) as pool:
            results = list(pool.imap(_sweep_point, jobs))
    else:
        results = [_sweep_point(job) for job in jobs]
    results.sort(key=lambda item: item[0])
    write_sweep_csv([row for _, row in results], out / "sweep.csv")
    return 0


def cmd_retmap(cfg: dict, seed: int, out: Path, threads: int) -> int:
    rp = RegionParams(s=cfg["s"], r=cfg["r"])
    alpha = float(cfg["alpha"])
    if alpha == 0.0:
        raise ValidationError("alpha = 0 gives the degenerate involution; nothing to map")
    F = as_piecewise(rp, alpha)
    F2 = compose(F, 2)
    xs = np.linspace(0.0, 1.0, int(cfg["grid"]))
    write_return_map_csv(xs, F(xs), F2(xs), out / "return_map.csv")

    rep = fixed_points(F2)
    with open(out / "fixed_points.json", "w") as fh:
        json.dump(rep.to_jsonable(), fh, indent=2, sort_keys=True)
        fh.write("\n")

    fs = saturating_feedback(2, alpha)
    with open(out / "agreement.csv", "w") as fh:
        fh.write("x,F_analytic,F_numeric,abs_diff\n")
        for x in xs:
            ana = analytic_F_k2(float(x), rp, alpha)
            num, _ = numeric_F(np.array([float(x)]), rp, fs)
            fh.write(
                f"{x:.17g},{ana:.17g},{num[0]:.17g},{abs(ana - num[0]):.17g}\n"
            )
    return 0


def cmd_cyclic(cfg: dict, seed: int, out: Path, threads: int) -> int:
    spectrum_rows = []
    betas = np.linspace(cfg["beta_lo"], cfg["beta_hi"], int(cfg["beta_points"]))
    for k in range(int(cfg["k_min"]), int(cfg["k_max"]) + 1):
        # band-midpoint geometry with |R| = |S| so that k = M + 1
        w = 1.0 / (k - 0.5)
        rp = RegionParams(s=w / 2.0, r=1.0 - w / 2.0)
        for beta in betas:
            if beta == 0.0:
                continue
            case = classify_case(rp, k, float(beta))
            d = cyclic_spacing(case, rp, k, float(beta))
            rep = spectrum(k, float(beta), case)
            spectrum_rows.append(
                (k, float(beta), case.value, d, rep.spectral_radius, rep.min_modulus)
            )
    write_spectrum_csv(spectrum_rows, out / "spectrum.csv")

    region_rows = []
    g = int(cfg["region_grid"])
    grid = (np.arange(g) + 0.5) / g
    for r in grid:
        for s in grid:
            if not (0.0 < s < r < 1.0):
                continue
            rp = RegionParams(s=float(s), r=float(r))
            k = max_isolated_clusters(rp) + 1
            case = classify_case(rp, k, 1.0 / k)
            region_rows.append((float(r), float(s), k, case.value))
    write_region_csv(region_rows, out / "regions.csv")
    return 0


def cmd_pde(cfg: dict, seed: int, out: Path, threads: int) -> int:
    rp = RegionParams(s=cfg["s"], r=cfg["r"])
    fs = _feedback_from_config(cfg["feedback"])
    profile = steady_profile(cfg["c"], rp, fs)
    write_profile_csv(profile, out / "profile.csv", grid=int(cfg["grid"]))
    resid = flux_residual(profile)
    if resid > 1e-12:
        raise CertificateError(f"steady profile flux residual {resid:.3e}")
    with open(out / "summary.json", "w") as fh:
        json.dump(
            {
                "c": profile.c,
                "on_r_level": profile.on_r_level,
                "mass": mass(profile),
                "flux_residual": resid,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "sweep-fig4": cmd_sweep_fig4,
    "retmap": cmd_retmap,
    "cyclic": cmd_cyclic,
    "pde-steady": cmd_pde,
}


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="JSON config file")
    common.add_argument("--seed", type=int, default=0, help="master RNG seed")
    common.add_argument("--out", type=str, default=".", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker pool size")

    parser = argparse.ArgumentParser(
        prog="rscycle",
        description="Simulation and stability analysis of cycling populations "
        "with region-triggered feedback.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common],
                   help="run one trajectory (exact or stochastic engine)")
    p_sweep = sub.add_parser("sweep-fig4", parents=[common],
                             help="cluster-count sweep against region size")
    p_sweep.add_argument("--paper-scale", action="store_true",
                         help="full-scale protocol (n=5000, 100 sweep points)")
    sub.add_parser("retmap", parents=[common],
                   help="two-cluster return map, fixed points, agreement dump")
    sub.add_parser("cyclic", parents=[common],
                   help="cyclic-solution case regions and stability spectra")
    sub.add_parser("pde-steady", parents=[common],
                   help="steady transport profile of the continuum limit")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    overrides = {}
    if getattr(ns, "paper_scale", False):
        overrides = {"n": 5000, "points": 100}
    try:
        cfg = _load_config(ns.config, ns.command, overrides)
        out = Path(ns.out)
        out.mkdir(parents=True, exist_ok=True)
        code = _COMMANDS[ns.command](cfg, ns.seed, out, max(1, ns.threads))
        _write_metadata(out, ns.command, cfg, ns.seed)
        return code
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except CertificateError as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
