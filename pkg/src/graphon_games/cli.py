"""Config-driven command line entry point.

Every command is described by a JSON config (nested key/value) and emits a
``manifest.json`` echoing the fully resolved config plus the toolkit version;
re-running from an emitted manifest reproduces all outputs byte-identically.
Flags override config fields.  Stochastic commands require an explicit seed;
module seeds are derived from the root seed by labeled hashing, so adding a
stage never shifts another stage's stream.

Commands: kernel-norms, netgen, lq-solve, lq-verify, mfg-solve,
arena-simulate, nashgap-sweep, emp-convergence, and ``run --config`` for the
archival form.  ``lq solve``-style two-token spellings are accepted as
aliases for the hyphenated names.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .initial import InitialLaw, deterministic_map, independent_law
from .kernels import (
    Kernel,
    LabelGrid,
    bilinear_kernel,
    constant_kernel,
    cut_norm_step,
    degree,
    is_constant_degree,
    l1_norm,
    l2_norm,
    min_kernel,
    opnorm_inf_to_1,
    psd_check,
    step_kernel,
    two_block_kernel,
)
from .lq import (
    LQParams,
    LQSolvabilityError,
    katz_centrality,
    solve_lq,
    terminal_label_state_measure,
    verify_mckean_vlasov,
)
from .measures import LabelStateMeasure
from .mfg import make_model, solve_fixed_point
from .networks import (
    InteractionMatrix,
    LabelAssignment,
    condition_A,
    cut_distance_to,
    erdos_renyi,
    laplacian_matrix,
    load_labels_csv,
    load_matrix_text,
    sample_from_graphon,
    save_labels_csv,
    save_matrix_text,
    strong_operator_distance,
)
from .nashgap import (
    empirical_measure_convergence,
    er_normalized_generator,
    gap_sweep,
    weighted_sample_generator,
)

COMMANDS = (
    "kernel-norms",
    "netgen",
    "lq-solve",
    "lq-verify",
    "mfg-solve",
    "arena-simulate",
    "nashgap-sweep",
    "emp-convergence",
)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Spec parsing
# ---------------------------------------------------------------------------


def kernel_from_spec(spec, base: Path) -> Kernel:
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("kernel spec must be an object with a 'type' field")
    kind = spec["type"]
    if kind == "constant":
        return constant_kernel(float(spec["p"]))
    if kind == "two_block":
        return two_block_kernel(*[float(v) for v in spec["values"]])
    if kind == "min":
        return min_kernel()
    if kind == "bilinear":
        return bilinear_kernel(spec["values"])
    if kind == "step":
        if "path" in spec:
            return step_kernel(np.loadtxt(base / spec["path"], ndmin=2))
        return step_kernel(spec["values"])
    raise ConfigError(f"unknown kernel type {kind!r}")


def kernel_to_spec(kernel: Kernel) -> dict:
    if kernel.kind == "constant":
        return {"type": "constant", "p": kernel.params[0]}
    if kernel.kind == "two_block":
        return {"type": "two_block", "values": list(kernel.params)}
    if kernel.kind == "min":
        return {"type": "min"}
    if kernel.kind == "bilinear":
        return {"type": "bilinear", "values": kernel.matrix.tolist()}
    return {"type": "step", "values": kernel.matrix.tolist()}


def initial_from_spec(spec) -> InitialLaw:
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("initial-law spec must be an object with a 'type' field")
    kind = spec["type"]
    if kind == "map_linear":
        slope = float(spec.get("slope", 1.0))
        intercept = float(spec.get("intercept", 0.0))
        return deterministic_map(lambda u: slope * u + intercept)
    if kind == "uniform":
        return independent_law("uniform", float(spec["lo"]), float(spec["hi"]))
    if kind == "trunc_normal":
        return independent_law(
            "trunc_normal",
            float(spec["mean"]),
            float(spec["sd"]),
            float(spec["lo"]),
            float(spec["hi"]),
        )
    if kind == "point":
        return independent_law("point", float(spec["x0"]))
    raise ConfigError(f"unknown initial-law type {kind!r}")


def _require(config: dict, *keys):
    for key in keys:
        if key not in config:
            raise ConfigError(f"missing required config field {key!r}")


def _require_seed(config: dict):
    if "seed" not in config or config["seed"] is None:
        raise ConfigError("stochastic commands require an explicit 'seed'")
    return int(config["seed"])


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out: Path, config: dict) -> None:
    _write_json(out / "manifest.json", {"config": config, "version": __version__})


# ---------------------------------------------------------------------------
# Command runners
# ---------------------------------------------------------------------------


def _run_kernel_norms(config: dict, out: Path, base: Path) -> None:
    kernel = kernel_from_spec(config["kernel"], base)
    mode = config.get("mode", "exact")
    resolution = int(config.get("resolution", 1024))
    records = [
        {"name": "l1_norm", "value": l1_norm(kernel, resolution), "mode": "exact", "certificate": None, "resolution": resolution},
        {"name": "l2_norm", "value": l2_norm(kernel, resolution), "mode": "exact", "certificate": None, "resolution": resolution},
    ]
    if kernel.is_step and kernel.kind in ("step", "tabulated"):
        kwargs = {}
        if mode == "heuristic":
            kwargs = {"restarts": int(config.get("restarts", 64)), "seed": _require_seed(config)}
        cut = cut_norm_step(kernel.matrix, mode=mode, **kwargs)
        op = opnorm_inf_to_1(kernel.matrix, mode=mode, **kwargs)
        for res in (cut, op):
            rec = res.as_record()
            rec["resolution"] = kernel.matrix.shape[0]
            records.append(rec)
    grid = LabelGrid(int(config.get("grid_cells", 64)))
    d = degree(kernel, grid.midpoints, resolution)
    flag, eigmin = psd_check(kernel, grid)
    summary = {
        "degree_min": float(np.min(d)),
        "degree_max": float(np.max(d)),
        "constant_degree": is_constant_degree(kernel, float(config.get("degree_tol", 1e-9)), grid),
        "psd": bool(flag),
        "psd_min_eigenvalue": eigmin,
        "resolution": resolution,
    }
    _write_json(out / "norms.json", {"records": records, "summary": summary})


def _run_netgen(config: dict, out: Path, base: Path) -> None:
    _require(config, "generator")
    gen = config["generator"]
    kind = gen.get("type")
    labels = None
    if kind == "erdos_renyi":
        xi = erdos_renyi(
            int(gen["n"]), float(gen["p"]), bool(gen.get("normalize", False)), _require_seed(config)
        )
    elif kind == "sample":
        kernel = kernel_from_spec(gen["kernel"], base)
        xi, labels = sample_from_graphon(
            kernel, int(gen["n"]), bool(gen.get("weighted", False)), _require_seed(config)
        )
    elif kind == "laplacian":
        adj = np.loadtxt(base / gen["adjacency"], ndmin=2)
        xi = laplacian_matrix(adj)
    else:
        raise ConfigError(f"unknown generator type {kind!r}")
    save_matrix_text(out / "xi.txt", xi)
    if labels is not None:
        save_labels_csv(out / "labels.csv", labels)
    diagnostics = {"n": xi.n, "provenance": xi.provenance, "condition_A": condition_A(xi)}
    if "target" in config:
        target = kernel_from_spec(config["target"], base)
        res = cut_distance_to(
            xi,
            target,
            resolution=int(config.get("resolution", 64)),
            restarts=int(config.get("restarts", 64)),
            seed=_require_seed(config),
        )
        diagnostics["cut_distance"] = res.as_record()
        diagnostics["strong_operator_gaps"] = strong_operator_distance(
            xi, target, int(config.get("resolution", 64))
        )
    _write_json(out / "diagnostics.json", diagnostics)


def _lq_params_from_config(config: dict, base: Path) -> LQParams:
    _require(config, "kernel", "c", "T", "sigma", "initial")
    return LQParams(
        c=float(config["c"]),
        T=float(config["T"]),
        sigma=float(config["sigma"]),
        kernel=kernel_from_spec(config["kernel"], base),
        initial=initial_from_spec(config["initial"]),
    )


def _run_lq_solve(config: dict, out: Path, base: Path) -> None:
    params = _lq_params_from_config(config, base)
    L = int(config.get("L", 64))
    sol = solve_lq(params, L)
    sol_obj = {
        "L": L,
        "M": sol.M.tolist(),
        "katz_parameter": sol.katz_parameter,
        "w_l2_grid": sol.w_l2_grid,
        "solvability_margin": sol.solvability_margin,
        "params": {
            "c": params.c,
            "T": params.T,
            "sigma": params.sigma,
            "kernel": kernel_to_spec(params.kernel),
            "initial": config["initial"],
        },
    }
    _write_json(out / "sol.json", sol_obj)
    _write_csv(
        out / "M_table.csv",
        ["label", "M"],
        zip(sol.grid.midpoints.tolist(), sol.M.tolist()),
    )
    centrality = katz_centrality(params.kernel, sol.katz_parameter, L)
    _write_csv(
        out / "katz.csv",
        ["label", "centrality"],
        zip(sol.grid.midpoints.tolist(), centrality.tolist()),
    )


def _load_solution(path: Path):
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    p = obj["params"]
    params = LQParams(
        c=float(p["c"]),
        T=float(p["T"]),
        sigma=float(p["sigma"]),
        kernel=kernel_from_spec(p["kernel"], path.parent),
        initial=initial_from_spec(p["initial"]),
    )
    sol = solve_lq(params, int(obj["L"]))
    return sol, params


def _run_lq_verify(config: dict, out: Path, base: Path) -> None:
    _require(config, "sol")
    seed = _require_seed(config)
    sol, params = _load_solution(base / config["sol"])
    report = verify_mckean_vlasov(
        sol,
        params,
        paths=int(config.get("paths", 100000)),
        dt=float(config.get("dt", 0.005)),
        seed=seed,
        n_probes=int(config.get("n_probes", 16)),
    )
    _write_csv(
        out / "report.csv",
        ["label", "target", "estimate", "stderr", "residual"],
        zip(
            report.probe_labels.tolist(),
            report.target.tolist(),
            report.estimate.tolist(),
            report.stderr.tolist(),
            report.residual.tolist(),
        ),
    )


def _run_mfg_solve(config: dict, out: Path, base: Path) -> None:
    _require(config, "model", "kernel", "initial")
    model_cfg = dict(config["model"])
    name = model_cfg.pop("name")
    model = make_model(
        name,
        kernel_from_spec(config["kernel"], base),
        initial_from_spec(config["initial"]),
        **model_cfg,
    )
    field = solve_fixed_point(
        model,
        K=int(config.get("K", 100)),
        L=int(config.get("L", 8)),
        J=int(config.get("J", 100)),
        theta=float(config.get("theta", 0.5)),
        max_iter=int(config.get("max_iter", 60)),
        tol=float(config.get("tol", 1e-3)),
        T=float(config.get("T", 1.0)),
    )
    np.savez(
        out / "field.npz",
        times=field.times,
        x_grid=field.x_grid,
        v=field.v,
        alpha=field.alpha,
        rho=field.rho,
    )
    diag = field.diagnostics
    _write_json(
        out / "field_meta.json",
        {
            "shapes": {"v": list(field.v.shape)},
            "labels": field.grid.midpoints.tolist(),
            "converged": diag.converged,
            "iterations": diag.iterations,
            "gap_history": diag.gap_history,
            "boundary_mass": diag.boundary_mass,
            "monotonicity_psd": diag.monotonicity_psd,
            "non_convergence_flag": not diag.converged,
        },
    )
    mid = field.grid.ncells // 2
    _write_csv(
        out / "control_slice.csv",
        ["t", "x", "alpha"],
        (
            (float(field.times[k]), float(field.x_grid[j]), float(field.alpha[k, mid, j]))
            for k in range(0, field.times.size, max(1, field.times.size // 20))
            for j in range(field.x_grid.size)
        ),
    )


def _run_arena_simulate(config: dict, out: Path, base: Path) -> None:
    from .arena import lq_profile, simulate

    _require(config, "xi", "labels", "profile")
    seed = _require_seed(config)
    xi = load_matrix_text(base / config["xi"])
    labels = load_labels_csv(base / config["labels"], scheme=config.get("label_scheme", "midpoint"))
    profile_spec = config["profile"]
    if isinstance(profile_spec, str) and profile_spec.startswith("lq:"):
        sol, params = _load_solution(base / profile_spec[3:])
    else:
        raise ConfigError("profile must be 'lq:<sol.json>'")
    profile = lq_profile(sol, labels)
    result = simulate(
        xi,
        labels,
        profile,
        params,
        paths=int(config.get("paths", 20000)),
        dt=float(config.get("dt", 0.005)),
        seed=seed,
        snapshot_times=tuple(config.get("snapshot_times", ())),
        store_per_path=False,
    )
    _write_csv(
        out / "objectives.csv",
        ["i", "label", "J", "stderr"],
        (
            (i, float(labels.labels[i]), float(result.objectives[i]), float(result.stderr[i]))
            for i in range(xi.n)
        ),
    )
    for t, states in sorted(result.snapshots.items()):
        means = (states @ xi.entries.T) / xi.n
        _write_csv(
            out / f"snapshot_t{t:g}.csv",
            ["i", "mean_state", "mean_nbhd"],
            (
                (i, float(states[:, i].mean()), float(means[:, i].mean()))
                for i in range(xi.n)
            ),
        )


def _run_nashgap_sweep(config: dict, out: Path, base: Path) -> None:
    _require(config, "lq", "generator", "n_list", "label_scheme")
    seed = _require_seed(config)
    params = _lq_params_from_config(config["lq"], base)
    gen_cfg = config["generator"]
    if gen_cfg["type"] == "er_normalized":
        generator = er_normalized_generator(float(gen_cfg["p"]))
    elif gen_cfg["type"] == "weighted_sample":
        generator = weighted_sample_generator(params.kernel)
    else:
        raise ConfigError(f"unknown generator {gen_cfg['type']!r}")
    table = gap_sweep(
        params,
        generator,
        [int(n) for n in config["n_list"]],
        config["label_scheme"],
        trials=int(config.get("trials", 8)),
        paths=int(config.get("paths", 1000)),
        dt=float(config.get("dt", 0.01)),
        seed=seed,
        L=int(config.get("L", 64)),
        thresholds=tuple(config.get("thresholds", (0.05,))),
    )
    rows = []
    for n, trial, rep in table.rows():
        rows.append(
            (n, trial, "per_trial", float(rep.mean_eps), float(rep.max_eps), float(rep.mean_eps_stderr))
        )
    for stat in ("mean", "max"):
        for n, (m, se) in table.aggregate(stat).items():
            rows.append((n, -1, f"aggregate_{stat}", float(m), float(m), float(se)))
    _write_csv(out / "report.csv", ["n", "trial", "kind", "mean_eps", "max_eps", "stderr"], rows)
    per_player = []
    for n, trial, rep in table.rows():
        for i in range(rep.n):
            per_player.append(
                (n, trial, i, float(rep.eps_hat[i]), float(rep.stderr[i]))
            )
    _write_csv(out / "per_player.csv", ["n", "trial", "i", "eps_hat", "stderr"], per_player)
    _write_json(out / "caveat.json", {"estimator": "lq_closed_form", "caveat": table.reports[(table.n_list[0], 0)].caveat})


def _run_emp_convergence(config: dict, out: Path, base: Path) -> None:
    _require(config, "kernel", "lq", "n_list")
    seed = _require_seed(config)
    kernel = kernel_from_spec(config["kernel"], base)
    params = _lq_params_from_config(config["lq"], base)
    sol = solve_lq(params, int(config.get("L", 16)))
    mu = terminal_label_state_measure(sol, params, x_cells=int(config.get("x_cells", 64)))
    table = empirical_measure_convergence(
        kernel,
        mu,
        [int(n) for n in config["n_list"]],
        trials=int(config.get("trials", 16)),
        seed=seed,
        label_scheme=config.get("label_scheme", "midpoint"),
    )
    _write_csv(
        out / "emp_convergence.csv",
        ["n", "mean_bl", "stderr"],
        ((n, v[0], v[1]) for n, v in sorted(table.items())),
    )


_RUNNERS = {
    "kernel-norms": _run_kernel_norms,
    "netgen": _run_netgen,
    "lq-solve": _run_lq_solve,
    "lq-verify": _run_lq_verify,
    "mfg-solve": _run_mfg_solve,
    "arena-simulate": _run_arena_simulate,
    "nashgap-sweep": _run_nashgap_sweep,
    "emp-convergence": _run_emp_convergence,
}


def run_config(config: dict, out_dir, base_dir=None) -> int:
    """Execute one command config; returns the process exit status."""
    out = Path(out_dir)
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    try:
        if "command" not in config:
            raise ConfigError("config must name a 'command'")
        command = config["command"]
        if command not in _RUNNERS:
            raise ConfigError(f"unknown command {command!r}; choose from {COMMANDS}")
        out.mkdir(parents=True, exist_ok=True)
        _RUNNERS[command](config, out, base)
        _write_manifest(out, config)
        return 0
    except (ConfigError, LQSolvabilityError, ValueError, OSError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, LQSolvabilityError):
            record["w_l2"] = exc.w_l2
            record["bound"] = exc.bound
            record["condition"] = "||W||_L2 < 1 + 1/(cT)"
        try:
            out.mkdir(parents=True, exist_ok=True)
            _write_json(out / "error.json", record)
        except OSError:
            pass
        print(json.dumps(record), file=sys.stderr)
        return 2


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

_TWO_TOKEN_ALIASES = {
    ("lq", "solve"): "lq-solve",
    ("lq", "verify"): "lq-verify",
    ("arena", "simulate"): "arena-simulate",
    ("nashgap", "sweep"): "nashgap-sweep",
    ("mfg", "solve"): "mfg-solve",
    ("emp", "convergence"): "emp-convergence",
}


def _normalize_argv(argv: list[str]) -> list[str]:
    if len(argv) >= 2 and (argv[0], argv[1]) in _TWO_TOKEN_ALIASES:
        return [_TWO_TOKEN_ALIASES[(argv[0], argv[1])]] + argv[2:]
    return argv


_FLAG_FIELDS = {
    # flat flags accepted by every subcommand; override config fields
    "seed": int,
    "paths": int,
    "dt": float,
    "L": int,
    "K": int,
    "J": int,
    "T": float,
    "c": float,
    "sigma": float,
    "mode": str,
    "restarts": int,
    "trials": int,
    "resolution": int,
    "theta": float,
    "tol": float,
    "max_iter": int,
    "xi": str,
    "labels": str,
    "profile": str,
    "sol": str,
    "kernel": str,
    "n_probes": int,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphon-games",
        description="Graphon-game equilibria and epsilon-Nash verification toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="execute a JSON config (or an emitted manifest)")
    runp.add_argument("--config", required=True)
    runp.add_argument("--out", default=None)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config; flags override its fields")
        p.add_argument("--out", required=True)
        for flag, typ in _FLAG_FIELDS.items():
            p.add_argument(f"--{flag}", type=typ, default=None)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    argv = _normalize_argv(argv)
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "run":
        cfg_path = Path(args.config)
        with open(cfg_path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        config = obj["config"] if "config" in obj and "command" in obj.get("config", {}) else obj
        out = args.out if args.out is not None else config.get("out", "out")
        return run_config(config, out, base_dir=cfg_path.parent)

    config = {}
    base_dir = Path.cwd()
    if args.config is not None:
        cfg_path = Path(args.config)
        with open(cfg_path, "r", encoding="utf-8") as fh:
            config = json.load(fh)
        base_dir = cfg_path.parent
    config["command"] = args.command
    for flag, typ in _FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            if flag == "kernel":
                kernel_path = Path(value)
                with open(kernel_path if kernel_path.is_absolute() else base_dir / kernel_path) as fh:
                    config["kernel"] = json.load(fh)
            else:
                config[flag] = value
    return run_config(config, args.out, base_dir=base_dir)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
