"""Command-line driver: campaigns, paired comparisons, coverage exports.

Verbs:
    run       execute a campaign from a TOML config
    compare   run paired annealer and continuous-baseline arms
    coverage  export objective-space histograms and front scatters
    hv        compute the hypervolume of a front CSV
    bench     micro-benchmark hypervolume and acquisition throughput

Exit codes: 0 success, 1 runtime failure, 2 usage/config error. All file
outputs are byte-reproducible from the same config and seeds; wall-clock
readings live only in the manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from moboa import __version__
from moboa._svg import line_chart
from moboa.campaign import (
    CampaignConfig,
    CampaignResult,
    OptimizerSpec,
    config_from_dict,
    run as run_campaign,
)
from moboa.core import ConfigurationError, MoboaError
from moboa.hypervolume import hv as hv_exact

ENV_SEED = "MOBOA_SEED"


class CliError(click.ClickException):
    """Usage/config error mapped to exit code 2."""

    exit_code = 2


def _load_raw_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise CliError(f"config file not found: {path}")
    try:
        with open(p, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise CliError(f"cannot parse {path}: {exc}") from exc


def _parse_override_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _apply_overrides(raw: dict, overrides: tuple[str, ...]) -> None:
    for item in overrides:
        if "=" not in item:
            raise CliError(f"override must look like section.key=value, got {item!r}")
        dotted, _, value = item.partition("=")
        keys = dotted.strip().split(".")
        node = raw
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise CliError(f"override path {dotted!r} crosses a non-table value")
        node[keys[-1]] = _parse_override_value(value.strip())


def _resolve_seeds(raw: dict, seeds_flag: str | None) -> None:
    campaign = raw.setdefault("campaign", {})
    if seeds_flag is not None:
        try:
            campaign["seeds"] = [int(s) for s in seeds_flag.split(",") if s.strip()]
        except ValueError as exc:
            raise CliError(f"--seeds must be comma-separated integers: {exc}") from exc
        return
    if "seeds" in campaign:
        return  # explicit config wins over the environment
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            campaign["seeds"] = [int(env)]
        except ValueError as exc:
            raise CliError(f"{ENV_SEED} must be an integer, got {env!r}") from exc


def _build_config(raw: dict) -> CampaignConfig:
    try:
        return config_from_dict(raw)
    except ConfigurationError as exc:
        raise CliError(str(exc)) from exc


def _config_hash(config_dict: dict) -> str:
    canonical = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _write_trace_csv(path: Path, trace: list[tuple[int, float]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "hypervolume"])
        for it, value in trace:
            writer.writerow([it, repr(float(value))])


def _write_aggregate_csv(path: Path, aggregate) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "mean", "min", "max"])
        for it, mean, lo, hi in aggregate:
            writer.writerow([it, repr(float(mean)), repr(float(lo)), repr(float(hi))])


def _write_result_json(path: Path, result: CampaignResult) -> None:
    with open(path, "w") as fh:
        json.dump(result.canonical_dict(), fh, sort_keys=True)


def _write_manifest(out_dir: Path, payload: dict) -> None:
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)


def _arm_outputs(out_dir: Path, result: CampaignResult, arm: str | None) -> list[str]:
    suffix = "" if arm is None else f"_{arm}"
    prefix = "trace" if arm is None else arm
    written = []
    for seed_result in result.seed_results:
        name = f"{prefix}_seed{seed_result.seed}.csv"
        _write_trace_csv(out_dir / name, seed_result.hv_trace)
        written.append(name)
    name = f"aggregate{suffix}.csv"
    _write_aggregate_csv(out_dir / name, result.aggregate)
    written.append(name)
    name = f"result{suffix}.json"
    _write_result_json(out_dir / name, result)
    written.append(name)
    return written


def _fail_manifest(out_dir: Path, config_dict: dict | None, error: Exception, outputs: list[str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(
        out_dir,
        {
            "schema_version": 1,
            "tool_version": __version__,
            "success": False,
            "error": f"{type(error).__name__}: {error}",
            "config": config_dict,
            "config_hash": None if config_dict is None else _config_hash(config_dict),
            "outputs": outputs,
            "wall_clock": {},
        },
    )


@click.group()
@click.version_option(version=__version__, prog_name="moboa")
def main() -> None:
    """Multi-objective Bayesian optimization over discrete candidate sets."""


@main.command("run")
@click.option("--config", "config_path", required=True, help="TOML campaign config.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory.")
@click.option("--override", "overrides", multiple=True, help="dotted.path=value config override.")
@click.option("--seeds", "seeds_flag", default=None, help="Comma-separated seed list.")
@click.option("--threads", default=1, show_default=True, help="Concurrent seed workers.")
def cmd_run(config_path, out_dir, overrides, seeds_flag, threads) -> None:
    """Run one campaign and write traces, aggregate, SVG and manifest."""
    raw = _load_raw_config(config_path)
    _apply_overrides(raw, overrides)
    _resolve_seeds(raw, seeds_flag)
    config = _build_config(raw)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []
    t_start = time.perf_counter()
    try:
        result = run_campaign(config, n_workers=threads)
        written += _arm_outputs(out, result, arm=None)
        svg = line_chart(
            [
                (
                    config.optimizer.kind,
                    [row[0] for row in result.aggregate],
                    [row[1] for row in result.aggregate],
                )
            ],
            title=f"{config.problem.name}: mean hypervolume",
            x_label="iteration",
            y_label="hypervolume",
        )
        (out / "convergence.svg").write_text(svg)
        written.append("convergence.svg")
    except MoboaError as exc:
        _fail_manifest(out, None, exc, written)
        click.echo(f"runtime failure: {exc}", err=True)
        sys.exit(1)
    failed = [r.seed for r in result.seed_results if r.error is not None]
    _write_manifest(
        out,
        {
            "schema_version": 1,
            "tool_version": __version__,
            "success": not failed,
            "failed_seeds": failed,
            "config": result.config_dict,
            "config_hash": _config_hash(result.config_dict),
            "outputs": sorted(written),
            "wall_clock": {"total": time.perf_counter() - t_start, **result.timings},
        },
    )
    if failed:
        click.echo(f"seeds failed: {failed}", err=True)
        sys.exit(1)
    click.echo(f"wrote {len(written) + 1} files to {out}")


@main.command("compare")
@click.option("--config", "config_path", required=True, help="TOML config declaring both arms.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--override", "overrides", multiple=True)
@click.option("--seeds", "seeds_flag", default=None)
@click.option("--threads", default=1, show_default=True)
def cmd_compare(config_path, out_dir, overrides, seeds_flag, threads) -> None:
    """Run paired annealer and baseline arms on shared randomness."""
    raw = _load_raw_config(config_path)
    _apply_overrides(raw, overrides)
    _resolve_seeds(raw, seeds_flag)
    if "optimizer" not in raw:
        raise CliError("compare needs an [optimizer] table (the annealer arm)")
    if "baseline_optimizer" not in raw:
        raise CliError("compare needs a [baseline_optimizer] table (the continuous arm)")
    if raw["optimizer"].get("kind", "sa_sequential") == "baseline":
        raise CliError("[optimizer] must be an annealer kind, not 'baseline'")

    sa_config = _build_config(raw)
    baseline_raw = dict(raw)
    baseline_raw["optimizer"] = {**raw["baseline_optimizer"], "kind": "baseline"}
    baseline_config = _build_config(baseline_raw)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []
    t_start = time.perf_counter()
    try:
        sa_result = run_campaign(sa_config, n_workers=threads)
        baseline_result = run_campaign(baseline_config, n_workers=threads)
        written += _arm_outputs(out, sa_result, arm="sa")
        written += _arm_outputs(out, baseline_result, arm="baseline")
        with open(out / "compare.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["iteration", "sa_mean", "sa_min", "sa_max", "baseline_mean", "baseline_min", "baseline_max"]
            )
            for sa_row, base_row in zip(sa_result.aggregate, baseline_result.aggregate):
                writer.writerow(
                    [sa_row[0]] + [repr(float(v)) for v in sa_row[1:]] + [repr(float(v)) for v in base_row[1:]]
                )
        written.append("compare.csv")
        svg = line_chart(
            [
                ("sa", [r[0] for r in sa_result.aggregate], [r[1] for r in sa_result.aggregate]),
                (
                    "baseline",
                    [r[0] for r in baseline_result.aggregate],
                    [r[1] for r in baseline_result.aggregate],
                ),
            ],
            title=f"{sa_config.problem.name}: mean hypervolume per arm",
            x_label="iteration",
            y_label="hypervolume",
        )
        (out / "convergence.svg").write_text(svg)
        written.append("convergence.svg")
    except MoboaError as exc:
        _fail_manifest(out, None, exc, written)
        click.echo(f"runtime failure: {exc}", err=True)
        sys.exit(1)

    failed = [r.seed for r in sa_result.seed_results + baseline_result.seed_results if r.error]
    _write_manifest(
        out,
        {
            "schema_version": 1,
            "tool_version": __version__,
            "success": not failed,
            "failed_seeds": failed,
            "config": sa_result.config_dict,
            "config_hash": _config_hash(sa_result.config_dict),
            "baseline_config": baseline_result.config_dict,
            "candidate_seed": sa_config.candidate_seed,
            "outputs": sorted(written),
            "wall_clock": {
                "total": time.perf_counter() - t_start,
                **{f"sa.{k}": v for k, v in sa_result.timings.items()},
                **{f"baseline.{k}": v for k, v in baseline_result.timings.items()},
            },
        },
    )
    if failed:
        click.echo(f"seeds failed: {failed}", err=True)
        sys.exit(1)
    sa_final = sa_result.aggregate[-1][1]
    base_final = baseline_result.aggregate[-1][1]
    rel = (sa_final - base_final) / abs(base_final) * 100.0 if base_final != 0 else float("inf")
    click.echo(f"final mean hypervolume: sa={sa_final:.6g} baseline={base_final:.6g}")
    click.echo(f"relative difference (sa vs baseline): {rel:+.2f}%")


def _load_arm_results(result_dir: Path) -> dict[str, dict]:
    arms: dict[str, dict] = {}
    single = result_dir / "result.json"
    if single.exists():
        with open(single) as fh:
            arms["run"] = json.load(fh)
    for arm in ("sa", "baseline"):
        path = result_dir / f"result_{arm}.json"
        if path.exists():
            with open(path) as fh:
                arms[arm] = json.load(fh)
    return arms


@main.command("coverage")
@click.argument("result_dir", type=click.Path())
@click.argument("out_dir", type=click.Path())
@click.option("--bins", default=30, show_default=True)
def cmd_coverage(result_dir, out_dir, bins) -> None:
    """Export per-objective histograms and final-front scatters per arm."""
    rdir = Path(result_dir)
    arms = _load_arm_results(rdir)
    if not arms:
        raise CliError(f"no result.json or result_<arm>.json found in {result_dir}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_files = 0
    for arm, payload in arms.items():
        rows = [
            ev["objectives"]
            for seed in payload["seeds"]
            if seed["error"] is None
            for ev in seed["evaluations"]
        ]
        if not rows:
            raise CliError(f"arm {arm!r} contains no evaluations")
        objectives = np.array(rows, dtype=np.float64)
        m = objectives.shape[1]
        for j in range(m):
            column = objectives[:, j]
            lo, hi = float(column.min()), float(column.max())
            if lo == hi:
                lo, hi = lo - 0.5, hi + 0.5
            counts, edges = np.histogram(column, bins=bins, range=(lo, hi))
            with open(out / f"hist_{arm}_f{j + 1}.csv", "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["bin_left", "bin_right", "count"])
                for b in range(bins):
                    writer.writerow([repr(float(edges[b])), repr(float(edges[b + 1])), int(counts[b])])
            n_files += 1
        with open(out / f"scatter_{arm}.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["seed"] + [f"f{j + 1}" for j in range(m)])
            for seed in payload["seeds"]:
                if seed["error"] is not None or seed["front_native"] is None:
                    continue
                for point in seed["front_native"]:
                    writer.writerow([seed["seed"]] + [repr(float(v)) for v in point])
        n_files += 1
    click.echo(f"wrote {n_files} files to {out}")


@main.command("hv")
@click.argument("front_csv", type=click.Path())
@click.option("--reference", required=True, help="Comma-separated reference point.")
def cmd_hv(front_csv, reference) -> None:
    """Print the exact hypervolume of a front CSV (maximize orientation)."""
    try:
        ref = np.array([float(v) for v in reference.split(",")])
    except ValueError as exc:
        raise CliError(f"--reference must be comma-separated floats: {exc}") from exc
    path = Path(front_csv)
    if not path.exists():
        raise CliError(f"front CSV not found: {front_csv}")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1 or not row:
                continue  # header
            try:
                values = [float(v) for v in row]
            except ValueError as exc:
                raise CliError(f"{front_csv}:{lineno}: {exc}") from exc
            if len(values) != ref.shape[0]:
                raise CliError(
                    f"{front_csv}:{lineno}: {len(values)} objectives, reference has {ref.shape[0]}"
                )
            rows.append(values)
    front = np.array(rows) if rows else np.empty((0, ref.shape[0]))
    click.echo(f"{hv_exact(front, ref):.12g}")


@main.command("bench")
@click.option("--repeats", default=200, show_default=True)
def cmd_bench(repeats) -> None:
    """Micro-benchmark hypervolume and acquisition throughput."""
    from moboa.acquisition import AcquisitionContext, QehviConfig, qehvi
    from moboa.benchmarks import generate_candidates, get_problem
    from moboa.core import Dataset, Evaluation, extract_front
    from moboa.gp import FitConfig, fit

    rng = np.random.default_rng(0)
    fronts = [rng.uniform(0.2, 1.0, (20, 3)) for _ in range(64)]
    hv_exact(fronts[0], np.zeros(3))  # JIT warm-up
    t0 = time.perf_counter()
    for _ in range(repeats):
        for front in fronts:
            hv_exact(front, np.zeros(3))
    hv_rate = repeats * len(fronts) / (time.perf_counter() - t0)
    click.echo(f"hv (m=3, 20 points): {hv_rate:,.0f} evals/s")

    problem = get_problem("dtlz2")
    cs = generate_candidates(problem, 500, "latin_hypercube", seed=1)
    chosen = rng.choice(500, 14, replace=False)
    dataset = Dataset(
        problem.d,
        problem.m,
        tuple(
            Evaluation(cs.points[i], problem.evaluate_canonical(cs.points[i]), int(i))
            for i in chosen
        ),
    )
    models = [
        fit(dataset, j, FitConfig(n_restarts=2, max_iters=50), (problem.lower, problem.upper))
        for j in range(problem.m)
    ]
    front = extract_front(dataset)
    reference = front.points.min(axis=0) - 0.1 * np.ptp(front.points, axis=0)
    ctx = AcquisitionContext(
        models, front, QehviConfig.create(reference, q=4, m=3, n_mc_samples=128, seed=2), cs
    )
    qehvi(ctx, np.array([0, 1, 2, 3]))
    t0 = time.perf_counter()
    for i in range(repeats):
        qehvi(ctx, np.array([i % 500, (i + 31) % 500, (i + 77) % 500, (i + 201) % 500]))
    qehvi_rate = repeats / (time.perf_counter() - t0)
    click.echo(f"qehvi (S=128, q=4, m=3): {qehvi_rate:,.0f} evals/s")


if __name__ == "__main__":
    main()
