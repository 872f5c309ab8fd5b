"""Command-line pipeline: compute -> fit / calibrate -> evaluate, plus trace and report.

Exit codes: 0 success, 2 validation error, 3 MCMC diagnostics failure,
4 missing artifact from an earlier step.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import core, features, generator, scoring
from .nbmodel import DiagnosticsError, McmcConfig, NbPosterior, fit_mcmc, posterior_predictive

log = logging.getLogger("collatzprob")

EXIT_VALIDATION = 2
EXIT_DIAGNOSTICS = 3
EXIT_MISSING = 4

TAU_FILE = "tau_table.ctau"
SPLIT_FILE = "split.json"
POSTERIOR_FILE = "posterior.json"
MODEL_FILES = {v: f"model_{v}.json" for v in generator.VARIANTS}
REPORT_DIR = "reports"
GEN_IDS = {"geometric": "G1", "global": "G2", "conditional8": "G3"}


@dataclass(frozen=True)
class PipelineConfig:
    n_max: int = 10_000_000
    seed: int = 123
    n_fit: int = 50_000
    n_test: int = 50_000
    k_max: int = 30
    chains: int = 2
    tune: int = 1000
    draws: int = 1000
    target_accept: float = 0.3
    s_mc: int = 40
    epsilon: float = 1e-12
    max_steps: int = 200_000
    output_dir: str = "out"

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name != "output_dir" and not v > 0:
                raise ValueError(f"{f.name} must be positive, got {v}")
        if self.n_fit + self.n_test > self.n_max:
            raise ValueError("n_fit + n_test exceeds n_max")
        if not self.target_accept < 1:
            raise ValueError("target_accept must be < 1")

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    def mcmc(self, check: bool = True) -> McmcConfig:
        return McmcConfig(
            chains=self.chains,
            tune=self.tune,
            draws=self.draws,
            seed=self.seed,
            target_accept=self.target_accept,
            check_diagnostics=check,
        )

    def gen(self) -> generator.GenConfig:
        return generator.GenConfig(max_steps=self.max_steps, seed=self.seed)


class MissingArtifact(RuntimeError):
    pass


def _dump_json(obj, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def _require(path: Path, step: str) -> Path:
    if not path.exists():
        raise MissingArtifact(f"missing {path.name}; run `collatzprob {step}` first")
    return path


def _write_meta(cfg: PipelineConfig, command: str, **extra) -> None:
    _dump_json({"command": command, "config": asdict(cfg), **extra}, cfg.out / f"run_{command}.json")


def _load_table(cfg: PipelineConfig) -> core.TauTable:
    table = core.load_tau_table(_require(cfg.out / TAU_FILE, "compute"))
    if table.n_max < cfg.n_max:
        raise MissingArtifact(f"{TAU_FILE} covers n <= {table.n_max} but n_max={cfg.n_max}; rerun compute")
    return table


def _split(cfg: PipelineConfig) -> features.SplitSpec:
    path = cfg.out / SPLIT_FILE
    want = (cfg.seed, cfg.n_max, cfg.n_fit, cfg.n_test)
    if path.exists():
        split = features.SplitSpec.load(path)
        if (split.seed, split.n_total, split.n_fit, split.n_test) == want:
            return split
    split = features.make_split(*want)
    split.save(path)
    return split


def _histogram(values, width: int = 2) -> tuple[np.ndarray, np.ndarray]:
    values = np.asarray(values, dtype=np.int64)
    edges = np.arange(0, int(values.max()) + width + 1, width)
    counts, _ = np.histogram(values, bins=edges)
    return edges[:-1], counts


# -- commands -----------------------------------------------------------------


def cmd_compute(cfg: PipelineConfig, force: bool = False, parallel: bool = False, csv_export: bool = False) -> int:
    path = cfg.out / TAU_FILE
    table = None
    if path.exists() and not force:
        try:
            head = core.read_tau_header(path)
            if head["n_max"] == cfg.n_max:
                table = core.load_tau_table(path)
                print(f"{path} is up to date (checksum {table.checksum:016x}); use --force to rebuild")
        except core.TableFormatError as exc:
            log.warning("rebuilding %s: %s", path, exc)
    if table is None:
        table = core.build_tau_table(cfg.n_max, parallel=parallel)
        core.save_tau_table(table, path)
        print(f"wrote {path} (n_max={table.n_max}, width={table.width}, checksum {table.checksum:016x})")
    stats = scoring.summarize(table)
    scoring.write_table1(stats, cfg.out / "table1.csv")
    if csv_export:
        core.export_csv(table, cfg.out / "tau.csv")
    print(
        f"tau over 1..{stats.count}: min {stats.min}, max {stats.max}, mean {stats.mean:.3f}, "
        f"var {stats.variance:.3f} (sample {stats.variance_sample:.3f}), ratio {stats.dispersion_ratio:.3f}"
    )
    _write_meta(cfg, "compute", checksum=table.checksum)
    return 0


def cmd_fit(cfg: PipelineConfig, ppc_draws: int = 1, check: bool = True) -> int:
    table = _load_table(cfg)
    split = _split(cfg)
    train = features.make_features(table, split.fit_indices)
    test = features.make_features(table, split.test_indices)
    print(f"split seed {split.seed}: {split.n_fit} fit / {split.n_test} test indices")
    try:
        post = fit_mcmc(train, cfg.mcmc(check))
    except DiagnosticsError as exc:
        exc.posterior.save(cfg.out / "posterior_failed.json")
        print(f"diagnostics failed: {exc}", file=sys.stderr)
        for name, d in exc.failures.items():
            print(f"  {name}: rhat={d['rhat']:.4f} ess={d['ess']:.1f}", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    post.save(cfg.out / POSTERIOR_FILE)
    _print_diagnostics(post)
    _write_ppc(cfg, post, test, ppc_draws)
    _write_meta(cfg, "fit", mcmc_seed=cfg.seed, ppc_seed=cfg.seed + 1, ppc_draws=ppc_draws)
    return 0


def _print_diagnostics(post: NbPosterior) -> None:
    print(f"{'param':<10} {'mean':>10} {'sd':>9} {'rhat':>7} {'ess':>7}")
    for name, d in post.diagnostics["params"].items():
        x = post.param_array(name)
        print(f"{name:<10} {x.mean():>10.4f} {x.std():>9.4f} {d['rhat']:>7.4f} {d['ess']:>7.0f}")


def _write_ppc(cfg: PipelineConfig, post: NbPosterior, test, ppc_draws: int) -> None:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed + 1)))
    reps = posterior_predictive(post, test.n, ppc_draws, rng)
    with open(cfg.out / "fig3_ppc.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "tau", *(f"ppc_{j}" for j in range(ppc_draws))])
        for n, y, row in zip(test.n.tolist(), test.tau.tolist(), reps.tolist()):
            w.writerow([n, y, *row])
    edges, obs = _histogram(test.tau)
    rep_edges = np.append(edges, edges[-1] + 2)
    rep_counts, _ = np.histogram(np.minimum(reps.ravel(), rep_edges[-1] - 1), bins=rep_edges)
    with open(cfg.out / "fig3_ppc_hist.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_left", "observed", "ppc_mean_count"])
        for e, o, r in zip(edges.tolist(), obs.tolist(), (rep_counts / ppc_draws).tolist()):
            w.writerow([e, o, r])


def cmd_calibrate(cfg: PipelineConfig) -> int:
    counts = core.collect_block_lengths(cfg.n_max, cfg.k_max)
    prov = {"counts_source": "collect_block_lengths", "n_max": cfg.n_max}
    with open(cfg.out / "block_counts.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["residue", "k", "count"])
        for r in range(8):
            for k in range(cfg.k_max):
                w.writerow([r, k + 1, int(counts[r, k])])
    models = {v: generator.calibrate(counts, v, provenance=prov) for v in generator.VARIANTS}
    for v, m in models.items():
        m.save(cfg.out / MODEL_FILES[v])
    _write_block_csvs(cfg.out, counts, models)
    print(f"calibrated on {int(counts.sum())} odd m <= {cfg.n_max} (k_max={cfg.k_max})")
    for v, m in models.items():
        p = m.pmf()
        print(f"  {v:<13} p1={p[0]:.6f} p2={p[1]:.6f} log-drift={generator.log_drift(m):+.6f}")
    _write_meta(cfg, "calibrate")
    return 0


def _write_block_csvs(out: Path, counts, models) -> None:
    k = np.arange(1, counts.shape[1] + 1)
    geo = 0.5**k
    total = counts.sum(axis=0)
    emp = total / max(1, total.sum())
    with open(out / "fig2_pk_empirical.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "count", "p_hat", "geometric"])
        for row in zip(k.tolist(), total.tolist(), emp.tolist(), geo.tolist()):
            w.writerow(row)
    g = models["global"]
    with open(out / "fig5_pk_posterior.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "posterior_mean", "posterior_sd", "geometric"])
        for row in zip(k.tolist(), g.pmf().tolist(), g.posterior_sd().tolist(), geo.tolist()):
            w.writerow(row)
    c = models["conditional8"]
    with open(out / "fig4_pk_mod8.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["residue", "k", "posterior_mean", "posterior_sd"])
        for r in generator.ODD_RESIDUES:
            for kk, mean, sd in zip(k.tolist(), c.pmf(r).tolist(), c.posterior_sd(r).tolist()):
                w.writerow([r, kk, mean, sd])


def _load_models(cfg: PipelineConfig, variants) -> dict:
    return {v: generator.BlockLengthModel.load(_require(cfg.out / MODEL_FILES[v], "calibrate")) for v in variants}


def cmd_evaluate(cfg: PipelineConfig, include_g1: bool = False) -> int:
    post_path = _require(cfg.out / POSTERIOR_FILE, "fit")
    variants = (["geometric"] if include_g1 else []) + ["global", "conditional8"]
    models = _load_models(cfg, variants)
    table = _load_table(cfg)
    post = NbPosterior.load(post_path)
    split = _split(cfg)
    test = features.make_features(table, split.test_indices)
    reports = [scoring.glm_log_score(post, test, seed=cfg.seed + 2)]
    for v in variants:
        reports.append(scoring.gen_log_score(models[v], test, cfg.s_mc, cfg.epsilon, cfg.gen(), GEN_IDS[v]))
    rdir = cfg.out / REPORT_DIR
    rdir.mkdir(exist_ok=True)
    for r in reports:
        r.save(rdir / f"{r.model_id.lower().replace('-', '_')}.json")
    scoring.write_table2(reports, cfg.out / "table2.csv")
    _write_gen_ppc(cfg, test, models)
    print(scoring.format_table(reports))
    _write_meta(cfg, "evaluate", glm_w1_seed=cfg.seed + 2, generator_seed=cfg.seed)
    return 0


def _write_gen_ppc(cfg: PipelineConfig, test, models) -> None:
    gen_cfg = cfg.gen()
    sims = {v: generator.simulate_batch(test.n, m, 1, gen_cfg)[:, 0] for v, m in models.items()}
    with open(cfg.out / "fig6_gen_ppc.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "tau", *(GEN_IDS[v] for v in sims)])
        cols = [test.n.tolist(), test.tau.tolist(), *(s.tolist() for s in sims.values())]
        for row in zip(*cols):
            w.writerow(row)


def cmd_trace(cfg: PipelineConfig, n: int = 27, variant: str = "geometric") -> int:
    if n < 1:
        raise ValueError("n must be >= 1")
    if variant == "geometric":
        model = generator.BlockLengthModel(cfg.k_max, "geometric")
    else:
        model = _load_models(cfg, [variant])[variant]
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, n])))
    pair = generator.trace_compare(n, model, cfg.gen(), rng)
    path = cfg.out / f"fig8_trace_{n}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "deterministic_log2", "stochastic_log2"])
        for j in range(max(len(pair.deterministic), len(pair.stochastic))):
            d = pair.deterministic[j] if j < len(pair.deterministic) else ""
            s = pair.stochastic[j] if j < len(pair.stochastic) else ""
            w.writerow([j, d, s])
    print(
        f"n={n}: tau={core.tau_direct(n)}, {len(pair.deterministic)} deterministic odd states, "
        f"{len(pair.stochastic)} stochastic ({variant}, absorbed={pair.absorbed}) -> {path}"
    )
    _write_meta(cfg, f"trace_{n}", trace_seed=[cfg.seed, n], variant=variant)
    return 0


def cmd_report(cfg: PipelineConfig) -> int:
    out = cfg.out
    done = []
    if (out / TAU_FILE).exists():
        table = core.load_tau_table(out / TAU_FILE)
        scoring.write_table1(scoring.summarize(table), out / "table1.csv")
        edges, counts = _histogram(table.values[1:])
        with open(out / "fig1_hist.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_left", "count"])
            w.writerows(zip(edges.tolist(), counts.tolist()))
        done += ["table1.csv", "fig1_hist.csv"]
        if (out / SPLIT_FILE).exists():
            split = features.SplitSpec.load(out / SPLIT_FILE)
            with open(out / "fig2_scatter.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["n", "tau", "residue8"])
                idx = np.sort(split.test_indices)
                w.writerows(zip(idx.tolist(), table.values[idx].tolist(), (idx & 7).tolist()))
            done.append("fig2_scatter.csv")
    if all((out / MODEL_FILES[v]).exists() for v in generator.VARIANTS):
        models = _load_models(cfg, generator.VARIANTS)
        counts = _counts_from_csv(out / "block_counts.csv", models["global"].k_max)
        _write_block_csvs(out, counts, models)
        done += ["fig2_pk_empirical.csv", "fig4_pk_mod8.csv", "fig5_pk_posterior.csv"]
    rdir = out / REPORT_DIR
    if rdir.is_dir():
        reports = [scoring.EvalReport.load(p) for p in sorted(rdir.glob("*.json"))]
        if reports:
            scoring.write_table2(reports, out / "table2.csv")
            print(scoring.format_table(reports))
            done.append("table2.csv")
    if not done:
        raise MissingArtifact(f"no artifacts in {out}; run `collatzprob compute` first")
    print("regenerated: " + ", ".join(done))
    return 0


def _counts_from_csv(path: Path, k_max: int) -> np.ndarray:
    counts = np.zeros((8, k_max), dtype=np.int64)
    with open(_require(path, "calibrate"), newline="") as fh:
        for row in csv.DictReader(fh):
            counts[int(row["residue"]), int(row["k"]) - 1] = int(row["count"])
    return counts


# -- argument parsing -----------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with PipelineConfig fields; flags override it")
    for f in fields(PipelineConfig):
        flag = "--" + f.name.replace("_", "-")
        typ = {"int": int, "float": float, "str": str}[f.type]
        p.add_argument(flag, type=typ, default=None, help=f"default: {f.default}")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="collatzprob", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("compute", help="build the tau table and table1.csv")
    p.add_argument("--force", action="store_true", help="rebuild even if a valid table exists")
    p.add_argument("--parallel", action="store_true", help="chunked parallel fill")
    p.add_argument("--csv", action="store_true", help="also export tau.csv (n,tau)")
    p = sub.add_parser("fit", help="split, fit the NB2 GLM, write posterior and PPC data")
    p.add_argument("--ppc-draws", type=int, default=1)
    p.add_argument("--no-check", action="store_true", help="write the posterior even if diagnostics fail")
    sub.add_parser("calibrate", help="block-length counts and Dirichlet calibration")
    p = sub.add_parser("evaluate", help="held-out log scores and W1 (table2.csv)")
    p.add_argument("--include-g1", action="store_true", help="also score the geometric generator")
    p = sub.add_parser("trace", help="paired log2 odd-state trajectories")
    p.add_argument("--n", type=int, default=27)
    p.add_argument("--variant", choices=generator.VARIANTS, default="geometric")
    sub.add_parser("report", help="regenerate CSV tables from existing artifacts")
    for p in sub.choices.values():
        _add_config_flags(p)
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    values = {}
    if args.config:
        with open(args.config) as fh:
            values.update(json.load(fh))
        unknown = set(values) - {f.name for f in fields(PipelineConfig)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for f in fields(PipelineConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    cfg = PipelineConfig()
    return replace(cfg, **values)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        cfg.out.mkdir(parents=True, exist_ok=True)
        if args.command == "compute":
            return cmd_compute(cfg, force=args.force, parallel=args.parallel, csv_export=args.csv)
        if args.command == "fit":
            return cmd_fit(cfg, ppc_draws=args.ppc_draws, check=not args.no_check)
        if args.command == "calibrate":
            return cmd_calibrate(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, include_g1=args.include_g1)
        if args.command == "trace":
            return cmd_trace(cfg, n=args.n, variant=args.variant)
        return cmd_report(cfg)
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ValueError, core.TableFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
