"""Command-line entry point: validate the dataset, preprocess it and run experiments.

Usage:
    python main.py validate --data DARWIN.csv
    python main.py preprocess --data DARWIN.csv --components 24 --out results/
    python main.py run main --method qsvc --qubits 6,8,12 --mode exact
    python main.py run subsample-category --method svc --from-report results/SVC.json
    python main.py run per-task --method qsvc --tasks best
    python main.py run noise --qubits 6,8,12 --noise-runs 20
    python main.py spectrum --qubits 6,8,12

Environment (.env is loaded first):
    DARWIN_CSV  dataset path when --data is not given
    QKS_SEED    seed when --seed is not given
    QKS_JOBS    worker count when --jobs is not given

Exit codes: 0 ok, 1 usage or config error, 2 data error, 3 compute error.
"""

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

import reports
import svg_plot
from darwin_data import (
    N_FEATURES,
    N_TASKS,
    TASK_CATEGORIES,
    DatasetError,
    fit_preprocessor,
    load_darwin,
    make_splits,
    preprocess,
    save_preprocessed,
    validate_darwin,
)
from evaluation import (
    BEST_TASKS,
    METHODS,
    DEFAULT_BANDWIDTH,
    DEFAULT_QUBITS,
    PCA_COMPONENTS,
    PER_TASK_QUBITS,
    GridSpec,
    best_tasks,
    default_grid,
    gram_spectra,
    modal_hyperparameters,
    noise_study,
    per_task_ensemble,
    run_category_subsampling,
    run_grid_cv,
    singleton_grid,
)
from kernels import EXECUTION_MODES, Execution
from quantum import NoiseModel, build_ansatz
from quantum.noise import (
    DEFAULT_GATE_TIME_1Q_NS,
    DEFAULT_GATE_TIME_2Q_NS,
    DEFAULT_SHOTS,
    MELBOURNE_T1_US,
    MELBOURNE_T2_US,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_COMPUTE = 3

RUN_KINDS = ("main", "subsample-category", "per-task", "noise", "spectrum")

# Split fractions per protocol
TUNING_FRACTIONS = (0.6, 0.2, 0.2)
HOLDOUT_FRACTIONS = (0.8, 0.0, 0.2)

# Eigenvalue index for the decay ratio in the spectrum report
DECAY_INDEX = 100


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""
    pass


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with status 1 instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"Error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _int_list(value) -> List[int]:
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    try:
        return [int(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"Expected a comma-separated list of integers, got {value!r}")


def _str_list(value) -> List[str]:
    if isinstance(value, str):
        value = value.split(",")
    return [str(v).strip() for v in value if str(v).strip()]


@dataclass
class RunConfig:
    command: str = "run"
    kind: str = "main"
    data: Optional[str] = None
    method: str = "SVC"
    qubits: List[int] = field(default_factory=lambda: list(DEFAULT_QUBITS))
    mode: str = "exact"
    shots: int = DEFAULT_SHOTS
    seed: int = 0
    out: str = "results"
    jobs: int = 1
    components: int = PCA_COMPONENTS
    pca_per_split: bool = False
    splits: int = 20
    categories: List[str] = field(default_factory=lambda: ["C", "G", "M"])
    tasks: str = "all"
    grid: Optional[dict] = None
    noise_runs: int = 20
    t1: float = MELBOURNE_T1_US
    t2: float = MELBOURNE_T2_US
    gate_time_1q: float = DEFAULT_GATE_TIME_1Q_NS
    gate_time_2q: float = DEFAULT_GATE_TIME_2Q_NS
    bandwidth: Optional[float] = None
    from_report: Optional[str] = None
    verbose: bool = True

    def validate(self) -> "RunConfig":
        """Normalize field types and reject inconsistent settings."""
        self.method = str(self.method).upper()
        self.qubits = _int_list(self.qubits)
        self.categories = [c.upper()[:1] for c in _str_list(self.categories)]
        self.tasks = str(self.tasks)
        if self.command not in COMMANDS:
            raise ConfigError(f"command: unknown command '{self.command}'")
        if self.kind not in RUN_KINDS:
            raise ConfigError(f"kind: expected one of {', '.join(RUN_KINDS)}, got '{self.kind}'")
        if self.method not in METHODS:
            raise ConfigError(f"method: expected one of {', '.join(METHODS)}, got '{self.method}'")
        if self.mode not in EXECUTION_MODES:
            raise ConfigError(f"mode: expected one of {', '.join(EXECUTION_MODES)}, got '{self.mode}'")
        if not self.data:
            raise ConfigError("data: no dataset path (use --data or set DARWIN_CSV)")
        for name in ("shots", "splits", "jobs", "noise_runs"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name}: must be >= 1, got {getattr(self, name)}")
        if not 1 <= self.components <= N_FEATURES:
            raise ConfigError(f"components: must be between 1 and {N_FEATURES}, got {self.components}")
        if not self.qubits or min(self.qubits) < 1:
            raise ConfigError(f"qubits: need at least one positive qubit count, got {self.qubits}")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ConfigError(f"bandwidth: must be positive, got {self.bandwidth}")
        unknown = [c for c in self.categories if c not in TASK_CATEGORIES]
        if unknown or not self.categories:
            raise ConfigError(f"categories: expected letters from M, G, C, got {self.categories}")
        self.task_list()
        if self.grid is not None and (not isinstance(self.grid, dict) or not self.grid):
            raise ConfigError("grid: expected a JSON object of hyperparameter lists")
        if self.from_report and not Path(self.from_report).is_file():
            raise ConfigError(f"from_report: file not found: {self.from_report}")
        out = Path(self.out)
        if out.exists() and not out.is_dir():
            raise ConfigError(f"out: {out} exists and is not a directory")
        try:
            self.noise_model()
        except ValueError as e:
            raise ConfigError(f"noise: {e}")
        return self

    def task_list(self) -> List[int]:
        if self.tasks == "all":
            return list(range(1, N_TASKS + 1))
        if self.tasks == "best":
            return list(BEST_TASKS["quantum" if self.method == "QSVC" else "classical"])
        tasks = _int_list(self.tasks)
        if not tasks or not all(1 <= t <= N_TASKS for t in tasks):
            raise ConfigError(f"tasks: expected 'all', 'best' or ids in 1..{N_TASKS}, got '{self.tasks}'")
        return tasks

    def noise_model(self) -> NoiseModel:
        return NoiseModel(t1=self.t1, t2=self.t2, gate_time_1q=self.gate_time_1q,
                          gate_time_2q=self.gate_time_2q, shots=self.shots, rng_seed=self.seed)

    def execution(self) -> Execution:
        noise = self.noise_model() if self.mode == "noisy" else None
        return Execution(mode=self.mode, shots=self.shots, seed=self.seed, noise=noise)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# Configuration loading
# ---------------------------------------------------------------------------

def _load_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config: file not found: {path}")
    try:
        with open(path) as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config: {path} is not valid JSON: {e}")
    if not isinstance(raw, dict):
        raise ConfigError(f"config: {path} must hold a JSON object")

    known = {f.name for f in fields(RunConfig)}
    values = {}
    for key, value in raw.items():
        name = key.replace("-", "_")
        if name not in known:
            raise ConfigError(f"config: unknown setting '{key}' in {path}")
        values[name] = value
    return values


def _parse_grid(text: str) -> dict:
    """Inline JSON or the path of a JSON file."""
    path = Path(text)
    if path.is_file():
        with open(path) as f:
            text = f.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"grid: not valid JSON: {e}")


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """defaults < environment < config file < flags."""
    flags = vars(args).copy()
    values = {}

    env_seed = os.getenv("QKS_SEED")
    env_data = os.getenv("DARWIN_CSV")
    env_jobs = os.getenv("QKS_JOBS")
    try:
        if env_seed:
            values["seed"] = int(env_seed)
        if env_jobs:
            values["jobs"] = int(env_jobs)
    except ValueError:
        raise ConfigError(f"QKS_SEED / QKS_JOBS must be integers, got {env_seed!r} / {env_jobs!r}")
    if env_data:
        values["data"] = env_data

    config_path = flags.pop("config", None)
    if config_path:
        values.update(_load_config_file(config_path))

    if "grid" in flags:
        flags["grid"] = _parse_grid(flags["grid"])
    if flags.pop("quiet", False):
        values["verbose"] = False
    values.update(flags)
    if values.get("command") == "spectrum":
        values["kind"] = "spectrum"
    return RunConfig(**values)


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(description="Quantum and classical kernel screening on the DARWIN dataset")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Every option defaults to "absent" so file and environment values survive
    common = ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--data", help="DARWIN CSV path (default: $DARWIN_CSV)")
    common.add_argument("--config", help="flat JSON file mirroring these flags")
    common.add_argument("--seed", type=int, help="run seed (default: $QKS_SEED or 0)")
    common.add_argument("--out", help="artifact directory")
    common.add_argument("--components", type=int, help="PCA components")
    common.add_argument("--quiet", action="store_true", help="no progress output")

    experiment = ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    experiment.add_argument("--method", help="SVC, KNN, DT or QSVC")
    experiment.add_argument("--qubits", help="comma-separated qubit counts, e.g. 6,8,12")
    experiment.add_argument("--mode", choices=EXECUTION_MODES, help="quantum kernel evaluation")
    experiment.add_argument("--shots", type=int)
    experiment.add_argument("--jobs", type=int, help="worker count (default: $QKS_JOBS or 1)")
    experiment.add_argument("--pca-per-split", action="store_true",
                            help="fit preprocessing on each split's training rows only")
    experiment.add_argument("--splits", type=int, help="number of ShuffleSplit draws")
    experiment.add_argument("--categories", help="task categories for subsampling, e.g. C,G,M")
    experiment.add_argument("--tasks", help="'all', 'best' or comma-separated task ids")
    experiment.add_argument("--grid", help="JSON object (or file) replacing the grid axes")
    experiment.add_argument("--noise-runs", type=int)
    experiment.add_argument("--t1", type=float, help="T1 in microseconds")
    experiment.add_argument("--t2", type=float, help="T2 in microseconds")
    experiment.add_argument("--gate-time-1q", type=float, help="single-qubit gate time in ns")
    experiment.add_argument("--gate-time-2q", type=float, help="two-qubit gate time in ns")
    experiment.add_argument("--bandwidth", type=float, help="fixed encoding bandwidth")
    experiment.add_argument("--from-report", help="main report whose modal hyperparameters are reused")

    subparsers.add_parser("validate", parents=[common], help="check the dataset schema")
    subparsers.add_parser("preprocess", parents=[common], help="write the PCA-reduced matrix")
    run = subparsers.add_parser("run", parents=[common, experiment], help="run an experiment")
    run.add_argument("kind", choices=RUN_KINDS)
    subparsers.add_parser("spectrum", parents=[common, experiment], help="Gram eigenvalue spectra")
    return parser


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _banner(title: str):
    print("=" * 50)
    print(title)
    print("=" * 50)


def cmd_validate(config: RunConfig) -> int:
    result = validate_darwin(config.data)
    if config.verbose:
        print(f"Validating {config.data}...")
    for problem in result.problems:
        print(f"  {problem}", file=sys.stderr)
    print(result.summary())
    return EXIT_OK if result.ok else EXIT_DATA


def cmd_preprocess(config: RunConfig) -> int:
    raw = load_darwin(config.data)
    preprocessor = fit_preprocessor(raw, config.components)
    out_dir = reports.prepare_output_dir(config.out, config.to_dict())
    sidecar = {"seed": config.seed, "source": str(config.data), **preprocessor.to_dict()}
    path = save_preprocessed(preprocessor.transform(raw), out_dir / f"darwin_pca{config.components}.csv", sidecar)
    if config.verbose:
        print(f"Saved {raw.n_samples} x {config.components} matrix to {path}")
    return EXIT_OK


def _grid(config: RunConfig, method: str, **fixed) -> GridSpec:
    grid = default_grid(method, **fixed)
    if config.grid:
        return GridSpec(grid.method, config.grid, grid.fixed)
    if method == "QSVC" and config.bandwidth is not None:
        return GridSpec(grid.method, {"bandwidth": [config.bandwidth]}, grid.fixed)
    return grid


def _main_grids(config: RunConfig):
    """(name, grid) pairs of the main experiment; QSVC runs once per width."""
    if config.method != "QSVC":
        return [(config.method, _grid(config, config.method))]
    execution = config.execution().to_dict()
    return [(f"QSVC-{q}q", _grid(config, "QSVC", n_qubits=q, execution=execution)) for q in config.qubits]


def _write_report(out_dir: Path, report):
    reports.write_json(out_dir / f"{report.name}.json", report.to_dict())
    reports.write_csv(out_dir / f"{report.name}.csv", report.rows())


def _write_summary(out_dir: Path, experiments):
    rows = [{"experiment": r.name, "mean_acc": r.mean_acc, "std_acc": r.std_acc} for r in experiments]
    reports.write_csv(out_dir / "summary.csv", rows)
    for row in rows:
        print(f"  {row['experiment']:<24} {row['mean_acc']:6.2f} +/- {row['std_acc']:.2f}")


def _run_main(config: RunConfig, raw, out_dir: Path):
    data = raw if config.pca_per_split else preprocess(raw, config.components)
    plan = make_splits(raw.n_samples, *TUNING_FRACTIONS, n_splits=config.splits, seed=config.seed)
    results = []
    for name, grid in _main_grids(config):
        report = run_grid_cv(data, grid, plan, name=name,
                             preprocess_k=config.components if config.pca_per_split else None,
                             jobs=config.jobs, verbose=config.verbose)
        _write_report(out_dir, report)
        results.append(report)
    return results


def _run_subsample(config: RunConfig, raw, out_dir: Path):
    if config.from_report:
        sources = [reports.load_json(config.from_report)]
    else:
        sources = [r.to_dict() for r in _run_main(config, raw, out_dir)]

    plan = make_splits(raw.n_samples, *HOLDOUT_FRACTIONS, n_splits=config.splits, seed=config.seed)
    results = []
    for source in sources:
        grid_config = source["config"]["grid"]
        params = modal_hyperparameters(source)
        if config.verbose:
            print(f"\nModal hyperparameters of {source['name']}: {params}")
        grid = singleton_grid(grid_config["method"], params, **grid_config["fixed"])
        by_category = run_category_subsampling(raw, grid, plan, config.categories, config.components,
                                               config.pca_per_split, config.jobs, config.verbose)
        for label, report in by_category.items():
            report.name = f"{source['name']}-{label}"
            _write_report(out_dir, report)
            results.append(report)
    return results


def _run_per_task(config: RunConfig, raw, out_dir: Path):
    if config.method == "QSVC":
        grid = _grid(config, "QSVC", n_qubits=PER_TASK_QUBITS, execution=config.execution().to_dict())
    else:
        grid = _grid(config, config.method)
    plan = make_splits(raw.n_samples, *TUNING_FRACTIONS, n_splits=config.splits, seed=config.seed)
    name = f"{config.method}-tasks-{config.tasks.replace(',', '_')}"
    report = per_task_ensemble(raw, grid, plan, config.task_list(), name=name,
                               scale_per_split=config.pca_per_split, jobs=config.jobs, verbose=config.verbose)
    _write_report(out_dir, report)
    ranking = report.task_ranking()
    reports.write_csv(out_dir / f"{name}-ranking.csv", ranking)
    top = min(len(ranking), 5)
    print(f"\nBest {top} single tasks: {best_tasks(report, top)}")
    for row in ranking[:top]:
        print(f"  #{row['rank']} task {row['task']:>2}  {row['mean_acc']:6.2f} +/- {row['std_acc']:.2f}")
    return [report]


def _run_noise(config: RunConfig, raw, out_dir: Path):
    data = preprocess(raw, config.components)
    plan = make_splits(raw.n_samples, *HOLDOUT_FRACTIONS, n_splits=1, seed=config.seed)
    bandwidth = config.bandwidth or DEFAULT_BANDWIDTH
    specs = [build_ansatz(q, data.n_features, bandwidth) for q in config.qubits]
    study = noise_study(data, specs, config.noise_model(), config.noise_runs, plan,
                        jobs=config.jobs, verbose=config.verbose)
    reports.write_json(out_dir / "noise.json", study.to_dict())
    reports.write_csv(out_dir / "noise.csv", study.rows())
    series = {f"{r.n_qubits}q noisy runs": r.run_accuracies for r in study.results}
    references = {}
    for r in study.results:
        references[f"{r.n_qubits}q noiseless"] = r.baseline_accuracy
        references[f"{r.n_qubits}q majority"] = r.vote_accuracy
    svg_plot.write_line_plot(out_dir / "noise.svg", series, references=references, y_range=(0.0, 100.0),
                             title="Noisy fidelity runs", x_label="run", y_label="test accuracy (%)")
    print("\nNoise study:")
    for r in study.results:
        print(f"  {r.n_qubits:>2}q  noiseless {r.baseline_accuracy:6.2f}  median noisy {r.median_run_accuracy:6.2f}"
              f"  majority {r.vote_accuracy:6.2f}  vote>=median {'yes' if r.vote_ge_median else 'no'}")
    return []


def _run_spectrum(config: RunConfig, raw, out_dir: Path):
    data = preprocess(raw, config.components)
    bandwidth = config.bandwidth or DEFAULT_BANDWIDTH
    if config.verbose:
        print(f"\nComputing Gram spectra for {', '.join(str(q) for q in config.qubits)} qubits...")
    spectra = gram_spectra(data, config.qubits, bandwidth, config.execution(), config.jobs,
                           save_dir=out_dir, verbose=config.verbose)

    rows = [{"index": i + 1, **{f"{q}q": float(s.eigenvalues[i]) for q, s in spectra.items()}}
            for i in range(data.n_samples)]
    reports.write_csv(out_dir / "spectrum.csv", rows)

    k = min(DECAY_INDEX, data.n_samples)
    summary = {
        f"{q}q": {
            "lambda_1": float(s.eigenvalues[0]),
            "min_eigenvalue": s.min_eigenvalue,
            "n_negative": s.n_negative,
            "decay_index": k,
            "decay_ratio": s.decay_ratio(k),
        }
        for q, s in spectra.items()
    }
    reports.write_json(out_dir / "spectrum.json", summary)
    svg_plot.write_log_plot(
        out_dir / "spectrum.svg",
        {f"{q}-qubits": s.eigenvalues for q, s in spectra.items()},
        title=f"Quantum kernel Gram spectrum (bandwidth {bandwidth})",
        x_label="eigenvalue index",
        y_label="eigenvalue",
    )
    return []


RUNNERS = {
    "main": _run_main,
    "subsample-category": _run_subsample,
    "per-task": _run_per_task,
    "noise": _run_noise,
    "spectrum": _run_spectrum,
}


def cmd_run(config: RunConfig) -> int:
    _banner(f"DARWIN screening: {config.kind}")
    raw = load_darwin(config.data)
    if config.verbose:
        print(f"Loaded {raw.n_samples} participants, {raw.n_features} features")

    out_dir = reports.prepare_output_dir(config.out, config.to_dict())
    experiments = RUNNERS[config.kind](config, raw, out_dir)
    if experiments:
        print("\nSummary:")
        _write_summary(out_dir, experiments)
    print(f"\nArtifacts written to {out_dir}")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "preprocess": cmd_preprocess,
    "run": cmd_run,
    "spectrum": cmd_run,
}


def main(argv=None) -> int:
    # Load environment variables from .env file
    load_dotenv()

    try:
        args = build_parser().parse_args(argv)
        config = resolve_config(args).validate()
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    except (ConfigError, TypeError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        return COMMANDS[config.command](config)
    except (DatasetError, FileNotFoundError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:
        print(f"Error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
