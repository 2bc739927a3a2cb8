"""Command line: generate traces, learn models, evaluate, compare kernels."""

from __future__ import annotations

import configparser
import logging
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import click

from .evaluation import VARIANTS, error_rate, kernel_comparison, prediction_fscore
from .learn import LearnConfig, learn_domain, report_text, rules_text, save_models
from .pddl import PDDLError, emit_domain, load_domain, load_problem
from .perceptron import KernelSpec
from .simulator import ObservationModel, generate_trace, read_trace, write_trace

EXIT_OK = 0
EXIT_PARSE = 3
EXIT_CONFIG = 4
EXIT_EMPTY = 5
EXIT_IO = 6

WORKERS_ENV = "STRIPSLEARN_WORKERS"

log = logging.getLogger("stripslearn")


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    domain: str = ""
    problems: str = ""  # comma separated
    test_problems: str = ""
    n_steps: int = 5000
    n_test: int = 1000
    episode_len: int = 0  # 0 means no resets
    success_ratio: float = 0.5
    observability: float = 1.0
    noise: float = 0.0
    kernel: str = "3dnf"
    epochs: int = 2
    eps_p: float = 0.95
    eps_e: float = 0.5
    strict: bool = False
    seed: int = 0
    workers: int = 1
    out: str = "out"
    # kernel comparison grid
    noise_levels: str = "0.0"
    observabilities: str = "1.0"
    seeds: str = "0,1"
    variants: str = ",".join(VARIANTS)

    def validate(self) -> "PipelineConfig":
        for name in ("success_ratio", "observability", "noise", "eps_p", "eps_e"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        for name in ("n_steps", "n_test", "episode_len"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            KernelSpec.parse(self.kernel)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for v in _split(self.variants):
            if v not in VARIANTS:
                raise ConfigError(f"unknown variant {v!r}; choose from {', '.join(VARIANTS)}")
        return self

    def learn_config(self) -> LearnConfig:
        return LearnConfig(KernelSpec.parse(self.kernel), self.epochs, self.eps_p, self.eps_e,
                           self.strict, seed=self.seed, workers=self.workers)

    def obs_model(self) -> ObservationModel:
        return ObservationModel(self.observability, self.noise, self.seed)

    def dump(self, path: Path) -> None:
        lines = [f"{k} = {v}" for k, v in asdict(self).items()]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _split(text: str) -> list[str]:
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _coerce(name: str, raw):
    kind = {f.name: f.type for f in fields(PipelineConfig)}[name]
    try:
        if kind == "bool":
            if isinstance(raw, bool):
                return raw
            return str(raw).strip().lower() in ("1", "true", "yes", "on")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return str(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def load_config(path: str | None, overrides: dict) -> PipelineConfig:
    """Flat ``key = value`` file, then command-line overrides (``None`` means unset)."""
    values = {}
    env_workers = os.environ.get(WORKERS_ENV)
    if env_workers:
        values["workers"] = env_workers
    if path:
        parser = configparser.ConfigParser()
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise OSError(f"{path}: {exc.strerror}") from exc
        try:
            parser.read_string("[run]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        known = {f.name for f in fields(PipelineConfig)}
        for key, raw in parser["run"].items():
            key = key.replace("-", "_")
            if key not in known:
                raise ConfigError(f"{path}: unknown key {key!r}")
            values[key] = raw
    values.update({k: v for k, v in overrides.items() if v is not None})
    cfg = PipelineConfig(**{k: _coerce(k, v) for k, v in values.items()})
    return cfg.validate()


# ---------------------------------------------------------------------------
# Steps
# ---------------------------------------------------------------------------


def _need(cfg: PipelineConfig, *names: str) -> None:
    for n in names:
        if not getattr(cfg, n):
            raise ConfigError(f"missing required setting {n!r}")


def _load(cfg: PipelineConfig, which: str = "problems"):
    domain = load_domain(cfg.domain)
    problems = [load_problem(p, domain) for p in _split(getattr(cfg, which))]
    return domain, problems


def step_generate(cfg: PipelineConfig, out: Path, test: bool = False) -> Path:
    _need(cfg, "domain", "test_problems" if test else "problems")
    domain, problems = _load(cfg, "test_problems" if test else "problems")
    out.mkdir(parents=True, exist_ok=True)
    if test:
        trace = generate_trace(domain, problems, cfg.n_test, cfg.success_ratio,
                               cfg.episode_len or None, ObservationModel(1.0, 0.0, cfg.seed),
                               seed=cfg.seed + 7_919)
        path = out / "test.jsonl"
    else:
        trace = generate_trace(domain, problems, cfg.n_steps, cfg.success_ratio,
                               cfg.episode_len or None, cfg.obs_model(), seed=cfg.seed)
        path = out / "trace.jsonl"
    write_trace(trace, path)
    return path


def step_learn(cfg: PipelineConfig, trace_path: Path, out: Path) -> bool:
    """Returns False when nothing could be learned."""
    _need(cfg, "domain")
    domain = load_domain(cfg.domain)
    trace = read_trace(trace_path)
    result = learn_domain(domain, trace, cfg.learn_config())
    out.mkdir(parents=True, exist_ok=True)
    save_models(result, out / "models")
    (out / "rules.txt").write_text(rules_text(result), encoding="utf-8")
    (out / "learned.pddl").write_text(emit_domain(result.domain), encoding="utf-8")
    (out / "report.txt").write_text(report_text(result), encoding="utf-8")
    return bool(result.actions)


def step_eval(learned_path: Path, truth_path: Path, test_path: Path | None, out: Path) -> str:
    truth = load_domain(truth_path)
    learned = load_domain(learned_path)
    out.mkdir(parents=True, exist_ok=True)
    err = error_rate(learned, truth)
    (out / "error.tsv").write_text(err.to_tsv(), encoding="utf-8")
    summary = [f"error rate: {err.error:.6f}"]
    if test_path is not None:
        pred = prediction_fscore(learned, read_trace(test_path), truth)
        (out / "prediction.tsv").write_text(pred.to_tsv(), encoding="utf-8")
        summary.append(f"prediction F (micro): {pred.f:.6f}")
        summary.append(f"prediction F (macro over actions): {pred.macro_f:.6f}")
    text = "\n".join(summary) + "\n"
    (out / "summary.txt").write_text(text, encoding="utf-8")
    return text


def step_compare(cfg: PipelineConfig, out: Path):
    _need(cfg, "domain", "problems", "test_problems")
    domain, train = _load(cfg)
    _, test = _load(cfg, "test_problems")
    res = kernel_comparison(domain, train, test,
                            [float(x) for x in _split(cfg.noise_levels)],
                            [float(x) for x in _split(cfg.observabilities)],
                            [int(x) for x in _split(cfg.seeds)],
                            n_train=cfg.n_steps, n_test=cfg.n_test, variants=_split(cfg.variants),
                            epochs=cfg.epochs, success_ratio=cfg.success_ratio,
                            episode_len=cfg.episode_len or None)
    out.mkdir(parents=True, exist_ok=True)
    (out / "comparison.tsv").write_text(res.to_tsv(), encoding="utf-8")
    (out / "comparison_summary.tsv").write_text(res.summary_tsv(), encoding="utf-8")
    return res


# ---------------------------------------------------------------------------
# click wiring
# ---------------------------------------------------------------------------


def _run(fn):
    """Translate failures into the documented exit codes."""
    try:
        code = fn()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except PDDLError as exc:
        click.echo(f"parse error: {exc}", err=True)
        sys.exit(EXIT_PARSE)
    except OSError as exc:
        name = getattr(exc, "filename", None)
        click.echo(f"I/O error: {name + ': ' if name else ''}{exc.strerror or exc}", err=True)
        sys.exit(EXIT_IO)
    except ValueError as exc:  # malformed trace files and the like
        click.echo(f"parse error: {exc}", err=True)
        sys.exit(EXIT_PARSE)
    sys.exit(code or EXIT_OK)


_SETTINGS = [
    click.option("--config", "config_path", type=click.Path(dir_okay=False), help="key = value file"),
    click.option("--domain"),
    click.option("--problems", help="comma-separated problem files"),
    click.option("--test-problems"),
    click.option("--n-steps", type=int),
    click.option("--n-test", type=int),
    click.option("--episode-len", type=int),
    click.option("--success-ratio", type=float),
    click.option("--observability", type=float),
    click.option("--noise", type=float),
    click.option("--kernel"),
    click.option("--epochs", type=int),
    click.option("--eps-p", type=float),
    click.option("--eps-e", type=float),
    click.option("--strict/--no-strict", default=None),
    click.option("--seed", type=int),
    click.option("--workers", type=int),
    click.option("--out"),
]


def settings(f):
    for opt in reversed(_SETTINGS):
        f = opt(f)
    return f


def _cfg(kw: dict) -> tuple[PipelineConfig, Path]:
    path = kw.pop("config_path", None)
    cfg = load_config(path, kw)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.dump(out / "config.resolved.ini")
    return cfg, out


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def main(verbose: bool):
    """Learn STRIPS action models from noisy, partially observed traces."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@settings
@click.option("--test", is_flag=True, help="write a noiseless, fully observed test trace instead")
def generate(test, **kw):
    """Write a random trace (JSONL) and its ground-truth sidecar."""
    def go():
        cfg, out = _cfg(kw)
        path = step_generate(cfg, out, test=test)
        click.echo(str(path))
    _run(go)


@main.command()
@settings
@click.option("--trace", "trace_path", required=True, type=click.Path(dir_okay=False))
def learn(trace_path, **kw):
    """Learn models, per-effect rules and a PDDL domain from a trace."""
    def go():
        cfg, out = _cfg(kw)
        if not step_learn(cfg, Path(trace_path), out):
            click.echo("no actions observed; learned domain is empty", err=True)
            return EXIT_EMPTY
        click.echo(str(out / "learned.pddl"))
    _run(go)


@main.command(name="eval")
@click.option("--learned", required=True, type=click.Path(dir_okay=False))
@click.option("--truth", required=True, type=click.Path(dir_okay=False))
@click.option("--test-trace", type=click.Path(dir_okay=False))
@click.option("--out", default="out")
def eval_cmd(learned, truth, test_trace, out):
    """Error rate against the true domain, and prediction F on a clean test trace."""
    def go():
        text = step_eval(Path(learned), Path(truth), Path(test_trace) if test_trace else None, Path(out))
        click.echo(text, nl=False)
    _run(go)


@main.command(name="compare-kernels")
@settings
@click.option("--noise-levels")
@click.option("--observabilities")
@click.option("--seeds")
@click.option("--variants")
def compare_kernels(**kw):
    """Prediction F of every perceptron variant over a noise x observability grid."""
    def go():
        cfg, out = _cfg(kw)
        res = step_compare(cfg, out)
        click.echo(res.summary_tsv(), nl=False)
    _run(go)


@main.command()
@settings
@click.option("--noise-levels")
@click.option("--observabilities")
@click.option("--seeds")
@click.option("--variants")
@click.option("--skip-compare", is_flag=True, help="stop after eval")
def pipeline(skip_compare, **kw):
    """generate, learn, eval and compare-kernels in sequence.

    The test trace and the kernel comparison need --test-problems.
    """
    def go():
        cfg, out = _cfg(kw)
        trace = step_generate(cfg, out)
        has_test = bool(cfg.test_problems)
        test = step_generate(cfg, out, test=True) if has_test else None
        if not step_learn(cfg, trace, out):
            click.echo("no actions observed; learned domain is empty", err=True)
            return EXIT_EMPTY
        click.echo(step_eval(out / "learned.pddl", Path(cfg.domain), test, out / "eval"), nl=False)
        if has_test and not skip_compare:
            click.echo(step_compare(cfg, out / "compare").summary_tsv(), nl=False)
    _run(go)


if __name__ == "__main__":
    main()
