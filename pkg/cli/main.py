"""
Command-Line Interface for the Local Search Solvers
Solve, generate, oracle and batch-benchmark commands with CSV trace and result emission

Exit codes: 0 success, 2 bad input or usage, 3 infeasible, 4 limit exceeded
"""
import sys
from pathlib import Path
sys.path.append(str(Path(__file__).parent.parent))

import math
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from typing import Dict, List, Literal, Optional, Union

import click
import pandas as pd
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pythonjsonlogger import jsonlogger

from errors import (
    ConfigError,
    InfeasibleError,
    InstanceError,
    InvariantViolation,
    LimitError,
    SearchTimeout,
    SizeLimit,
    SolverError,
)
from instance_io.formats import (
    FORMAT_STP,
    FORMAT_WTAP,
    FORMATS,
    detect_format,
    format_weight,
    parse_stp,
    parse_wtap,
    read_instance,
    write_instance,
    write_steiner_solution,
    write_wtap_solution,
    write_stp,
    write_wtap,
)
from instance_io.generators import GeneratorConfig, gen_steiner, gen_wtap
from oracles import (
    opt_krestricted_bruteforce,
    opt_steiner_exact,
    opt_wtap_bruteforce,
    validate_steiner,
    validate_wtap,
)
from settings import SolverLimits, load_limits
from steiner_engine import ENGINE_ENUMERATION, LN4, choose_k, krestricted_ratio, run_steiner
from wtap_engine import ENGINES, ENGINE_EXACT, default_k, run_wtap

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_LIMIT = 4

BENCH_SCHEMA = "# bench-schema v1"
DEFAULT_STEINER_K = 3


def exit_code_for(error: Exception) -> int:
    if isinstance(error, InstanceError):
        return EXIT_INPUT
    if isinstance(error, InfeasibleError):
        return EXIT_INFEASIBLE
    if isinstance(error, LimitError):
        return EXIT_LIMIT
    return EXIT_FAILURE


def setup_logging(verbose: bool, quiet: bool, log_json: bool) -> None:
    """Configure the root logger once per invocation"""
    level = logging.WARNING if quiet else logging.DEBUG if verbose else logging.INFO
    handler = logging.StreamHandler(sys.stderr)
    if log_json:
        handler.setFormatter(jsonlogger.JsonFormatter('%(asctime)s %(levelname)s %(name)s %(message)s'))
    else:
        handler.setFormatter(logging.Formatter('%(message)s'))
    logging.basicConfig(level=level, handlers=[handler], force=True)


class RunConfig(BaseModel):
    """Validated options of one CLI command"""

    command: Literal['wtap-solve', 'steiner-solve', 'gen', 'oracle', 'bench']
    input: Optional[Path] = None
    out: Optional[Path] = None
    trace: Optional[Path] = None
    epsilon: float = Field(default=0.5, gt=0)
    k: Optional[Union[int, Literal['auto']]] = None
    engine: Literal['exact', 'heuristic'] = ENGINE_EXACT
    seed: int = Field(default=0, ge=0)
    problem: Optional[Literal['wtap', 'stp']] = None
    limits: SolverLimits = Field(default_factory=SolverLimits)

    @field_validator('k', mode='before')
    @classmethod
    def parse_k(cls, v):
        if v is None or v == 'auto':
            return v
        try:
            value = int(v)
        except (TypeError, ValueError):
            raise ValueError(f"k must be a positive integer or 'auto', got {v!r}")
        if value < 1:
            raise ValueError(f"k must be positive, got {value}")
        return value

    @model_validator(mode='after')
    def epsilon_in_range(self):
        steiner = self.command == 'steiner-solve' or self.problem == FORMAT_STP
        # bench checks the WTAP bound per instance and records it in that row
        upper = 1.0 if steiner or self.command == 'bench' else 0.5
        if self.epsilon > upper:
            raise ValueError(f"epsilon must lie in (0, {upper}] for {'Steiner' if steiner else 'WTAP'}")
        if steiner and isinstance(self.k, int) and self.k < 2:
            raise ValueError("Steiner k must be at least 2")
        return self

    @classmethod
    def create(cls, **values) -> "RunConfig":
        try:
            return cls(**values)
        except ValidationError as e:
            raise ConfigError(f"invalid options: {e}") from e


def _limits(max_size, node_budget, time_budget) -> SolverLimits:
    return load_limits(max_component_size=max_size, node_budget=node_budget, time_budget=time_budget)


def _fail(error: Exception) -> None:
    code = exit_code_for(error)
    message = f"error: {error}"
    if isinstance(error, SearchTimeout):
        message += " (rerun with --fallback or --engine heuristic, or raise --node-budget)"
    elif isinstance(error, SizeLimit):
        message += " (raise the limit, or pass a smaller --k)"
    click.echo(message, err=True)
    sys.exit(code)


def _write_trace(rows: List, path: Path, timings: bool) -> None:
    frame = pd.DataFrame([asdict(row) for row in rows])
    if frame.empty:
        frame = pd.DataFrame(columns=['iteration', 'accepted'])
    if not timings and 'elapsed_ms' in frame.columns:
        frame = frame.drop(columns=['elapsed_ms'])
    frame.to_csv(path, index=False)
    logger.info(f"Trace written to {path} ({len(frame)} rows)")


def _summary(weight: float, iterations: int, potential: float) -> str:
    return f"weight={format_weight(weight)} iters={iterations} phi={format_weight(potential)}"


def _steiner_parameters(epsilon: float, k: Union[int, str, None], limits: SolverLimits):
    """(k, epsilon used by the local search) for a --k option"""
    if k is None:
        return DEFAULT_STEINER_K, epsilon
    if k == 'auto':
        chosen = choose_k(epsilon)
        if chosen > limits.witness_max_terminals:
            logger.warning(f"k={chosen} from --k auto exceeds the witness tree cap "
                           f"({limits.witness_max_terminals} terminals); instances with more terminals "
                           f"need an explicit --k")
        return chosen, epsilon / 3.0
    return k, epsilon


# Commands

@click.group()
@click.option('--verbose', '-v', is_flag=True, help='Log every iteration')
@click.option('--quiet', '-q', is_flag=True, help='Only log warnings and errors')
@click.option('--log-json', is_flag=True, help='Emit logs as JSON lines')
def cli(verbose, quiet, log_json):
    """Local search solvers for weighted tree augmentation and Steiner tree"""
    setup_logging(verbose, quiet, log_json)


@cli.command('wtap-solve')
@click.option('--input', 'input_path', required=True, type=click.Path(dir_okay=False))
@click.option('--out', type=click.Path(dir_okay=False), help='Solution file')
@click.option('--trace', type=click.Path(dir_okay=False), help='Trace CSV')
@click.option('--epsilon', default=0.5, show_default=True, type=float)
@click.option('--k', default=None, help="Thinness (default ceil(4/eps)); 'auto' for the default")
@click.option('--engine', default=ENGINE_EXACT, show_default=True, type=click.Choice(ENGINES))
@click.option('--max-size', type=int, help='Component size cap')
@click.option('--node-budget', type=int, help='Branch-and-bound node budget')
@click.option('--time-budget', type=float, help='Seconds, checked between iterations')
@click.option('--fallback', is_flag=True, help='Switch to the heuristic engine when the node budget runs out')
@click.option('--no-shadow-closure', is_flag=True, help='Solve on the links as given')
@click.option('--timings', is_flag=True, help='Include elapsed times in the trace')
@click.option('--format', 'fmt', type=click.Choice(FORMATS), default=None)
def wtap_solve(input_path, out, trace, epsilon, k, engine, max_size, node_budget, time_budget,
               fallback, no_shadow_closure, timings, fmt):
    """Run the WTAP local search on one instance"""
    try:
        config = RunConfig.create(command='wtap-solve', input=input_path, out=out, trace=trace,
                                  epsilon=epsilon, k=k, engine=engine, problem=FORMAT_WTAP,
                                  limits=_limits(max_size, node_budget, time_budget))
        if detect_format(input_path, fmt) != FORMAT_WTAP:
            raise ConfigError("wtap-solve expects a WTAP instance")
        instance = read_instance(input_path, FORMAT_WTAP)
        thinness = None if config.k in (None, 'auto') else config.k
        run = run_wtap(instance, epsilon=config.epsilon, engine=config.engine, k=thinness,
                       limits=config.limits, shadow_closure=not no_shadow_closure, fallback=fallback)
        if not validate_wtap(run.instance, run.solution):
            raise InvariantViolation("solution failed re-validation")
        logger.info(f"Guarantee with the exact engine: weight <= {1.5 + config.epsilon:g} * OPT")
        if config.out:
            Path(config.out).write_text(write_wtap_solution(run.instance, run.solution))
        if config.trace:
            _write_trace(run.trace, config.trace, timings)
        click.echo(_summary(run.weight, run.iterations, run.potential))
    except SolverError as e:
        _fail(e)


@cli.command('steiner-solve')
@click.option('--input', 'input_path', required=True, type=click.Path(dir_okay=False))
@click.option('--out', type=click.Path(dir_okay=False), help='Solution file')
@click.option('--trace', type=click.Path(dir_okay=False), help='Trace CSV')
@click.option('--epsilon', default=0.5, show_default=True, type=float)
@click.option('--k', default=None, help=f"Component size (default {DEFAULT_STEINER_K}); 'auto' for 2^ceil(2 ln4/eps)")
@click.option('--node-budget', type=int)
@click.option('--time-budget', type=float, help='Seconds, checked between iterations')
@click.option('--timings', is_flag=True, help='Include elapsed times in the trace')
@click.option('--format', 'fmt', type=click.Choice(FORMATS), default=None)
def steiner_solve(input_path, out, trace, epsilon, k, node_budget, time_budget, timings, fmt):
    """Run the Steiner tree local search on one instance"""
    try:
        config = RunConfig.create(command='steiner-solve', input=input_path, out=out, trace=trace,
                                  epsilon=epsilon, k=k, problem=FORMAT_STP,
                                  limits=_limits(None, node_budget, time_budget))
        if detect_format(input_path, fmt) != FORMAT_STP:
            raise ConfigError("steiner-solve expects an STP instance")
        instance = read_instance(input_path, FORMAT_STP)
        size, search_epsilon = _steiner_parameters(config.epsilon, config.k, config.limits)
        run = run_steiner(instance, epsilon=search_epsilon, k=size, limits=config.limits)
        if not validate_steiner(instance, run.solution):
            raise InvariantViolation("solution failed re-validation")
        logger.info(f"Guarantee: weight <= {(LN4 + search_epsilon) * krestricted_ratio(size):.4f} * OPT (k={size})")
        if config.out:
            Path(config.out).write_text(write_steiner_solution(instance, run.solution))
        if config.trace:
            _write_trace(run.trace, config.trace, timings)
        click.echo(_summary(run.weight, run.iterations, run.potential))
    except SolverError as e:
        _fail(e)


@cli.command('gen')
@click.option('--kind', type=click.Choice(FORMATS), required=True)
@click.option('--n', 'vertex_count', type=int, required=True, help='Vertices')
@click.option('--m', 'edge_count', type=int, required=True, help='Links (wtap) or edges (stp)')
@click.option('--t', 'terminal_count', type=int, default=None, help='Terminals (stp)')
@click.option('--max-weight', type=int, default=10, show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--count', type=int, default=1, show_default=True, help='Instances with seeds seed..seed+count-1')
@click.option('--out-dir', type=click.Path(file_okay=False), default='.', show_default=True)
@click.option('--prefix', default='instance', show_default=True)
def gen(kind, vertex_count, edge_count, terminal_count, max_weight, seed, count, out_dir, prefix):
    """Write seeded random instances named <prefix>-<seed>.<kind>"""
    try:
        if count < 1:
            raise ConfigError("--count must be positive")
        target = Path(out_dir)
        target.mkdir(parents=True, exist_ok=True)
        for offset in range(count):
            config = GeneratorConfig.create(seed=seed + offset, vertex_count=vertex_count, edge_count=edge_count,
                                            terminal_count=terminal_count, max_weight=max_weight)
            instance = gen_wtap(config) if kind == FORMAT_WTAP else gen_steiner(config)
            path = target / f"{prefix}-{config.seed}.{kind}"
            write_instance(instance, path)
            click.echo(str(path))
    except SolverError as e:
        _fail(e)


@cli.command('oracle')
@click.option('--input', 'input_path', required=True, type=click.Path(dir_okay=False))
@click.option('--k', type=int, default=None, help='Also compute OPT_k (stp only)')
@click.option('--format', 'fmt', type=click.Choice(FORMATS), default=None)
def oracle(input_path, k, fmt):
    """Exact optimum of a small instance by exhaustive search"""
    try:
        fmt = detect_format(input_path, fmt)
        instance = read_instance(input_path, fmt)
        limits = load_limits()
        if fmt == FORMAT_WTAP:
            report = opt_wtap_bruteforce(instance, limits)
            certificate = [f"{instance.links[i].a + 1}-{instance.links[i].b + 1}" for i in report.opt_certificate]
        else:
            report = opt_steiner_exact(instance, limits)
            certificate = [f"{instance.edges[i].u + 1}-{instance.edges[i].v + 1}" for i in report.opt_certificate]
        click.echo(f"opt={format_weight(report.opt_value)} "
                   f"certificate={','.join(certificate)} space={report.search_space_size}")
        if k is not None:
            if fmt != FORMAT_STP:
                raise ConfigError("--k applies to Steiner instances only")
            restricted = opt_krestricted_bruteforce(instance, k, limits)
            click.echo(f"opt_k={format_weight(restricted.opt_value)} k={k}")
    except SolverError as e:
        _fail(e)


# Benchmark

def _bench_one(task: Dict) -> Dict:
    """Solve one serialized instance; errors become a status column (runs in worker processes)"""
    row = {'instance': task['name'], 'n': None, 'm': None, 'size': None, 'epsilon': task['epsilon'],
           'k': None, 'engine': task['engine'], 'weight': None, 'opt': None, 'ratio': None,
           'iterations': None, 'elapsed_ms': None, 'status': 'ok'}
    limits = SolverLimits(**task['limits'])
    try:
        if task['format'] == FORMAT_WTAP:
            instance = parse_wtap(task['text'])
            row.update(n=instance.vertex_count, m=instance.tree.edge_count, size=len(instance.links))
            thinness = task['k'] if isinstance(task['k'], int) else default_k(task['epsilon'])
            run = run_wtap(instance, epsilon=task['epsilon'], engine=task['engine'], k=thinness,
                           limits=limits, fallback=task['fallback'])
            valid = validate_wtap(run.instance, run.solution)
            opt = _optional_opt(lambda: opt_wtap_bruteforce(instance, limits).opt_value)
        else:
            instance = parse_stp(task['text'])
            row.update(n=instance.vertex_count, m=len(instance.edges), size=len(instance.terminals), engine=ENGINE_ENUMERATION)
            size, search_epsilon = _steiner_parameters(task['epsilon'], task['k'], limits)
            run = run_steiner(instance, epsilon=search_epsilon, k=size, limits=limits)
            valid = validate_steiner(instance, run.solution)
            opt = _optional_opt(lambda: opt_steiner_exact(instance, limits).opt_value)
        if not valid:
            raise InvariantViolation("solution failed re-validation")
        row.update(k=run.k, weight=run.weight, opt=opt, iterations=run.iterations,
                   elapsed_ms=sum(r.elapsed_ms for r in run.trace))
        if opt is not None:
            row['ratio'] = run.weight / opt if opt > 0 else 1.0
    except SolverError as e:
        row['status'] = f"error:{exit_code_for(e)}:{type(e).__name__}"
    return row


def _optional_opt(compute) -> Optional[float]:
    try:
        return compute()
    except LimitError:
        return None


def _bench_tasks(input_dir: Optional[str], generate: Optional[int], kind: str, fmt: Optional[str],
                 vertex_count: int, edge_count: int, terminal_count: Optional[int], seed: int,
                 max_weight: int) -> List[Dict]:
    tasks = []
    if generate:
        for offset in range(generate):
            config = GeneratorConfig.create(seed=seed + offset, vertex_count=vertex_count, edge_count=edge_count,
                                            terminal_count=terminal_count, max_weight=max_weight)
            if kind == FORMAT_WTAP:
                text = write_wtap(gen_wtap(config))
            else:
                text = write_stp(gen_steiner(config))
            tasks.append({'name': f"{kind}-{config.seed}", 'format': kind, 'text': text})
        return tasks

    directory = Path(input_dir)
    if not directory.is_dir():
        raise InstanceError(f"{input_dir} is not a directory")
    for path in sorted(directory.iterdir()):
        suffix = path.suffix.lower().lstrip('.')
        if suffix in FORMATS and (fmt is None or suffix == fmt):
            tasks.append({'name': path.name, 'format': suffix, 'text': path.read_text()})
    if not tasks:
        raise InstanceError(f"no .wtap or .stp instances in {input_dir}")
    return tasks


@cli.command('bench')
@click.option('--input', 'input_dir', type=click.Path(file_okay=False), help='Directory of instances')
@click.option('--generate', type=int, default=None, help='Generate N seeded instances instead')
@click.option('--kind', type=click.Choice(FORMATS), default=FORMAT_WTAP, show_default=True)
@click.option('--n', 'vertex_count', type=int, default=8, show_default=True)
@click.option('--m', 'edge_count', type=int, default=10, show_default=True)
@click.option('--t', 'terminal_count', type=int, default=None)
@click.option('--max-weight', type=int, default=10, show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', type=click.Path(dir_okay=False), required=True, help='CSV file')
@click.option('--epsilon', default=0.5, show_default=True, type=float)
@click.option('--k', default=None)
@click.option('--engine', default=ENGINE_EXACT, show_default=True, type=click.Choice(ENGINES))
@click.option('--max-size', type=int)
@click.option('--node-budget', type=int)
@click.option('--time-budget', type=float)
@click.option('--fallback', is_flag=True)
@click.option('--workers', type=int, default=1, show_default=True)
@click.option('--timings', is_flag=True, help='Include elapsed times')
@click.option('--format', 'fmt', type=click.Choice(FORMATS), default=None)
def bench(input_dir, generate, kind, vertex_count, edge_count, terminal_count, max_weight, seed, out,
          epsilon, k, engine, max_size, node_budget, time_budget, fallback, workers, timings, fmt):
    """Solve a batch of instances and write one CSV row per instance"""
    try:
        if (input_dir is None) == (generate is None):
            raise ConfigError("pass exactly one of --input and --generate")
        if workers < 1:
            raise ConfigError("--workers must be positive")
        problem = kind if generate else fmt
        config = RunConfig.create(command='bench', out=out, epsilon=epsilon, k=k, engine=engine, seed=seed,
                                  problem=problem, limits=_limits(max_size, node_budget, time_budget))
        tasks = _bench_tasks(input_dir, generate, kind, fmt, vertex_count, edge_count, terminal_count,
                             seed, max_weight)
        for task in tasks:
            task.update(epsilon=config.epsilon, k=config.k, engine=config.engine, fallback=fallback,
                        limits=config.limits.model_dump())

        logger.info(f"Benchmarking {len(tasks)} instances with {workers} worker(s)")
        if workers == 1:
            rows = [_bench_one(task) for task in tasks]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(_bench_one, tasks))
    except SolverError as e:
        _fail(e)
        return

    frame = pd.DataFrame(rows).sort_values('instance', kind='stable').reset_index(drop=True)
    if not timings:
        frame = frame.drop(columns=['elapsed_ms'])
    ok = frame[frame['status'] == 'ok']
    ratios = ok['ratio'].dropna()
    max_ratio = ratios.max() if len(ratios) else math.nan
    mean_ratio = ratios.mean() if len(ratios) else math.nan

    with open(out, 'w', newline='') as handle:
        handle.write(BENCH_SCHEMA + "\n")
        frame.to_csv(handle, index=False)
        handle.write(f"# aggregate rows={len(frame)} ok={len(ok)} max_ratio={max_ratio:.6f} "
                     f"mean_ratio={mean_ratio:.6f}\n")
    click.echo(f"rows={len(frame)} ok={len(ok)} max_ratio={max_ratio:.6f} mean_ratio={mean_ratio:.6f}")

    code = EXIT_OK
    if ok.empty:
        first = frame['status'].iloc[0]
        code = int(first.split(':')[1]) if first.startswith('error:') else EXIT_FAILURE
    sys.exit(code)


if __name__ == "__main__":
    cli()
