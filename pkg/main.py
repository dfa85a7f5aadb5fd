import argparse
import sys
from datetime import datetime
from pathlib import Path
from typing import List, Optional

from loguru import logger

from config import OUTPUT_DIR
from exceptions import ConfigError, CpgError, DomainError, NonConvergenceError, SingularJacobianError
from experiments import (MODELS, PRESETS, ExperimentConfig, build_system, config_to_dict, load_config,
                         preset_configs, with_overrides)
from flows import experiment_flow
from phsystem import SolverConfig, run_conformance
from utils import setup_logging

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

_MODES = {"converge": "converge", "converge-nodal": "converge_nodal", "energy": "energy", "run": "run"}


def setup_folders(out_dir: str = OUTPUT_DIR):
    """Создание папок для результатов и логов"""
    Path(out_dir).mkdir(parents=True, exist_ok=True)


def _overrides(args: argparse.Namespace) -> dict:
    """Значения флагов командной строки, заданные явно"""
    return {
        "model": args.model,
        "k": args.k,
        "s_q": args.sq,
        "s_pi": args.spi,
        "use_projection": False if args.no_projection else None,
        "newton_tol": args.newton_tol,
        "newton_max_iter": args.newton_max_iter,
        "newton_start": args.newton_start,
        "taus": tuple(args.tau) if args.tau else None,
        "t_end": args.T,
        "tau_ref": args.tau_ref,
        "control": args.control,
        "initial": args.initial,
        "norm": args.norm,
        "output_format": args.format,
        "max_workers": args.workers,
        "N": args.N,
        "gamma": args.gamma,
        "nu": args.nu,
        "ell": args.ell,
        "inertias": tuple(args.inertias) if args.inertias else None,
        "axis": tuple(args.axis) if args.axis else None,
    }


def build_configs(args: argparse.Namespace, mode: str) -> List[ExperimentConfig]:
    """
    Сборка списка конфигураций эксперимента

    Источник: пресет, JSON-файл или флаги; флаги переопределяют остальное.
    """
    if args.preset and args.config:
        raise ConfigError("--preset and --config are mutually exclusive")
    if args.preset:
        configs = preset_configs(args.preset)
    elif args.config:
        configs = [load_config(args.config)]
    else:
        if args.model is None:
            raise ConfigError("--model is required without --preset or --config", field="model.name")
        single_step = mode in ("energy", "run")
        configs = [ExperimentConfig(model=args.model, solver=SolverConfig(k=args.k or 1), mode=mode,
                                    taus=(1e-2,) if single_step else ExperimentConfig.taus,
                                    label=f"{args.model}_{mode}_k{args.k or 1}")]

    overrides = _overrides(args)
    result = []
    for cfg in configs:
        if cfg.mode != mode and {cfg.mode, mode} != {"converge", "converge_nodal"}:
            raise ConfigError(f"config {cfg.label} is a {cfg.mode} experiment, not {mode}",
                              field="experiment.mode")
        result.append(with_overrides(cfg, mode=mode, **overrides))
    return result


def _output_for(cfg: ExperimentConfig, out: Optional[str], many: bool) -> Optional[str]:
    if out is None:
        return None
    if many:
        return str(Path(out) / f"{cfg.label}.{cfg.output_format}")
    return out


def run_pipeline(configs: List[ExperimentConfig], out: Optional[str] = None, record: bool = False,
                 db_url: Optional[str] = None) -> int:
    """
    Запуск экспериментов по очереди

    Args:
        configs: конфигурации серий
        out: файл (одна серия) или папка (пресет)
        record: сохранять ли запуск в базу
    """
    start_time = datetime.now()
    many = len(configs) > 1
    for cfg in configs:
        experiment_flow(config_to_dict(cfg), out_path=_output_for(cfg, out, many), record=record, db_url=db_url)
    logger.info(f"{len(configs)} series completed in {datetime.now() - start_time}")
    return EXIT_OK


def run_check(model: str, n_probes: int) -> int:
    """Проверка структурных свойств модели"""
    cfg = ExperimentConfig(model=model, solver=SolverConfig(k=1), mode="run", label=f"{model}_check")
    system, _ = build_system(cfg)
    report = run_conformance(system, n_probes=n_probes)
    print(f"\n=== Conformance of {report.name} ({report.probes} probes) ===")
    print(f"skew defect:        {report.skew_defect:.3e}")
    print(f"min dissipation:    {report.dissipation_min:.3e}")
    print(f"gradient deviation: {report.gradient_deviation:.3e}")
    print(f"mass matrix ok:     {report.mass_ok}")
    print("PASSED" if report.passed() else "FAILED")
    return EXIT_OK if report.passed() else EXIT_NUMERICAL


def _add_experiment_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--preset', choices=sorted(PRESETS), help='Built-in figure preset')
    parser.add_argument('--config', help='JSON experiment config')
    parser.add_argument('--model', choices=MODELS, help='Model to integrate')
    parser.add_argument('--k', type=int, help='Polynomial degree')
    parser.add_argument('--sq', type=int, help='Gauss nodes of the residual quadrature (default k)')
    parser.add_argument('--spi', type=int, help='Gauss nodes of the projection (default max(k, 3))')
    parser.add_argument('--no-projection', action='store_true', help='Use eta(z) directly (standard cPG)')
    parser.add_argument('--newton-tol', type=float, help='Newton residual tolerance')
    parser.add_argument('--newton-max-iter', type=int, help='Newton iteration limit')
    parser.add_argument('--newton-start', choices=('zero', 'ones'), help='First-step Newton guess for d')
    parser.add_argument('--tau', type=float, nargs='+', help='Step size(s)')
    parser.add_argument('--T', type=float, help='Final time (default 5)')
    parser.add_argument('--tau-ref', type=float, help='Sampling step of the L-infinity error')
    parser.add_argument('--control', help='Input signal: sin2t, one_minus_sin or zero')
    parser.add_argument('--initial', choices=('reference', 'zero'), help='Initial state')
    parser.add_argument('--norm', choices=('plain', 'mass'), help='Error norm')
    parser.add_argument('--N', type=int, help='Toda particles or interior wave grid points')
    parser.add_argument('--gamma', type=float, help='Friction coefficient')
    parser.add_argument('--nu', type=float, help='Wave viscosity')
    parser.add_argument('--ell', type=float, help='Wave domain length')
    parser.add_argument('--inertias', type=float, nargs=3, help='Rigid body inertias')
    parser.add_argument('--axis', type=float, nargs=3, help='Rigid body input axis')
    parser.add_argument('--workers', type=int, help='Concurrent step sizes in a sweep')
    parser.add_argument('--out', help='Output file, or directory for presets')
    parser.add_argument('--format', choices=('csv', 'json'), help='Output format')
    parser.add_argument('--record', action='store_true', help='Store the run in the SQLite ledger')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Energy-consistent cPG experiments for port-Hamiltonian systems')
    parser.add_argument('--debug', action='store_true', help='Enable debug logging')
    sub = parser.add_subparsers(dest='command', required=True)
    for name in _MODES:
        _add_experiment_flags(sub.add_parser(name, help=f'{name} experiment'))
    check = sub.add_parser('check', help='Structural checks of a model')
    check.add_argument('--model', choices=MODELS, required=True)
    check.add_argument('--probes', type=int, default=100)
    sub.add_parser('list-presets', help='Print the built-in presets')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Основная функция запуска программы"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    setup_logging(debug=args.debug)

    try:
        if args.command == 'list-presets':
            for name in sorted(PRESETS):
                print(name)
            return EXIT_OK
        if args.command == 'check':
            return run_check(args.model, args.probes)

        setup_folders()
        mode = _MODES[args.command]
        configs = build_configs(args, mode)
        logger.info(f"=== cPG {args.command}: {len(configs)} series ===")
        return run_pipeline(configs, out=args.out, record=args.record)

    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG
    except NonConvergenceError as e:
        logger.error(f"Newton failed at step {e.step_index}: {e}")
        return EXIT_NUMERICAL
    except (SingularJacobianError, DomainError) as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_NUMERICAL
    except CpgError as e:
        logger.error(f"Pipeline failed: {e}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
