"""
Toolkit de sensado comprimido con información a priori
CLI para diseñar matrices de sensado, sintetizar datos, recuperar señales y
ejecutar los casos experimentales
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import structlog
from pydantic import ValidationError

from config import settings
from core_model import Dictionary, SensingMatrix, equivalent_dictionary, reconstruct
from errors import (
    CompressedSensingError,
    ConfigError,
    InfeasibleGroupError,
    MatrixIOError,
    MatrixParseError,
    ParameterError,
    UnknownKindError,
    UsageError,
)
from experiments import CASE_IDS, default_config, emit_csv, load_case_config, run_case
from matrix_io import load_json, load_matrix, load_vector, store_matrix, store_report, store_vector
from metrics import MetricRecord, mse, mutual_coherence, omp_guarantee_holds, psnr, support_recovery_rate, welch_bound
from prior import weight_matrix
from recovery import DEFAULT_BETA, DEFAULT_G_BAR, RecoveryConfig, recover
from sensing_design import DesignParams, design_matrix
from synthetic import GroupSpec, expand_groups, gen_batch, gen_dictionary

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2
EXIT_IO = 3

USAGE_ERRORS = (UsageError, ConfigError, ParameterError, UnknownKindError, InfeasibleGroupError)
IO_ERRORS = (MatrixIOError, MatrixParseError)


def configure_logging(level: Optional[str] = None) -> None:
    """Logging estructurado en JSON por stderr; stdout queda para resultados"""
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, (level or settings.log_level).upper(), logging.INFO),
        format="%(message)s",
    )
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
            structlog.processors.JSONRenderer()
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )


logger = structlog.get_logger()


def _emit(payload: Dict[str, Any]) -> None:
    print(json.dumps(payload, sort_keys=True))


def _load_dictionary(path: str) -> Dictionary:
    return Dictionary.from_array(load_matrix(path))


def _sidecar_path(out: str) -> str:
    return f"{out}.json"


def _recon_path(out: str) -> Path:
    path = Path(out)
    return path.with_name(f"{path.stem}_recon{path.suffix}")


# ============================================================================
# SUBCOMANDOS
# ============================================================================

def cmd_design(args: argparse.Namespace) -> int:
    """Diseñar Φ y guardar la matriz con su reporte"""
    record: Dict[str, Any] = load_json(args.params) if args.params else {}
    overrides = {
        "algo": args.algo,
        "m": args.m,
        "tau": args.tau,
        "gamma": args.gamma,
        "iters": args.iters,
        "seed": args.seed,
        "mu_bar": args.mu_bar,
    }
    record.update({key: value for key, value in overrides.items() if value is not None})
    if "algo" not in record or "m" not in record:
        raise UsageError("design needs --algo and --m (or a --params record with both)")
    try:
        params = DesignParams.model_validate(record)
    except ValidationError as e:
        raise UsageError(f"invalid design parameters: {e}") from e

    if params.algo == "pwdsmd" and not args.prior:
        raise UsageError("--algo pwdsmd requires --prior")
    if params.algo in ("random", "bh") and params.seed is None:
        raise UsageError(f"--algo {params.algo} requires --seed")

    psi = _load_dictionary(args.dict)
    prior = weight_matrix(load_vector(args.prior), params.tau) if params.algo == "pwdsmd" else None
    phi0 = load_matrix(args.phi0) if args.phi0 else None

    phi, report = design_matrix(params, psi, prior, phi0)
    store_matrix(phi.entries, args.out)
    sidecar = {"algo": params.algo, "m": phi.m, **report.sidecar()}
    store_report(sidecar, _sidecar_path(args.out))
    _emit({"objective": report.objective, "out": args.out})
    return EXIT_OK


def _group_spec(args: argparse.Namespace) -> GroupSpec:
    if args.groups:
        try:
            return GroupSpec.from_record(load_json(args.groups))
        except ValidationError as e:
            raise UsageError(f"invalid group spec: {e}") from e
    if not args.group_sizes or args.sparsity is None:
        raise UsageError("synth needs --groups or --group-sizes with --sparsity")
    try:
        sizes = [int(token) for token in args.group_sizes.split(",")]
    except ValueError as e:
        raise UsageError(f"--group-sizes must be comma-separated integers: {args.group_sizes}") from e
    return GroupSpec.from_sparsity(sizes, args.sparsity)


def cmd_synth(args: argparse.Namespace) -> int:
    """Generar Ψ (o leerlo), A, X, el prior p y opcionalmente Y = ΦX"""
    if args.l < 1:
        raise UsageError(f"--l must be at least 1, got {args.l}")
    spec = _group_spec(args)
    if args.dict:
        psi = _load_dictionary(args.dict)
    elif args.n is None:
        raise UsageError("synth needs --n or --dict")
    else:
        psi = gen_dictionary(args.n, spec.k, args.seed)
    if psi.k != spec.k:
        raise UsageError(f"group sizes sum to {spec.k}, dictionary has {psi.k} atoms")

    p = expand_groups(spec)
    exact = {}
    if args.exact:
        if args.sparsity is None:
            raise UsageError("--exact requires --sparsity")
        exact = {"exact_spec": spec, "exact_sparsity": args.sparsity}
    batch = gen_batch(psi, p, args.l, args.snr, args.seed, **exact)

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise MatrixIOError(str(out), str(e)) from e
    store_matrix(psi.entries, out / "dictionary.csv")
    store_matrix(batch.coefficients, out / "coefficients.csv")
    store_matrix(batch.signals, out / "signals.csv")
    store_vector(p, out / "prior.csv")
    if args.phi:
        phi = SensingMatrix(entries=load_matrix(args.phi))
        if phi.n != psi.n:
            raise UsageError(f"sensing matrix has {phi.n} columns, dictionary has {psi.n} rows")
        store_matrix(phi.entries @ batch.signals, out / "measurements.csv")

    _emit({"out": str(out), "l": batch.size, "zero_energy_columns": list(batch.zero_energy_columns)})
    return EXIT_OK


def cmd_recover(args: argparse.Namespace) -> int:
    """Recuperar α̂ columna a columna y reconstruir X̂ = Ψα̂"""
    if args.algo in ("pdomp", "lwomp") and not args.prior:
        raise UsageError(f"--algo {args.algo} requires --prior")

    phi = SensingMatrix(entries=load_matrix(args.phi))
    psi = _load_dictionary(args.dict)
    y = load_matrix(args.y)
    if args.sparsity > phi.m:
        raise UsageError(f"--sparsity {args.sparsity} exceeds M={phi.m}")
    if y.shape[0] != phi.m:
        raise UsageError(f"measurements have {y.shape[0]} rows, sensing matrix has {phi.m}")
    xi = load_vector(args.prior) if args.prior else None
    try:
        cfg = RecoveryConfig(sparsity=args.sparsity, beta=args.beta, g_bar=args.gbar)
    except ValidationError as e:
        raise UsageError(f"invalid recovery parameters: {e}") from e

    eq = equivalent_dictionary(phi, psi)
    estimates = np.column_stack([recover(args.algo, y[:, l], eq, xi, cfg).coefficients for l in range(y.shape[1])])
    residuals = np.linalg.norm(y - eq.raw @ estimates, axis=0)

    store_matrix(estimates, args.out)
    recon = _recon_path(args.out)
    store_matrix(reconstruct(psi, estimates), recon)
    _emit({"out": args.out, "reconstruction": str(recon), "max_residual": float(residuals.max())})
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    """Ejecutar un caso por id o desde un JSON y escribir el CSV"""
    if args.case in CASE_IDS:
        cfg = default_config(args.case, scale=args.scale, master_seed=args.seed)
    elif args.case.endswith(".json") or Path(args.case).exists():
        cfg = load_case_config(args.case).model_copy(update={"master_seed": args.seed})
    else:
        raise UnknownKindError(f"unknown case {args.case!r}; expected one of {', '.join(CASE_IDS)}")

    if args.replicates is not None:
        if args.replicates < 1:
            raise UsageError(f"--replicates must be at least 1, got {args.replicates}")
        cfg = cfg.model_copy(update={"replicates": args.replicates})

    result = run_case(cfg, workers=args.workers)
    emit_csv(result, args.out)
    _emit({"out": args.out, "rows": len(result.rows)})
    return EXIT_OK


def _supports(coefficients: np.ndarray) -> List[List[int]]:
    mask = np.abs(coefficients) > settings.zero_tol
    return [list(np.flatnonzero(mask[:, l])) for l in range(mask.shape[1])]


def cmd_metrics(args: argparse.Namespace) -> int:
    """MSE/PSNR, e_r, μ(ΦΨ), cota de Welch y predicado de garantía de OMP"""
    x = load_matrix(args.x)
    x_hat = load_matrix(args.x_hat)
    mse_value = mse(x, x_hat)
    values: Dict[str, Any] = {"mse": mse_value, "psnr_db": psnr(mse_value)}

    if bool(args.coeffs) != bool(args.coeffs_hat):
        raise UsageError("--coeffs and --coeffs-hat go together")
    if args.coeffs:
        truth, estimate = load_matrix(args.coeffs), load_matrix(args.coeffs_hat)
        e_r = support_recovery_rate(_supports(truth), _supports(estimate))
        values["e_r"] = None if np.isnan(e_r) else e_r

    if bool(args.phi) != bool(args.dict):
        raise UsageError("--phi and --dict go together")
    if args.phi:
        eq = equivalent_dictionary(SensingMatrix(entries=load_matrix(args.phi)), _load_dictionary(args.dict))
        mu = mutual_coherence(eq.raw)
        values.update(mu=mu, welch=welch_bound(eq.m, eq.k))
        if args.sparsity is not None and mu > 0.0:
            values["guarantee_holds"] = omp_guarantee_holds(args.sparsity, mu)

    record = MetricRecord(**values)
    print(record.model_dump_json())
    return EXIT_OK


# ============================================================================
# PARSER Y PUNTO DE ENTRADA
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cs-prior", description="Compressed sensing with probability priors.")
    sub = parser.add_subparsers(dest="command", required=True)

    design = sub.add_parser("design", help="Design a sensing matrix.")
    design.add_argument("--algo", choices=["random", "dcs", "lg", "bh", "pwdsmd"])
    design.add_argument("--dict", required=True, help="Dictionary matrix file (N x K).")
    design.add_argument("--m", type=int, help="Measurement dimension M.")
    design.add_argument("--prior", help="Prior vector file (xi, K entries).")
    design.add_argument("--tau", type=float)
    design.add_argument("--gamma", type=float)
    design.add_argument("--iters", type=int)
    design.add_argument("--mu-bar", dest="mu_bar", type=float)
    design.add_argument("--phi0", help="Initial sensing matrix used for the free block of pwdsmd.")
    design.add_argument("--params", help="JSON design record; flags override its fields.")
    design.add_argument("--seed", type=int)
    design.add_argument("--out", required=True)
    design.set_defaults(handler=cmd_design)

    synth = sub.add_parser("synth", help="Generate a dictionary, sparse coefficients and signals.")
    synth.add_argument("--n", type=int, help="Signal dimension N (ignored with --dict).")
    synth.add_argument("--dict", help="Existing dictionary file instead of a fresh draw.")
    synth.add_argument("--groups", help="GroupSpec JSON file.")
    synth.add_argument("--group-sizes", dest="group_sizes", help="Comma-separated group lengths.")
    synth.add_argument("--sparsity", type=int)
    synth.add_argument("--exact", action="store_true", help="Exactly S/J nonzeros per group.")
    synth.add_argument("--l", type=int, default=1, help="Number of signals L.")
    synth.add_argument("--snr", type=float, help="Per-column SNR in dB (noiseless if absent).")
    synth.add_argument("--phi", help="Sensing matrix file; also writes measurements Y = Phi X.")
    synth.add_argument("--seed", type=int, required=True)
    synth.add_argument("--out", required=True, help="Output directory.")
    synth.set_defaults(handler=cmd_synth)

    rec = sub.add_parser("recover", help="Recover sparse coefficients from measurements.")
    rec.add_argument("--algo", choices=["omp", "pdomp", "lwomp"], required=True)
    rec.add_argument("--phi", required=True)
    rec.add_argument("--dict", required=True)
    rec.add_argument("--y", required=True, help="Measurement matrix file (M x L).")
    rec.add_argument("--prior", help="Prior vector file (xi or p).")
    rec.add_argument("--beta", type=float, default=DEFAULT_BETA)
    rec.add_argument("--gbar", type=float, default=DEFAULT_G_BAR)
    rec.add_argument("--sparsity", type=int, required=True)
    rec.add_argument("--out", required=True)
    rec.set_defaults(handler=cmd_recover)

    exp = sub.add_parser("experiment", help="Run an experiment case.")
    exp.add_argument("--case", required=True, help=f"Case id ({', '.join(CASE_IDS)}) or CaseConfig JSON path.")
    exp.add_argument("--seed", type=int, required=True)
    exp.add_argument("--scale", type=int, default=None, help="Desk-scale factor (1 = full scale).")
    exp.add_argument("--workers", type=int, default=None)
    exp.add_argument("--replicates", type=int, default=None, help="Independent dictionaries pooled per row.")
    exp.add_argument("--out", required=True)
    exp.set_defaults(handler=cmd_experiment)

    met = sub.add_parser("metrics", help="Evaluate a recovery.")
    met.add_argument("--x", required=True)
    met.add_argument("--x-hat", dest="x_hat", required=True)
    met.add_argument("--coeffs")
    met.add_argument("--coeffs-hat", dest="coeffs_hat")
    met.add_argument("--phi")
    met.add_argument("--dict")
    met.add_argument("--sparsity", type=int)
    met.set_defaults(handler=cmd_metrics)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Punto de entrada: traduce los errores del dominio a códigos de salida"""
    configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        return args.handler(args)
    except USAGE_ERRORS as e:
        logger.error("Invalid invocation", command=args.command, error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except IO_ERRORS as e:
        logger.error("Input/output failure", command=args.command, error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except CompressedSensingError as e:
        logger.error("Command failed", command=args.command, error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
