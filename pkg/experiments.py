"""
Arnés de experimentos
Casos Monte Carlo con semilla (barridos de τ, SNR, S, M, β, sistemas y
distribuciones de prior) que producen resultados tabulares en CSV
"""

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union, get_args

import numpy as np
import structlog
from pydantic import BaseModel, Field, ValidationError, model_validator

from config import settings
from core_model import Dictionary, SensingMatrix, SignalBatch, equivalent_dictionary
from errors import CompressedSensingError, ConfigError, ContractViolationError, MatrixIOError, UnknownKindError
from matrix_io import format_float, load_json
from metrics import support_recovery_rate
from prior import average_binary_entropy, extract_prior, weight_matrix
from recovery import DEFAULT_G_BAR, RecoveryConfig, estimate_g_bar, recover
from seeding import derive_seed, stream
from sensing_design import DesignParams, design_baseline, design_pwdsmd
from synthetic import GROUP_PROFILES, GroupSpec, expand_groups, gen_batch, gen_dictionary, rescale_groups

logger = structlog.get_logger()

CaseId = Literal[
    "tau_sweep",
    "snr_sweep",
    "sparsity_sweep",
    "m_sweep",
    "beta_sweep",
    "system_compare",
    "system_sparsity",
    "system_m",
    "entropy_compare",
]
CASE_IDS: Tuple[str, ...] = get_args(CaseId)

DesignLabel = Literal["random", "dcs", "lg", "bh", "pwdsmd", "pwdsmd_noprior"]
RecoveryLabel = Literal["omp", "pdomp", "lwomp"]
SweepParameter = Literal["tau", "snr_db", "sparsity", "m", "beta", "groups"]

CSV_HEADER = ["sweep_value", "design", "recovery", "mse", "e_r", "trials", "seed", "mse_se", "secondary_value"]

# Dimensiones de referencia a escala completa
FULL_SCALE_M, FULL_SCALE_N, FULL_SCALE_K = 50, 200, 240
FULL_SCALE_SPARSITY = 12
FULL_SCALE_TRIALS = 1000
FULL_SCALE_GROUPS = GROUP_PROFILES["graded"]

# β elegido por beta_sweep con átomos unitarios y coeficientes N(0, 1)
CASE_BETA = 1e-3

# Casos que miden el efecto del prior: varios diccionarios por ejecución
PRIOR_EFFECT_TRIALS = 1500
_PRIOR_EFFECT_CASES = ("tau_sweep", "entropy_compare")

_SIX_DESIGNS = ["random", "dcs", "lg", "bh", "pwdsmd_noprior", "pwdsmd"]
_SYSTEM_DESIGNS = ["random", "dcs", "bh", "pwdsmd"]


class AlgorithmPair(BaseModel):
    """Diseño de Φ y algoritmo de recuperación evaluados juntos"""
    design: DesignLabel
    recovery: RecoveryLabel


class SweepSpec(BaseModel):
    parameter: SweepParameter
    values: List[float] = Field(..., min_length=1)


class CaseConfig(BaseModel):
    """Configuración completa de un caso (serializable a JSON)"""
    case_id: CaseId
    m: int = Field(..., ge=1)
    n: int = Field(..., ge=1)
    k: int = Field(..., ge=1)
    sparsity: int = Field(..., ge=1)
    snr_db: Optional[float] = 20.0
    trials: int = Field(..., ge=1)
    group_spec: GroupSpec
    group_variants: List[List[int]] = Field(default_factory=list)
    algorithms: List[AlgorithmPair] = Field(..., min_length=1)
    sweep: SweepSpec
    secondary: Optional[SweepSpec] = None
    master_seed: int = Field(0, ge=0, lt=2 ** 64)
    replicates: int = Field(1, ge=1)
    tau: float = 0.2
    beta: float = Field(CASE_BETA, ge=0)
    gamma: float = Field(0.5, ge=0, le=1)
    bh_iters: Optional[int] = Field(None, ge=0)
    prior_source: Literal["oracle", "training"] = "oracle"
    training_trials: Optional[int] = Field(None, ge=1)
    exact_counts: bool = False

    @model_validator(mode="after")
    def _check_variants(self) -> "CaseConfig":
        if self.sweep.parameter == "groups" and not self.group_variants:
            raise ValueError("a groups sweep needs group_variants")
        if self.secondary is not None:
            if self.secondary.parameter == self.sweep.parameter:
                raise ValueError(f"secondary axis repeats the swept parameter {self.sweep.parameter!r}")
            if self.secondary.parameter == "groups":
                raise ValueError("group profiles can only be the primary sweep")
        return self


class ExperimentRow(BaseModel):
    """Una fila del CSV: un valor del barrido para un par de algoritmos"""
    sweep_value: float
    design: str
    recovery: str
    mse: float
    e_r: float
    trials: int
    seed: int
    mse_se: float
    secondary_value: Optional[float] = None
    squared_errors: Tuple[float, ...] = Field(default=(), exclude=True)


class ExperimentResult(BaseModel):
    case_id: str
    rows: List[ExperimentRow] = Field(default_factory=list)

    def row(
        self,
        sweep_value: float,
        design: str,
        recovery: str,
        secondary_value: Optional[float] = None,
    ) -> ExperimentRow:
        """Buscar la fila de un punto del barrido"""
        for row in self.rows:
            if (
                row.sweep_value == sweep_value
                and row.design == design
                and row.recovery == recovery
                and row.secondary_value == secondary_value
            ):
                return row
        raise KeyError((sweep_value, design, recovery, secondary_value))


class PairedDifference(BaseModel):
    """Media y error estándar de MSE(a) − MSE(b) sobre ensayos emparejados"""
    mean: float
    se: float
    trials: int


def paired_difference(first: ExperimentRow, second: ExperimentRow) -> PairedDifference:
    """
    Diferencia emparejada de dos filas del mismo caso

    Las filas de un caso comparten los ensayos (mismo lote por columna), así
    que la diferencia se toma ensayo a ensayo antes de promediar.
    """
    a = np.asarray(first.squared_errors, dtype=float)
    b = np.asarray(second.squared_errors, dtype=float)
    if a.shape != b.shape or a.size < 2:
        raise ContractViolationError(f"rows are not paired: {a.size} and {b.size} trials")
    diff = a - b
    return PairedDifference(
        mean=math.fsum(diff.tolist()) / diff.size,
        se=float(np.std(diff, ddof=1) / math.sqrt(diff.size)),
        trials=int(diff.size),
    )


class SweepPoint(BaseModel):
    """Parámetros efectivos para un valor del barrido"""
    sweep_value: float
    m: int
    sparsity: int
    snr_db: Optional[float]
    tau: float
    beta: float
    group_spec: GroupSpec
    secondary_value: Optional[float] = None


class SimulationOutcome(BaseModel):
    """Salida del pipeline completo sobre un lote"""
    estimates: np.ndarray
    reconstruction: np.ndarray
    supports: List[List[int]]
    squared_errors: List[float]

    class Config:
        arbitrary_types_allowed = True


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def _scaled(values: List[float], scale: int) -> List[float]:
    out: List[float] = []
    for value in values:
        scaled = float(max(1, _round_half_up(value / scale)))
        if scaled not in out:
            out.append(scaled)
    return out


def _pairs(designs: List[str], recoveries: List[str]) -> List[AlgorithmPair]:
    return [AlgorithmPair(design=d, recovery=r) for d in designs for r in recoveries]


def default_config(case_id: str, scale: Optional[int] = None, master_seed: int = 0) -> CaseConfig:
    """
    Configuración por defecto de un caso

    Escala completa: M=50, N=200, K=240, S=12, L=1000, SNR=20 dB, grupos
    (160, 50, 20, 10), τ=0.2 y β=1e-3. `scale` divide dimensiones, S y L
    (redondeo al entero más cercano, mitades hacia arriba) y reescala los
    grupos conservando Σ K_j = K.

    tau_sweep y entropy_compare agregan 4·scale diccionarios independientes
    de PRIOR_EFFECT_TRIALS ensayos cada uno.
    """
    if case_id not in CASE_IDS:
        raise UnknownKindError(f"unknown case {case_id!r}")
    scale = settings.desk_scale if scale is None else int(scale)
    if scale < 1:
        raise ConfigError(f"scale must be a positive integer, got {scale}")

    m = max(1, _round_half_up(FULL_SCALE_M / scale))
    n = max(1, _round_half_up(FULL_SCALE_N / scale))
    k = max(1, _round_half_up(FULL_SCALE_K / scale))
    sparsity = max(1, _round_half_up(FULL_SCALE_SPARSITY / scale))
    trials = max(1, FULL_SCALE_TRIALS // scale)
    groups = rescale_groups(FULL_SCALE_GROUPS, k)

    sparsity_grid = _scaled([8, 12, 16, 20, 24], scale)
    m_grid = _scaled([40, 50, 60, 70], scale)
    system_pairs = _pairs(_SYSTEM_DESIGNS, ["omp", "pdomp"]) + [AlgorithmPair(design="random", recovery="lwomp")]

    variants: List[List[int]] = []
    secondary: Optional[SweepSpec] = None
    snr_levels = SweepSpec(parameter="snr_db", values=[10.0, 20.0, 30.0])
    if case_id == "tau_sweep":
        sweep = SweepSpec(parameter="tau", values=[0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
        secondary = snr_levels
        algorithms = [AlgorithmPair(design="pwdsmd", recovery="omp")]
    elif case_id == "snr_sweep":
        sweep = SweepSpec(parameter="snr_db", values=[10.0, 15.0, 20.0, 25.0, 30.0])
        algorithms = _pairs(_SIX_DESIGNS, ["omp"])
    elif case_id == "sparsity_sweep":
        sweep = SweepSpec(parameter="sparsity", values=sparsity_grid)
        algorithms = _pairs(_SIX_DESIGNS, ["omp"])
    elif case_id == "m_sweep":
        sweep = SweepSpec(parameter="m", values=m_grid)
        algorithms = _pairs(_SIX_DESIGNS, ["omp"])
    elif case_id == "beta_sweep":
        sweep = SweepSpec(parameter="beta", values=[1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0])
        secondary = snr_levels
        algorithms = _pairs(["random", "pwdsmd"], ["pdomp"])
    elif case_id == "system_compare":
        sweep = SweepSpec(parameter="m", values=m_grid)
        algorithms = [
            AlgorithmPair(design="pwdsmd", recovery="pdomp"),
            AlgorithmPair(design="random", recovery="lwomp"),
        ]
    elif case_id == "system_sparsity":
        sweep = SweepSpec(parameter="sparsity", values=sparsity_grid)
        algorithms = system_pairs
    elif case_id == "system_m":
        sweep = SweepSpec(parameter="m", values=m_grid)
        algorithms = system_pairs
    else:
        variants = [rescale_groups(GROUP_PROFILES[name], k) for name in GROUP_PROFILES]
        sweep = SweepSpec(parameter="groups", values=[float(i) for i in range(len(variants))])
        secondary = SweepSpec(parameter="m", values=m_grid)
        algorithms = [AlgorithmPair(design="pwdsmd", recovery="pdomp")]

    replicates = 1
    if case_id in _PRIOR_EFFECT_CASES:
        trials = PRIOR_EFFECT_TRIALS
        replicates = 4 * scale

    return CaseConfig(
        case_id=case_id,
        m=m,
        n=n,
        k=k,
        sparsity=sparsity,
        trials=trials,
        group_spec=GroupSpec.from_sparsity(groups, sparsity),
        group_variants=variants,
        algorithms=algorithms,
        sweep=sweep,
        secondary=secondary,
        master_seed=master_seed,
        replicates=replicates,
    )


def load_case_config(path: Union[str, Path]) -> CaseConfig:
    """Leer y validar un CaseConfig en JSON"""
    record = load_json(path)
    try:
        if isinstance(record, dict) and isinstance(record.get("group_spec"), dict):
            record = {**record, "group_spec": GroupSpec.from_record(record["group_spec"])}
        return CaseConfig.model_validate(record)
    except ValidationError as e:
        logger.error("Invalid case configuration", path=str(path), error=str(e))
        raise ConfigError(f"{path}: {e}") from e


def resolve_points(cfg: CaseConfig) -> List[SweepPoint]:
    """
    Expandir el barrido en puntos concretos y comprobar su factibilidad

    Cualquier combinación imposible (S > M, M > N, p′(j) > 1, Σ K_j ≠ K)
    se rechaza aquí, antes de generar datos o diseñar matrices. Con eje
    secundario el orden es secundario por fuera, barrido por dentro.
    """
    secondary_values: List[Optional[float]] = [None]
    if cfg.secondary is not None:
        secondary_values = [float(v) for v in cfg.secondary.values]

    points: List[SweepPoint] = []
    for secondary_value in secondary_values:
        for value in cfg.sweep.values:
            params: Dict[str, object] = {
                "m": cfg.m,
                "sparsity": cfg.sparsity,
                "snr_db": cfg.snr_db,
                "tau": cfg.tau,
                "beta": cfg.beta,
                "sizes": cfg.group_spec.group_sizes,
            }
            if secondary_value is not None:
                _override(params, cfg.secondary.parameter, secondary_value, cfg)
            _override(params, cfg.sweep.parameter, value, cfg)
            points.append(_check_point(cfg, params, float(value), secondary_value))
    return points


def _override(params: Dict[str, object], parameter: str, value: float, cfg: CaseConfig) -> None:
    if parameter in ("tau", "snr_db", "beta"):
        params[parameter] = float(value)
    elif parameter in ("sparsity", "m"):
        params[parameter] = int(value)
    else:
        index = int(value)
        if not 0 <= index < len(cfg.group_variants):
            raise ConfigError(f"groups sweep index {index} has no matching variant")
        params["sizes"] = cfg.group_variants[index]


def _check_point(
    cfg: CaseConfig,
    params: Dict[str, object],
    sweep_value: float,
    secondary_value: Optional[float],
) -> SweepPoint:
    m, sparsity, snr_db = params["m"], params["sparsity"], params["snr_db"]
    tau, beta, sizes = params["tau"], params["beta"], params["sizes"]
    if not 0.0 < tau <= 1.0:
        raise ConfigError(f"tau must lie in (0, 1], got {tau}")
    if beta < 0.0:
        raise ConfigError(f"beta must be non-negative, got {beta}")
    if not 1 <= m <= cfg.n:
        raise ConfigError(f"M={m} must lie in [1, N={cfg.n}]")
    if not 1 <= sparsity <= min(m, cfg.k):
        raise ConfigError(f"sparsity {sparsity} exceeds M={m} or K={cfg.k}")
    if sum(sizes) != cfg.k:
        raise ConfigError(f"group sizes sum to {sum(sizes)}, expected K={cfg.k}")

    axes = {cfg.sweep.parameter, cfg.secondary.parameter if cfg.secondary else None}
    if axes & {"sparsity", "groups"}:
        try:
            spec = GroupSpec.from_sparsity(list(sizes), sparsity)
        except CompressedSensingError as e:
            raise ConfigError(str(e)) from e
    else:
        spec = cfg.group_spec
    if cfg.exact_counts and math.ceil(sparsity / spec.j) > min(spec.group_sizes):
        raise ConfigError(f"groups cannot hold {sparsity} nonzeros in exact-count mode")
    if cfg.sweep.parameter == "groups":
        sweep_value = average_binary_entropy(expand_groups(spec))

    return SweepPoint(
        sweep_value=sweep_value,
        m=m,
        sparsity=sparsity,
        snr_db=snr_db,
        tau=tau,
        beta=beta,
        group_spec=spec,
        secondary_value=secondary_value,
    )


def simulate_system(
    phi: SensingMatrix,
    psi: Dictionary,
    batch: SignalBatch,
    kind: str,
    xi: Optional[np.ndarray],
    cfg: RecoveryConfig,
    workers: int = 1,
) -> SimulationOutcome:
    """
    Pipeline completo: medición Y = ΦX, recuperación por columna y
    reconstrucción X̂ = Ψα̂

    Las columnas se reparten entre `workers` hilos; los resultados se
    recogen en orden de ensayo, así que la salida no depende de `workers`.
    """
    eq = equivalent_dictionary(phi, psi)
    measurements = phi.entries @ batch.signals

    def run_trial(column: int):
        return recover(kind, measurements[:, column], eq, xi, cfg)

    columns = range(batch.size)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(run_trial, columns))
    else:
        results = [run_trial(column) for column in columns]

    estimates = np.column_stack([r.coefficients for r in results])
    reconstruction = psi.entries @ estimates
    squared_errors = np.sum((batch.signals - reconstruction) ** 2, axis=0) / psi.n
    return SimulationOutcome(
        estimates=estimates,
        reconstruction=reconstruction,
        supports=[list(r.support) for r in results],
        squared_errors=[float(v) for v in squared_errors],
    )


def _design(
    label: str,
    point: SweepPoint,
    seed: int,
    psi: Dictionary,
    xi: np.ndarray,
    cfg: CaseConfig,
) -> SensingMatrix:
    if label in ("pwdsmd", "pwdsmd_noprior"):
        tau = point.tau if label == "pwdsmd" else 1.0
        phi0 = stream(seed, "phi0", point.m).standard_normal((point.m, psi.n))
        phi, _ = design_pwdsmd(psi, weight_matrix(xi, tau), phi0)
        return phi
    params = DesignParams(
        algo=label,
        m=point.m,
        gamma=cfg.gamma,
        iters=cfg.bh_iters if label == "bh" else None,
        seed=seed,
    )
    phi, _ = design_baseline(label, psi, params)
    return phi


class _Pooled(BaseModel):
    """Ensayos acumulados de un (punto, par) sobre todas las réplicas"""
    squared_errors: List[float] = Field(default_factory=list)
    true_supports: List[Tuple[int, ...]] = Field(default_factory=list)
    est_supports: List[List[int]] = Field(default_factory=list)


def _aggregate(point: SweepPoint, pair: AlgorithmPair, pooled: _Pooled, cfg: CaseConfig) -> ExperimentRow:
    errors = np.asarray(pooled.squared_errors)
    trials = errors.shape[0]
    mse_value = math.fsum(pooled.squared_errors) / trials
    mse_se = float(np.std(errors, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return ExperimentRow(
        sweep_value=point.sweep_value,
        design=pair.design,
        recovery=pair.recovery,
        mse=mse_value,
        e_r=support_recovery_rate(pooled.true_supports, pooled.est_supports),
        trials=trials,
        seed=cfg.master_seed,
        mse_se=mse_se,
        secondary_value=point.secondary_value,
        squared_errors=tuple(pooled.squared_errors),
    )


def replicate_seed(master_seed: int, replicate: int) -> int:
    """La réplica 0 usa la semilla maestra; las demás, semillas derivadas"""
    if replicate == 0:
        return master_seed
    return derive_seed(master_seed, "replicate", replicate)


def _run_replicate(
    cfg: CaseConfig,
    points: List[SweepPoint],
    seed: int,
    pooled: Dict[Tuple[int, int], _Pooled],
    workers: int,
) -> None:
    psi = gen_dictionary(cfg.n, cfg.k, seed)
    for p_index, point in enumerate(points):
        p = expand_groups(point.group_spec)
        exact = {"exact_spec": point.group_spec, "exact_sparsity": point.sparsity} if cfg.exact_counts else {}
        batch = gen_batch(psi, p, cfg.trials, point.snr_db, seed, label="test", **exact)

        if cfg.prior_source == "training":
            training = gen_batch(
                psi,
                p,
                cfg.training_trials or cfg.trials,
                point.snr_db,
                seed,
                label="train",
                **exact,
            )
            xi = extract_prior(training.coefficients)
            g_bar = estimate_g_bar(training.coefficients)
        else:
            xi = p
            g_bar = DEFAULT_G_BAR

        recovery_cfg = RecoveryConfig(sparsity=point.sparsity, beta=point.beta, g_bar=g_bar)
        designs: Dict[str, SensingMatrix] = {}
        for a_index, pair in enumerate(cfg.algorithms):
            if pair.design not in designs:
                designs[pair.design] = _design(pair.design, point, seed, psi, xi, cfg)
            outcome = simulate_system(designs[pair.design], psi, batch, pair.recovery, xi, recovery_cfg, workers)
            entry = pooled.setdefault((p_index, a_index), _Pooled())
            entry.squared_errors.extend(outcome.squared_errors)
            entry.true_supports.extend(batch.supports)
            entry.est_supports.extend(outcome.supports)


def run_case(cfg: CaseConfig, workers: Optional[int] = None) -> ExperimentResult:
    """
    Ejecutar un caso completo

    Un diccionario por réplica; para cada valor del barrido un lote de prueba
    (las mismas semillas por ensayo en todos los valores) y una Φ por diseño,
    compartidos por todos los pares de algoritmos. Con varias réplicas los
    ensayos se concatenan en orden de réplica, así que las filas siguen
    emparejadas ensayo a ensayo.
    """
    workers = settings.workers if workers is None else workers
    points = resolve_points(cfg)
    logger.info(
        "Running case",
        case=cfg.case_id,
        points=len(points),
        algorithms=len(cfg.algorithms),
        trials=cfg.trials,
        replicates=cfg.replicates,
        seed=cfg.master_seed,
        workers=workers,
    )

    pooled: Dict[Tuple[int, int], _Pooled] = {}
    for replicate in range(cfg.replicates):
        seed = replicate_seed(cfg.master_seed, replicate)
        _run_replicate(cfg, points, seed, pooled, workers)
        logger.debug("Replicate finished", case=cfg.case_id, replicate=replicate, seed=seed)

    result = ExperimentResult(case_id=cfg.case_id)
    for p_index, point in enumerate(points):
        for a_index, pair in enumerate(cfg.algorithms):
            row = _aggregate(point, pair, pooled[(p_index, a_index)], cfg)
            result.rows.append(row)
            logger.info(
                "Sweep point finished",
                case=cfg.case_id,
                sweep_value=row.sweep_value,
                secondary_value=row.secondary_value,
                design=row.design,
                recovery=row.recovery,
                mse=row.mse,
                e_r=row.e_r,
            )
    return result


def render_csv(result: ExperimentResult) -> str:
    """CSV con cabecera fija y floats en su forma decimal más corta"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in result.rows:
        writer.writerow(
            [
                format_float(row.sweep_value),
                row.design,
                row.recovery,
                format_float(row.mse),
                format_float(row.e_r),
                row.trials,
                row.seed,
                format_float(row.mse_se),
                "" if row.secondary_value is None else format_float(row.secondary_value),
            ]
        )
    return buffer.getvalue()


def emit_csv(result: ExperimentResult, path: Union[str, Path]) -> None:
    try:
        Path(path).write_text(render_csv(result), encoding="utf-8")
    except OSError as e:
        logger.error("CSV write failed", path=str(path), error=str(e))
        raise MatrixIOError(str(path), str(e)) from e
    logger.info("Results written", path=str(path), rows=len(result.rows))
