"""Monte-Carlo driver: configuration, per-trial runs, sweeps and complexity accounting."""

import dataclasses
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np
from threadpoolctl import threadpool_limits

from .baselines import GenieInfo, GeoGrid, genie_ls_estimate, genie_pe_estimate, joint_omp_estimate
from .channel import SceneConfig, sample_scene
from .errors import ConfigInvalid, ScaleRefused, ZeroTruth
from .frontend import build_frontend, receive
from .geometry import ArrayConfig
from .los_estimator import estimate_los, make_grids
from .nlos_estimator import build_polar_dictionary, estimate_nlos, somp, side_sensing

ESTIMATORS = ("asagm_smr", "joint_omp", "genie_ls", "genie_pe")
SWEEP_AXES = ("distance", "snr", "pilots")
CSV_COLUMNS = ("sweep_value", "estimator", "mean_nmse", "nmse_db", "trials", "mean_time_ms",
               "metric_evals", "errors", "snr_db", "snr_linear")


@dataclass(frozen=True)
class ExperimentConfig:
    """Every knob of an experiment; defaults are the desk-scale profile."""

    n_rx: int = 64
    n_tx: int = 64
    k_rx: int = 4
    k_tx: int = 2
    carrier_freq: float = 60e9
    m_rx: int = 32
    m_tx: int = 32
    modulus_convention: str = "inv_sqrt_n"
    range_min: float = 10.0
    range_max: float = 200.0
    angle_max_deg: float = 60.0
    n_paths: int = 3
    kappa: float = 4.0
    scatter_angle_deg: tuple = (30.0, 150.0)
    scatter_range: tuple = (5.0, 50.0)
    snr_db: float = 10.0
    estimators: tuple = ("asagm_smr", "joint_omp", "genie_ls")
    q_xi: int = 320
    q_alpha: int = 7
    t_iter: int = 3
    r_min: float = 10.0
    centroid_scale: float = 1.0
    q_angle: int = 128
    q_curv: int = 7
    dict_r_min: float = 5.0
    l_hat: int = None
    stopping: str = "fixed"
    normalize_columns: bool = True
    pe_q_angle: int = 196
    pe_q_range: int = 256
    pe_neighborhood: int = 5
    pe_range: tuple = (10.0, 200.0)
    t_grad: int = 100
    q_eta: int = 16
    sweep_axis: str = "snr"
    sweep_points: tuple = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
    trials: int = 100
    seed: int = 2024
    record_timing: bool = False

    def __post_init__(self):
        for name in ("scatter_angle_deg", "scatter_range", "estimators", "sweep_points", "pe_range"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.trials < 1 or not self.sweep_points:
            raise ConfigInvalid("need at least one trial and one sweep point")
        if self.sweep_axis not in SWEEP_AXES:
            raise ConfigInvalid(f"sweep_axis must be one of {SWEEP_AXES}")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ConfigInvalid(f"unknown estimators {sorted(unknown)}")
        if self.m_rx % self.k_rx or self.m_tx % self.k_tx:
            raise ConfigInvalid("beam counts must be multiples of the RF-chain counts")
        self.array_config()

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigInvalid(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def profile(cls, name):
        """Shipped profiles: ``desk`` or ``paper``."""
        text = resources.files("xlmimo.data").joinpath(f"{name}.json").read_text()
        return cls.from_dict(json.loads(text))

    def to_dict(self):
        d = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2)

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def paper_scale(self):
        """Array, beam and grid sizes of the full-size system."""
        return self.replace(n_rx=128, n_tx=128, m_rx=64, m_tx=64, q_xi=640, q_angle=256)

    def array_config(self):
        return ArrayConfig(self.n_rx, self.n_tx, self.k_rx, self.k_tx, self.carrier_freq)

    def scene_config(self):
        return SceneConfig(self.range_min, self.range_max, self.angle_max_deg, self.n_paths,
                           self.kappa, self.scatter_angle_deg, self.scatter_range)

    def at_point(self, value):
        """Copy with the sweep axis set to ``value``."""
        if self.sweep_axis == "distance":
            return self.replace(range_min=float(value), range_max=float(value))
        if self.sweep_axis == "snr":
            return self.replace(snr_db=float(value))
        m = int(value)
        return self.replace(m_rx=m, m_tx=m)

    @property
    def noise_var(self):
        return 10.0 ** (-self.snr_db / 10.0)

    @property
    def sparsity(self):
        return self.n_paths if self.l_hat is None else self.l_hat


@dataclass
class TrialRecord:
    sweep_value: float
    trial_index: int
    nmse: dict = field(default_factory=dict)
    time_ms: dict = field(default_factory=dict)
    metric_evals: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)


def nmse(estimate, truth):
    """``||estimate - truth||_F^2 / ||truth||_F^2``."""
    den = np.vdot(truth, truth).real
    if den == 0.0:
        raise ZeroTruth("truth channel is zero")
    diff = np.asarray(estimate) - np.asarray(truth)
    return float(np.vdot(diff, diff).real / den)


@lru_cache(maxsize=8)
def _dictionaries(array, q_angle, q_curv, r_min):
    return (build_polar_dictionary(array, "rx", q_angle, q_curv, r_min),
            build_polar_dictionary(array, "tx", q_angle, q_curv, r_min))


@lru_cache(maxsize=8)
def _grids(q_xi, q_alpha, r_min):
    return make_grids(q_xi, q_alpha, r_min)


def trial_seeds(seed, trial_index):
    """Independent scene, frontend and noise generators for one trial.

    Seeds depend only on the base seed and the trial index, so every sweep
    point sees the same scenes, beams and noise shapes.
    """
    ss = np.random.SeedSequence([seed, trial_index])
    return [np.random.default_rng(s) for s in ss.spawn(3)]


def _run_estimator(name, cfg, Y, frontend, scene):
    array = frontend.config
    dicts = _dictionaries(array, cfg.q_angle, cfg.q_curv, cfg.dict_r_min)
    L = cfg.sparsity
    if name == "asagm_smr":
        los = estimate_los(Y, frontend, _grids(cfg.q_xi, cfg.q_alpha, cfg.r_min), cfg.t_iter,
                           cfg.centroid_scale)
        nl = estimate_nlos(Y, frontend, los.channel, dicts, L, L, cfg.stopping, cfg.noise_var,
                          cfg.normalize_columns)
        evals = los.counters["metric_evals"] + nl.counters.get("side_corr_evals", 0)
        return los.channel + nl.channel, evals
    if name == "joint_omp":
        counters = {}
        H = joint_omp_estimate(Y, frontend, dicts, L + 1, counters, normalize=cfg.normalize_columns)
        return H, counters.get("joint_corr_evals", 0)
    genie = GenieInfo(scene.truth_geom, scene.truth_paths)
    if name == "genie_ls":
        return genie_ls_estimate(Y, frontend, genie), 0
    if name == "genie_pe":
        grid = GeoGrid.uniform(cfg.pe_q_angle, cfg.pe_q_range, cfg.angle_max_deg, cfg.pe_range)
        counters = {}
        H = genie_pe_estimate(Y, frontend, grid, genie, cfg.pe_neighborhood, dicts, L,
                              counters=counters, normalize=cfg.normalize_columns)
        return H, counters.get("pe_evals", 0) + counters.get("joint_corr_evals", 0)
    raise ConfigInvalid(f"unknown estimator {name!r}")


def run_trial(cfg, sweep_value, trial_index):
    """One Monte-Carlo trial at one sweep point; failing estimators record NaN."""
    pcfg = cfg.at_point(sweep_value)
    array = pcfg.array_config()
    rng_scene, rng_frontend, rng_noise = trial_seeds(cfg.seed, trial_index)
    scene = sample_scene(array, rng_scene, pcfg.scene_config())
    frontend = build_frontend(array, rng_frontend, pcfg.m_rx // pcfg.k_rx, pcfg.m_tx // pcfg.k_tx,
                              pcfg.modulus_convention)
    H = scene.total
    Y = receive(frontend, H, rng_noise, pcfg.noise_var)
    rec = TrialRecord(float(sweep_value), int(trial_index))
    for name in pcfg.estimators:
        t0 = time.perf_counter()
        try:
            Hhat, evals = _run_estimator(name, pcfg, Y, frontend, scene)
            rec.nmse[name] = nmse(Hhat, H)
            rec.metric_evals[name] = int(evals)
        except Exception as exc:  # a failing estimator must not abort the sweep
            rec.nmse[name] = math.nan
            rec.metric_evals[name] = 0
            rec.errors[name] = type(exc).__name__
        rec.time_ms[name] = (time.perf_counter() - t0) * 1e3 if cfg.record_timing else 0.0
    return rec


def _task(args):
    cfg, value, index = args
    with threadpool_limits(limits=1):
        return run_trial(cfg, value, index)


def worker_count():
    env = os.environ.get("XLMIMO_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ConfigInvalid("XLMIMO_THREADS must be a positive integer")
        return n
    return os.cpu_count() or 1


def run_records(cfg, workers=None):
    """All trial records, ordered by (sweep point, trial index)."""
    tasks = [(cfg, v, t) for v in cfg.sweep_points for t in range(cfg.trials)]
    workers = worker_count() if workers is None else workers
    if workers <= 1:
        return [_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _fmt(x):
    return repr(float(x))


def aggregate(cfg, records):
    """CSV text with one row per (sweep point, estimator)."""
    out = io.StringIO()
    out.write(",".join(CSV_COLUMNS) + "\n")
    by_point = {}
    for r in records:
        by_point.setdefault(r.sweep_value, []).append(r)
    for value in cfg.sweep_points:
        recs = sorted(by_point.get(float(value), []), key=lambda r: r.trial_index)
        snr_db = cfg.at_point(value).snr_db
        for name in cfg.estimators:
            ok = [r for r in recs if not math.isnan(r.nmse.get(name, math.nan))]
            n = len(ok)
            mean = math.fsum(r.nmse[name] for r in ok) / n if n else math.nan
            db = 10.0 * math.log10(mean) if n and mean > 0 else (-math.inf if n else math.nan)
            t = math.fsum(r.time_ms[name] for r in ok) / n if n else math.nan
            ev = math.fsum(r.metric_evals[name] for r in ok) / n if n else math.nan
            row = [_fmt(value), name, _fmt(mean), _fmt(db), str(n),
                   _fmt(t) if cfg.record_timing else "", _fmt(ev), str(len(recs) - n),
                   _fmt(snr_db), _fmt(10.0 ** (snr_db / 10.0))]
            out.write(",".join(row) + "\n")
    return out.getvalue()


def run_sweep(cfg, out=None, workers=None):
    """Run every (point, trial) and return the aggregated CSV; also written to ``out`` if given."""
    text = aggregate(cfg, run_records(cfg, workers))
    if out is not None:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return text


def read_csv(text):
    """Parse sweep CSV text into a list of dicts with numeric fields converted."""
    lines = text.strip().splitlines()
    head = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        row = dict(zip(head, line.split(",")))
        for k, v in row.items():
            if k != "estimator":
                row[k] = float(v) if v != "" else math.nan
        rows.append(row)
    return rows


# -- complexity ----------------------------------------------------------------


def complexity_formulas(cfg):
    """Leading-order operation counts of each scheme at the configured sizes."""
    L = cfg.sparsity
    qd = cfg.q_angle * cfg.q_curv
    mr, mt = cfg.m_rx, cfg.m_tx
    q_pe = cfg.pe_q_angle
    return {
        "asagm": cfg.t_iter * (cfg.k_tx * mr + cfg.k_rx * mt) * cfg.q_xi * cfg.q_alpha,
        "pe_grid": mr * mt * (q_pe**3 * cfg.pe_q_range + cfg.t_grad * cfg.n_rx * cfg.n_tx),
        "smr_omp": L * mr * mt * 2 * qd,
        "nlos_joint_omp": L * mr * mt * qd * qd,
        "joint_omp": (L + 1) * mr * mt * qd * qd,
        "three_stage_uomp": (L + 1) * cfg.q_eta * qd * qd * min(cfg.n_rx, cfg.n_tx),
        "asagm_grid_points": cfg.q_xi * cfg.q_alpha,
        "pe_grid_points": q_pe**3 * cfg.pe_q_range,
    }


def _dry_run(cfg, q_xi, q_angle, seed):
    """Measured counters of one noiseless run at the given grid sizes."""
    array = cfg.array_config()
    rng_scene, rng_frontend, _ = trial_seeds(seed, 0)
    scene = sample_scene(array, rng_scene, cfg.scene_config())
    fe = build_frontend(array, rng_frontend, cfg.m_rx // cfg.k_rx, cfg.m_tx // cfg.k_tx,
                        cfg.modulus_convention)
    Y = receive(fe, scene.total)
    los = estimate_los(Y, fe, make_grids(q_xi, cfg.q_alpha, cfg.r_min), cfg.t_iter)
    dicts = _dictionaries(array, q_angle, cfg.q_curv, cfg.dict_r_min)
    counters = {}
    Ybar = fe.whiten_rows(Y)
    U_r, U_t = side_sensing(fe, dicts)
    somp(Ybar, U_r, cfg.sparsity, counters=counters)
    somp(Ybar.conj().T, U_t, cfg.sparsity, counters=counters)
    joint = {}
    try:
        joint_omp_estimate(Y, fe, dicts, cfg.sparsity + 1, joint)
    except ScaleRefused:
        joint = {}
    return {
        "asagm": los.counters["metric_macs"],
        "smr_omp": counters["side_corr_macs"],
        "joint_omp": joint.get("joint_corr_evals", math.nan),
    }


def complexity_report(cfg):
    """CSV of the analytical counts plus measured counters and their doubling ratios.

    ASAGM is measured at ``Q_xi`` and ``2 Q_xi``; the dictionaries at ``Q_D``
    and ``2 Q_D`` (both halved first when the joint-OMP guard would refuse
    the larger size).
    """
    with threadpool_limits(limits=1):
        q_angle = cfg.q_angle
        while q_angle > 2 and (cfg.sparsity + 1) * (2 * q_angle * cfg.q_curv) ** 2 > 10_000_000:
            q_angle //= 2
        base = _dry_run(cfg, cfg.q_xi, q_angle, cfg.seed)
        dbl_xi = _dry_run(cfg, 2 * cfg.q_xi, q_angle, cfg.seed)
        dbl_qd = _dry_run(cfg, cfg.q_xi, 2 * q_angle, cfg.seed)
    formulas = complexity_formulas(cfg)
    rows = [
        ("asagm", base["asagm"], dbl_xi["asagm"] / base["asagm"], 2.0, 0.05),
        ("smr_omp", base["smr_omp"], dbl_qd["smr_omp"] / base["smr_omp"], 2.0, 0.05),
        ("joint_omp", base["joint_omp"], dbl_qd["joint_omp"] / base["joint_omp"], 4.0, 0.10),
    ]
    out = io.StringIO()
    out.write("scheme,formula_value,measured,doubling_ratio,expected_ratio,within_tolerance\n")
    for name, measured, ratio, expected, tol in rows:
        ok = abs(ratio - expected) <= tol * expected
        out.write(f"{name},{formulas[name]!r},{measured!r},{ratio!r},{expected!r},{ok}\n")
    for name in ("pe_grid", "nlos_joint_omp", "three_stage_uomp", "asagm_grid_points",
                 "pe_grid_points"):
        out.write(f"{name},{formulas[name]!r},,,,\n")
    return out.getvalue()
