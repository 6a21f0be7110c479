"""Monte-Carlo BLER and complexity campaigns.

Every trial draws its message and noise from a private Philox stream keyed by
``(campaign seed, point seed)`` with the trial index in the counter, so a
point's result depends only on the config and seed.  Trials run in fixed-size
chunks; the stopping rule truncates at the exact trial that produced the
target-th block error, so the worker count never changes the output.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .channel import NoiseModel, SnrSpec, snr_to_sigma, standard_normal
from .codes import CRC11_POLY, CaPolarCode, build_ca_polar
from .decoders import MlDecoder, SclDecoder
from .sphere import SphereCacheError, build_sphere, load_sphere
from .wsd import TwoStageDecoder, WsdConfig

log = logging.getLogger(__name__)

DECODERS = ("scl", "scl_wsd", "mld")
CHUNK = 256
_WILSON_Z = 1.959963984540054

CSV_COLUMNS = ("snr_db", "snr_mode", "decoder", "list_size", "radius", "max_rounds", "mode",
               "blocks", "errors", "bler", "ci_low", "ci_high", "avg_evals_block",
               "avg_evals_bit", "avg_boost_rounds", "crc_fail_rate", "seed")


class SetupError(RuntimeError):
    """Raised before any trial runs when a campaign cannot be set up."""


@dataclass(frozen=True)
class CodeConfig:
    N: int = 64
    K: int = 16
    crc_poly: int = CRC11_POLY

    def build(self) -> CaPolarCode:
        return build_ca_polar(self.N, self.K, self.crc_poly)


@dataclass(frozen=True)
class SnrGrid:
    mode: str = "ebn0"
    values: tuple[float, ...] = (2.0,)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValueError("SNR grid is empty")
        SnrSpec(self.mode, self.values[0])  # validates the mode

    @classmethod
    def arange(cls, start: float, stop: float, step: float, mode: str = "ebn0") -> SnrGrid:
        if step <= 0:
            raise ValueError("SNR step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return cls(mode, tuple(round(start + i * step, 10) for i in range(max(n, 0))))


@dataclass(frozen=True)
class TrialConfig:
    max_blocks: int = 10**6
    target_block_errors: int = 100

    def __post_init__(self):
        if self.max_blocks < 1 or self.target_block_errors < 1:
            raise ValueError("max_blocks and target_block_errors must be >= 1")


@dataclass(frozen=True)
class SimConfig:
    code: CodeConfig = field(default_factory=CodeConfig)
    decoder: str = "scl_wsd"
    list_size: int = 32
    wsd: WsdConfig | None = field(default_factory=WsdConfig)
    snr: SnrGrid = field(default_factory=SnrGrid)
    trials: TrialConfig = field(default_factory=TrialConfig)
    seed: int = 1
    sphere_cache_path: str | None = None

    def __post_init__(self):
        if self.decoder not in DECODERS:
            raise ValueError(f"decoder must be one of {DECODERS}, got {self.decoder!r}")
        if self.decoder == "scl_wsd" and self.wsd is None:
            raise ValueError("decoder scl_wsd needs a wsd section")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["code"]["crc_poly"] = hex(self.code.crc_poly)
        d["snr"]["values"] = list(self.snr.values)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SimConfig:
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        d = dict(d)
        if "code" in d:
            c = dict(d["code"])
            if isinstance(c.get("crc_poly"), str):
                c["crc_poly"] = int(c["crc_poly"], 0)
            d["code"] = CodeConfig(**c)
        if d.get("wsd") is not None:
            d["wsd"] = WsdConfig(**d["wsd"])
        if "snr" in d:
            s = dict(d["snr"])
            if "values" not in s and "start" in s:
                d["snr"] = SnrGrid.arange(s["start"], s["stop"], s["step"], s.get("mode", "ebn0"))
            else:
                d["snr"] = SnrGrid(s.get("mode", "ebn0"), tuple(s["values"]))
        if "trials" in d:
            d["trials"] = TrialConfig(**d["trials"])
        return cls(**d)

    @classmethod
    def from_file(cls, path: str | Path) -> SimConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class BlerPoint:
    snr_db: float
    blocks_simulated: int
    block_errors: int
    bler: float
    bler_ci_low: float
    bler_ci_high: float
    avg_metric_evals_per_block: float
    avg_metric_evals_per_bit: float
    avg_boost_rounds: float
    crc_fail_rate_hat: float
    # Errors of the initial decoder alone on the same blocks (scl_wsd only).
    initial_block_errors: int | None = None


def wilson_interval(errors: int, n: int, z: float = _WILSON_Z) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = errors / n
    den = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    # clamp so rounding can never put p outside its own interval
    return max(0.0, min(centre - half, p)), min(1.0, max(centre + half, p))


def trial_stream(seed: int, point_seed: int, trial: int) -> np.random.Generator:
    """Private counter-mode stream of one trial."""
    return np.random.Generator(np.random.Philox(key=[seed, point_seed], counter=[0, 0, 0, trial]))


def draw_trial(rng: np.random.Generator, K: int, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Message bits and unit-variance noise for one block."""
    words = rng.bit_generator.random_raw((K + 63) // 64)
    words = np.atleast_1d(np.asarray(words, dtype=np.uint64))
    bits = np.unpackbits(words.astype("<u8").view(np.uint8), bitorder="little")[:K]
    return bits, standard_normal(rng, N)


def make_decoder(cfg: SimConfig, code: CaPolarCode):
    if cfg.decoder == "mld":
        return MlDecoder(code)
    scl = SclDecoder(code, cfg.list_size)
    if cfg.decoder == "scl":
        return scl
    return TwoStageDecoder(code, scl, resolve_sphere(cfg, code), cfg.wsd)


def resolve_sphere(cfg: SimConfig, code: CaPolarCode):
    r = cfg.wsd.radius_index
    if cfg.sphere_cache_path is None:
        try:
            return build_sphere(code, r)
        except ValueError as e:
            raise SetupError(f"cannot build sphere: {e}") from e
    path = Path(cfg.sphere_cache_path)
    if not path.exists():
        raise SetupError(f"sphere cache {path} does not exist")
    try:
        sphere = load_sphere(path, code)
    except SphereCacheError as e:
        raise SetupError(f"sphere cache {path}: {e}") from e
    if sphere.radius_index != r:
        raise SetupError(f"sphere cache {path} has radius {sphere.radius_index}, config wants {r}")
    return sphere


class _Runner:
    """Code, decoder and per-chunk trial execution for one campaign."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.code = cfg.code.build()
        self.decoder = make_decoder(cfg, self.code)

    def chunk(self, point_seed: int, sigma: float, start: int, stop: int) -> dict:
        code, n = self.code, stop - start
        m = np.empty((n, code.K), dtype=np.uint8)
        noise = np.empty((n, code.N))
        for i in range(n):
            m[i], noise[i] = draw_trial(trial_stream(self.cfg.seed, point_seed, start + i), code.K, code.N)
        y = 1.0 - 2.0 * code.encode_array(m) + sigma * noise
        out = self.decoder.decode_batch(y, NoiseModel(sigma))
        res = {
            "err": (out.messages != m).any(axis=1),
            "evals": out.metric_evals,
            "rounds": out.boost_rounds,
            "crc_fail": out.boosted if self.cfg.decoder == "scl_wsd" else ~out.crc_pass,
        }
        if out.initial is not None:
            res["init_err"] = (out.initial.messages != m).any(axis=1)
        return res


_WORKER: _Runner | None = None


def _worker_init(cfg_dict: dict):
    global _WORKER
    _WORKER = _Runner(SimConfig.from_dict(cfg_dict))


def _worker_chunk(args):
    return _WORKER.chunk(*args)


def _collect(runner: _Runner, point_seed: int, sigma: float, pool, width: int) -> dict:
    cfg = runner.cfg
    target, cap = cfg.trials.target_block_errors, cfg.trials.max_blocks
    parts: list[dict] = []
    errors, done = 0, 0
    while done < cap and errors < target:
        spans = []
        for _ in range(width):
            if done >= cap:
                break
            spans.append((point_seed, sigma, done, min(done + CHUNK, cap)))
            done = spans[-1][3]
        if pool is None:
            results = [runner.chunk(*s) for s in spans]
        else:
            results = list(pool.map(_worker_chunk, spans))
        for r in results:
            parts.append(r)
            errors += int(r["err"].sum())
    merged = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    hits = np.flatnonzero(merged["err"])
    if hits.size >= target:
        stop = int(hits[target - 1]) + 1
        merged = {k: v[:stop] for k, v in merged.items()}
    return merged


def _point_from_trials(cfg: SimConfig, snr_db: float, N: int, t: dict) -> BlerPoint:
    n = int(t["err"].size)
    e = int(t["err"].sum())
    lo, hi = wilson_interval(e, n)
    evals = float(t["evals"].sum()) / n
    return BlerPoint(
        snr_db=snr_db, blocks_simulated=n, block_errors=e, bler=e / n,
        bler_ci_low=lo, bler_ci_high=hi,
        avg_metric_evals_per_block=evals, avg_metric_evals_per_bit=evals / N,
        avg_boost_rounds=float(t["rounds"].sum()) / n,
        crc_fail_rate_hat=float(t["crc_fail"].sum()) / n,
        initial_block_errors=int(t["init_err"].sum()) if "init_err" in t else None,
    )


def _sigma(cfg: SimConfig, code: CaPolarCode, snr_db: float) -> float:
    return snr_to_sigma(SnrSpec(cfg.snr.mode, snr_db), code.rate).sigma


def run_bler_point(cfg: SimConfig, snr_db: float, point_seed: int = 0, workers: int = 1,
                   _runner: _Runner | None = None, _pool=None) -> BlerPoint:
    runner = _runner or _Runner(cfg)
    if _pool is None and workers > 1:
        with ProcessPoolExecutor(workers, initializer=_worker_init,
                                 initargs=(cfg.to_dict(),)) as pool:
            return run_bler_point(cfg, snr_db, point_seed, workers, runner, pool)
    trials = _collect(runner, point_seed, _sigma(cfg, runner.code, snr_db), _pool, max(workers, 1))
    return _point_from_trials(cfg, snr_db, runner.code.N, trials)


def run_sweep(cfg: SimConfig, csv_path: str | Path | None = None, json_path: str | Path | None = None,
              workers: int = 1) -> list[BlerPoint]:
    """One point per grid value (point seed = grid index); optional CSV + JSON sidecar."""
    runner = _Runner(cfg)
    pool = None
    if workers > 1:
        pool = ProcessPoolExecutor(workers, initializer=_worker_init, initargs=(cfg.to_dict(),))
    try:
        points = []
        for i, snr in enumerate(cfg.snr.values):
            p = run_bler_point(cfg, snr, i, workers, runner, pool)
            log.info("%s %.2f dB: %d/%d errors, BLER %.3g", cfg.decoder, snr,
                     p.block_errors, p.blocks_simulated, p.bler)
            points.append(p)
    finally:
        if pool is not None:
            pool.shutdown()
    if csv_path is not None:
        csv_path = Path(csv_path)
        try:
            csv_path.write_text(points_to_csv(cfg, points))
            Path(json_path or csv_path.with_suffix(".json")).write_text(
                json.dumps(sidecar(cfg, runner.code), indent=2) + "\n")
        except OSError as e:
            raise OSError(f"cannot write results to {e.filename or csv_path}: {e.strerror}") from e
    return points


def csv_row(cfg: SimConfig, p: BlerPoint) -> list:
    wsd = cfg.wsd if cfg.decoder == "scl_wsd" else None
    return [repr(p.snr_db), cfg.snr.mode, cfg.decoder,
            cfg.list_size if cfg.decoder != "mld" else "",
            wsd.radius_index if wsd else "", wsd.max_rounds if wsd else "", wsd.mode if wsd else "",
            p.blocks_simulated, p.block_errors, repr(p.bler), repr(p.bler_ci_low), repr(p.bler_ci_high),
            repr(p.avg_metric_evals_per_block), repr(p.avg_metric_evals_per_bit),
            repr(p.avg_boost_rounds), repr(p.crc_fail_rate_hat), cfg.seed]


def points_to_csv(cfg: SimConfig, points: list[BlerPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for p in points:
        w.writerow(csv_row(cfg, p))
    return buf.getvalue()


def sidecar(cfg: SimConfig, code: CaPolarCode) -> dict:
    return {"config": cfg.to_dict(), "code_fingerprint": code.fingerprint.hex(),
            "info_set": list(code.info_set), "tool_version": f"wsdec {__version__}"}
