"""Code-weight sphere decoding (WSD) and the two-stage decoder.

Stage one runs a cheap initial decoder.  If its CRC check fails (or always,
in always-on mode) the message part is re-encoded into a valid codeword and
WSD hops greedily to the most likely neighbor in the code-weight sphere
around the current estimate, for at most ``max_rounds`` rounds, stopping as
soon as a round brings no strict improvement.

Candidates are scored by correlation.  With ``z = y * x(c)``, the candidate
``c XOR w`` has correlation ``sum(z) - 2 * sum(z[supp(w)])``, so a whole
round is one product of ``z`` with the 0/1 member matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import NoiseModel
from .codes import CaPolarCode
from .decoders import BatchOutcome, DecodeOutcome, _as_batch, metric_sq
from .gf2 import BitVector, DimensionError
from .sphere import SphereSet

STANDARD, ALWAYS_ON = "standard", "always_on"
_MODE_ALIASES = {"standard": STANDARD, "always_on": ALWAYS_ON, "aom": ALWAYS_ON, "always-on": ALWAYS_ON}

CRC_EARLY_EXIT, NO_IMPROVEMENT, MAX_ROUNDS = "crc_early_exit", "no_improvement", "max_rounds"


@dataclass(frozen=True)
class WsdConfig:
    radius_index: int = 2
    max_rounds: int = 3
    mode: str = STANDARD

    def __post_init__(self):
        if self.radius_index < 1:
            raise ValueError("radius index must be >= 1")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        mode = _MODE_ALIASES.get(str(self.mode).lower())
        if mode is None:
            raise ValueError(f"unknown WSD mode {self.mode!r}")
        object.__setattr__(self, "mode", mode)


@dataclass(frozen=True)
class BoostTrace:
    metrics: tuple[float, ...]  # accepted M^(0) > M^(1) > ...
    rounds_executed: int
    termination: str


@dataclass
class RefineResult:
    codewords: np.ndarray
    metric_sq: np.ndarray
    trace_metrics: np.ndarray
    rounds: np.ndarray
    termination: np.ndarray
    metric_evals: np.ndarray


def candidate_metrics_sq(y: np.ndarray, center: np.ndarray, sphere: SphereSet) -> np.ndarray:
    """Squared distances from ``y`` to every ``center XOR w``, via correlation deltas.

    ``y`` and ``center`` are (B, N); the result is (B, member_count).
    """
    z = y * (1.0 - 2.0 * center)
    S = z.sum(axis=1)
    D = z @ sphere.support.T
    ysq = np.einsum("ij,ij->i", y, y)
    return (ysq - 2.0 * S + y.shape[1])[:, None] + 4.0 * D


def refine_batch(y: np.ndarray, c0: np.ndarray, sphere: SphereSet, max_rounds: int) -> RefineResult:
    y = np.asarray(y, dtype=np.float64)
    B, N = y.shape
    if sphere.member_count == 0:
        raise ValueError("sphere has no members")
    if c0.shape != (B, N) or sphere.N != N:
        raise DimensionError("received blocks, centers and sphere disagree on N")
    M = sphere.member_count
    c = np.array(c0, dtype=np.uint8, copy=True)
    z = y * (1.0 - 2.0 * c)
    S = z.sum(axis=1)
    ysq = np.einsum("ij,ij->i", y, y)
    cur = ysq - 2.0 * S + N
    trace = np.full((B, max_rounds + 1), np.nan)
    trace[:, 0] = np.sqrt(np.maximum(cur, 0.0))
    rounds = np.zeros(B, dtype=np.int64)
    term = np.full(B, MAX_ROUNDS, dtype=object)
    active = np.arange(B)
    for i in range(1, max_rounds + 1):
        if active.size == 0:
            break
        D = z[active] @ sphere.support.T
        k = np.argmin(D, axis=1)  # first minimum = stored-order tie-break
        best_D = D[np.arange(active.size), k]
        S_new = S[active] - 2.0 * best_D
        new = ysq[active] - 2.0 * S_new + N
        rounds[active] += 1
        better = new < cur[active]
        acc, rej = active[better], active[~better]
        term[rej] = NO_IMPROVEMENT
        w = sphere.bits[k[better]]
        c[acc] ^= w
        z[acc] *= 1.0 - 2.0 * w
        S[acc] = S_new[better]
        cur[acc] = new[better]
        trace[acc, i] = np.sqrt(np.maximum(new[better], 0.0))
        active = acc
    return RefineResult(c, cur, trace, rounds, term, rounds * M)


def wsd_refine(y: np.ndarray, c0: BitVector, sphere: SphereSet, max_rounds: int = 3,
               code: CaPolarCode | None = None) -> tuple[BitVector, BoostTrace]:
    """Boost a single codeword estimate; see :func:`refine_batch`."""
    if code is not None and code.fingerprint != sphere.code_fingerprint:
        raise ValueError("sphere was built for a different code")
    if c0.length != sphere.N:
        raise DimensionError(f"c0 has length {c0.length}, sphere is over N = {sphere.N}")
    y = _as_batch(y, sphere.N)
    res = refine_batch(y, c0.to_array()[None, :], sphere, max_rounds)
    ms = res.trace_metrics[0]
    trace = BoostTrace(tuple(float(m) for m in ms[~np.isnan(ms)]), int(res.rounds[0]),
                       str(res.termination[0]))
    return BitVector.from_bits(res.codewords[0]), trace


class TwoStageDecoder:
    """Initial decoder followed by WSD when its CRC fails (or always, in AOM).

    ``initial`` is any object with ``decode_batch(y, noise) -> BatchOutcome``.
    """

    def __init__(self, code: CaPolarCode, initial, sphere: SphereSet, cfg: WsdConfig):
        if sphere.code_fingerprint != code.fingerprint:
            raise ValueError("sphere was built for a different code")
        if sphere.radius_index != cfg.radius_index:
            raise ValueError(f"sphere has radius index {sphere.radius_index}, config asks for {cfg.radius_index}")
        self.code = code
        self.initial = initial
        self.sphere = sphere
        self.cfg = cfg

    def decode_batch(self, y: np.ndarray, noise: NoiseModel) -> BatchOutcome:
        code = self.code
        y = _as_batch(y, code.N)
        first = self.initial.decode_batch(y, noise)
        if self.cfg.mode == ALWAYS_ON:
            need = np.ones(len(y), dtype=bool)
        else:
            need = ~first.crc_pass
        B, J = len(y), self.cfg.max_rounds
        cw, v, msg = first.codewords.copy(), first.v.copy(), first.messages.copy()
        msq = first.metric_sq.copy()
        crc = first.crc_pass.copy()
        rounds = np.zeros(B, dtype=np.int64)
        evals = np.zeros(B, dtype=np.int64)
        trace = np.full((B, J + 1), np.nan)
        term = np.full(B, CRC_EARLY_EXIT, dtype=object)
        idx = np.flatnonzero(need)
        if idx.size:
            c0 = code.encode_array(first.v[idx, : code.K])
            res = refine_batch(y[idx], c0, self.sphere, J)
            cw[idx] = res.codewords
            v[idx] = code.codeword_to_v(res.codewords)
            msg[idx] = v[idx, : code.K]
            msq[idx] = metric_sq(y[idx], res.codewords)
            crc[idx] = True
            rounds[idx] = res.rounds
            evals[idx] = res.metric_evals
            trace[idx] = res.trace_metrics
            term[idx] = res.termination
        return BatchOutcome(cw, v, msg, msq, crc, boosted=need, boost_rounds=rounds,
                            metric_evals=first.metric_evals + evals, trace_metrics=trace,
                            termination=term, initial=first)

    def decode(self, y: np.ndarray, noise: NoiseModel) -> DecodeOutcome:
        return self.decode_batch(y, noise).outcome(0)


def two_stage_decode(y: np.ndarray, code: CaPolarCode, initial, sphere: SphereSet,
                     cfg: WsdConfig, noise: NoiseModel) -> DecodeOutcome:
    return TwoStageDecoder(code, initial, sphere, cfg).decode(y, noise)
