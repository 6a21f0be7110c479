"""Baseline decoders: exhaustive ML and CRC-aided successive cancellation list.

Both decoders work on batches of received blocks, shape (B, N).  The
single-block functions ``mld_decode`` and ``scl_decode`` wrap the batch paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import NoiseModel, bpsk_modulate, llr as channel_llr
from .codes import CaPolarCode
from .gf2 import BitVector, DimensionError
from .sphere import DEFAULT_ENUM_CAP, EnumerationCapError, codebook, message_bits

INITIAL, BOOSTED = "initial", "boosted"


@dataclass
class DecodeOutcome:
    codeword_estimate: BitVector
    v_estimate: BitVector
    message_estimate: BitVector
    metric: float
    crc_pass: bool
    stage: str = INITIAL
    boost_rounds: int = 0
    metric_evals: int = 0
    trace: object = None


@dataclass
class BatchOutcome:
    """Per-block decoder results as parallel arrays."""

    codewords: np.ndarray  # (B, N) uint8
    v: np.ndarray  # (B, K + K_crc) uint8
    messages: np.ndarray  # (B, K) uint8
    metric_sq: np.ndarray  # squared Euclidean distance to y
    crc_pass: np.ndarray  # bool
    boosted: np.ndarray = None
    boost_rounds: np.ndarray = None
    metric_evals: np.ndarray = None
    trace_metrics: np.ndarray = None  # (B, J + 1) accepted metrics, NaN padded
    termination: np.ndarray = None
    initial: BatchOutcome | None = field(default=None, repr=False)

    def __post_init__(self):
        B = self.codewords.shape[0]
        if self.boosted is None:
            self.boosted = np.zeros(B, dtype=bool)
        if self.boost_rounds is None:
            self.boost_rounds = np.zeros(B, dtype=np.int64)
        if self.metric_evals is None:
            self.metric_evals = np.zeros(B, dtype=np.int64)

    def __len__(self) -> int:
        return self.codewords.shape[0]

    def outcome(self, i: int) -> DecodeOutcome:
        from .wsd import BoostTrace  # cyclic at import time

        trace = None
        if self.trace_metrics is not None and self.boosted[i]:
            ms = self.trace_metrics[i]
            trace = BoostTrace(tuple(float(m) for m in ms[~np.isnan(ms)]),
                               int(self.boost_rounds[i]), str(self.termination[i]))
        return DecodeOutcome(
            codeword_estimate=BitVector.from_bits(self.codewords[i]),
            v_estimate=BitVector.from_bits(self.v[i]),
            message_estimate=BitVector.from_bits(self.messages[i]),
            metric=float(np.sqrt(max(self.metric_sq[i], 0.0))),
            crc_pass=bool(self.crc_pass[i]),
            stage=BOOSTED if self.boosted[i] else INITIAL,
            boost_rounds=int(self.boost_rounds[i]),
            metric_evals=int(self.metric_evals[i]),
            trace=trace,
        )


def _as_batch(y: np.ndarray, N: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[None, :]
    if y.ndim != 2 or y.shape[1] != N:
        raise DimensionError(f"received blocks must have length {N}, got shape {y.shape}")
    return y


def metric_sq(y: np.ndarray, codewords: np.ndarray) -> np.ndarray:
    """Squared Euclidean distance between rows of ``y`` and BPSK(codewords)."""
    d = y - bpsk_modulate(codewords)
    return np.einsum("ij,ij->i", d, d)


class MlDecoder:
    """Exhaustive minimum-distance search over all 2^K codewords.

    Ranks by correlation ``<y, x(c)>``, which has the same argmin as the
    Euclidean distance; ties go to the lowest message index.
    """

    def __init__(self, code: CaPolarCode, cap: int = DEFAULT_ENUM_CAP, chunk: int = 64):
        if code.K > cap:
            raise EnumerationCapError(
                f"MLD over 2^{code.K} codewords exceeds the cap K <= {cap} (cost N x 2^K)")
        self.code = code
        self.chunk = chunk
        self._codewords = codebook(code, cap)
        self._x = bpsk_modulate(self._codewords)
        self._messages = message_bits(code.K)

    @property
    def evals_per_block(self) -> int:
        return 1 << self.code.K

    def decode_batch(self, y: np.ndarray, noise: NoiseModel | None = None) -> BatchOutcome:
        y = _as_batch(y, self.code.N)
        best = np.empty(len(y), dtype=np.int64)
        for s in range(0, len(y), self.chunk):
            corr = y[s: s + self.chunk] @ self._x.T
            best[s: s + self.chunk] = np.argmax(corr, axis=1)
        cw = self._codewords[best]
        msg = self._messages[best]
        v = (msg.astype(np.int64) @ self.code.g_crc.array.astype(np.int64) & 1).astype(np.uint8)
        return BatchOutcome(cw, v, msg, metric_sq(y, cw), np.ones(len(y), dtype=bool),
                            metric_evals=np.full(len(y), self.evals_per_block, dtype=np.int64))

    def decode(self, y: np.ndarray, noise: NoiseModel | None = None) -> DecodeOutcome:
        return self.decode_batch(y, noise).outcome(0)


def mld_decode(y: np.ndarray, code: CaPolarCode, cap: int = DEFAULT_ENUM_CAP) -> DecodeOutcome:
    return MlDecoder(code, cap).decode(y)


class HardDecisionDecoder:
    """Slice ``y`` to bits and read the message off the code's information set.

    A deliberately weak initial decoder for codes without a polar structure.
    ``crc_pass`` reports whether the hard decisions already form a codeword.
    """

    def __init__(self, code):
        self.code = code

    def decode_batch(self, y: np.ndarray, noise: NoiseModel | None = None) -> BatchOutcome:
        code = self.code
        y = _as_batch(y, code.N)
        hard = (y < 0).astype(np.uint8)
        v = code.codeword_to_v(hard)
        msg = v[:, : code.K]
        cw = code.encode_array(msg)
        ok = (cw == hard).all(axis=1) & code.crc_ok(v)
        return BatchOutcome(cw, v, msg, metric_sq(y, cw), ok)

    def decode(self, y: np.ndarray, noise: NoiseModel | None = None) -> DecodeOutcome:
        return self.decode_batch(y, noise).outcome(0)


@dataclass(frozen=True)
class ScListConfig:
    list_size: int = 32

    def __post_init__(self):
        if self.list_size < 1:
            raise ValueError("list size must be at least 1")


def _boxplus(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact check-node LLR combination, written to avoid overflow."""
    s = np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))
    return s + np.log1p(np.exp(-np.abs(a + b))) - np.log1p(np.exp(-np.abs(a - b)))


def _gather(arr: np.ndarray, perm: np.ndarray | None) -> np.ndarray:
    """Reorder the path axis of a (B, L, n) array."""
    if perm is None:
        return arr
    B, L = perm.shape
    flat = (perm + (np.arange(B) * L)[:, None]).ravel()
    return np.take(arr.reshape(B * L, -1), flat, axis=0).reshape(arr.shape)


def _compose(outer: np.ndarray | None, inner: np.ndarray | None) -> np.ndarray | None:
    if outer is None:
        return inner
    if inner is None:
        return outer
    return np.take_along_axis(outer, inner, axis=1)


class _SclState:
    def __init__(self, B: int, L: int, N: int, frozen: np.ndarray):
        self.L = L
        self.frozen = frozen
        self.pm = np.full((B, L), np.inf)
        self.pm[:, 0] = 0.0
        # per information leaf: (index, decided bits, parent path of each survivor)
        self.history: list[tuple[int, np.ndarray, np.ndarray]] = []

    def leaf(self, lam: np.ndarray, idx: int):
        """Decide u_idx; returns the bit per path and the survivor permutation."""
        if self.frozen[idx]:
            self.pm = self.pm + np.logaddexp(0.0, -lam)
            return np.zeros(lam.shape, dtype=np.uint8), None
        pm0 = self.pm + np.logaddexp(0.0, -lam)
        pm1 = self.pm + np.logaddexp(0.0, lam)
        cand = np.concatenate([pm0, pm1], axis=1)
        order = np.argsort(cand, axis=1, kind="stable")[:, : self.L]
        perm = order % self.L
        bit = (order // self.L).astype(np.uint8)
        self.pm = np.take_along_axis(cand, order, axis=1)
        self.history.append((idx, bit, perm))
        return bit, perm

    def u_hat(self, N: int) -> np.ndarray:
        """Backtrack the decided bits of every final path, shape (B, L, N)."""
        B, L = self.pm.shape
        u = np.zeros((B, L, N), dtype=np.uint8)
        path = np.broadcast_to(np.arange(L), (B, L))
        for idx, bit, perm in reversed(self.history):
            u[:, :, idx] = np.take_along_axis(bit, path, axis=1)
            path = np.take_along_axis(perm, path, axis=1)
        return u

    def decode(self, lam: np.ndarray, offset: int):
        """Decode the subtree for u[offset : offset + n]; returns (x, perm)."""
        n = lam.shape[2]
        if n == 1:
            bit, perm = self.leaf(lam[:, :, 0], offset)
            return bit[:, :, None], perm
        h = n // 2
        if self.frozen[offset: offset + n].all():
            # Rate-0 subtree: all-zero partial sums, still charge every leaf.
            self._charge_frozen(lam)
            return np.zeros(lam.shape, dtype=np.uint8), None
        xa, p1 = self.decode(_boxplus(lam[:, :, :h], lam[:, :, h:]), offset)
        lam = _gather(lam, p1)
        g = lam[:, :, h:] + (1.0 - 2.0 * xa) * lam[:, :, :h]
        xb, p2 = self.decode(g, offset + h)
        xa = _gather(xa, p2)
        return np.concatenate([xa ^ xb, xb], axis=2), _compose(p1, p2)

    def _charge_frozen(self, lam: np.ndarray):
        # With all bits zero, g reduces to a sum and the leaf LLRs follow the
        # same recursion as the full decoder; no path forks happen here.
        n = lam.shape[2]
        if n == 1:
            self.pm = self.pm + np.logaddexp(0.0, -lam[:, :, 0])
            return
        h = n // 2
        self._charge_frozen(_boxplus(lam[:, :, :h], lam[:, :, h:]))
        self._charge_frozen(lam[:, :, h:] + lam[:, :, :h])


class SclDecoder:
    """CRC-aided SCL with the exact LLR-domain path metric.

    The path metric of a path ``u`` accumulates ``log(1 + exp(-(1 - 2 u_i) L_i))``
    over all leaves.  Among the surviving paths the best-metric CRC-valid one is
    returned; if none passes, the best-metric path is returned with
    ``crc_pass = False``.
    """

    def __init__(self, code: CaPolarCode, cfg: ScListConfig | int = ScListConfig(), chunk: int = 256):
        self.code = code
        self.cfg = ScListConfig(cfg) if isinstance(cfg, int) else cfg
        self.chunk = chunk
        self._info = np.array(code.info_set)

    @property
    def list_size(self) -> int:
        return self.cfg.list_size

    def run_list(self, llrs: np.ndarray):
        """Raw SCL pass: returns (path metrics, u-hat, codewords), each (B, L, ...)."""
        llrs = _as_batch(llrs, self.code.N)
        st = _SclState(len(llrs), self.list_size, self.code.N, self.code.frozen_mask)
        lam = np.broadcast_to(llrs[:, None, :], (len(llrs), self.list_size, self.code.N))
        x, _ = st.decode(np.ascontiguousarray(lam), 0)
        return st.pm, st.u_hat(self.code.N), x

    def decode_llr_batch(self, llrs: np.ndarray, y: np.ndarray | None = None) -> BatchOutcome:
        llrs = _as_batch(llrs, self.code.N)
        parts = [self._decode_chunk(llrs[s: s + self.chunk]) for s in range(0, len(llrs), self.chunk)]
        cw, v, ok = (np.concatenate(p) for p in zip(*parts))
        yy = llrs if y is None else _as_batch(y, self.code.N)
        return BatchOutcome(cw, v, v[:, : self.code.K].copy(), metric_sq(yy, cw), ok)

    def _decode_chunk(self, llrs: np.ndarray):
        pm, u, x = self.run_list(llrs)
        B, L = pm.shape
        v = u[:, :, self._info]
        ok = self.code.crc_ok(v) & np.isfinite(pm)
        order = np.argsort(pm, axis=1, kind="stable")
        ok_sorted = np.take_along_axis(ok, order, axis=1)
        has = ok_sorted.any(axis=1)
        first = np.where(has, np.argmax(ok_sorted, axis=1), 0)
        pick = order[np.arange(B), first]
        return x[np.arange(B), pick], v[np.arange(B), pick], has

    def decode_batch(self, y: np.ndarray, noise: NoiseModel) -> BatchOutcome:
        y = _as_batch(y, self.code.N)
        return self.decode_llr_batch(channel_llr(y, noise), y)

    def decode(self, y: np.ndarray, noise: NoiseModel) -> DecodeOutcome:
        return self.decode_batch(y, noise).outcome(0)


def scl_decode(llrs: np.ndarray, code: CaPolarCode, cfg: ScListConfig = ScListConfig(),
               y: np.ndarray | None = None) -> DecodeOutcome:
    """Single-block CA-SCL.  ``metric`` is measured against ``y`` when given,
    otherwise against the LLR vector itself (only its ranking is meaningful then)."""
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.shape != (code.N,):
        raise DimensionError(f"expected {code.N} LLRs, got shape {llrs.shape}")
    return SclDecoder(code, cfg).decode_llr_batch(llrs, y).outcome(0)
