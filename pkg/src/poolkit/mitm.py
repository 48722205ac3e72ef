"""Meet-in-the-middle posterior decoding with certified error bounds.

At low prevalence almost all prior mass sits on secrets with few
positives, and accurate tests make outcomes with few corrupted rows far
likelier than heavily corrupted ones.  The decoder exploits both ends:

* preprocessing enumerates every secret with fewer than k positives,
  accumulating per-code prior mass and per-patient joint mass, where a
  *code* is the noiseless result pattern a secret would produce;
* a query keeps only codes whose corruption probability for the observed
  outcome exceeds epsilon, summing over whichever side is smaller: the
  stored codes or the plausible corruption patterns.

Both truncations only ever discard probability, so the reported
per-patient marginals come with a certified absolute error bound of
4*epsilon divided by the retained evidence mass.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .types import (
    CapacityError,
    DesignMatrix,
    DimensionError,
    NoPlausibleExplanationError,
    PosteriorSummary,
    Secret,
    StaleCacheError,
    TestCharacteristics,
    TestOutcome,
    ValidationError,
)

__all__ = [
    "choose_k",
    "binomial_tail",
    "MitmTable",
    "MitmAnswer",
    "mitm_preprocess",
    "mitm_query",
    "save_table",
    "load_table",
    "DEFAULT_EPSILON",
    "DEFAULT_ENUMERATION_CAP",
]

DEFAULT_EPSILON = 1e-8
DEFAULT_ENUMERATION_CAP = 100_000_000
_DENSE_SECRET_MAX_N = 22
_COMBO_CHUNK = 1 << 20


def binomial_tail(n: int, p: float, k: int) -> float:
    """P[Binomial(n, p) >= k], the prior mass on secrets with >= k positives."""
    if k <= 0:
        return 1.0
    if k > n:
        return 0.0
    return float(stats.binom.sf(k - 1, n, p))


def choose_k(n: int, p: float | np.ndarray, epsilon: float) -> int:
    """Smallest sparsity cutoff whose discarded prior tail is below epsilon.

    For per-patient priors the largest one is used, which only makes the
    tail (and hence the certified bound) conservative.
    """
    p = float(np.max(p))
    if not (0.0 <= p < 1.0):
        raise ValidationError(f"prevalence must lie in [0, 1), got {p}")
    if epsilon <= 0.0:
        raise ValidationError("epsilon must be positive")
    if epsilon >= 1.0:
        return 0
    for k in range(1, n + 2):
        if binomial_tail(n, p, k) < epsilon:
            return k
    raise AssertionError("unreachable: the tail at k = n + 1 is zero")


def design_digest(design: DesignMatrix) -> bytes:
    """Digest of the design rows in order (codes depend on row order)."""
    text = f"{design.n} {design.m}\n" + "\n".join(str(r) for r in design.rows)
    return hashlib.sha256(text.encode()).digest()


@dataclass(frozen=True)
class MitmTable:
    """Preprocessed code table: one entry per realized noiseless pattern.

    codes are sorted; mass[c] is the prior probability of the enumerated
    secrets encoding to c, and joint[c, i] the share of that mass with
    patient i positive.  Masses sum to at most 1 (the discarded tail is
    below epsilon by construction of k).
    """

    design: DesignMatrix
    priors: np.ndarray
    epsilon: float
    k: int
    codes: np.ndarray
    mass: np.ndarray
    joint: np.ndarray
    enumerated: int

    @property
    def n(self) -> int:
        return self.design.n

    @property
    def m(self) -> int:
        return self.design.m

    @property
    def stored_codes(self) -> int:
        return len(self.codes)

    def code_positions(self) -> dict[int, int]:
        return {int(c): i for i, c in enumerate(self.codes)}


@dataclass(frozen=True)
class MitmAnswer:
    """Certified query result.

    error_bound is the absolute per-marginal guarantee 4*eps/evidence_mass;
    interval_width the looser two-sided interval 5*eps/evidence_mass some
    UIs prefer to display.
    """

    marginals: tuple[float, ...]
    evidence_mass: float
    error_bound: float
    interval_width: float
    branch: str
    b_count: int
    stored_count: int

    def to_posterior_summary(self) -> PosteriorSummary:
        """Marginal-threshold summary (the joint argmax is not tracked)."""
        bits = [1 if q > 0.5 else 0 for q in self.marginals]
        confidence = float(np.prod([max(q, 1.0 - q) for q in self.marginals]))
        return PosteriorSummary(
            marginals=self.marginals,
            ml_secret=Secret(bits),
            confidence=confidence,
            error_bound=self.error_bound,
            evidence_mass=self.evidence_mass,
        )


def _patient_code_masks(design: DesignMatrix) -> np.ndarray:
    """For each patient, the code bits of the pools containing them."""
    n, m = design.n, design.m
    masks = np.zeros(n, dtype=np.int64)
    for r, row in enumerate(design.rows):
        for i in range(n):
            if row.bits[i]:
                masks[i] |= 1 << (m - 1 - r)
    return masks


def _priors_array(priors, n: int) -> np.ndarray:
    p = np.asarray(priors, dtype=np.float64)
    if p.ndim == 0:
        p = np.full(n, float(p))
    if p.shape != (n,):
        raise DimensionError(f"need one prior per patient, got shape {p.shape}")
    if np.any(p < 0) or np.any(p >= 1.0):
        raise ValidationError("sparse decoding needs priors in [0, 1)")
    return p


def mitm_preprocess(design: DesignMatrix, priors, epsilon: float = DEFAULT_EPSILON,
                    k: int | None = None,
                    enumeration_cap: int = DEFAULT_ENUMERATION_CAP) -> MitmTable:
    """Enumerate all secrets with fewer than k positives into a code table."""
    n, m = design.n, design.m
    p = _priors_array(priors, n)
    if k is None:
        k = choose_k(n, p, epsilon)
    enumerated = sum(math.comb(n, j) for j in range(k))
    if enumerated > enumeration_cap:
        raise CapacityError(
            f"enumerating {enumerated} secrets exceeds the cap {enumeration_cap}; "
            f"raise epsilon (currently {epsilon}) or the cap")
    if n <= _DENSE_SECRET_MAX_N:
        codes, mass, joint = _preprocess_dense(design, p, k)
    else:
        codes, mass, joint = _preprocess_combos(design, p, k)
    return MitmTable(design=design, priors=p, epsilon=float(epsilon), k=int(k),
                     codes=codes, mass=mass, joint=joint, enumerated=enumerated)


def _preprocess_dense(design: DesignMatrix, p: np.ndarray, k: int):
    n, m = design.n, design.m
    idx = np.arange(1 << n, dtype=np.int64)
    masks = idx[np.bitwise_count(idx.astype(np.uint64)).astype(np.int64) < k]
    codes_raw = np.zeros(len(masks), dtype=np.int64)
    for r, row in enumerate(design.rows):
        codes_raw |= ((masks & row.index) != 0).astype(np.int64) << (m - 1 - r)
    with np.errstate(divide="ignore"):
        log_p = np.log(p)
        log_q = np.log1p(-p)
    logw = np.full(len(masks), log_q.sum())
    patient_bits = []
    for i in range(n):
        bit = ((masks >> (n - 1 - i)) & 1).astype(bool)
        patient_bits.append(bit)
        logw = logw + np.where(bit, log_p[i] - log_q[i], 0.0)
    w = np.exp(logw)
    codes, inverse = np.unique(codes_raw, return_inverse=True)
    mass = np.bincount(inverse, weights=w, minlength=len(codes))
    joint = np.zeros((len(codes), n))
    for i in range(n):
        sel = patient_bits[i]
        if sel.any():
            joint[:, i] = np.bincount(inverse[sel], weights=w[sel], minlength=len(codes))
    return codes, mass, joint


def _preprocess_combos(design: DesignMatrix, p: np.ndarray, k: int):
    n, m = design.n, design.m
    dense_bytes = (1 << m) * (n + 1) * 8
    if dense_bytes > 1 << 32:
        raise CapacityError(
            f"code accumulator for m={m}, n={n} needs {dense_bytes} bytes; "
            "reduce the design size or epsilon")
    patient_masks = _patient_code_masks(design)
    with np.errstate(divide="ignore"):
        log_p = np.log(p)
        log_q = np.log1p(-p)
    base = log_q.sum()
    mass_dense = np.zeros(1 << m)
    joint_dense = np.zeros((1 << m, n))
    for j in range(k):
        combos = itertools.combinations(range(n), j)
        while True:
            chunk = list(itertools.islice(combos, _COMBO_CHUNK))
            if not chunk:
                break
            arr = np.asarray(chunk, dtype=np.int64).reshape(len(chunk), j)
            if j == 0:
                codes = np.zeros(1, dtype=np.int64)
                w = np.array([math.exp(base)])
            else:
                codes = np.bitwise_or.reduce(patient_masks[arr], axis=1)
                logw = base + (log_p[arr] - log_q[arr]).sum(axis=1)
                w = np.exp(logw)
            np.add.at(mass_dense, codes, w)
            for col in range(j):
                np.add.at(joint_dense, (codes, arr[:, col]), w)
    realized = np.flatnonzero(mass_dense > 0)
    return realized.astype(np.int64), mass_dense[realized], joint_dense[realized]


def _log_rates(chars: TestCharacteristics):
    def safe_log(x: float) -> float:
        return math.log(x) if x > 0.0 else -math.inf

    return (safe_log(1.0 - chars.tnr), safe_log(chars.tpr),
            safe_log(1.0 - chars.tpr), safe_log(chars.tnr))


def _count_times(counts: np.ndarray, log_rate: float) -> np.ndarray:
    """counts * log_rate with the 0 * (-inf) := 0 convention."""
    out = np.zeros(len(counts))
    nz = counts > 0
    out[nz] = counts[nz] * log_rate
    return out


def _plausible_corruption_count(pos: int, neg: int, log_eps: float,
                                chars: TestCharacteristics) -> int:
    """B(eps): corruption patterns of the outcome with probability > eps."""
    l_fp, l_tp, l_fn, l_tn = _log_rates(chars)
    total = 0
    for fp in range(pos + 1):
        base = (fp * l_fp if fp else 0.0) + ((pos - fp) * l_tp if pos - fp else 0.0)
        if base <= log_eps:
            break  # more false positives only lower the probability
        for fn in range(neg + 1):
            lp = base + (fn * l_fn if fn else 0.0) + ((neg - fn) * l_tn if neg - fn else 0.0)
            if lp <= log_eps:
                break
            total += math.comb(pos, fp) * math.comb(neg, fn)
    return total


def mitm_query(table: MitmTable, outcome: TestOutcome,
               chars: TestCharacteristics, cutoff: float | None = None) -> MitmAnswer:
    """Per-patient marginals for an observed outcome, with certified error.

    Whichever is smaller gets enumerated: the stored codes (each scored by
    its corruption probability) or the corruption patterns around the
    outcome (each looked up in the table).  Both give identical sums.

    ``cutoff`` lowers the corruption-probability threshold below the
    table's epsilon (admitting more heavily corrupted explanations when
    the default leaves no evidence mass); the certified bound is reported
    against the larger of the two, so it stays valid.
    """
    m = table.m
    if outcome.n != m:
        raise DimensionError(f"outcome has {outcome.n} bits for {m} pools")
    cutoff = table.epsilon if cutoff is None else float(cutoff)
    if cutoff > table.epsilon:
        raise ValidationError("query cutoff cannot exceed the table's epsilon")
    t = outcome.index
    pos = outcome.index.bit_count()
    neg = m - pos
    eps = max(table.epsilon, cutoff)
    log_cutoff = math.log(cutoff)
    b_count = _plausible_corruption_count(pos, neg, log_cutoff, chars)

    if table.stored_codes < b_count:
        branch = "stored-codes"
        lam, evidence = _query_stored(table, t, pos, neg, chars, cutoff)
    else:
        branch = "corruption-enumeration"
        lam, evidence = _query_corruptions(table, t, pos, neg, chars, log_cutoff)

    if evidence <= 0.0:
        raise NoPlausibleExplanationError(
            f"no stored code explains outcome {outcome} at cutoff {cutoff}; "
            "lower the cutoff further or fall back to belief propagation",
            epsilon=cutoff, outcome=outcome,
            stored_codes=table.stored_codes, plausible_corruptions=b_count)

    marginals = np.clip(lam / evidence, 0.0, 1.0)
    return MitmAnswer(
        marginals=tuple(float(x) for x in marginals),
        evidence_mass=float(evidence),
        error_bound=4.0 * eps / evidence,
        interval_width=5.0 * eps / evidence,
        branch=branch,
        b_count=b_count,
        stored_count=table.stored_codes,
    )


def _query_stored(table: MitmTable, t: int, pos: int, neg: int,
                  chars: TestCharacteristics, cutoff: float):
    l_fp, l_tp, l_fn, l_tn = _log_rates(chars)
    diff = (table.codes ^ t).astype(np.uint64)
    fp = np.bitwise_count(diff & np.uint64(t)).astype(np.int64)
    fn = np.bitwise_count(diff).astype(np.int64) - fp
    logprob = (_count_times(fp, l_fp) + _count_times(pos - fp, l_tp)
               + _count_times(fn, l_fn) + _count_times(neg - fn, l_tn))
    with np.errstate(over="ignore"):
        prob = np.exp(logprob)
    a = np.where(prob > cutoff, prob, 0.0)
    return table.joint.T @ a, float(table.mass @ a)


def _query_corruptions(table: MitmTable, t: int, pos: int, neg: int,
                       chars: TestCharacteristics, log_eps: float):
    l_fp, l_tp, l_fn, l_tn = _log_rates(chars)
    m = table.m
    positions = table.code_positions()
    pos_bits = [1 << (m - 1 - r) for r in range(m) if (t >> (m - 1 - r)) & 1]
    neg_bits = [1 << (m - 1 - r) for r in range(m) if not (t >> (m - 1 - r)) & 1]
    lam = np.zeros(table.n)
    evidence = 0.0
    for fp in range(pos + 1):
        base = (fp * l_fp if fp else 0.0) + ((pos - fp) * l_tp if pos - fp else 0.0)
        if base <= log_eps:
            break
        for fn in range(neg + 1):
            lp = base + (fn * l_fn if fn else 0.0) + ((neg - fn) * l_tn if neg - fn else 0.0)
            if lp <= log_eps:
                break
            prob = math.exp(lp)
            for fp_rows in itertools.combinations(pos_bits, fp):
                fp_mask = 0
                for bit in fp_rows:
                    fp_mask |= bit
                for fn_rows in itertools.combinations(neg_bits, fn):
                    code = t ^ fp_mask
                    for bit in fn_rows:
                        code ^= bit
                    idx = positions.get(code)
                    if idx is None:
                        continue
                    lam += prob * table.joint[idx]
                    evidence += prob * float(table.mass[idx])
    return lam, evidence


_MAGIC = b"PKMT"
_VERSION = 1


def save_table(table: MitmTable, path) -> None:
    """Persist the table; little-endian, records sorted by code."""
    n, m = table.n, table.m
    header = struct.pack(
        "<4sIIIId", _MAGIC, _VERSION, n, m, table.k, table.epsilon)
    digest = design_digest(table.design)
    record_dtype = np.dtype([("code", "<u8"), ("mass", "<f8"), ("joint", "<f8", (n,))])
    records = np.empty(table.stored_codes, dtype=record_dtype)
    records["code"] = table.codes.astype(np.uint64)
    records["mass"] = table.mass
    records["joint"] = table.joint
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(digest)
        fh.write(struct.pack("<Q", table.enumerated))
        fh.write(struct.pack("<Q", table.stored_codes))
        fh.write(table.priors.astype("<f8").tobytes())
        fh.write(records.tobytes())


def load_table(path, design: DesignMatrix) -> MitmTable:
    """Load a persisted table, verifying it matches the supplied design."""
    with open(path, "rb") as fh:
        blob = fh.read()
    magic, version, n, m, k, epsilon = struct.unpack_from("<4sIIIId", blob, 0)
    offset = struct.calcsize("<4sIIIId")
    if magic != _MAGIC or version != _VERSION:
        raise StaleCacheError(f"unrecognized table header {magic!r} v{version}")
    digest = blob[offset:offset + 32]
    offset += 32
    enumerated, count = struct.unpack_from("<QQ", blob, offset)
    offset += 16
    if (n, m) != (design.n, design.m) or digest != design_digest(design):
        raise StaleCacheError("persisted table was built for a different design")
    priors = np.frombuffer(blob, dtype="<f8", count=n, offset=offset).copy()
    offset += 8 * n
    record_dtype = np.dtype([("code", "<u8"), ("mass", "<f8"), ("joint", "<f8", (n,))])
    records = np.frombuffer(blob, dtype=record_dtype, count=count, offset=offset)
    return MitmTable(design=design, priors=priors, epsilon=float(epsilon), k=int(k),
                     codes=records["code"].astype(np.int64),
                     mass=records["mass"].astype(np.float64),
                     joint=records["joint"].astype(np.float64).reshape(count, n),
                     enumerated=int(enumerated))
