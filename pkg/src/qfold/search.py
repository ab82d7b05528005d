"""Classical exhaustive conformation search: the ground-truth oracle.

Enumerates every non-backtracking turn sequence (FCC: second turn restricted
to its four symmetry-unique labels, later turns excluding the inverse of
their predecessor, 4 * 11^(N-3) sequences; tetrahedral: relative turns,
3^(N-3) sequences), scores each conformation, and keeps the K lowest.

Enumeration is a mixed-radix odometer over turn digits with the most
significant digit at the earliest turn, swept in vectorized chunks.  Workers
take contiguous spans of the digit space and keep private top-K lists; the
final merge uses the deterministic (energy, turn string) order, so results
are bit-identical for any worker count.
"""

from __future__ import annotations

import heapq
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exceptions import BudgetExceededError, EncodingError
from .lattice import (
    FCC,
    FCC_VECTORS,
    LATTICES,
    SECOND_TURN_LABELS,
    TET,
    TET_VECTORS,
    TurnSequence,
    coords_from_turns,
    pack_configuration,
    pair_squared_distance,
    turns_from_string,
)
from .scoring import EnergyMatrix, pair_energy, validate_peptide

# options[prev]: the 11 labels != inverse(prev), ascending
_FCC_OPTIONS = np.array(
    [[l for l in range(12) if l != (p ^ 1)] for p in range(12)], dtype=np.int64
)
_SECOND = np.array(SECOND_TURN_LABELS, dtype=np.int64)


# ---------------------------------------------------------------------------
# configuration and result types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SearchConfig:
    lattice: str
    peptide: str
    matrix: EnergyMatrix
    k: int = 100
    nn_level: int = 1
    collision_penalty: float = 10000.0
    workers: int = 1
    max_seconds: float | None = None
    chunk: int = 8192

    def __post_init__(self):
        if self.lattice not in LATTICES:
            raise EncodingError(f"unknown lattice {self.lattice!r}")
        validate_peptide(self.peptide)
        if self.k < 1:
            raise EncodingError("k must be >= 1")
        if self.nn_level not in (1, 2):
            raise EncodingError("nn_level must be 1 or 2")
        if self.collision_penalty <= 0:
            raise EncodingError("collision_penalty must be positive")
        if self.workers < 1 or self.chunk < 1:
            raise EncodingError("workers and chunk must be >= 1")


@dataclass(frozen=True)
class ConformerRecord:
    energy: float
    turns: TurnSequence
    bits: str
    coords: np.ndarray

    @property
    def turn_string(self) -> str:
        return self.turns.to_string()


@dataclass(frozen=True)
class TopK:
    k: int
    records: tuple
    visited: int


def enumeration_size(lattice: str, n_beads: int) -> int:
    """Number of non-backtracking sequences the sweep visits (big integer)."""
    if n_beads < 3:
        raise EncodingError(f"need at least 3 beads, got {n_beads}")
    if lattice == FCC:
        return 4 * 11 ** (n_beads - 3)
    if lattice == TET:
        return 3 ** (n_beads - 3)
    raise EncodingError(f"unknown lattice {lattice!r}")


# ---------------------------------------------------------------------------
# pair scoring tables
# ---------------------------------------------------------------------------


def _pair_rules(peptide: str, config: SearchConfig):
    """Per-pair (i, j, first-shell energy, second-shell energy) tuples.

    Energies come from scoring.pair_energy so any rescale there propagates.
    A zero second-shell entry disables that shell for the pair.
    """
    pep = validate_peptide(peptide)
    n = len(pep)
    rules = []
    for i in range(n - 1):
        for j in range(i + 2, n):
            e1 = e2 = 0.0
            if config.lattice == FCC:
                e1 = pair_energy(config.matrix, pep[i], pep[j], 1, FCC)
                if config.nn_level >= 2:
                    e2 = pair_energy(config.matrix, pep[i], pep[j], 2, FCC)
            else:
                if j - i >= 5:
                    if (j - i) % 2 == 1:
                        e1 = pair_energy(config.matrix, pep[i], pep[j], 1, TET)
                    if config.nn_level >= 2:
                        e2 = pair_energy(config.matrix, pep[i], pep[j], 2, TET)
            rules.append((i, j, e1, e2))
    return rules


def conformation_energy(conf, peptide: str, config: SearchConfig) -> float:
    """Score one conformation; overlaps add the collision penalty.

    ``conf`` is either a TurnSequence or an integer coordinate array.
    FCC scores pairs j - i >= 2 at d^2 = 2 (and d^2 = 4 at nn_level 2);
    tetrahedral chains score pairs j - i >= 5, odd separations at d^2 = 1
    and (at nn_level 2) d^2 = 2 contacts.
    """
    coords = conf if isinstance(conf, np.ndarray) else coords_from_turns(conf)
    if coords.shape[0] != len(peptide):
        raise EncodingError("conformation length differs from peptide length")
    shell1 = 2 if config.lattice == FCC else 1
    energy = 0.0
    for i, j, e1, e2 in _pair_rules(peptide, config):
        d2 = pair_squared_distance(coords, i, j, config.lattice)
        if d2 == 0:
            energy += config.collision_penalty
        elif d2 == shell1 and e1 != 0.0:
            energy += e1
        elif d2 == 2 * shell1 and e2 != 0.0:
            energy += e2
    return energy


# ---------------------------------------------------------------------------
# vectorized sweep
# ---------------------------------------------------------------------------


def _labels_for_indices(indices: np.ndarray, n_beads: int, lattice: str) -> np.ndarray:
    """Decode odometer indices into (M, N-1) turn label arrays."""
    m = indices.shape[0]
    labels = np.zeros((m, n_beads - 1), dtype=np.int64)
    rem = indices.copy()
    if lattice == FCC:
        n_digits = n_beads - 3
        div = 11**n_digits
        labels[:, 1] = _SECOND[rem // div]
        rem %= div
        for t in range(2, n_beads - 1):
            div //= 11
            digit = rem // div
            rem %= div
            labels[:, t] = _FCC_OPTIONS[labels[:, t - 1], digit]
    else:
        labels[:, 1] = 1  # relative turn of the second bond is fixed
        n_digits = n_beads - 3
        div = 3 ** (n_digits - 1) if n_digits else 1
        for t in range(2, n_beads - 1):
            digit = rem // div
            rem %= div
            div //= 3 if div > 1 else 1
            labels[:, t] = (digit + labels[:, t - 1] + 1) % 4
    return labels


def _coords_for_labels(labels: np.ndarray, lattice: str) -> np.ndarray:
    m, n_turns = labels.shape
    if lattice == FCC:
        steps = FCC_VECTORS[labels]
    else:
        signs = np.where(np.arange(n_turns) % 2 == 0, 1, -1)
        steps = TET_VECTORS[labels] * signs[None, :, None]
    coords = np.zeros((m, n_turns + 1, 3), dtype=np.int64)
    np.cumsum(steps, axis=1, out=coords[:, 1:, :])
    return coords


def _energies_for_coords(coords: np.ndarray, rules, config: SearchConfig):
    """Energies plus a per-row flag marking any self-intersection."""
    m = coords.shape[0]
    energy = np.zeros(m)
    collided = np.zeros(m, dtype=bool)
    shell1 = 2 if config.lattice == FCC else 1
    for i, j, e1, e2 in rules:
        diff = coords[:, j, :] - coords[:, i, :]
        d2 = np.einsum("mk,mk->m", diff, diff)
        if config.lattice == TET:
            d2 = (d2 + (j - i) % 2) // 4
        hit = d2 == 0
        collided |= hit
        contrib = np.zeros(m)
        contrib[hit] = config.collision_penalty
        if e1 != 0.0:
            contrib[d2 == shell1] = e1
        if e2 != 0.0:
            contrib[d2 == 2 * shell1] = e2
        energy += contrib
    return energy, collided


def _turn_text(labels_row, lattice: str) -> str:
    return TurnSequence(lattice, tuple(int(t) for t in labels_row)).to_string()


def _sweep_span(config: SearchConfig, n_beads: int, start: int, stop: int):
    """Worker kernel: best k (energy, turn string) pairs in [start, stop)."""
    rules = _pair_rules(config.peptide, config)
    best: list = []  # max-heap via negated sort key
    deadline = None
    if config.max_seconds is not None:
        deadline = time.monotonic() + config.max_seconds
    for lo in range(start, stop, config.chunk):
        if deadline is not None and time.monotonic() > deadline:
            raise BudgetExceededError(
                f"search exceeded {config.max_seconds} s wall budget"
            )
        hi = min(lo + config.chunk, stop)
        indices = np.arange(lo, hi, dtype=np.int64)
        labels = _labels_for_indices(indices, n_beads, config.lattice)
        coords = _coords_for_labels(labels, config.lattice)
        energies, collided = _energies_for_coords(coords, rules, config)
        cutoff = best[0][0] if len(best) >= config.k else None
        valid = ~collided & (energies < config.collision_penalty)
        if cutoff is not None:
            valid &= energies <= -cutoff[0]
        for row in np.flatnonzero(valid):
            e = float(energies[row])
            if cutoff is not None and e > -cutoff[0]:
                continue
            key = (-e, _rev(_turn_text(labels[row], config.lattice)))
            if len(best) < config.k:
                heapq.heappush(best, (key, e))
            else:
                heapq.heappushpop(best, (key, e))
            cutoff = best[0][0] if len(best) >= config.k else None
    out = sorted(((e, _unrev(key[1])) for key, e in best), key=lambda r: (r[0], r[1]))
    return out, stop - start


def _rev(text: str) -> tuple:
    # lexicographically inverted proxy so a min-heap on negated energy keeps
    # the record that wins the (energy, turn string) ascending tie-break
    return tuple(-ord(c) for c in text)


def _unrev(key: tuple) -> str:
    return "".join(chr(-v) for v in key)


def search(config: SearchConfig) -> TopK:
    """Sweep the full conformation space and return the top-K records.

    Self-intersecting conformations never enter the list, even when
    favourable contacts pull their penalized energy back under the
    collision threshold; energies at or above the threshold are likewise
    excluded.
    """
    n_beads = len(validate_peptide(config.peptide))
    if n_beads < 3:
        raise EncodingError("need at least 3 beads")
    total = enumeration_size(config.lattice, n_beads)

    spans = _partition(total, config.workers)
    results = []
    if config.workers == 1 or len(spans) == 1:
        for start, stop in spans:
            results.append(_sweep_span(config, n_beads, start, stop))
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [
                pool.submit(_sweep_span, config, n_beads, start, stop)
                for start, stop in spans
            ]
            results = [f.result() for f in futures]

    merged: list = []
    visited = 0
    for pairs, count in results:
        merged.extend(pairs)
        visited += count
    merged.sort(key=lambda r: (r[0], r[1]))
    del merged[config.k :]

    records = []
    for energy, text in merged:
        seq = turns_from_string(text, config.lattice)
        bits = pack_configuration(seq) if config.lattice == FCC else text
        records.append(
            ConformerRecord(
                energy=energy, turns=seq, bits=bits, coords=coords_from_turns(seq)
            )
        )
    return TopK(k=config.k, records=tuple(records), visited=visited)


def _partition(total: int, workers: int):
    n = min(workers, total) or 1
    base, extra = divmod(total, n)
    spans = []
    start = 0
    for w in range(n):
        size = base + (1 if w < extra else 0)
        spans.append((start, start + size))
        start += size
    return spans
