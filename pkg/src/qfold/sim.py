"""Noiseless statevector simulation of the layered real-amplitude ansatz.

The circuit family is a rotation layer of single-qubit Y rotations followed
by ``layers`` repetitions of (linear CNOT chain, rotation layer).  Every gate
is real-orthogonal, so amplitudes are stored as a plain float64 array of
length ``2 ** n_qubits``; bit ``i`` of the basis index is qubit ``q_i``,
matching character ``i`` of the bitstring convention used everywhere else.

Provides diagonal expectations, conditional value at risk over the energy
distribution, seeded multinomial shot sampling, and parameter-shift
gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    EmptyDistributionError,
    EncodingError,
    ParamLengthError,
    ParseError,
)

HALF_PI = math.pi / 2.0


@dataclass(frozen=True)
class Ansatz:
    """Hardware-efficient real-amplitude circuit layout.

    Parameters are ordered rotation layer by rotation layer, qubit 0 first
    within each layer: P = n_qubits * (layers + 1) angles in [0, 2*pi).
    """

    n_qubits: int
    layers: int = 2

    def __post_init__(self):
        if self.n_qubits < 1:
            raise EncodingError("ansatz needs at least one qubit")
        if self.layers < 0:
            raise EncodingError("layer count must be non-negative")

    @property
    def n_params(self) -> int:
        return self.n_qubits * (self.layers + 1)


def bitstring_of(index: int, n_qubits: int) -> str:
    """Basis bitstring for an amplitude index; character i is qubit q_i."""
    return format(index, f"0{n_qubits}b")[::-1]


def _apply_ry(state: np.ndarray, qubit: int, theta: float) -> None:
    c = math.cos(theta / 2.0)
    s = math.sin(theta / 2.0)
    view = state.reshape(-1, 2, 1 << qubit)
    lo = view[:, 0, :]
    hi = view[:, 1, :]
    new_hi = s * lo + c * hi
    lo *= c
    lo -= s * hi
    hi[:] = new_hi


def _apply_cnot_chain(state: np.ndarray, n_qubits: int) -> None:
    # control q_i, target q_{i+1}: adjacent index bits, so a 4-way reshape
    # exposes both and the conditional flip is a half-block swap
    for control in range(n_qubits - 1):
        view = state.reshape(-1, 2, 2, 1 << control)
        tmp = view[:, 0, 1, :].copy()
        view[:, 0, 1, :] = view[:, 1, 1, :]
        view[:, 1, 1, :] = tmp


def evolve(ansatz: Ansatz, params) -> np.ndarray:
    """Run the circuit from the all-zeros state; returns the amplitudes."""
    params = np.asarray(params, dtype=float)
    if params.shape != (ansatz.n_params,):
        raise ParamLengthError(
            f"expected {ansatz.n_params} parameters, got shape {params.shape}"
        )
    n = ansatz.n_qubits
    state = np.zeros(1 << n)
    state[0] = 1.0
    for q in range(n):
        _apply_ry(state, q, params[q])
    for layer in range(1, ansatz.layers + 1):
        _apply_cnot_chain(state, n)
        offset = layer * n
        for q in range(n):
            _apply_ry(state, q, params[offset + q])
    return state


def probabilities(state: np.ndarray) -> np.ndarray:
    return state * state


def expectation_diagonal(state: np.ndarray, energy) -> float:
    """Expectation of a diagonal operator.

    ``energy`` is either a precomputed diagonal (array of length 2^n) or a
    callable mapping a basis bitstring to its energy.
    """
    probs = probabilities(state)
    if callable(energy):
        n = int(round(math.log2(state.shape[0])))
        diag = np.fromiter(
            (energy(bitstring_of(b, n)) for b in range(state.shape[0])),
            dtype=float,
            count=state.shape[0],
        )
    else:
        diag = np.asarray(energy, dtype=float)
        if diag.shape != state.shape:
            raise EncodingError("diagonal length does not match the state")
    return float(probs @ diag)


def cvar(energies, probs, alpha: float) -> float:
    """Mean of the lowest-energy tail holding probability mass ``alpha``.

    The boundary state is included fractionally so the tail mass is exactly
    ``alpha``; ``alpha = 1`` reduces to the plain expectation.
    """
    if not 0.0 < alpha <= 1.0:
        raise EncodingError("alpha must lie in (0, 1]")
    energies = np.asarray(energies, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if energies.shape != probs.shape or energies.ndim != 1:
        raise EncodingError("energies and probabilities must be equal-length 1-d")
    keep = probs > 0.0
    energies = energies[keep]
    probs = probs[keep]
    if energies.size == 0:
        raise EmptyDistributionError("no probability mass in the distribution")
    order = np.argsort(energies, kind="stable")
    energies = energies[order]
    probs = probs[order]
    cum = np.cumsum(probs)
    mass = min(alpha, float(cum[-1]))
    boundary = int(np.searchsorted(cum, mass, side="left"))
    total = float(energies[:boundary] @ probs[:boundary])
    used = float(cum[boundary - 1]) if boundary else 0.0
    if boundary < energies.size and mass > used:
        total += float(energies[boundary]) * (mass - used)
    return total / mass


@dataclass(frozen=True)
class ShotTable:
    """Counts per observed bitstring from a sampling run."""

    counts: dict
    shots: int

    def __post_init__(self):
        if sum(self.counts.values()) != self.shots:
            raise EncodingError("shot counts do not sum to the shot total")

    def frequencies(self) -> dict:
        return {bits: c / self.shots for bits, c in self.counts.items()}

    def to_text(self) -> str:
        lines = [f"{bits}\t{count}" for bits, count in sorted(self.counts.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ShotTable":
        counts = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2 or set(parts[0]) - {"0", "1"}:
                raise ParseError(f"line {lineno}: expected '<bits> <count>'")
            try:
                count = int(parts[1])
            except ValueError as exc:
                raise ParseError(f"line {lineno}: bad count {parts[1]!r}") from exc
            if count < 0:
                raise ParseError(f"line {lineno}: negative count")
            counts[parts[0]] = counts.get(parts[0], 0) + count
        if not counts:
            raise ParseError("shot table is empty")
        return cls(counts=counts, shots=sum(counts.values()))


def sample(state: np.ndarray, shots: int, seed) -> ShotTable:
    """Seeded multinomial draw from the measurement distribution."""
    if shots < 1:
        raise EncodingError("shots must be >= 1")
    probs = probabilities(state)
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    drawn = rng.multinomial(shots, probs)
    n = int(round(math.log2(state.shape[0])))
    counts = {
        bitstring_of(b, n): int(c) for b, c in zip(np.flatnonzero(drawn), drawn[drawn > 0])
    }
    return ShotTable(counts=counts, shots=shots)


def parameter_shift_gradient(ansatz: Ansatz, params, objective) -> np.ndarray:
    """Exact gradient of ``objective(evolve(ansatz, params))``.

    Uses the two-point rule with shifts of half pi, so a full gradient costs
    exactly ``2 * n_params`` circuit evaluations.
    """
    params = np.asarray(params, dtype=float)
    if params.shape != (ansatz.n_params,):
        raise ParamLengthError(
            f"expected {ansatz.n_params} parameters, got shape {params.shape}"
        )
    grad = np.empty(ansatz.n_params)
    shifted = params.copy()
    for p in range(ansatz.n_params):
        shifted[p] = params[p] + HALF_PI
        plus = objective(evolve(ansatz, shifted))
        shifted[p] = params[p] - HALF_PI
        minus = objective(evolve(ansatz, shifted))
        shifted[p] = params[p]
        grad[p] = 0.5 * (plus - minus)
    return grad
