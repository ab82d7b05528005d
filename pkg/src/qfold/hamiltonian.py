"""Assembly of the diagonal folding Hamiltonian over a concrete qubit layout.

The objective for an ``N``-bead FCC chain is

    H = H_back + H_redun + H_olap + H_int

where ``H_back`` penalises immediate backtracks (turn followed by its
inverse), ``H_redun`` penalises the four codewords that address no direction,
``H_olap`` (dense penalty-fit mode only) penalises bead overlaps at chain
separation >= 3 through fitted penalty polynomials of the squared distances,
and ``H_int`` scores first-shell contacts: one ancilla qubit per bead pair
``(m, n)``, ``n >= m + 2``, multiplying ``epsilon_mn * (3 - D_mn)``.  An
ancilla only lowers the energy when its pair sits at contact distance
(``D = 2``); at any larger distance the term is positive for attractive
``epsilon < 0``, so the optimizer switches the ancilla off (self-penalizing,
no extra consistency terms needed).

In the constrained mode the overlap physics moves out of the objective into
explicit constraint polynomials ``2 - D_mn`` for every pair at separation
>= 2 (bonded neighbours satisfy ``D = 2`` identically and are omitted).

Qubit layout: configuration bits 0 .. 4N-11 first (turn 1 prefix bits q0 q1,
then 4-bit groups per turn), ancillas after them in lexicographic pair order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import polyfit as pf
from .exceptions import EncodingError
from .lattice import (
    FCC_CODEWORDS,
    FCC_VECTORS,
    REDUNDANT_CODEWORDS,
    SECOND_TURN_LABELS,
    inverse_label,
    n_config_bits,
)
from .pb import PBPolynomial, value_table
from .scoring import EnergyMatrix, epsilon_table, validate_peptide

MODE_POLYFIT = "polyfit"
MODE_VQEC = "vqec"
MODES = (MODE_POLYFIT, MODE_VQEC)

INSTANCE_FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# layout
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EncodingLayout:
    """Variable indexing for an N-bead chain."""

    n_beads: int

    def __post_init__(self):
        if self.n_beads < 3:
            raise EncodingError(f"need at least 3 beads, got {self.n_beads}")

    @property
    def n_config_bits(self) -> int:
        return n_config_bits(self.n_beads)

    @property
    def pairs(self) -> tuple:
        """Interaction pairs (m, n) with n >= m + 2, lexicographic order."""
        n = self.n_beads
        return tuple((m, nn) for m in range(n - 2) for nn in range(m + 2, n))

    @property
    def n_ancillas(self) -> int:
        return len(self.pairs)

    @property
    def total_qubits(self) -> int:
        return self.n_config_bits + self.n_ancillas

    def ancilla_index(self, m: int, n: int) -> int:
        try:
            offset = self.pairs.index((m, n))
        except ValueError:
            raise EncodingError(f"({m}, {n}) is not an interaction pair") from None
        return self.n_config_bits + offset

    def group_qubits(self, j: int) -> tuple:
        """Qubits of turn group j >= 2 (turn 1 lives on the prefix bits 0, 1)."""
        if not 2 <= j <= self.n_beads - 2:
            raise EncodingError(
                f"turn index {j} out of range 2..{self.n_beads - 2}"
            )
        phi = 4 * (j - 2)
        return tuple(phi + 2 + i for i in range(4))


@dataclass(frozen=True)
class Penalties:
    lam_back: float = 50.0
    lam_redun: float = 50.0
    p0: float = 50.0


# ---------------------------------------------------------------------------
# indicator and position polynomials
# ---------------------------------------------------------------------------


def _literal_product(qubits, code: str, n_vars: int) -> PBPolynomial:
    # product over positions: q if bit '1', (1 - q) if bit '0'
    poly = PBPolynomial.constant(1.0, n_vars)
    for q, bit in zip(qubits, code):
        var = PBPolynomial.variable(q, n_vars)
        poly = poly * (var if bit == "1" else (1 - var))
    return poly


def indicator_poly(layout: EncodingLayout, j: int, code: str) -> PBPolynomial:
    """Indicator of turn group ``j`` holding the 4-bit word ``code``.

    Evaluates to 1 exactly on assignments whose group bits equal ``code``.
    """
    if len(code) != 4 or any(c not in "01" for c in code):
        raise EncodingError(f"codeword must be four binary characters, got {code!r}")
    return _literal_product(layout.group_qubits(j), code, layout.total_qubits)


def second_turn_indicator(layout: EncodingLayout, prefix: str) -> PBPolynomial:
    """Indicator of the two turn-1 prefix bits q0 q1 equalling ``prefix``."""
    if len(prefix) != 2 or any(c not in "01" for c in prefix):
        raise EncodingError(f"prefix must be two binary characters, got {prefix!r}")
    return _literal_product((0, 1), prefix, layout.total_qubits)


def _step_polys(layout: EncodingLayout, j: int) -> tuple:
    """Displacement of bond ``j`` as three polynomials (x, y, z)."""
    n_vars = layout.total_qubits
    if j == 0:
        return tuple(
            PBPolynomial.constant(float(FCC_VECTORS[0][c]), n_vars) for c in range(3)
        )
    if j == 1:
        out = [PBPolynomial.zero(n_vars) for _ in range(3)]
        for k, label in enumerate(SECOND_TURN_LABELS):
            ind = second_turn_indicator(layout, f"{k:02b}")
            for c in range(3):
                v = float(FCC_VECTORS[label][c])
                if v:
                    out[c] = out[c] + ind * v
        return tuple(out)
    out = [PBPolynomial.zero(n_vars) for _ in range(3)]
    for label, code in enumerate(FCC_CODEWORDS):
        ind = indicator_poly(layout, j, code)
        for c in range(3):
            v = float(FCC_VECTORS[label][c])
            if v:
                out[c] = out[c] + ind * v
    return tuple(out)


def position_polys(layout: EncodingLayout, m: int) -> tuple:
    """Coordinates of bead ``m`` as polynomials (x_m, y_m, z_m).

    Bead 0 sits at the origin; bead 1 adds only the fixed first turn; later
    beads accumulate the turn-1 prefix terms and one sum of direction
    indicators per 4-bit group.
    """
    if not 0 <= m < layout.n_beads:
        raise EncodingError(f"bead index {m} out of range 0..{layout.n_beads - 1}")
    coords = [PBPolynomial.zero(layout.total_qubits) for _ in range(3)]
    for j in range(m):
        step = _step_polys(layout, j)
        for c in range(3):
            coords[c] = coords[c] + step[c]
    return tuple(coords)


def distance_poly(layout: EncodingLayout, m: int, n: int) -> PBPolynomial:
    """Squared distance between beads ``m`` and ``n`` as a polynomial."""
    if not m < n:
        raise EncodingError(f"need m < n, got ({m}, {n})")
    pos_m = position_polys(layout, m)
    pos_n = position_polys(layout, n)
    total = PBPolynomial.zero(layout.total_qubits)
    for c in range(3):
        delta = pos_n[c] - pos_m[c]
        total = total + delta * delta
    return total


# ---------------------------------------------------------------------------
# Hamiltonian terms
# ---------------------------------------------------------------------------


def build_h_back(layout: EncodingLayout, lam_back: float = 50.0) -> PBPolynomial:
    """Backtrack penalty: each turn followed by its inverse costs lam_back.

    Turn 1 lives on two prefix bits, so its four reversal events are written
    explicitly (prefix indicator times the inverse-direction indicator of
    turn 2); all later consecutive turn pairs come from the double sum over
    full 4-bit groups.
    """
    n_vars = layout.total_qubits
    total = PBPolynomial.zero(n_vars)
    if layout.n_beads >= 4:
        for k, label in enumerate(SECOND_TURN_LABELS):
            prefix = second_turn_indicator(layout, f"{k:02b}")
            back = indicator_poly(layout, 2, FCC_CODEWORDS[inverse_label(label)])
            total = total + prefix * back
    for j in range(2, layout.n_beads - 2):
        for label in range(12):
            here = indicator_poly(layout, j, FCC_CODEWORDS[label])
            there = indicator_poly(layout, j + 1, FCC_CODEWORDS[inverse_label(label)])
            total = total + here * there
    return total * lam_back


def build_h_redun(layout: EncodingLayout, lam_redun: float = 50.0) -> PBPolynomial:
    """Penalty on the four codewords that address no direction."""
    total = PBPolynomial.zero(layout.total_qubits)
    for j in range(2, layout.n_beads - 1):
        for code in sorted(REDUNDANT_CODEWORDS):
            total = total + indicator_poly(layout, j, code)
    return total * lam_redun


def build_h_int(
    layout: EncodingLayout, matrix: EnergyMatrix, peptide: str
) -> PBPolynomial:
    """Contact reward: Sum_{pairs} q^a_mn * epsilon_mn * (3 - D_mn)."""
    peptide = validate_peptide(peptide)
    if len(peptide) != layout.n_beads:
        raise EncodingError(
            f"peptide length {len(peptide)} != layout beads {layout.n_beads}"
        )
    eps = epsilon_table(matrix, peptide)
    n_vars = layout.total_qubits
    total = PBPolynomial.zero(n_vars)
    for m, n in layout.pairs:
        ancilla = PBPolynomial.variable(layout.ancilla_index(m, n), n_vars)
        gap = 3.0 - distance_poly(layout, m, n)
        total = total + ancilla * gap * float(eps[m, n])
    return total


# ---------------------------------------------------------------------------
# problem instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProblemInstance:
    """An assembled optimization problem.

    ``objective`` is the full diagonal Hamiltonian; ``constraints`` (non-empty
    only in constrained mode) are the pair polynomials ``2 - D_mn`` whose
    expectations must be driven nonpositive.
    """

    layout: EncodingLayout
    mode: str
    peptide: str
    matrix_name: str
    penalties: Penalties
    objective: PBPolynomial
    constraints: tuple = field(default_factory=tuple)

    @property
    def n_qubits(self) -> int:
        return self.layout.total_qubits

    def to_json(self) -> str:
        doc = {
            "version": INSTANCE_FORMAT_VERSION,
            "mode": self.mode,
            "peptide": self.peptide,
            "matrix": self.matrix_name,
            "layout": {"n_beads": self.layout.n_beads},
            "penalties": {
                "lam_back": self.penalties.lam_back,
                "lam_redun": self.penalties.lam_redun,
                "p0": self.penalties.p0,
            },
            "n_vars": self.objective.n_vars,
            "objective": self.objective.terms_as_lists(),
            "constraints": [c.terms_as_lists() for c in self.constraints],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "ProblemInstance":
        doc = json.loads(text)
        if doc.get("version") != INSTANCE_FORMAT_VERSION:
            raise EncodingError(
                f"unsupported instance format version {doc.get('version')!r}"
            )
        layout = EncodingLayout(doc["layout"]["n_beads"])
        n_vars = doc["n_vars"]
        objective = PBPolynomial.from_terms(doc["objective"], n_vars)
        constraints = tuple(
            PBPolynomial.from_terms(terms, n_vars) for terms in doc["constraints"]
        )
        pen = doc["penalties"]
        return cls(
            layout=layout,
            mode=doc["mode"],
            peptide=doc["peptide"],
            matrix_name=doc["matrix"],
            penalties=Penalties(pen["lam_back"], pen["lam_redun"], pen["p0"]),
            objective=objective,
            constraints=constraints,
        )


def assemble(
    mode: str,
    layout: EncodingLayout,
    peptide: str,
    matrix: EnergyMatrix,
    penalties: Penalties | None = None,
    fits: dict | None = None,
) -> ProblemInstance:
    """Build the full problem instance for one peptide.

    Dense mode composes one fitted overlap penalty per pair at separation
    >= 3 into the objective (``fits`` maps separation to fit; omitted fits
    are computed here at the configured P0).  Constrained mode instead emits
    ``2 - D_mn`` constraint polynomials for every pair at separation >= 2.
    """
    if mode not in MODES:
        raise EncodingError(f"mode must be one of {MODES}, got {mode!r}")
    peptide = validate_peptide(peptide)
    if len(peptide) != layout.n_beads:
        raise EncodingError(
            f"peptide length {len(peptide)} != layout beads {layout.n_beads}"
        )
    penalties = penalties or Penalties()
    if mode == MODE_VQEC and fits is not None:
        raise EncodingError("penalty fits are a dense-mode input")

    objective = (
        build_h_back(layout, penalties.lam_back)
        + build_h_redun(layout, penalties.lam_redun)
        + build_h_int(layout, matrix, peptide)
    )
    constraints: list = []

    if mode == MODE_POLYFIT:
        if fits is None:
            fits = pf.fit_family(layout.n_beads, p0=penalties.p0)
        for m, n in layout.pairs:
            s = n - m
            if s < 3:
                continue
            if s not in fits:
                raise EncodingError(f"no penalty fit for separation {s}")
            objective = objective + pf.build_olap_penalty(
                fits[s], distance_poly(layout, m, n)
            )
    else:
        for m, n in layout.pairs:
            constraints.append(2.0 - distance_poly(layout, m, n))

    return ProblemInstance(
        layout=layout,
        mode=mode,
        peptide=peptide,
        matrix_name=matrix.name,
        penalties=penalties,
        objective=objective,
        constraints=tuple(constraints),
    )


# ---------------------------------------------------------------------------
# diagonal tables
# ---------------------------------------------------------------------------


class InstanceTables:
    """Dense per-configuration tables exploiting the ancilla structure.

    Every ancilla appears only in its own linear term, so the objective
    splits as ``base(c) + sum_mn a_mn * pair_mn(c)`` with all tables indexed
    by the configuration bits alone.  This keeps large instances (24 qubits)
    out of full 2^n territory and gives the exact ancilla-optimal energy per
    configuration in closed form.
    """

    def __init__(self, instance: ProblemInstance):
        layout = instance.layout
        self.instance = instance
        self.n_config = layout.n_config_bits
        config_vars = list(range(self.n_config))
        ancilla_mask = 0
        for m, n in layout.pairs:
            ancilla_mask |= 1 << layout.ancilla_index(m, n)

        base = {}
        per_pair = {layout.ancilla_index(m, n): {} for m, n in layout.pairs}
        for mask, coeff in instance.objective.terms.items():
            hit = mask & ancilla_mask
            if hit == 0:
                base[mask] = coeff
            elif hit.bit_count() == 1:
                per_pair[hit.bit_length() - 1][mask ^ hit] = coeff
            else:
                raise EncodingError("objective couples ancillas; tables do not apply")

        n_vars = instance.objective.n_vars
        self.base_table = value_table(
            PBPolynomial(n_vars, base, _canonical=True), config_vars
        )
        self.pair_tables = {
            idx: value_table(PBPolynomial(n_vars, terms, _canonical=True), config_vars)
            for idx, terms in per_pair.items()
        }
        self.constraint_tables = [
            value_table(c, config_vars) for c in instance.constraints
        ]

    def ancilla_optimal_energies(self) -> np.ndarray:
        """Exact min over ancillas of the objective, per configuration."""
        energies = self.base_table.copy()
        for table in self.pair_tables.values():
            energies += np.minimum(table, 0.0)
        return energies

    def energy_of_assignment(self, mask: int) -> float:
        """Objective value at a full assignment (config bits + ancillas)."""
        config = mask & ((1 << self.n_config) - 1)
        total = float(self.base_table[config])
        for idx, table in self.pair_tables.items():
            if (mask >> idx) & 1:
                total += float(table[config])
        return total

    def full_diagonal(self) -> np.ndarray:
        """Dense objective diagonal over all qubits (small instances only)."""
        n = self.instance.n_qubits
        return value_table(self.instance.objective, list(range(n)))
