"""Lattice geometry and turn encodings for face-centred-cubic and tetrahedral chains.

A conformation of an ``N``-bead chain is a sequence of ``N - 1`` turns, each turn
selecting the lattice vector that joins consecutive beads.

On the FCC lattice the twelve nearest-neighbour directions are addressed by the
labels ``0..b`` (hex).  Each label owns a unique 4-bit codeword; the four
codewords that address no direction are *redundant* and are penalised at the
Hamiltonian level rather than forbidden structurally.  A configuration
bitstring packs the turn sequence with a fixed prefix: turn 0 is pinned to
label ``0`` and consumes no bits, turn 1 is restricted to codewords of the form
``q0 q1 0 0`` (two free bits), and every later turn consumes a full 4-bit
group, for ``4 N - 10`` configuration bits in total.

On the tetrahedral (diamond) lattice each bead has four neighbours.  Bond
vectors alternate in sign along the chain, so a single absolute turn label in
``{0, 1, 2, 3}`` per bond fixes the walk.  Coordinates are kept as integer
triples in units of ``1/sqrt(3)`` of the bond length.

Bit conventions used everywhere in this package: character ``i`` of a bitstring
(read left to right) is variable ``q_i``, and bit ``i`` of a basis-state index
``b`` (that is, ``(b >> i) & 1``) is the same variable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import EncodingError

# ---------------------------------------------------------------------------
# lattice kinds
# ---------------------------------------------------------------------------

FCC = "fcc"
TET = "tet"

LATTICES = (FCC, TET)


# ---------------------------------------------------------------------------
# FCC turn tables
# ---------------------------------------------------------------------------

#: The twelve FCC nearest-neighbour vectors in label order 0..b.
FCC_VECTORS = np.array(
    [
        [1, 1, 0],    # 0
        [-1, -1, 0],  # 1
        [-1, 1, 0],   # 2
        [1, -1, 0],   # 3
        [0, 1, 1],    # 4
        [0, -1, -1],  # 5
        [0, 1, -1],   # 6
        [0, -1, 1],   # 7
        [1, 0, 1],    # 8
        [-1, 0, -1],  # 9
        [1, 0, -1],   # a
        [-1, 0, 1],   # b
    ],
    dtype=np.int64,
)

#: 4-bit codeword assigned to each label, same order as FCC_VECTORS.
FCC_CODEWORDS = (
    "0000", "0011", "1100", "1111",
    "1001", "0101", "1010", "0110",
    "1000", "0100", "1011", "0111",
)

#: The four codewords that address no direction.
REDUNDANT_CODEWORDS = frozenset({"0010", "0001", "1101", "1110"})

#: Hex digits used when rendering FCC turn labels as text.
TURN_CHARS = "0123456789ab"

#: Turn-1 labels selected by the two free prefix bits q0 q1 = 00, 01, 10, 11.
SECOND_TURN_LABELS = (0, 9, 8, 2)

_CODEWORD_TO_LABEL = {code: label for label, code in enumerate(FCC_CODEWORDS)}
_CHAR_TO_LABEL = {c: i for i, c in enumerate(TURN_CHARS)}


def inverse_label(label: int) -> int:
    """Label of the opposite FCC direction.  Codewords pair labels as 2k, 2k+1."""
    return label ^ 1


# ---------------------------------------------------------------------------
# tetrahedral turn tables
# ---------------------------------------------------------------------------

#: The four tetrahedral bond vectors, integer triples in units of 1/sqrt(3).
TET_VECTORS = np.array(
    [
        [1, 1, 1],
        [1, -1, -1],
        [-1, 1, -1],
        [-1, -1, 1],
    ],
    dtype=np.int64,
)


def tet_abs_from_rel(rel, parents=None):
    """Convert relative tetrahedral turns to absolute turn labels.

    The first bond is pinned to absolute label 0.  Bond ``k + 1`` carries a
    relative turn ``rel[k]`` in ``{0, 1, 2}`` against its parent bond
    (``parents[k]``, the previous bond for a linear chain), giving

        abs[k + 1] = (rel[k] + abs[parents[k]] + 1) mod 4.

    Relative turn 3 would reproduce the parent's absolute label, which the
    alternating bond signs turn into an immediate backtrack; it is therefore
    outside the domain.

    Parameters
    ----------
    rel : sequence of int
        Relative turns, one per bond after the first.  May be empty.
    parents : sequence of int, optional
        Index of the parent bond for each entry of ``rel``.  Defaults to the
        linear chain ``parents[k] = k``.

    Returns
    -------
    list of int
        Absolute turn labels, length ``len(rel) + 1``, starting with 0.
    """
    rel = list(rel)
    if parents is None:
        parents = list(range(len(rel)))
    if len(parents) != len(rel):
        raise EncodingError(
            f"parents has length {len(parents)}, expected {len(rel)}"
        )
    abs_turns = [0]
    for k, r in enumerate(rel):
        if r not in (0, 1, 2):
            raise EncodingError(f"relative turn {r!r} at bond {k + 1} not in {{0,1,2}}")
        abs_turns.append((r + abs_turns[parents[k]] + 1) % 4)
    return abs_turns


# ---------------------------------------------------------------------------
# turn sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TurnSequence:
    """A decoded turn sequence.

    ``turns`` holds one label per bond.  For FCC chains a ``None`` entry marks
    a 4-bit group that decoded to a redundant codeword; such sequences carry no
    geometry.  For tetrahedral chains the labels are absolute turns 0..3.
    """

    lattice: str
    turns: tuple

    @property
    def n_beads(self) -> int:
        return len(self.turns) + 1

    @property
    def redundant_positions(self) -> tuple:
        """Turn indices whose 4-bit group decoded to a redundant codeword."""
        return tuple(j for j, t in enumerate(self.turns) if t is None)

    @property
    def is_decodable(self) -> bool:
        return not self.redundant_positions

    def to_string(self) -> str:
        """Render as text: hex labels for FCC, digits 0..3 for TET.

        Redundant FCC groups render as ``'x'``.
        """
        if self.lattice == FCC:
            return "".join("x" if t is None else TURN_CHARS[t] for t in self.turns)
        return "".join(str(t) for t in self.turns)


def turns_from_string(text: str, lattice: str) -> TurnSequence:
    """Parse the output of :meth:`TurnSequence.to_string`."""
    if lattice == FCC:
        turns = []
        for c in text:
            if c == "x":
                turns.append(None)
            elif c in _CHAR_TO_LABEL:
                turns.append(_CHAR_TO_LABEL[c])
            else:
                raise EncodingError(f"invalid FCC turn character {c!r}")
        return TurnSequence(FCC, tuple(turns))
    if lattice == TET:
        turns = []
        for c in text:
            if c not in "0123":
                raise EncodingError(f"invalid tetrahedral turn character {c!r}")
            turns.append(int(c))
        return TurnSequence(TET, tuple(turns))
    raise EncodingError(f"unknown lattice {lattice!r}")


# ---------------------------------------------------------------------------
# configuration bitstrings (FCC)
# ---------------------------------------------------------------------------


def n_config_bits(n_beads: int) -> int:
    """Number of configuration bits for an FCC chain: ``4 N - 10``."""
    if n_beads < 3:
        raise EncodingError(f"need at least 3 beads, got {n_beads}")
    return 4 * n_beads - 10


def decode_turn(code: str):
    """Map a 4-bit codeword to its turn label, or ``None`` if redundant.

    Parameters
    ----------
    code : str
        Exactly four characters, each '0' or '1'.
    """
    if len(code) != 4 or any(c not in "01" for c in code):
        raise EncodingError(f"codeword must be four binary characters, got {code!r}")
    return _CODEWORD_TO_LABEL.get(code)


def encode_turn(label: int) -> str:
    """4-bit codeword of an FCC turn label."""
    if not 0 <= label < 12:
        raise EncodingError(f"turn label {label} out of range 0..11")
    return FCC_CODEWORDS[label]


def unpack_configuration(bits: str, n_beads: int) -> TurnSequence:
    """Decode a configuration bitstring into a turn sequence.

    Character ``i`` of ``bits`` is variable ``q_i``.  Turn 0 is label 0 by
    construction; turn 1 is decoded from ``q0 q1 0 0``; turn ``j >= 2`` is
    decoded from the group ``q_{4j-6} .. q_{4j-3}``.  Groups matching a
    redundant codeword yield ``None`` in that slot.

    Raises
    ------
    EncodingError
        If the string length differs from ``4 * n_beads - 10`` or contains
        characters other than '0'/'1'.
    """
    expect = n_config_bits(n_beads)
    if len(bits) != expect:
        raise EncodingError(
            f"configuration for {n_beads} beads needs {expect} bits, got {len(bits)}"
        )
    if any(c not in "01" for c in bits):
        raise EncodingError("configuration bits must be '0'/'1'")
    turns = [0]
    if n_beads >= 3:
        turns.append(decode_turn(bits[0:2] + "00"))
    for j in range(2, n_beads - 1):
        group = bits[4 * j - 6 : 4 * j - 2]
        turns.append(decode_turn(group))
    return TurnSequence(FCC, tuple(turns))


def pack_configuration(seq: TurnSequence) -> str:
    """Inverse of :func:`unpack_configuration` for fully decodable sequences."""
    if seq.lattice != FCC:
        raise EncodingError("only FCC sequences pack to configuration bits")
    turns = seq.turns
    if len(turns) < 2:
        raise EncodingError("need at least two turns (three beads)")
    if turns[0] != 0:
        raise EncodingError("turn 0 must be label 0")
    if turns[1] not in SECOND_TURN_LABELS:
        raise EncodingError(f"turn 1 label {turns[1]} not reachable from prefix bits")
    bits = [encode_turn(turns[1])[0:2]]
    for j, t in enumerate(turns[2:], start=2):
        if t is None:
            raise EncodingError(f"turn {j} is redundant; cannot pack")
        bits.append(encode_turn(t))
    return "".join(bits)


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------


def coords_from_turns(seq: TurnSequence) -> np.ndarray:
    """Integer bead coordinates of a turn sequence, origin at bead 0.

    FCC coordinates are plain lattice units; tetrahedral coordinates are in
    units of ``1/sqrt(3)`` with bond signs alternating along the chain.

    Returns
    -------
    numpy.ndarray
        Shape ``(n_beads, 3)``, dtype int64.
    """
    if seq.lattice == FCC:
        if not seq.is_decodable:
            raise EncodingError(
                f"redundant groups at turns {seq.redundant_positions}; no geometry"
            )
        steps = FCC_VECTORS[list(seq.turns)]
    elif seq.lattice == TET:
        signs = np.array([1 if i % 2 == 0 else -1 for i in range(len(seq.turns))])
        steps = TET_VECTORS[list(seq.turns)] * signs[:, None]
    else:
        raise EncodingError(f"unknown lattice {seq.lattice!r}")
    coords = np.zeros((len(seq.turns) + 1, 3), dtype=np.int64)
    np.cumsum(steps, axis=0, out=coords[1:])
    return coords


def pair_squared_distance(coords: np.ndarray, i: int, j: int, lattice: str) -> int:
    """Squared distance between beads ``i`` and ``j`` in lattice units.

    FCC uses the integer Euclidean square.  Tetrahedral chains use the
    four-dimensional count representation: with ``(dx, dy, dz)`` the integer
    displacement and ``w^2 = (j - i) mod 2`` the sublattice parity,

        d^2 = (dx^2 + dy^2 + dz^2 + w^2) / 4,

    which makes a single bond d^2 = 1 and the second shell d^2 = 2.
    """
    d = coords[j] - coords[i]
    e2 = int(d @ d)
    if lattice == FCC:
        return e2
    if lattice == TET:
        return (e2 + (j - i) % 2) // 4
    raise EncodingError(f"unknown lattice {lattice!r}")


def squared_distance_matrix(coords: np.ndarray, lattice: str) -> np.ndarray:
    """All-pairs squared distances, same convention as pair_squared_distance."""
    d = coords[:, None, :] - coords[None, :, :]
    e2 = np.einsum("ijk,ijk->ij", d, d)
    if lattice == FCC:
        return e2
    n = coords.shape[0]
    idx = np.arange(n)
    parity = (idx[None, :] - idx[:, None]) % 2
    return (e2 + parity) // 4
