"""Post-processing: decoding sampled bitstrings, structure metrics, file formats.

Sampled bitstrings are converted to turn sequences by stripping the ancilla
bits and aggregating counts per configuration; energies are re-scored
geometrically from the decoded conformation rather than trusted from the
sampled ancillas.  Structure metrics are the mass-weighted radius of
gyration and the Kabsch superposition RMSD (proper rotations only).

On-disk formats:

* XYZ: count line, comment line, then one ``<residue> <x> <y> <z>`` line per
  bead, six-decimal fixed point, angstroms.  Consecutive beads sit 3.8 A
  apart (face-centered cubic lattice units scale by 3.8/sqrt(2), tetrahedral
  integer units by 3.8/sqrt(3)).
* topobj: a header line, then one block per conformer (``energy``/``turns``/
  ``bits``/coordinate lines) separated by blank lines, ascending energy.
* Energy-probability report: tab-delimited rows sorted by energy with a
  cumulative-probability column, plus an optional JSON mirror.

Both writers are exact inverses of their parsers byte for byte.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import EmptyStructureError, EncodingError, ParseError
from .hamiltonian import EncodingLayout
from .lattice import (
    FCC,
    LATTICES,
    TET,
    TurnSequence,
    coords_from_turns,
    turns_from_string,
    unpack_configuration,
)
from .scoring import load_masses
from .sim import ShotTable

BOND_ANGSTROMS = 3.8


def lattice_scale(lattice: str) -> float:
    """Angstroms per integer coordinate unit for 3.8 A bonds."""
    if lattice == FCC:
        return BOND_ANGSTROMS / math.sqrt(2.0)
    if lattice == TET:
        return BOND_ANGSTROMS / math.sqrt(3.0)
    raise EncodingError(f"unknown lattice {lattice!r}")


# ---------------------------------------------------------------------------
# decoding sampled bitstrings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecodedEntry:
    turns: TurnSequence
    probability: float
    energy: float | None
    redundant: bool
    backtrack: bool
    overlap: bool

    @property
    def valid(self) -> bool:
        return not (self.redundant or self.backtrack or self.overlap)

    @property
    def turn_string(self) -> str:
        return self.turns.to_string()


@dataclass(frozen=True)
class DecodedEnsemble:
    entries: tuple
    e_star: float | None = None

    @property
    def modal(self) -> DecodedEntry:
        return self.entries[0]

    @property
    def total_probability(self) -> float:
        return math.fsum(e.probability for e in self.entries)

    @property
    def valid_probability(self) -> float:
        return math.fsum(e.probability for e in self.entries if e.valid)


def decode_samples(shots: ShotTable, layout: EncodingLayout, energy_fn, e_star=None):
    """Aggregate a shot table into turn-sequence entries.

    ``energy_fn`` maps a decodable TurnSequence to its geometric energy;
    entries whose configuration contains a redundant codeword carry no
    energy.  Entries come back sorted by descending probability with ties
    broken by turn string, so ``ensemble.modal`` is the modal sequence.
    """
    n_config = layout.n_config_bits
    per_config: dict = {}
    for bits, count in shots.counts.items():
        if len(bits) != layout.total_qubits:
            raise EncodingError(
                f"bitstring length {len(bits)} != layout width {layout.total_qubits}"
            )
        key = bits[:n_config]
        per_config[key] = per_config.get(key, 0) + count

    entries = []
    for config_bits, count in per_config.items():
        seq = unpack_configuration(config_bits, layout.n_beads)
        probability = count / shots.shots
        redundant = bool(seq.redundant_positions)
        backtrack = overlap = False
        energy = None
        if not redundant:
            coords = coords_from_turns(seq)
            n = coords.shape[0]
            for i in range(n - 2):
                if np.array_equal(coords[i], coords[i + 2]):
                    backtrack = True
                    break
            for i in range(n - 3):
                for j in range(i + 3, n):
                    if np.array_equal(coords[i], coords[j]):
                        overlap = True
                        break
                if overlap:
                    break
            energy = float(energy_fn(seq))
        entries.append(
            DecodedEntry(
                turns=seq,
                probability=probability,
                energy=energy,
                redundant=redundant,
                backtrack=backtrack,
                overlap=overlap,
            )
        )
    entries.sort(key=lambda e: (-e.probability, e.turn_string))
    return DecodedEnsemble(entries=tuple(entries), e_star=e_star)


# ---------------------------------------------------------------------------
# structure metrics
# ---------------------------------------------------------------------------


def radius_of_gyration(coords, masses=None) -> float:
    """Mass-weighted root-mean-square distance from the center of mass."""
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 2 or coords.shape[0] == 0 or coords.shape[1] != 3:
        raise EmptyStructureError("need an (n, 3) coordinate array with n >= 1")
    if masses is None:
        masses = np.ones(coords.shape[0])
    masses = np.asarray(masses, dtype=float)
    if masses.shape != (coords.shape[0],):
        raise EncodingError("one mass per bead required")
    if np.any(masses <= 0.0):
        raise EncodingError("masses must be positive")
    total = masses.sum()
    center = (masses[:, None] * coords).sum(axis=0) / total
    offsets = coords - center
    return float(np.sqrt((masses * np.einsum("ij,ij->i", offsets, offsets)).sum() / total))


def kabsch_rmsd(a, b) -> float:
    """RMSD after optimal proper-rotation superposition of ``a`` onto ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 3:
        raise EncodingError("coordinate arrays must share an (n, 3) shape")
    if a.shape[0] == 0:
        raise EmptyStructureError("need at least one bead")
    ac = a - a.mean(axis=0)
    bc = b - b.mean(axis=0)
    cov = ac.T @ bc
    u, _, vt = np.linalg.svd(cov)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    flip = np.diag([1.0, 1.0, d])
    rotation = vt.T @ flip @ u.T
    diff = ac @ rotation.T - bc
    return float(np.sqrt(np.einsum("ij,ij->", diff, diff) / a.shape[0]))


# ---------------------------------------------------------------------------
# XYZ files
# ---------------------------------------------------------------------------


def scaled_coords(conf, lattice: str | None = None) -> np.ndarray:
    """Angstrom coordinates of a turn sequence or raw integer array."""
    if isinstance(conf, TurnSequence):
        return coords_from_turns(conf) * lattice_scale(conf.lattice)
    if lattice is None:
        raise EncodingError("raw coordinate arrays need an explicit lattice")
    return np.asarray(conf, dtype=float) * lattice_scale(lattice)


def xyz_text(peptide: str, coords_angstrom, comment: str) -> str:
    coords = np.asarray(coords_angstrom, dtype=float)
    if coords.shape[0] != len(peptide):
        raise EncodingError("peptide length differs from coordinate count")
    if "\n" in comment:
        raise EncodingError("comment must be a single line")
    lines = [str(len(peptide)), comment]
    for residue, row in zip(peptide, coords):
        lines.append(f"{residue} {row[0]:.6f} {row[1]:.6f} {row[2]:.6f}")
    return "\n".join(lines) + "\n"


def write_xyz(conf, peptide: str, path=None, lattice=None, comment=None) -> str:
    """Emit an XYZ file; returns the text, writing it when a path is given."""
    coords = scaled_coords(conf, lattice)
    if comment is None:
        kind = conf.lattice if isinstance(conf, TurnSequence) else lattice
        comment = f"{kind} lattice chain, bonds {BOND_ANGSTROMS} A"
    text = xyz_text(peptide, coords, comment)
    if path is not None:
        with open(path, "w") as handle:
            handle.write(text)
    return text


def parse_xyz(text: str):
    """Inverse of the XYZ writer: returns (peptide, coordinates, comment)."""
    lines = text.splitlines()
    if len(lines) < 2:
        raise ParseError("xyz needs a count line and a comment line")
    try:
        count = int(lines[0].strip())
    except ValueError as exc:
        raise ParseError(f"bad atom count {lines[0]!r}") from exc
    comment = lines[1]
    rows = lines[2:]
    if len(rows) != count:
        raise ParseError(f"expected {count} atom lines, found {len(rows)}")
    peptide = []
    coords = np.empty((count, 3))
    for i, row in enumerate(rows):
        parts = row.split()
        if len(parts) != 4 or len(parts[0]) != 1:
            raise ParseError(f"atom line {i + 1}: expected '<residue> <x> <y> <z>'")
        peptide.append(parts[0])
        try:
            coords[i] = [float(v) for v in parts[1:]]
        except ValueError as exc:
            raise ParseError(f"atom line {i + 1}: bad coordinate") from exc
    return "".join(peptide), coords, comment


# ---------------------------------------------------------------------------
# topobj files
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TopobjRecord:
    energy: float
    turn_string: str
    bits: str | None
    coords_angstrom: np.ndarray


@dataclass(frozen=True)
class TopobjDocument:
    lattice: str
    peptide: str
    records: tuple


def _topobj_records(topk, lattice: str):
    scale = lattice_scale(lattice)
    out = []
    for rec in topk.records:
        out.append(
            TopobjRecord(
                energy=float(rec.energy),
                turn_string=rec.turns.to_string(),
                bits=rec.bits if lattice == FCC else None,
                coords_angstrom=rec.coords * scale,
            )
        )
    return out


def topobj_text(document: TopobjDocument) -> str:
    blocks = [f"topobj lattice={document.lattice} peptide={document.peptide}"]
    for rec in document.records:
        lines = [f"energy {rec.energy!r}", f"turns {rec.turn_string}"]
        if rec.bits is not None:
            lines.append(f"bits {rec.bits}")
        for row in rec.coords_angstrom:
            lines.append(f"{row[0]:.6f} {row[1]:.6f} {row[2]:.6f}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def write_topobj(topk_or_document, path=None, lattice=None, peptide=None) -> str:
    """Serialize a search TopK (or a parsed document) to topobj text."""
    if isinstance(topk_or_document, TopobjDocument):
        document = topk_or_document
    else:
        if lattice is None or peptide is None:
            raise EncodingError("serializing a TopK needs lattice and peptide")
        document = TopobjDocument(
            lattice=lattice,
            peptide=peptide,
            records=tuple(_topobj_records(topk_or_document, lattice)),
        )
    text = topobj_text(document)
    if path is not None:
        with open(path, "w") as handle:
            handle.write(text)
    return text


def parse_topobj(text: str) -> TopobjDocument:
    blocks = [b for b in text.split("\n\n") if b.strip()]
    header = blocks[0].splitlines()
    if len(header) != 1 or not header[0].startswith("topobj "):
        raise ParseError("first block must be the single-line topobj header")
    fields = dict(
        part.split("=", 1) for part in header[0].split()[1:] if "=" in part
    )
    lattice = fields.get("lattice")
    peptide = fields.get("peptide", "")
    if lattice not in LATTICES:
        raise ParseError(f"header names unknown lattice {lattice!r}")
    records = []
    previous = -math.inf
    for index, block in enumerate(blocks[1:], 1):
        lines = block.splitlines()
        if len(lines) < 2 or not lines[0].startswith("energy "):
            raise ParseError(f"block {index}: expected an energy line first")
        try:
            energy = float(lines[0][len("energy ") :])
        except ValueError as exc:
            raise ParseError(f"block {index}: bad energy") from exc
        if energy < previous:
            raise ParseError(f"block {index}: records must ascend by energy")
        previous = energy
        if not lines[1].startswith("turns "):
            raise ParseError(f"block {index}: expected a turns line")
        turn_string = lines[1][len("turns ") :]
        turns_from_string(turn_string, lattice)  # validates labels
        cursor = 2
        bits = None
        if cursor < len(lines) and lines[cursor].startswith("bits "):
            bits = lines[cursor][len("bits ") :]
            cursor += 1
        coord_rows = lines[cursor:]
        if len(coord_rows) != len(turn_string) + 1:
            raise ParseError(f"block {index}: expected {len(turn_string) + 1} beads")
        coords = np.empty((len(coord_rows), 3))
        for i, row in enumerate(coord_rows):
            parts = row.split()
            if len(parts) != 3:
                raise ParseError(f"block {index}: bad coordinate line")
            coords[i] = [float(v) for v in parts]
        records.append(
            TopobjRecord(
                energy=energy,
                turn_string=turn_string,
                bits=bits,
                coords_angstrom=coords,
            )
        )
    return TopobjDocument(lattice=lattice, peptide=peptide, records=tuple(records))


# ---------------------------------------------------------------------------
# energy-probability report
# ---------------------------------------------------------------------------

REPORT_COLUMNS = (
    "energy",
    "probability",
    "cumulative",
    "turns",
    "rg_angstrom",
    "ground",
    "flags",
)


def _entry_flags(entry: DecodedEntry) -> str:
    flags = [
        name
        for name, hit in (
            ("redundant", entry.redundant),
            ("backtrack", entry.backtrack),
            ("overlap", entry.overlap),
        )
        if hit
    ]
    return "+".join(flags) if flags else "ok"


def energy_probability_report(
    ensemble: DecodedEnsemble,
    e_star: float | None = None,
    path=None,
    peptide: str | None = None,
    masses=None,
    json_path=None,
) -> str:
    """Tab-delimited rows sorted by energy with a cumulative column.

    Rows whose energy matches ``e_star`` within 1e-9 are marked as ground.
    Undecodable entries sort last with blank energy and radius columns.
    Masses for the radius of gyration come from ``masses``, else from the
    bundled residue-mass table when ``peptide`` is given, else unit masses.
    """
    if e_star is None:
        e_star = ensemble.e_star
    if masses is None and peptide is not None:
        table = load_masses()
        masses = np.array([table[r] for r in peptide])
    scored = [e for e in ensemble.entries if e.energy is not None]
    unscored = [e for e in ensemble.entries if e.energy is None]
    scored.sort(key=lambda e: (e.energy, e.turn_string))
    unscored.sort(key=lambda e: e.turn_string)

    lines = ["\t".join(REPORT_COLUMNS)]
    rows = []
    cumulative = 0.0
    for entry in scored + unscored:
        cumulative += entry.probability
        if entry.energy is None:
            energy_text = rg_text = ""
            ground = False
            rg = None
        else:
            energy_text = f"{entry.energy:.6f}"
            coords = scaled_coords(entry.turns)
            rg = radius_of_gyration(coords, masses)
            rg_text = f"{rg:.6f}"
            ground = e_star is not None and abs(entry.energy - e_star) <= 1e-9
        row = {
            "energy": None if entry.energy is None else entry.energy,
            "probability": entry.probability,
            "cumulative": cumulative,
            "turns": entry.turn_string,
            "rg_angstrom": rg,
            "ground": ground,
            "flags": _entry_flags(entry),
        }
        rows.append(row)
        lines.append(
            "\t".join(
                [
                    energy_text,
                    f"{entry.probability:.6f}",
                    f"{cumulative:.6f}",
                    entry.turn_string,
                    rg_text,
                    "*" if ground else "",
                    row["flags"],
                ]
            )
        )
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as handle:
            handle.write(text)
    if json_path is not None:
        with open(json_path, "w") as handle:
            json.dump({"e_star": e_star, "rows": rows}, handle, indent=2)
            handle.write("\n")
    return text
