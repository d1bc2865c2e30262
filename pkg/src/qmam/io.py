"""JSON instance and certificate files.

Matrix entries are ``[re, im]`` pairs of decimal strings. Strings are read
as exact rationals and rounded once to binary64; floats are written with
their shortest round-tripping representation, so write -> read -> write is
the identity on the strings. Entries are row-major in the global index order
(coin slowest, then W, then Y).
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import oracle, sdp as sdpm
from .linalg import DimTriple
from .sdp import DualCandidate, PrimalCandidate, ProtocolInstance

FORMAT_VERSION = 1
INDEX_ORDER = "row-major; flat index a*dW*dY + w*dY + y (coin slowest, then W, then Y)"


class FormatError(ValueError):
    """A file that does not parse; the message names the offending line or field."""


def encode_scalar(x: float) -> str:
    return repr(float(x))


def decode_scalar(s, where: str) -> float:
    if not isinstance(s, str):
        raise FormatError(f"{where}: expected a decimal string, got {type(s).__name__}")
    try:
        x = float(Fraction(s))
    except (ValueError, ZeroDivisionError):
        raise FormatError(f"{where}: {s!r} is not a decimal number") from None
    # rationals have no signed zero; keep it so the strings round-trip
    return -0.0 if x == 0 and s.lstrip().startswith("-") else x


def encode_matrix(a) -> list:
    a = np.asarray(a, dtype=complex)
    return [[[encode_scalar(z.real), encode_scalar(z.imag)] for z in row] for row in a]


def decode_matrix(rows, where: str, dim: int | None = None) -> np.ndarray:
    if not isinstance(rows, list) or not rows:
        raise FormatError(f"{where}: expected a non-empty list of rows")
    n = len(rows)
    if dim is not None and n != dim:
        raise FormatError(f"{where}: expected {dim} rows, got {n}")
    out = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise FormatError(f"{where}[{i}]: expected a row of {n} entries")
        for j, entry in enumerate(row):
            if not isinstance(entry, list) or len(entry) != 2:
                raise FormatError(f"{where}[{i}][{j}]: expected a [re, im] pair")
            out[i, j] = complex(decode_scalar(entry[0], f"{where}[{i}][{j}].re"),
                                decode_scalar(entry[1], f"{where}[{i}][{j}].im"))
    return out


def encode_fraction(x) -> list[int] | None:
    if x is None:
        return None
    x = Fraction(x)
    return [x.numerator, x.denominator]


def decode_fraction(v, where: str) -> Fraction | None:
    if v is None:
        return None
    if not (isinstance(v, list) and len(v) == 2 and all(isinstance(p, int) for p in v)) or v[1] == 0:
        raise FormatError(f"{where}: expected an integer pair [numerator, denominator]")
    return Fraction(v[0], v[1])


def _read_json(path) -> dict:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: top level must be an object")
    return doc


def _field(doc: dict, key: str, where: str):
    if key not in doc:
        raise FormatError(f"{where}: missing field {key!r}")
    return doc[key]


def instance_to_doc(inst: ProtocolInstance, padding_eps=None, metadata: dict | None = None) -> dict:
    """``inst`` holds the raw operators; ``padding_eps`` is applied at load time."""
    if inst.padded:
        raise ValueError("store the raw operators and pass padding_eps instead")
    return {
        "format": "qmam-instance",
        "format_version": FORMAT_VERSION,
        "index_order": INDEX_ORDER,
        "dims": {"dW": inst.dims.dW, "dY": inst.dims.dY},
        "padding_eps": encode_fraction(padding_eps),
        "P0": encode_matrix(inst.P0),
        "P1": encode_matrix(inst.P1),
        "metadata": metadata or {},
    }


def parse_instance(doc: dict, where: str = "instance") -> tuple[ProtocolInstance, Fraction | None, dict]:
    """Return the raw instance, its padding epsilon and the metadata."""
    version = _field(doc, "format_version", where)
    if version != FORMAT_VERSION:
        raise FormatError(f"{where}: unsupported format_version {version!r}")
    dims = _field(doc, "dims", where)
    try:
        dW, dY = int(dims["dW"]), int(dims["dY"])
        triple = DimTriple(dW, dY)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}.dims: {exc}") from None
    n = dW * dY
    p0 = decode_matrix(_field(doc, "P0", where), f"{where}.P0", n)
    p1 = decode_matrix(_field(doc, "P1", where), f"{where}.P1", n)
    eps = decode_fraction(doc.get("padding_eps"), f"{where}.padding_eps")
    try:
        inst = ProtocolInstance(triple, p0, p1)
    except sdpm.SdpError as exc:
        raise FormatError(f"{where}: {exc}") from None
    metadata = doc.get("metadata") or {}
    if not isinstance(metadata, dict):
        raise FormatError(f"{where}.metadata: expected an object")
    return inst, eps, metadata


def padded(inst: ProtocolInstance, eps) -> ProtocolInstance:
    return inst if eps is None else sdpm.apply_soundness_padding(inst, eps)


def check_metadata(inst: ProtocolInstance, eps, metadata: dict, where: str = "instance"):
    """Revalidate the witness or certificate a planted instance carries."""
    known = decode_fraction(metadata.get("known_value"), f"{where}.metadata.known_value")
    witness = metadata.get("witness")
    if witness is not None:
        n = inst.dims.dW * inst.dims.dY
        rho0 = decode_matrix(_field(witness, "rho0", f"{where}.metadata.witness"), f"{where}.metadata.witness.rho0", n)
        rho1 = decode_matrix(_field(witness, "rho1", f"{where}.metadata.witness"), f"{where}.metadata.witness.rho1", n)
        try:
            value = sdpm.strategy_value(padded(inst, eps), rho0, rho1)
        except sdpm.SdpError as exc:
            raise FormatError(f"{where}.metadata.witness: {exc}") from None
        if known is not None and abs(value - float(known)) > 1e-9:
            raise FormatError(f"{where}.metadata.witness: value {value!r} does not match known_value {known}")
    if metadata.get("generator") == "planted-no":
        full = padded(inst, eps)
        try:
            dual = oracle.optimal_dual_for_planted_no(full)
        except oracle.OracleError as exc:
            raise FormatError(f"{where}: {exc}") from None
        report = sdpm.validate_dual_unscaled(sdpm.build_q(full), full.dims, dual)
        if not report.feasible or (known is not None and abs(report.objective - float(known)) > 1e-9):
            raise FormatError(f"{where}: planted-no dual certificate does not revalidate")


def load_instance(path, check: bool = True) -> tuple[ProtocolInstance, Fraction | None, dict]:
    doc = _read_json(path)
    inst, eps, metadata = parse_instance(doc, str(path))
    if check:
        check_metadata(inst, eps, metadata, str(path))
    return inst, eps, metadata


def dump_json(doc: dict, path):
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def certificate_to_doc(cand, objective: float, verdict: str, config: dict | None, tol: float) -> dict:
    doc = {"format": "qmam-certificate", "format_version": FORMAT_VERSION, "index_order": INDEX_ORDER}
    if isinstance(cand, PrimalCandidate):
        doc.update(kind="primal", X=encode_matrix(cand.X), sigma=encode_matrix(cand.sigma))
    elif isinstance(cand, DualCandidate):
        doc.update(kind="dual", Y=encode_matrix(cand.Y))
    else:
        raise TypeError(f"not a certificate: {type(cand).__name__}")
    doc.update(claimed_objective=encode_scalar(objective), verdict=verdict, tolerance=tol, config=config or {})
    return doc


def parse_certificate(doc: dict, dims: DimTriple, where: str = "certificate"):
    version = _field(doc, "format_version", where)
    if version != FORMAT_VERSION:
        raise FormatError(f"{where}: unsupported format_version {version!r}")
    kind = _field(doc, "kind", where)
    if kind == "primal":
        cand = PrimalCandidate(decode_matrix(_field(doc, "X", where), f"{where}.X", dims.N),
                               decode_matrix(_field(doc, "sigma", where), f"{where}.sigma", dims.M))
    elif kind == "dual":
        cand = DualCandidate(decode_matrix(_field(doc, "Y", where), f"{where}.Y", 2 * dims.dW))
    else:
        raise FormatError(f"{where}.kind: expected 'primal' or 'dual', got {kind!r}")
    claimed = decode_scalar(_field(doc, "claimed_objective", where), f"{where}.claimed_objective")
    tol = doc.get("tolerance", sdpm.DEFAULT_TOL)
    if not isinstance(tol, (int, float)) or tol <= 0:
        raise FormatError(f"{where}.tolerance: expected a positive number")
    return cand, claimed, float(tol)


def load_certificate(path, dims: DimTriple):
    return parse_certificate(_read_json(path), dims, str(path))
