"""Readers and writers for the text formats used by the command line.

Spin system, state, sequence and result files are JSON.  Peak lists, traces,
matrix dumps and optimiser logs are comma-separated with ``# key=value``
metadata lines on top.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np

from .densmat import StateError, check_state, from_pauli_terms, pauli_decompose
from .ingest import SpectrumTrace
from .measure import PeakList
from .model import RegisterLayout, SpinSystem
from .pulseseq import Controlled, Delay, PulseSequence, Rotation


class FileFormatError(ValueError):
    """Malformed input file; the message names the file and field."""


def digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load_json(path):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def _field(d, key, path, where=""):
    if not isinstance(d, dict) or key not in d:
        raise FileFormatError(f"{path}: missing field '{where}{key}'")
    return d[key]


# -- spin systems -----------------------------------------------------------

def parse_system(d: dict, path="<system>") -> tuple[SpinSystem, RegisterLayout]:
    labels = _field(d, "labels", path)
    shift = _field(d, "shift_hz", path)
    coup = _field(d, "coupling_hz", path)
    layout_d = _field(d, "layout", path)
    species = d.get("species", [])
    for name, val in (("labels", labels), ("shift_hz", shift), ("coupling_hz", coup), ("species", species)):
        if not isinstance(val, list):
            raise FileFormatError(f"{path}: field '{name}' must be a list")
    try:
        layout = RegisterLayout(int(_field(layout_d, "n_input", path, "layout.")),
                                int(layout_d.get("n_ancilla", 0)))
    except (TypeError, ValueError) as exc:
        raise FileFormatError(f"{path}: field 'layout': {exc}") from None
    for i, row in enumerate(coup):
        if not isinstance(row, list) or len(row) != len(labels):
            raise FileFormatError(f"{path}: field 'coupling_hz[{i}]' must have {len(labels)} entries")
    try:
        sys = SpinSystem(labels, shift, coup, species)
        sys.check_layout(layout)
    except (TypeError, ValueError) as exc:
        raise FileFormatError(f"{path}: {exc}") from None
    return sys, layout


def read_system(path) -> tuple[SpinSystem, RegisterLayout]:
    return parse_system(_load_json(path), path)


def system_dict(sys: SpinSystem, layout: RegisterLayout, **extra) -> dict:
    d = dict(extra)
    d.update({
        "labels": list(sys.labels),
        "species": list(sys.species),
        "shift_hz": sys.shift_hz.tolist(),
        "coupling_hz": sys.coupling_hz.tolist(),
        "layout": {"n_input": layout.n_input, "n_ancilla": layout.n_ancilla},
    })
    return d


def write_system(sys: SpinSystem, layout: RegisterLayout, path) -> None:
    _dump_json(system_dict(sys, layout), path)


# -- states -----------------------------------------------------------------

def parse_state(d: dict, path="<state>") -> np.ndarray:
    if "matrix" in d:
        m = d["matrix"]
        re = np.array(_field(m, "re", path, "matrix."), dtype=float)
        im = np.array(m.get("im", np.zeros_like(re)), dtype=float)
        if re.shape != im.shape:
            raise FileFormatError(f"{path}: 'matrix.re' and 'matrix.im' differ in shape")
        rho = re + 1j * im
    elif "pauli_terms" in d:
        terms = []
        for i, t in enumerate(d["pauli_terms"]):
            terms.append((float(_field(t, "coeff", path, f"pauli_terms[{i}].")),
                          str(_field(t, "ops", path, f"pauli_terms[{i}]."))))
        try:
            rho = from_pauli_terms(terms)
        except StateError as exc:
            raise FileFormatError(f"{path}: {exc}") from None
    else:
        raise FileFormatError(f"{path}: state needs a 'matrix' or 'pauli_terms' field")
    try:
        return check_state(rho)
    except StateError as exc:
        raise FileFormatError(f"{path}: {exc}") from None


def read_state(path) -> np.ndarray:
    return parse_state(_load_json(path), path)


def state_dict(rho: np.ndarray, **extra) -> dict:
    rho = np.asarray(rho, dtype=complex)
    d = {
        "matrix": {"re": rho.real.tolist(), "im": rho.imag.tolist()},
        "pauli_terms": [{"coeff": c, "ops": ops} for c, ops in pauli_decompose(rho)],
        "frobenius_norm": float(np.linalg.norm(rho)),
    }
    d.update(extra)
    return d


def write_state(rho: np.ndarray, path, **extra) -> None:
    _dump_json(state_dict(rho, **extra), path)


# -- pulse sequences --------------------------------------------------------

def _matrix(d, path, where):
    re = np.array(_field(d, "re", path, where), dtype=float)
    im = np.array(d.get("im", np.zeros_like(re)), dtype=float)
    return re + 1j * im


def parse_element(d: dict, path="<sequence>", where=""):
    if not isinstance(d, dict) or len(d) != 1:
        raise FileFormatError(f"{path}: element {where} must be an object with one key")
    (key, val), = d.items()
    try:
        if key == "rot":
            return Rotation(np.deg2rad(float(_field(val, "angle_deg", path, where + "rot."))),
                            np.deg2rad(float(val.get("phase_deg", 0.0))),
                            val.get("targets", "all"))
        if key == "delay_s":
            return Delay(float(val))
        if key == "controlled":
            blocks = [_matrix(b, path, f"{where}controlled.unitaries[{i}].")
                      for i, b in enumerate(_field(val, "unitaries", path, where + "controlled."))]
            v = val.get("ancilla_unitary")
            return Controlled(tuple(blocks), None if v is None else _matrix(v, path, where + "controlled.ancilla_unitary."))
    except (TypeError, ValueError) as exc:
        raise FileFormatError(f"{path}: element {where}: {exc}") from None
    raise FileFormatError(f"{path}: element {where} has unknown kind {key!r}")


def element_dict(el) -> dict:
    if isinstance(el, Rotation):
        targets = list(el.targets) if isinstance(el.targets, tuple) else el.targets
        return {"rot": {"angle_deg": float(np.rad2deg(el.angle)), "phase_deg": float(np.rad2deg(el.phase)),
                        "targets": targets}}
    if isinstance(el, Delay):
        return {"delay_s": float(el.tau)}
    if isinstance(el, Controlled):
        d = {"unitaries": [{"re": u.real.tolist(), "im": u.imag.tolist()} for u in el.unitaries]}
        if el.ancilla_unitary is not None:
            v = el.ancilla_unitary
            d["ancilla_unitary"] = {"re": v.real.tolist(), "im": v.imag.tolist()}
        return {"controlled": d}
    raise TypeError(f"unknown element {el!r}")


def parse_sequences(d, path="<sequence>") -> list[PulseSequence]:
    """A bare element list is one experiment; ``{"experiments": [...]}`` holds K."""
    if isinstance(d, list):
        lists = [d]
    elif isinstance(d, dict) and "experiments" in d:
        lists = d["experiments"]
    else:
        raise FileFormatError(f"{path}: expected an element list or an 'experiments' field")
    return [PulseSequence([parse_element(el, path, f"experiments[{k}][{i}]") for i, el in enumerate(lst)])
            for k, lst in enumerate(lists)]


def read_sequences(path) -> list[PulseSequence]:
    return parse_sequences(_load_json(path), path)


def sequences_dict(seqs, **extra) -> dict:
    d = dict(extra)
    d["experiments"] = [[element_dict(el) for el in s.elements] for s in seqs]
    return d


def write_sequences(seqs, path, **extra) -> None:
    _dump_json(sequences_dict(seqs, **extra), path)


# -- delimited text ---------------------------------------------------------

def _num(x) -> str:
    return repr(float(x))


def _meta_lines(meta: dict) -> str:
    return "".join(f"# {k}={v}\n" for k, v in meta.items())


def _split(text: str, path) -> tuple[dict, list[dict]]:
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    meta[k] = v
        elif line.strip():
            body.append(line)
    if not body:
        raise FileFormatError(f"{path}: no header row")
    rows = list(csv.DictReader(body, skipinitialspace=True))
    return meta, rows


def _floats(row, keys, path, lineno):
    try:
        return [float(row[k]) for k in keys]
    except (KeyError, TypeError, ValueError):
        raise FileFormatError(f"{path}: data row {lineno}: expected numeric columns {keys}") from None


def write_peaks(peaks: PeakList, path, layout: RegisterLayout | None = None, **meta) -> None:
    head = {}
    if layout is not None:
        head.update(n_input=layout.n_input, n_ancilla=layout.n_ancilla)
    head.update(meta)
    buf = io.StringIO()
    buf.write(_meta_lines(head))
    buf.write("j,nu,frequency_hz,re,im\n")
    for j, nu, f, c in zip(peaks.qubit, peaks.nu, peaks.frequency_hz, peaks.intensity):
        buf.write(f"{int(j)},{int(nu)},{_num(f)},{_num(c.real)},{_num(c.imag)}\n")
    Path(path).write_text(buf.getvalue())


def read_peaks(path, layout: RegisterLayout | None = None) -> PeakList:
    """Read a peak list, sort it into canonical order and check it against ``layout``."""
    meta, rows = _split(Path(path).read_text(), path)
    data = []
    for i, row in enumerate(rows, 1):
        j, nu, f, re, im = _floats(row, ["j", "nu", "frequency_hz", "re", "im"], path, i)
        data.append((int(j), int(nu), f, re + 1j * im))
    data.sort(key=lambda r: (r[0], r[1]))
    keys = [(r[0], r[1]) for r in data]
    if len(set(keys)) != len(keys):
        raise FileFormatError(f"{path}: duplicate (j, nu) rows")
    if layout is not None:
        for key in ("n_input", "n_ancilla"):
            if key in meta and int(meta[key]) != getattr(layout, key):
                raise FileFormatError(f"{path}: header {key}={meta[key]} does not match register")
    peaks = PeakList([r[0] for r in data], [r[1] for r in data], [r[2] for r in data], [r[3] for r in data])
    if layout is not None:
        try:
            peaks.check_canonical(layout)
        except ValueError as exc:
            raise FileFormatError(f"{path}: {exc}") from None
    return peaks


def write_trace(trace: SpectrumTrace, path, **meta) -> None:
    head = {}
    if trace.linewidth_hz is not None:
        head["linewidth_hz"] = repr(float(trace.linewidth_hz))
    if trace.reference_scale is not None:
        head["reference_scale"] = repr(float(trace.reference_scale))
    head.update(meta)
    buf = io.StringIO()
    buf.write(_meta_lines(head))
    buf.write("frequency_hz,re,im\n")
    for f, v in zip(trace.frequency_hz, trace.values):
        buf.write(f"{_num(f)},{_num(v.real)},{_num(v.imag)}\n")
    Path(path).write_text(buf.getvalue())


def read_trace(path) -> SpectrumTrace:
    meta, rows = _split(Path(path).read_text(), path)
    vals = np.array([_floats(r, ["frequency_hz", "re", "im"], path, i) for i, r in enumerate(rows, 1)])
    if vals.size == 0:
        raise FileFormatError(f"{path}: no samples")
    lw = float(meta["linewidth_hz"]) if "linewidth_hz" in meta else None
    ref = float(meta["reference_scale"]) if "reference_scale" in meta else None
    try:
        return SpectrumTrace(vals[:, 0], vals[:, 1] + 1j * vals[:, 2], lw, ref)
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from None


def row_label(row: tuple) -> str:
    k, j, nu, quad = row
    if nu is None:
        j = "+".join(f"{a}.{b}" for a, b in j)
        return f"k{k}:lines{j}:{quad}"
    return f"k{k}:j{j}:nu{nu}:{quad}"


def write_matrix(M, path, **meta) -> None:
    buf = io.StringIO()
    buf.write(_meta_lines(meta))
    buf.write(",".join(["row"] + list(M.col_map)) + "\n")
    for row, vals in zip(M.row_map, M.values):
        buf.write(",".join([row_label(row)] + [_num(v) for v in vals]) + "\n")
    Path(path).write_text(buf.getvalue())


def write_log(history, path, **meta) -> None:
    buf = io.StringIO()
    buf.write(_meta_lines(meta))
    buf.write("generation,best_condition,mean_condition\n")
    for gen, best, mean in history:
        buf.write(f"{int(gen)},{_num(best)},{_num(mean)}\n")
    Path(path).write_text(buf.getvalue())
