"""Text formats: circuit descriptions, sweep configs, and result tables.

Circuit files are line oriented; ``#`` starts a comment::

    circuit "cyclic"
    split
    attenuate T=0.122
    phase chi1=-0.683 chi2=5.600
    recombine
    reference eta=0          # optional, must be last

Sweep files hold ``key=value`` tokens, any number per line.  Numbers may
carry a ``pi`` suffix (``2pi``, ``-0.2pi``, ``pi``).
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import OrthogonalityError, ParseError
from .fringes import (REF_C, REF_S1, REF_T1, REF_T2, Interferogram, SweepRow)
from .state import (Attenuate, PathState, PhaseDecomposition, PhaseShift, RecombineQ,
                    SplitToQ, dynamical_phase, pancharatnam_phase, run_elements)

_NUMBER = re.compile(r"^([+-]?)((?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)?(pi)?$")
_TOKEN = re.compile(r'"[^"]*"|\S+')

SWEEP_HEADER = ("dchi", "phi_ideal", "phi_damped", "phi_dyn_residual", "phi_geometric",
                "omega", "amplitude")
DECOMPOSITION_HEADER = ("pancharatnam", "dynamical", "geometric", "amplitude")
INTERFEROGRAM_HEADER = ("eta", "counts")
PATH_HEADER = ("segment_index", "kind", "x", "y", "z")


def fmt(x: float) -> str:
    """Nine significant digits; negative zero prints as 0."""
    return f"{float(x) + 0.0:.9g}"


def parse_number(text: str) -> float:
    """Decimal float with optional ``pi`` multiplier suffix; raises ValueError."""
    m = _NUMBER.match(text)
    if not m or (m.group(2) is None and m.group(3) is None):
        raise ValueError(f"invalid number {text!r}")
    sign = -1.0 if m.group(1) == "-" else 1.0
    value = float(m.group(2)) if m.group(2) is not None else 1.0
    if m.group(3):
        value *= math.pi
    return sign * value


def _tokens(line: str):
    """``(column, token)`` pairs with comments stripped; quotes protect ``#``."""
    out = []
    for m in _TOKEN.finditer(line):
        tok = m.group(0)
        if tok.startswith("#"):
            break
        if "#" in tok and not tok.startswith('"'):
            tok = tok[: tok.index("#")]
            out.append((m.start() + 1, tok))
            break
        out.append((m.start() + 1, tok))
    return out


def _kv(tok: str, col: int, lineno: int, line: str) -> tuple[str, str]:
    if "=" not in tok or tok.startswith("=") or tok.endswith("="):
        raise ParseError(f"expected key=value, got {tok!r}", lineno, col, line)
    key, _, value = tok.partition("=")
    return key, value


def _float_arg(value: str, key: str, col: int, lineno: int, line: str) -> float:
    try:
        return parse_number(value)
    except ValueError:
        raise ParseError(f"invalid number for {key}: {value!r}", lineno,
                         col + len(key) + 1, line) from None


# -- circuits ------------------------------------------------------------------

@dataclass
class CircuitSpec:
    name: str
    elements: list
    reference_eta: float | None = None

    @property
    def transmissivity(self) -> float:
        return next((e.T for e in self.elements if isinstance(e, Attenuate)), 1.0)

    @property
    def shifts(self) -> tuple[float, float]:
        ps = next((e for e in self.elements if isinstance(e, PhaseShift)), None)
        return (ps.chi1, ps.chi2) if ps else (0.0, 0.0)


_ELEMENT_ARGS = {"split": (), "attenuate": ("T",), "phase": ("chi1", "chi2"),
                 "recombine": (), "reference": ("eta",)}


def parse_circuit(source: str) -> CircuitSpec:
    lines = source.split("\n")
    name = None
    elements = []
    reference = None
    seen = set()
    last_line = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r")
        toks = _tokens(line)
        if not toks:
            continue
        last_line = lineno
        col, kw = toks[0]
        if name is None:
            if kw != "circuit":
                raise ParseError("missing circuit header", lineno, col, line)
            if len(toks) != 2 or not (toks[1][1].startswith('"') and toks[1][1].endswith('"')
                                      and len(toks[1][1]) >= 2):
                c = toks[1][0] if len(toks) > 1 else len(line) + 1
                raise ParseError('circuit header needs one quoted name', lineno, c, line)
            name = toks[1][1][1:-1]
            continue
        if kw == "circuit":
            raise ParseError("duplicate circuit header", lineno, col, line)
        if kw not in _ELEMENT_ARGS:
            raise ParseError(f"unknown keyword {kw!r}", lineno, col, line)
        if kw in seen:
            raise ParseError(f"duplicate element {kw!r}", lineno, col, line)
        if "reference" in seen:
            raise ParseError("reference must be the last line", lineno, col, line)
        if kw != "split" and kw != "reference" and "split" not in seen:
            raise ParseError(f"{kw!r} before split", lineno, col, line)
        if kw == "split" and seen:
            raise ParseError("split must be the first element", lineno, col, line)
        if kw in ("split", "attenuate", "phase") and "recombine" in seen:
            raise ParseError(f"{kw!r} after recombine", lineno, col, line)
        if kw == "reference" and "recombine" not in seen:
            raise ParseError("reference must follow recombine", lineno, col, line)

        wanted = _ELEMENT_ARGS[kw]
        args = {}
        for c, tok in toks[1:]:
            key, value = _kv(tok, c, lineno, line)
            if key not in wanted:
                raise ParseError(f"unexpected argument {key!r} for {kw}", lineno, c, line)
            if key in args:
                raise ParseError(f"duplicate argument {key!r}", lineno, c, line)
            args[key] = (_float_arg(value, key, c, lineno, line), c)
        for key in wanted:
            if key not in args:
                raise ParseError(f"{kw} requires {key}=<float>", lineno, len(line) + 1, line)
        seen.add(kw)

        if kw == "split":
            elements.append(SplitToQ())
        elif kw == "attenuate":
            T, c = args["T"]
            if not 0.0 <= T <= 1.0:
                raise ParseError("T out of range [0,1]", lineno, c, line)
            elements.append(Attenuate(T))
        elif kw == "phase":
            elements.append(PhaseShift(args["chi1"][0], args["chi2"][0]))
        elif kw == "recombine":
            elements.append(RecombineQ())
        else:
            reference = args["eta"][0]

    end_line = last_line + 1
    if name is None:
        raise ParseError("missing circuit header", 1, 1, lines[0] if lines else "")
    for required in ("split", "recombine"):
        if required not in seen:
            raise ParseError(f"missing required element {required!r}", end_line, 1, "")
    return CircuitSpec(name, elements, reference)


def render_circuit(spec: CircuitSpec) -> str:
    out = [f'circuit "{spec.name}"']
    for e in spec.elements:
        if isinstance(e, SplitToQ):
            out.append("split")
        elif isinstance(e, Attenuate):
            out.append(f"attenuate T={fmt(e.T)}")
        elif isinstance(e, PhaseShift):
            out.append(f"phase chi1={fmt(e.chi1)} chi2={fmt(e.chi2)}")
        elif isinstance(e, RecombineQ):
            out.append("recombine")
    if spec.reference_eta is not None:
        out.append(f"reference eta={fmt(spec.reference_eta)}")
    return "\n".join(out) + "\n"


def simulate_circuit(spec: CircuitSpec) -> PhaseDecomposition:
    """Run ``|p>`` through the elements and read the phase against ``|q>``."""
    final = run_elements(PathState.p(), spec.elements)
    q = PathState.q()
    overlap = q.a_perp.conjugate() * final.a_perp + q.a_p.conjugate() * final.a_p
    phi = pancharatnam_phase(final, q)
    chi1, chi2 = spec.shifts
    phi_d = dynamical_phase(spec.transmissivity, chi1, chi2)
    return PhaseDecomposition(phi, phi_d, phi - phi_d, abs(overlap))


def circuit_interferogram(spec: CircuitSpec, eta_steps: int,
                          mean_counts: float = 1000.0) -> Interferogram:
    """Detector intensity ``|psi_t' + e^{i eta} psi_r'|^2`` over two periods of eta.

    The reference beam is ``|p_perp>`` projected by the recombining element;
    the scan starts at the circuit's reference eta.
    """
    final = run_elements(PathState.p(), spec.elements).as_array()
    ref = run_elements(PathState.p_perp(), [RecombineQ()]).as_array()
    if np.linalg.norm(final) < 1e-12:
        raise OrthogonalityError("second-loop beam vanishes after recombination")
    start = spec.reference_eta or 0.0
    eta = start + np.linspace(0.0, 4.0 * math.pi, int(eta_steps), endpoint=False)
    field_ = final[None, :] + np.exp(1j * eta)[:, None] * ref[None, :]
    intensity = np.sum(np.abs(field_) ** 2, axis=1)
    mean = np.sum(np.abs(final) ** 2) + np.sum(np.abs(ref) ** 2)
    return Interferogram(eta, mean_counts * intensity / mean,
                         {"circuit": spec.name, "mean_counts": mean_counts})


# -- sweep configs -------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    dchi_from: float = -0.2 * math.pi
    dchi_to: float = 3.0 * math.pi
    steps: int = 160
    T1: float = REF_T1
    T2: float = REF_T2
    s1: float = REF_S1
    s2: float = field(default=1.0 - REF_S1)
    C: float = REF_C
    compensated: bool = True
    output_path: str = "-"


_SWEEP_KEYS = {"dchi_from": "dchi_from", "dchi_to": "dchi_to", "steps": "steps",
               "T1": "T1", "T2": "T2", "s1": "s1", "s2": "s2", "C": "C",
               "compensated": "compensated", "output": "output_path"}
_BOOLS = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def parse_sweep(source: str, base: SweepConfig | None = None) -> SweepConfig:
    """Parse ``key=value`` tokens; missing keys come from ``base`` (reference defaults)."""
    base = base or SweepConfig()
    values = {}
    where = {}
    last = (1, 1, "")
    for lineno, raw in enumerate(source.split("\n"), start=1):
        line = raw.rstrip("\r")
        for col, tok in _tokens(line):
            key, value = _kv(tok, col, lineno, line)
            if key not in _SWEEP_KEYS:
                raise ParseError(f"unknown key {key!r}", lineno, col, line)
            if key in values:
                raise ParseError(f"duplicate key {key!r}", lineno, col, line)
            vcol = col + len(key) + 1
            if key == "steps":
                if not re.fullmatch(r"[+-]?\d+", value):
                    raise ParseError(f"steps must be an integer, got {value!r}", lineno, vcol, line)
                values[key] = int(value)
            elif key == "compensated":
                if value.lower() not in _BOOLS:
                    raise ParseError(f"compensated must be true/false, got {value!r}",
                                     lineno, vcol, line)
                values[key] = _BOOLS[value.lower()]
            elif key == "output":
                values[key] = value
            else:
                values[key] = _float_arg(value, key, col, lineno, line)
            where[key] = (lineno, vcol, line)
            last = (lineno, col, line)

    def err(msg, key=None):
        return ParseError(msg, *(where.get(key) or last))

    if "s1" in values and "s2" not in values:
        values["s2"] = 1.0 - values["s1"]
    elif "s2" in values and "s1" not in values:
        values["s1"] = 1.0 - values["s2"]
    cfg = replace(base, **{_SWEEP_KEYS[k]: v for k, v in values.items()})

    if cfg.steps < 2:
        raise err("steps must be >= 2", "steps")
    if not cfg.dchi_from < cfg.dchi_to:
        raise err("dchi_from must be < dchi_to", "dchi_to")
    for key in ("T1", "T2"):
        T = getattr(cfg, key)
        if not 0.0 < T <= 1.0:
            raise err(f"{key} out of range (0,1]", key)
    if cfg.T2 > cfg.T1:
        raise err("T2/T1 must not exceed 1", "T2")
    if not 0.0 <= cfg.C <= 1.0:
        raise err("C out of range [0,1]", "C")
    if abs(cfg.s1 + cfg.s2 - 1.0) > 1e-9:
        raise err("s1+s2 must equal 1", "s2" if "s2" in where else "s1")
    return cfg


def render_sweep(cfg: SweepConfig) -> str:
    inv = {v: k for k, v in _SWEEP_KEYS.items()}
    out = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            text = "true" if v else "false"
        elif isinstance(v, int) or isinstance(v, str):
            text = str(v)
        else:
            text = fmt(v)
        out.append(f"{inv[f.name]}={text}")
    return "\n".join(out) + "\n"


# -- result emission -----------------------------------------------------------

def _table(rows) -> tuple[tuple[str, ...], list[tuple], bool]:
    """Header, value tuples and whether a single JSON object is wanted."""
    if isinstance(rows, PhaseDecomposition):
        return DECOMPOSITION_HEADER, [tuple(rows.as_dict().values())], True
    if isinstance(rows, Interferogram):
        return INTERFEROGRAM_HEADER, list(zip(rows.eta_values, rows.counts)), False
    rows = list(rows)
    if not rows:
        raise ValueError("nothing to emit: rows are empty")
    first = rows[0]
    if isinstance(first, SweepRow):
        return SWEEP_HEADER, [tuple(r.as_dict().values()) for r in rows], False
    if isinstance(first, PhaseDecomposition):
        return DECOMPOSITION_HEADER, [tuple(r.as_dict().values()) for r in rows], False
    if isinstance(first, Interferogram):
        data = [pair for ig in rows for pair in zip(ig.eta_values, ig.counts)]
        return INTERFEROGRAM_HEADER, data, False
    raise TypeError(f"cannot emit rows of type {type(first).__name__}")


def format_results(rows, format: str = "csv") -> str:
    header, data, single = _table(rows)
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for r in data:
            writer.writerow([fmt(x) for x in r])
        return buf.getvalue()
    if format == "json":
        objs = [{k: float(fmt(x)) for k, x in zip(header, r)} for r in data]
        return json.dumps(objs[0] if single else objs) + "\n"
    raise ValueError(f"unknown format {format!r}")


def emit_results(rows, format: str = "csv", destination="-") -> None:
    """Write ``rows`` as CSV or JSON to a path, an open text stream, or ``-`` (stdout)."""
    text = format_results(rows, format)
    if destination in ("-", None):
        sys.stdout.write(text)
        return
    if hasattr(destination, "write"):
        destination.write(text)
        return
    path = Path(destination)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def path_to_csv(path) -> str:
    """Discretized Bloch path as ``segment_index,kind,x,y,z`` rows."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PATH_HEADER)
    for k, kind, x, y, z in path.labelled_points():
        writer.writerow([k, kind, fmt(x), fmt(y), fmt(z)])
    return buf.getvalue()


# -- CSV input -----------------------------------------------------------------

def _read_columns(text: str, header: tuple[str, ...]) -> list[tuple[float, ...]]:
    lines = text.split("\n")
    rows = list(csv.reader(lines))
    got = tuple(c.strip() for c in rows[0]) if rows and rows[0] else ()
    if got != header:
        raise ParseError(f"expected header {','.join(header)}", 1, 1, lines[0] if lines else "")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} columns", lineno, 1, lines[lineno - 1])
        vals = []
        col = 1
        for cell in row:
            try:
                v = parse_number(cell.strip())
            except ValueError:
                raise ParseError(f"invalid number {cell.strip()!r}", lineno, col,
                                 lines[lineno - 1]) from None
            vals.append(v)
            col += len(cell) + 1
        out.append(tuple(vals))
    return out


def read_phase_points(text: str) -> list[tuple[float, float]]:
    return _read_columns(text, ("dchi", "phase"))


def read_interferogram(text: str) -> Interferogram:
    rows = _read_columns(text, INTERFEROGRAM_HEADER)
    if not rows:
        raise ParseError("no data rows", 2, 1, "")
    eta, counts = zip(*rows)
    return Interferogram(np.array(eta), np.array(counts))
