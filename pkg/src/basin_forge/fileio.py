"""Artifact formats: region rasters, constructed maps, basin charts, images, config files."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .dynamics import BasinChart, ConstructedMap, VerificationReport
from .model import ModelFamily
from .polyrat import PoleSumRational
from .sphere import MobiusTransform, RegionSet


def _num(x) -> str:
    return f"{float(x):.17g}"


def _read_header(data: bytes, magic: str, fields: int):
    end = data.find(b"\n")
    if end < 0:
        raise ValueError(f"missing {magic} header line")
    head = data[:end].decode("ascii").split()
    if len(head) != fields + 1 or head[0] != magic:
        raise ValueError(f"bad {magic} header {data[:end]!r}")
    return head[1:], data[end + 1:]


# ---------------------------------------------------------------------------
# RGNS region rasters


def write_regions(path, regions: RegionSet) -> None:
    n = regions.resolution
    head = f"RGNS {regions.d} {n} {_num(regions.chart_radius)}\n".encode("ascii")
    Path(path).write_bytes(head + np.ascontiguousarray(regions.labels, dtype=np.uint8).tobytes())


def read_regions(path) -> RegionSet:
    (d, n, radius), body = _read_header(Path(path).read_bytes(), "RGNS", 3)
    d, n = int(d), int(n)
    if len(body) != n * n:
        raise ValueError(f"RGNS body has {len(body)} bytes, expected {n * n}")
    lab = np.frombuffer(body, dtype=np.uint8).reshape(n, n).copy()
    if lab.max(initial=0) > d:
        raise ValueError(f"label {lab.max()} exceeds d = {d}")
    return RegionSet(lab, float(radius), d)


# ---------------------------------------------------------------------------
# SMAP constructed maps
#
# Besides the CERT lines, OWNERS (region label of each trap) and TRANSFORM
# (coordinate change of the input) are written so that a reloaded map
# classifies exactly like the original.


def write_map(path, m: ConstructedMap) -> None:
    r = m.rational
    if r is None:
        raise ValueError("the identity surrogate has no file form")
    e = complex(m.eta)
    a = r.anchor
    lines = [
        f"SMAP {m.model.d} {_num(m.model.lam)} {_num(m.model.delta)} {_num(e.real)} {_num(e.imag)} "
        f"{m.n} {_num(a.real)} {_num(a.imag)} {r.size}"
    ]
    for p, c in zip(r.poles, r.residues):
        lines.append(f"{_num(p.real)} {_num(p.imag)} {_num(c.real)} {_num(c.imag)}")
    certs = m.certs
    lines.append(f"CERT contraction {_num(certs.get('contraction', m.model.contraction))}")
    lines.append(f"CERT runge {_num(certs.get('runge', np.nan))}")
    steps = certs.get("cv", ())
    lines.append("CERT cv" + "".join(f" {int(s)}" for s in steps))
    lines.append("OWNERS " + " ".join(str(o) for o in m.owners))
    lines.append("TRANSFORM " + m.transform.serialize())
    Path(path).write_text("\n".join(lines) + "\n")


def read_map(path) -> ConstructedMap:
    lines = Path(path).read_text().splitlines()
    head = lines[0].split()
    if len(head) != 10 or head[0] != "SMAP":
        raise ValueError(f"bad SMAP header {lines[0]!r}")
    d, lam, delta = int(head[1]), float(head[2]), float(head[3])
    eta = complex(float(head[4]), float(head[5]))
    n = int(head[6])
    anchor = complex(float(head[7]), float(head[8]))
    count = int(head[9])
    if len(lines) < 1 + count:
        raise ValueError("SMAP file is truncated")
    rows = np.array([[float(x) for x in ln.split()] for ln in lines[1:1 + count]]).reshape(count, 4)
    poles = rows[:, 0] + 1j * rows[:, 1]
    res = rows[:, 2] + 1j * rows[:, 3]
    certs, owners, transform = {}, (), MobiusTransform()
    for ln in lines[1 + count:]:
        key, _, rest = ln.partition(" ")
        if key == "CERT":
            name, _, val = rest.partition(" ")
            if name == "cv":
                certs["cv"] = [int(s) for s in val.split()]
            else:
                certs[name] = float(val)
        elif key == "OWNERS":
            owners = tuple(int(s) for s in rest.split())
        elif key == "TRANSFORM":
            transform = MobiusTransform.parse(rest)
    model = ModelFamily(d, lam, delta, certs.get("contraction", np.nan))
    return ConstructedMap(model, PoleSumRational(anchor, poles, res), eta, n, owners, transform, certs)


# ---------------------------------------------------------------------------
# BCHT basin charts


def write_chart(path, chart: BasinChart) -> None:
    n = chart.resolution
    head = f"BCHT {chart.d} {n} {_num(chart.chart_radius)}\n".encode("ascii")
    lab = np.ascontiguousarray(chart.labels, dtype=np.uint8).tobytes()
    cnt = np.ascontiguousarray(chart.counts, dtype="<u2").tobytes()
    Path(path).write_bytes(head + lab + cnt)


def read_chart(path) -> BasinChart:
    (d, n, radius), body = _read_header(Path(path).read_bytes(), "BCHT", 3)
    d, n = int(d), int(n)
    if len(body) != 3 * n * n:
        raise ValueError(f"BCHT body has {len(body)} bytes, expected {3 * n * n}")
    lab = np.frombuffer(body[:n * n], dtype=np.uint8).reshape(n, n).copy()
    cnt = np.frombuffer(body[n * n:], dtype="<u2").reshape(n, n).astype(np.uint16)
    return BasinChart(lab, cnt, float(radius), d)


# ---------------------------------------------------------------------------
# reports


def write_report(path, report: VerificationReport) -> None:
    Path(path).write_text(report.to_text())


def read_report(path) -> VerificationReport:
    return VerificationReport.from_text(Path(path).read_text())


# ---------------------------------------------------------------------------
# images
#
# Basin palette: label 0 (boundary / not converged) is black, labels 1..8
# take the colours below in order, higher labels cycle through them.

PALETTE = np.array(
    [
        (0, 0, 0),
        (230, 57, 70),  # 1 red
        (69, 123, 157),  # 2 blue
        (244, 211, 94),  # 3 yellow
        (42, 157, 143),  # 4 teal
        (155, 93, 229),  # 5 violet
        (241, 143, 1),  # 6 orange
        (131, 197, 190),  # 7 pale green
        (237, 237, 233),  # 8 off-white
    ],
    dtype=np.uint8,
)


def palette_rgb(labels: np.ndarray) -> np.ndarray:
    lab = np.asarray(labels, dtype=np.int64)
    idx = np.where(lab == 0, 0, (lab - 1) % (len(PALETTE) - 1) + 1)
    return PALETTE[idx]


def write_ppm(path, labels: np.ndarray) -> None:
    """Basin image, P6.  Row 0 of the chart is the bottom (most negative
    imaginary part), so rows are flipped to put north at the top."""
    rgb = palette_rgb(labels)[::-1]
    h, w = rgb.shape[:2]
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(rgb).tobytes())


def count_gray(counts: np.ndarray) -> np.ndarray:
    """Log-scaled iteration counts in 0..255, brightest at the largest count."""
    c = np.asarray(counts, dtype=np.float64)
    top = c.max(initial=0)
    if top <= 0:
        return np.zeros(c.shape, dtype=np.uint8)
    return np.round(255 * np.log1p(c) / np.log1p(top)).astype(np.uint8)


def write_pgm(path, counts: np.ndarray) -> None:
    g = count_gray(counts)[::-1]
    h, w = g.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(g).tobytes())


def read_pnm(path):
    """(magic, pixel array) for the binary P5/P6 files written above."""
    data = Path(path).read_bytes()
    # the header is three newline-terminated lines as written by this module
    lines = data.split(b"\n", 3)
    magic = lines[0].decode()
    w, h = (int(s) for s in lines[1].split())
    if int(lines[2]) != 255 or magic not in ("P5", "P6"):
        raise ValueError("only 8-bit P5/P6 is supported")
    body = lines[3]
    shape = (h, w, 3) if magic == "P6" else (h, w)
    return magic, np.frombuffer(body, dtype=np.uint8).reshape(shape)


# ---------------------------------------------------------------------------
# flat key = value config files


def read_config(path) -> dict:
    out = {}
    for num, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{num}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out
