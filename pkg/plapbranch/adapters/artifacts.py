"""Result files: branch CSV, JSON reports, SVG branch diagrams, manifests, mesh dumps.

All writers are deterministic: fixed column order, 12 significant digits,
sorted JSON keys and fixed SVG coordinates, so identical runs give identical
bytes. Each artifact carries the hash of the run manifest.
"""

import csv
import io
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from plapbranch.models.domain import DomainSpec
from plapbranch.models.errors import ValidationError
from plapbranch.models.results import Branch, RunManifest
from plapbranch.numerics.mesh import TriMesh, mesh_from_arrays

logger = logging.getLogger("plapbranch.artifacts")

CSV_COLUMNS = ("label", "p", "a", "n", "lambda", "iters", "residual", "converged")
SVG_PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
)


def fmt(value: float) -> str:
    """12 significant digits, locale independent."""
    return f"{float(value):.12g}"


def _ensure_parent(path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def branches_csv(branches: Iterable[Branch], manifest: RunManifest) -> str:
    """CSV text for the samples of every branch, in the given order."""
    buffer = io.StringIO()
    buffer.write(f"# manifest: {manifest.digest}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for branch in branches:
        for s in branch.samples:
            writer.writerow(
                [
                    branch.label,
                    fmt(s.p),
                    fmt(branch.a),
                    s.n,
                    fmt(s.lambda_),
                    s.iterations,
                    fmt(s.residual),
                    "true" if s.converged else "false",
                ]
            )
    return buffer.getvalue()


def write_branches_csv(path: Path, branches: Iterable[Branch], manifest: RunManifest) -> Path:
    path = _ensure_parent(path)
    path.write_text(branches_csv(branches, manifest), encoding="utf-8")
    logger.info("Wrote %s", path)
    return path


def read_branches_csv(path: Path) -> Tuple[str, List[Dict[str, str]]]:
    """Manifest hash and data rows of a branch CSV."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# manifest: "):
        raise ValidationError(f"{path} has no manifest line", field="path")
    digest = lines[0][len("# manifest: ") :].strip()
    rows = list(csv.DictReader(lines[1:]))
    return digest, rows


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    return value


def json_text(payload: Dict[str, Any], manifest: Optional[RunManifest] = None) -> str:
    data = dict(payload)
    if manifest is not None:
        data["manifest"] = manifest.digest
    return json.dumps(_jsonable(data), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(
    path: Path, payload: Dict[str, Any], manifest: Optional[RunManifest] = None
) -> Path:
    path = _ensure_parent(path)
    path.write_text(json_text(payload, manifest), encoding="utf-8")
    logger.info("Wrote %s", path)
    return path


def manifest_path(artifact: Path) -> Path:
    """Sidecar location: ``<name>.manifest.json`` next to the artifact."""
    artifact = Path(artifact)
    return artifact.with_name(artifact.stem + ".manifest.json")


def write_manifest(artifact: Path, manifest: RunManifest) -> Path:
    payload = {"hash": manifest.digest, **manifest.model_dump(mode="json")}
    return write_json(manifest_path(artifact), payload)


def _nice_ticks(lo: float, hi: float, count: int = 5) -> List[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(count - 1, 1)
    magnitude = 10 ** math.floor(math.log10(raw))
    step = min((m * magnitude for m in (1, 2, 2.5, 5, 10) if m * magnitude >= raw))
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def branch_diagram_svg(
    branches: Sequence[Branch],
    manifest: RunManifest,
    title: str = "",
    width: int = 720,
    height: int = 480,
) -> str:
    """SVG 1.1 with one polyline per branch (a marker for single samples)."""
    points = [(s.p, s.lambda_) for b in branches for s in b.samples]
    if not points:
        raise ValidationError("Nothing to plot", field="branches")
    ps = [p for p, _ in points]
    ls = [v for _, v in points]
    p_lo, p_hi = min(ps), max(ps)
    l_lo, l_hi = min(ls), max(ls)
    if p_hi == p_lo:
        p_lo, p_hi = p_lo - 0.5, p_hi + 0.5
    pad = 0.05 * (l_hi - l_lo) if l_hi > l_lo else 0.5
    l_lo, l_hi = l_lo - pad, l_hi + pad

    left, right, top, bottom = 70, 170, 40, 50
    plot_w = width - left - right
    plot_h = height - top - bottom

    def sx(p: float) -> float:
        return left + (p - p_lo) / (p_hi - p_lo) * plot_w

    def sy(v: float) -> float:
        return top + (l_hi - v) / (l_hi - l_lo) * plot_h

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f"<!-- manifest: {manifest.digest} -->",
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" '
        'stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>',
    ]
    for t in _nice_ticks(p_lo, p_hi):
        if p_lo - 1e-12 <= t <= p_hi + 1e-12:
            x = sx(t)
            out.append(
                f'<line x1="{x:.3f}" y1="{top + plot_h}" x2="{x:.3f}" '
                f'y2="{top + plot_h + 5}" stroke="black"/>'
            )
            out.append(
                f'<text x="{x:.3f}" y="{top + plot_h + 20}" font-size="12" '
                f'text-anchor="middle">{t:g}</text>'
            )
    for t in _nice_ticks(l_lo, l_hi):
        if l_lo - 1e-12 <= t <= l_hi + 1e-12:
            y = sy(t)
            out.append(
                f'<line x1="{left - 5}" y1="{y:.3f}" x2="{left}" y2="{y:.3f}" stroke="black"/>'
            )
            out.append(
                f'<text x="{left - 8}" y="{y + 4:.3f}" font-size="12" '
                f'text-anchor="end">{t:g}</text>'
            )
    out.append(
        f'<text x="{left + plot_w / 2:.3f}" y="{height - 10}" font-size="13" '
        'text-anchor="middle">p</text>'
    )
    out.append(
        f'<text x="15" y="{top + plot_h / 2:.3f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 15 {top + plot_h / 2:.3f})">lambda</text>'
    )
    if title:
        out.append(
            f'<text x="{left + plot_w / 2:.3f}" y="{top - 15}" font-size="14" '
            f'text-anchor="middle">{_escape(title)}</text>'
        )

    for k, branch in enumerate(branches):
        color = SVG_PALETTE[k % len(SVG_PALETTE)]
        coords = [(sx(s.p), sy(s.lambda_)) for s in branch.samples]
        if len(coords) == 1:
            x, y = coords[0]
            out.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="4" fill="{color}"/>')
        elif coords:
            pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in coords)
            out.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>'
            )
        ly = top + 20 * k + 10
        lx = left + plot_w + 15
        out.append(
            f'<line x1="{lx}" y1="{ly}" x2="{lx + 25}" y2="{ly}" stroke="{color}" '
            'stroke-width="2"/>'
        )
        out.append(
            f'<text x="{lx + 32}" y="{ly + 4}" font-size="12">{_escape(branch.label)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_branch_diagram(
    path: Path,
    branches: Sequence[Branch],
    manifest: RunManifest,
    title: str = "",
) -> Tuple[Path, Path]:
    """SVG diagram plus its CSV sidecar (same stem, ``.csv``)."""
    path = _ensure_parent(path)
    path.write_text(branch_diagram_svg(branches, manifest, title), encoding="utf-8")
    sidecar = write_branches_csv(path.with_suffix(".csv"), branches, manifest)
    logger.info("Wrote %s", path)
    return path, sidecar


def write_mesh_dump(path: Path, m: TriMesh) -> Path:
    """Plain-text dump: header comments, ``v x y dirichlet`` rows, ``t i j k`` rows.

    Masked meshes add one ``d k v1 v2 ...`` row per disk with its free vertices.
    """
    path = _ensure_parent(path)
    lines = [
        f"# domain: {m.domain.model_dump_json()}",
        f"# n: {m.n}",
        f"# h: {m.h!r}",
        f"# scale: {m.scale!r}",
    ]
    for (x, y), flag in zip(m.vertices.tolist(), m.dirichlet.tolist()):
        lines.append(f"v {x!r} {y!r} {int(flag)}")
    for i, j, k in m.triangles.tolist():
        lines.append(f"t {i} {j} {k}")
    for k, verts in enumerate(m.disk_vertices):
        lines.append(" ".join(["d", str(k), *map(str, verts.tolist())]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_mesh_dump(path: Path) -> TriMesh:
    """Inverse of ``write_mesh_dump``."""
    header: Dict[str, str] = {}
    vertices: List[Tuple[float, float]] = []
    flags: List[bool] = []
    triangles: List[Tuple[int, int, int]] = []
    disks: Dict[int, List[int]] = {}
    for number, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            header[key.strip()] = value.strip()
            continue
        parts = line.split()
        try:
            if parts[0] == "v" and len(parts) == 4:
                vertices.append((float(parts[1]), float(parts[2])))
                flags.append(parts[3] == "1")
            elif parts[0] == "t" and len(parts) == 4:
                triangles.append((int(parts[1]), int(parts[2]), int(parts[3])))
            elif parts[0] == "d" and len(parts) >= 2:
                disks[int(parts[1])] = [int(v) for v in parts[2:]]
            else:
                raise ValueError(line)
        except ValueError:
            raise ValidationError(
                f"{path}:{number}: cannot parse {line!r}", field="path"
            ) from None
    missing = {"domain", "n", "h"} - header.keys()
    if missing:
        raise ValidationError(f"{path}: missing header fields {sorted(missing)}", field="path")
    return mesh_from_arrays(
        np.array(vertices),
        np.array(triangles),
        np.array(flags),
        DomainSpec.model_validate_json(header["domain"]),
        int(header["n"]),
        float(header["h"]),
        float(header.get("scale", "1.0")),
        [np.array(disks[k], dtype=np.int64) for k in sorted(disks)],
    )
