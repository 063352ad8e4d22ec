"""Plain-text records: codebooks, plans, quantizer directories and CSVs."""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from . import alloc, quant1d
from .cppq import PoissonQuantizer
from .fquant import DistortionReport, ProductQuantizer

CURVE_HEADER = "N,r,p,estimate,stderr,n_paths"


def fmt(x: float) -> str:
    """Decimal with 17 significant digits (round-trips any double)."""
    return f"{float(x):.17g}"


def _write(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


def _keyed(lines: list[str], key: str) -> str:
    line = lines.pop(0).strip()
    k, sep, v = line.partition("=")
    if not sep or k != key:
        raise ValueError(f"expected '{key}=' record, got {line!r}")
    return v


# -- codebooks and plans -------------------------------------------------------


def codebook_text(cb: quant1d.Codebook1D) -> str:
    censor = "none" if cb.censor is None else fmt(cb.censor)
    return "\n".join([f"r={fmt(cb.r)}", f"censor={censor}"] + [fmt(x) for x in cb.points]) + "\n"


def parse_codebook(text: str) -> quant1d.Codebook1D:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    r = float(_keyed(lines, "r"))
    c = _keyed(lines, "censor")
    censor = None if c == "none" else float(c)
    return quant1d.Codebook1D(np.array([float(x) for x in lines]), r, censor=censor)


def write_codebook(cb: quant1d.Codebook1D, path) -> Path:
    return _write(path, codebook_text(cb))


def read_codebook(path) -> quant1d.Codebook1D:
    return parse_codebook(Path(path).read_text())


def plan_text(plan: alloc.AllocationPlan) -> str:
    return "\n".join([f"N={plan.N}", f"m={plan.depth}"] + [str(s) for s in plan.sizes]) + "\n"


def parse_plan(text: str, p: float = 1.0) -> alloc.AllocationPlan:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    N = int(_keyed(lines, "N"))
    m = int(_keyed(lines, "m"))
    if len(lines) != m:
        raise ValueError(f"plan declares m={m} but lists {len(lines)} sizes")
    return alloc.AllocationPlan(tuple(int(s) for s in lines), N, p)


# -- quantizer directories -----------------------------------------------------


def _meta_text(items: dict) -> str:
    return "".join(f"{k}={v}\n" for k, v in items.items())


def _parse_meta(text: str) -> dict:
    return dict(ln.split("=", 1) for ln in text.splitlines() if ln.strip())


def save_product_quantizer(q: ProductQuantizer, directory) -> list[Path]:
    d = Path(directory)
    out = [
        _write(d / "meta", _meta_text({"kind": "haar-product", "T": fmt(q.T), "r": fmt(q.r)})),
        _write(d / "plan", plan_text(q.plan)),
    ]
    out += [write_codebook(cb, d / "books" / f"{j}.book") for j, cb in enumerate(q.codebooks)]
    return out


def load_product_quantizer(directory) -> ProductQuantizer:
    d = Path(directory)
    meta = _parse_meta((d / "meta").read_text())
    plan = parse_plan((d / "plan").read_text())
    books = [read_codebook(d / "books" / f"{j}.book") for j in range(plan.depth)]
    return ProductQuantizer(plan, books, float(meta["T"]), float(meta["r"]))


def save_poisson_quantizer(q: PoissonQuantizer, directory) -> list[Path]:
    d = Path(directory)
    meta = {
        "kind": "poisson",
        "lam": fmt(q.lam),
        "T": fmt(q.T),
        "r": fmt(q.r),
        "p": fmt(q.p),
        "delta": fmt(q.delta),
        "N": q.N,
        "N1": q.N1,
        "N2": q.N2,
        "time_depth": q.time_depth,
        "size_depth": len(q.size_books),
        "compound": str(q.is_compound).lower(),
    }
    out = [_write(d / "meta", _meta_text(meta))]
    out += [write_codebook(cb, d / "timeBooks" / f"{n}.book") for n, cb in enumerate(q.time_books, 1)]
    out += [write_codebook(cb, d / "sizeBooks" / f"{n}.book") for n, cb in enumerate(q.size_books, 1)]
    if q.is_compound:
        out.append(write_codebook(q.size_default, d / "sizeBooks" / "default.book"))
    return out


def load_poisson_quantizer(directory) -> PoissonQuantizer:
    d = Path(directory)
    m = _parse_meta((d / "meta").read_text())
    times = [read_codebook(d / "timeBooks" / f"{n}.book") for n in range(1, int(m["time_depth"]) + 1)]
    sizes = [read_codebook(d / "sizeBooks" / f"{n}.book") for n in range(1, int(m["size_depth"]) + 1)]
    default = read_codebook(d / "sizeBooks" / "default.book") if m["compound"] == "true" else None
    return PoissonQuantizer(
        times, sizes, default, float(m["lam"]), float(m["T"]), float(m["r"]), float(m["p"]),
        float(m["delta"]), int(m["N"]), int(m["N1"]), int(m["N2"]),
    )


# -- CSV -----------------------------------------------------------------------


def curve_csv(reports) -> str:
    rows = [CURVE_HEADER]
    rows += [f"{c.N},{c.r:g},{c.p:g},{fmt(c.estimate)},{fmt(c.stderr)},{c.n_paths}" for c in reports]
    return "\n".join(rows) + "\n"


def parse_curve_csv(text: str) -> list[DistortionReport]:
    lines = text.strip().splitlines()
    if lines[0] != CURVE_HEADER:
        raise ValueError(f"unexpected curve header {lines[0]!r}")
    out = []
    for ln in lines[1:]:
        N, r, p, e, s, n = ln.split(",")
        out.append(DistortionReport(int(N), float(r), float(p), float(e), float(s), int(n)))
    return out


def path_csv(times: np.ndarray, values: np.ndarray) -> str:
    return "t,value\n" + "".join(f"{fmt(t)},{fmt(v)}\n" for t, v in zip(times, values))


def git_blob_hash(data: bytes) -> str:
    """Content hash in git's blob format: ``sha1("blob <len>\\0" + data)``."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


