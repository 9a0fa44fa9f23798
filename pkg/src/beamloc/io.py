"""JSON-lines reading and writing for scan datasets.

A file starts with one header object carrying the known parameters, followed
by one object per scan location in order ``k = 0 .. length-1``::

    {"format": "trm-scan", "version": 1, "lambda": 200.0, "sigma_b": 1.0,
     "eta1": 1.0, "eta2": 10.0, "length": 100, "seed": 7}
    {"k": 0, "counts": [1, 2]}
    ...

Conventional scans use ``"format": "conv-scan"`` and ``{"k": 0, "y": 3}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import InvalidParameter
from .sim import ConventionalScan, TRMScan

TRM_FORMAT = "trm-scan"
CONV_FORMAT = "conv-scan"
VERSION = 1


@dataclass(frozen=True)
class ScanHeader:
    format: str
    lam: float
    sigma_b: float
    eta1: float
    eta2: float
    length: int
    seed: int | None = None
    version: int = VERSION

    def to_dict(self) -> dict:
        d = {
            "format": self.format,
            "version": self.version,
            "lambda": self.lam,
            "sigma_b": self.sigma_b,
            "eta1": self.eta1,
            "eta2": self.eta2,
            "length": self.length,
        }
        if self.seed is not None:
            d["seed"] = self.seed
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScanHeader":
        try:
            fmt = d["format"]
            if fmt not in (TRM_FORMAT, CONV_FORMAT):
                raise InvalidParameter(f"unknown dataset format {fmt!r}")
            if d.get("version") != VERSION:
                raise InvalidParameter(f"unsupported {fmt} version {d.get('version')!r}")
            return cls(
                format=fmt,
                lam=float(d["lambda"]),
                sigma_b=float(d["sigma_b"]),
                eta1=float(d["eta1"]),
                eta2=float(d["eta2"]),
                length=int(d["length"]),
                seed=None if d.get("seed") is None else int(d["seed"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidParameter):
                raise
            raise InvalidParameter(f"malformed header: {exc!r}") from exc


def _dump(obj) -> str:
    return json.dumps(obj, separators=(", ", ": "))


def write_scan(path, header: ScanHeader, scan) -> None:
    """Write `scan` (TRM or conventional) under `header` to `path`."""
    if scan.length != header.length:
        raise InvalidParameter("header length does not match the scan")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dump(header.to_dict()) + "\n")
        if isinstance(scan, TRMScan):
            for k, c in enumerate(scan.counts):
                rec = {"k": k, "counts": c.tolist()}
                if scan.times is not None:
                    rec["times"] = scan.times[k].tolist()
                fh.write(_dump(rec) + "\n")
        else:
            for k, y in enumerate(scan.y):
                fh.write(_dump({"k": k, "y": int(y)}) + "\n")


def read_scan(path):
    """Return ``(header, scan)`` from a dataset file.

    Raises `InvalidParameter` on malformed content and `OSError` on I/O failure.
    """
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip()]
    if not lines:
        raise InvalidParameter(f"{path}: empty dataset")
    try:
        recs = [json.loads(ln) for ln in lines]
    except json.JSONDecodeError as exc:
        raise InvalidParameter(f"{path}: invalid JSON ({exc})") from exc
    if not all(isinstance(r, dict) for r in recs):
        raise InvalidParameter(f"{path}: every line must be a JSON object")
    header = ScanHeader.from_dict(recs[0])
    body = recs[1:]
    if len(body) != header.length or [r.get("k") for r in body] != list(range(header.length)):
        raise InvalidParameter(f"{path}: expected locations k = 0 .. {header.length - 1} in order")
    try:
        if header.format == TRM_FORMAT:
            has_times = ["times" in r for r in body]
            if any(has_times) and not all(has_times):
                raise InvalidParameter(f"{path}: times present for only some locations")
            times = [r["times"] for r in body] if all(has_times) and body else None
            return header, TRMScan(tuple(r["counts"] for r in body), times)
        return header, ConventionalScan([r["y"] for r in body])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidParameter):
            raise
        raise InvalidParameter(f"{path}: malformed record ({exc!r})") from exc
