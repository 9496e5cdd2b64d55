"""The closed-form and printed-series catalog.

The data lives in ``data/catalog.txt`` (override with ``LAMBDA_EXT_CATALOG``).
Closed forms are expanded on demand; printed series are returned verbatim
and never extended past what was printed.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

from ._backend import Q, ZERO, to_q
from .series import ParamPoly, PrefactoredSeries, Series, parse_poly
from .special import (AlgExpr, Const, EllipticE, EllipticK, OneMinusT, Power, Product, Sum, VarT,
                      eval_alg_expr, parse_expr)

KINDS = ("ek_polynomial", "alg_expr", "reference_series", "valuation_law", "metadata")

DEFAULT_REGIME = {"temperature": "low", "nu_condition": "ν = −k", "t_def": "t = k²"}


class CatalogError(ValueError):
    """Malformed catalog text."""


class UnknownEntry(KeyError):
    def __str__(self):
        return f"unknown catalog id {self.args[0]!r}"


class OrderBeyondPrinted(ValueError):
    """A printed series was asked for more terms than were printed; use the solver."""


@dataclass(frozen=True)
class EKPolynomial:
    """``c t^a (1-t)^b sum_ij p_ij(t) E^i K^j``."""

    terms: tuple  # ((i, j, (p0, p1, ...)), ...)
    prefactor: tuple = (0, 0, 1)

    def is_homogeneous(self) -> bool:
        return len({i + j for i, j, _ in self.terms}) <= 1

    def to_expr(self) -> AlgExpr:
        parts = []
        for i, j, poly in self.terms:
            factors: list = [_tpoly_expr(poly)]
            factors += [EllipticE()] * i + [EllipticK()] * j
            parts.append(Product(factors))
        a, b, c = self.prefactor
        out: list = [Const(c), Sum(parts)]
        if a:
            out.append(Power(VarT(), a))
        if b:
            out.append(Power(OneMinusT(), b))
        return Product(out)


def _tpoly_expr(poly) -> AlgExpr:
    terms = []
    for k, c in enumerate(poly):
        if c:
            terms.append(Const(c) if k == 0 else Product([Const(c), Power(VarT(), k)]))
    return Sum(terms) if terms else Const(0)


@dataclass
class CatalogEntry:
    id: str
    kind: str
    parameter: str | None
    payload: object
    regime: dict = field(default_factory=lambda: dict(DEFAULT_REGIME))
    flags: list = field(default_factory=list)
    tags: dict = field(default_factory=dict)  # order -> equation tag (reference series)

    @property
    def printed_order(self) -> int | None:
        if self.kind != "reference_series":
            return None
        return max(self.payload) if self.payload else -1


_HEADER_RE = re.compile(r"^(\S+)\s*\|\s*(\S+)\s*\|\s*(\S+)\s*\|\s*(.*)$")
_EK_RE = re.compile(r"^E\^(\d+)\s+K\^(\d+)\s*:\s*(.+)$")
_REF_RE = re.compile(r"^t\^(\d+)\s*:\s*(.+?)(?:\s+@(\S+))?$")


def _parse_ek(header: str, lines: list[str], eid: str) -> EKPolynomial:
    bits = header.split()
    if len(bits) != 4 or bits[0] != "prefactor":
        raise CatalogError(f"{eid}: ek payload must read 'prefactor a b c'")
    pref = tuple(to_q(x) for x in bits[1:])
    terms = []
    for ln in lines:
        m = _EK_RE.match(ln)
        if not m:
            raise CatalogError(f"{eid}: bad EK line {ln!r}")
        poly = tuple(to_q(x.strip()) for x in m.group(3).split(","))
        terms.append((int(m.group(1)), int(m.group(2)), poly))
    if not terms:
        raise CatalogError(f"{eid}: empty EK polynomial")
    return EKPolynomial(tuple(terms), pref)


def parse_catalog(text: str) -> dict[str, CatalogEntry]:
    entries: dict[str, CatalogEntry] = {}
    regime = dict(DEFAULT_REGIME)
    records: list[list] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        if raw[0].isspace():
            if not records:
                raise CatalogError(f"line {lineno}: continuation before any record")
            records[-1][1].append(raw.strip())
            continue
        m = _HEADER_RE.match(raw)
        if not m:
            raise CatalogError(f"line {lineno}: expected 'id | kind | parameter | payload'")
        records.append([m.groups(), []])

    for (eid, kind, param, payload), lines in records:
        if kind not in KINDS:
            raise CatalogError(f"{eid}: unknown kind {kind!r}")
        if eid in entries:
            raise CatalogError(f"duplicate id {eid!r}")
        flags = [ln[5:].strip() for ln in lines if ln.startswith("flag:")]
        lines = [ln for ln in lines if not ln.startswith("flag:")]
        param = None if param == "-" else param
        if kind == "metadata":
            regime = dict(kv.split("=", 1) for kv in (p.strip() for p in payload.split(";")) if kv)
            continue
        tags: dict = {}
        if kind == "ek_polynomial":
            body = _parse_ek(payload, lines, eid)
        elif kind == "alg_expr":
            body = parse_expr(payload)
        elif kind == "valuation_law":
            applies = []
            for ln in lines:
                if ln.startswith("applies"):
                    applies = [int(x) for x in ln.split(":", 1)[1].split(",")]
            body = (payload.strip(), tuple(applies))
        else:
            body = {}
            for ln in lines:
                mm = _REF_RE.match(ln)
                if not mm:
                    raise CatalogError(f"{eid}: bad series line {ln!r}")
                n = int(mm.group(1))
                try:
                    coeffs, var = parse_poly(mm.group(2), param)
                except ValueError as exc:
                    raise CatalogError(f"{eid}: {exc}") from None
                if var is not None and var != param:
                    raise CatalogError(f"{eid}: coefficient uses {var!r}, entry declares {param!r}")
                body[n] = coeffs
                if mm.group(3):
                    tags[n] = mm.group(3)
            if sorted(body) != list(range(len(body))):
                raise CatalogError(f"{eid}: printed orders must run 0, 1, 2, ... without gaps")
        entries[eid] = CatalogEntry(eid, kind, param, body, dict(regime), flags, tags)
    return entries


class Catalog:
    def __init__(self, entries: dict[str, CatalogEntry], source: str = "<memory>"):
        self.entries = entries
        self.source = source

    @classmethod
    def from_text(cls, text: str, source: str = "<memory>") -> "Catalog":
        return cls(parse_catalog(text), source)

    @classmethod
    def load(cls, path: str | os.PathLike | None = None) -> "Catalog":
        path = path or os.environ.get("LAMBDA_EXT_CATALOG")
        if path:
            return cls.from_text(Path(path).read_text(encoding="utf-8"), str(path))
        text = resources.files("lambda_ext").joinpath("data/catalog.txt").read_text(encoding="utf-8")
        return cls.from_text(text, "lambda_ext/data/catalog.txt")

    def __contains__(self, eid) -> bool:
        return eid in self.entries

    def ids(self, kind: str | None = None) -> list[str]:
        return [e.id for e in self.entries.values() if kind is None or e.kind == kind]

    def get(self, eid: str) -> CatalogEntry:
        try:
            return self.entries[eid]
        except KeyError:
            raise UnknownEntry(eid) from None

    def expr(self, eid: str) -> AlgExpr:
        e = self.get(eid)
        if e.kind == "ek_polynomial":
            return e.payload.to_expr()
        if e.kind == "alg_expr":
            return e.payload
        raise ValueError(f"{eid} is a {e.kind}, not a closed form")

    def _env(self):
        cat = self

        class _Env(dict):
            def __contains__(self, name):
                return name in cat.entries

            def __getitem__(self, name):
                return lambda n: cat.expr(name).ev(n, self)

        return _Env()

    def expand_entry(self, eid: str, order: int) -> PrefactoredSeries:
        """Closed form expanded with ``order`` exact body terms beyond the leading one."""
        return eval_alg_expr(self.expr(eid), order, self._env())

    def series(self, eid: str, order: int) -> Series:
        """Plain series through ``t^order``: closed forms are expanded, printed ones returned."""
        e = self.get(eid)
        if e.kind == "reference_series":
            return self.reference_series(eid, order)
        f = self.expand_entry(eid, order)
        if f.a.denominator != 1:
            raise ValueError(f"{eid} carries t^{f.a} and is not a power series")
        need = order - int(f.a)
        if need < 0:
            return Series.zero(order)
        if need > f.order:
            f = self.expand_entry(eid, need)
        return f.to_series(order)

    def reference_series(self, eid: str, order: int | None = None) -> Series:
        e = self.get(eid)
        if e.kind != "reference_series":
            raise ValueError(f"{eid} is a {e.kind}, not a printed series")
        top = e.printed_order
        if order is None:
            order = top
        if order > top:
            raise OrderBeyondPrinted(f"{eid} is printed only to t^{top}; asked for t^{order}")
        if e.parameter is None:
            return Series([Q(c[0]) if c else ZERO for c in (e.payload[n] for n in range(order + 1))], order)
        return Series([ParamPoly(e.payload[n], e.parameter) for n in range(order + 1)], order, e.parameter)

    def tag(self, eid: str, n: int) -> str | None:
        return self.get(eid).tags.get(n)


@lru_cache(maxsize=4)
def _default(path):
    return Catalog.load(path)


def default_catalog() -> Catalog:
    return _default(os.environ.get("LAMBDA_EXT_CATALOG"))
