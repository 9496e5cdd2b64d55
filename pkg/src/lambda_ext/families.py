"""Registry of the solver families used across the checks.

Each family couples an ODE, a normalization ``(a, b, kappa)`` and the
catalog entries it is seeded from and calibrated against.  Seeds for the
factor families are read off the catalog's closed forms (leading term and
the first two body terms, the latter only for choosing roots); nothing about
the valuation is guessed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from ._backend import Q, to_q
from .catalog import default_catalog
from .odes import OdeSpec
from .series import ParamPoly, Series
from .solver import (CalibrationError, FamilySeries, ParameterMap, SeedAnsatz, calibrate_against,
                     solve_family)


@dataclass(frozen=True)
class FamilyDef:
    name: str
    spec: OdeSpec
    normalization: tuple            # (a, b, kappa)
    anchor: str | None = None       # closed form of one member (seeds the leading terms)
    references: dict = field(default_factory=dict)  # parameter name -> printed series id
    full_object: bool = False       # compare t^a (1-t)^b F instead of F
    root: str = "auto"


def _f(*xs):
    return tuple(Q(x) for x in xs)


FAMILIES: dict[str, FamilyDef] = {}


def _register(fd: FamilyDef):
    FAMILIES[fd.name] = fd


_register(FamilyDef("C05", OdeSpec("EQNMODD", 5, 0), _f(0, "1/4", "-1/4"),
                    references={"lambda_sq": "C05_lambda", "mu": "C05_mu"}, full_object=True))
_register(FamilyDef("C25", OdeSpec("EQNMODD", 5, 2), _f(0, "1/4", "-1/4"),
                    references={"lambda_sq": "C25_lambda", "mu": "C25_mu"}, full_object=True))
_register(FamilyDef("C11", OdeSpec("DIAG_PVI", 1), _f(0, 0, "-1/4"), anchor="C11_lowT",
                    references={"M_def": "C11_M"}, full_object=True))
for _j, (_a, _b) in enumerate((("-13/8", "-1/16"), ("-13/8", "3/16"), ("-11/8", "-1/16"), ("-11/8", "3/16")), 1):
    _register(FamilyDef(f"f{_j}", OdeSpec("FOURFACT", 5), _f(_a, _b, 0), anchor=f"f{_j}_05_alpha0",
                        references={"alpha": f"f{_j}_alpha"}))
_register(FamilyDef("F1_25", OdeSpec("NONLINEAREQ", 5, 2), _f(-3, "3/8", 0), anchor="F1_25_alpha0",
                    references={"alpha": "F1_25_alpha"}))
_register(FamilyDef("F2_25", OdeSpec("NONLINEAREQ", 5, 2), _f(-3, "-1/8", 0), anchor="F2_25_alpha0",
                    references={"alpha": "F2_25_alpha"}))


def diagonal_family_def(N: int) -> FamilyDef:
    """C(N,N): DIAG_PVI(N) with v = 0, c0 = 1.  For N = 0 the constant is the
    isolated root; the family is the other branch of the first quadratic."""
    if N < 0:
        raise ValueError("N must be non-negative")
    return FamilyDef(f"C{N}{N}", OdeSpec("DIAG_PVI", N), _f(0, 0, "-1/4"), full_object=True,
                     root="nonzero" if N == 0 else "auto")


class UnknownFamily(KeyError):
    def __str__(self):
        return f"unknown family {self.args[0]!r}"


def get_def(name: str) -> FamilyDef:
    if name in FAMILIES:
        return FAMILIES[name]
    if len(name) >= 3 and name[0] == "C" and name[1:].isdigit() and len(name[1:]) % 2 == 0:
        half = len(name[1:]) // 2
        if name[1:1 + half] == name[1 + half:]:
            return diagonal_family_def(int(name[1:1 + half]))
    raise UnknownFamily(name)


def seed_for(fd: FamilyDef) -> SeedAnsatz:
    a, b, k = fd.normalization
    if fd.anchor is None:
        return SeedAnsatz(0, 1, (a, b), k, root=fd.root)
    F = default_catalog().series(fd.anchor, 8)
    v = F.valuation()
    c0 = F[v]
    branch = (F[v + 1] / c0, F[v + 2] / c0)
    return SeedAnsatz(v, c0, (a, b), k, branch_terms=branch if fd.spec.family in ("FOURFACT", "NONLINEAREQ") else (),
                      root=fd.root)


@lru_cache(maxsize=64)
def raw_family(name: str, order: int) -> FamilySeries:
    """Solver output; for full-object families ``series`` holds t^a (1-t)^b F."""
    fd = get_def(name)
    fam = solve_family(fd.spec, seed_for(fd), order)
    if fd.full_object:
        fam = FamilySeries(fam.spec, fam.seed, fam.sigma, fam.full_series(), fam.degeneracy_orders,
                           fam.parameter_name)
    return fam


@dataclass
class Calibrated:
    family: FamilySeries          # reparametrized in the printed parameter
    pmap: ParameterMap
    reference: str
    first_mismatch: int | None    # first printed order the calibrated family disagrees with

    @property
    def series(self) -> Series:
        return self.family.series


@lru_cache(maxsize=64)
def calibrated_family(name: str, order: int, parameter: str | None = None) -> Calibrated:
    """Family rewritten in the printed parameter (first reference by default).

    A printed coefficient that disagrees with the calibrated family is not
    fatal here: the map is fitted below it and the mismatch is reported.
    """
    fd = get_def(name)
    if not fd.references:
        raise CalibrationError(f"family {name} has no printed reference")
    parameter = parameter or next(iter(fd.references))
    ref_id = fd.references[parameter]
    fam = raw_family(name, order)
    ref = default_catalog().reference_series(ref_id)
    pmap, bad = calibrate_against(fam, ref)
    return Calibrated(fam.reparametrize(pmap), pmap, ref_id, bad)


def family_in(name: str, order: int, parameter: str) -> Series:
    """Calibrated family series with a derived parameter substituted.

    ``lambda_sq`` for C05/C25 may be expressed through ``alpha`` via
    lambda^2 = (2 alpha - 1)^2, for C11 ``lambda_sq`` and ``rho_def`` come
    from M_def = 4 - 4 lambda^2 = rho + 2.
    """
    fd = get_def(name)
    if parameter in fd.references:
        return calibrated_family(name, order, parameter).series
    if name in ("C05", "C25") and parameter == "alpha":
        base = calibrated_family(name, order, "lambda_sq").series
        return base.compose_param(ParamPoly([1, -4, 4], "alpha"))
    if name == "C11" and parameter == "lambda_sq":
        return calibrated_family(name, order, "M_def").series.compose_param(ParamPoly([4, -4], "lambda_sq"))
    if name == "C11" and parameter == "rho_def":
        return calibrated_family(name, order, "M_def").series.compose_param(ParamPoly([2, 1], "rho_def"))
    raise CalibrationError(f"family {name} has no map to parameter {parameter!r}")


def reflect(s: Series) -> Series:
    """alpha -> 1 - alpha."""
    return s.compose_param(ParamPoly([1, -1], s.param))


def shift_half(s: Series, name: str = "beta") -> Series:
    """alpha -> 1/2 + beta."""
    return s.compose_param(ParamPoly([Q(1, 2), 1], name))


__all__ = ["FAMILIES", "FamilyDef", "UnknownFamily", "Calibrated", "calibrated_family", "diagonal_family_def",
           "family_in", "get_def", "raw_family", "reflect", "seed_for", "shift_half", "to_q"]
