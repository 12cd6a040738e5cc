"""Run configuration schema for the command line front end.

Unknown keys are rejected at every level.  ``RunConfig.resolved()`` returns
the configuration with all defaults materialized; commands write it next to
their results.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .geometry import Basis, Domain, make_domain
from .kernels import KernelSpec, canonical_family

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DomainConfig(_Strict):
    lower: list[float]
    upper: list[float]


class BasisConfig(_Strict):
    kind: Literal["monomial", "affine", "linear", "constant"] = "linear"
    index_sets: Optional[list[list[int]]] = None
    coeffs: Optional[list[list[float]]] = None
    space: Literal["canonical", "original"] = "canonical"

    @model_validator(mode="after")
    def _fields_for_kind(self):
        if self.kind == "monomial" and self.index_sets is None:
            raise ValueError("monomial basis needs 'index_sets'")
        if self.kind == "affine" and self.coeffs is None:
            raise ValueError("affine basis needs 'coeffs'")
        return self


class KernelConfig(_Strict):
    family: str = "squared_exponential"
    variance: float = Field(1.0, gt=0)
    lengthscales: list[float]

    @field_validator("family")
    @classmethod
    def _family(cls, v):
        return canonical_family(v)


class OrthoConfig(_Strict):
    mode: Literal["closed_form", "quadrature"] = "closed_form"
    order: Optional[int] = Field(None, ge=2)


class MLEConfig(_Strict):
    enabled: bool = False
    bounds: tuple[float, float] = (0.1, 5.0)
    starts: int = Field(5, ge=1)
    seed: int = 0
    max_evals: int = Field(500, ge=1)


class RunConfig(_Strict):
    schema_version: int = SCHEMA_VERSION
    domain: Optional[DomainConfig] = None
    basis: BasisConfig = BasisConfig()
    kernel: KernelConfig
    method: Literal["OGP", "UK", "LS"] = "OGP"
    orthogonalization: OrthoConfig = OrthoConfig()
    mle: MLEConfig = MLEConfig()
    study: dict[str, Any] = Field(default_factory=dict)

    @field_validator("method", mode="before")
    @classmethod
    def _upper(cls, v):
        return v.upper() if isinstance(v, str) else v

    @field_validator("schema_version")
    @classmethod
    def _version(cls, v):
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {v}; expected {SCHEMA_VERSION}")
        return v

    @property
    def dim(self) -> int:
        return len(self.kernel.lengthscales)

    def make_domain(self) -> Domain:
        if self.domain is None:
            return Domain.canonical(self.dim)
        dom = make_domain(self.domain.lower, self.domain.upper)
        if dom.dim != self.dim:
            raise ValueError(f"domain has d={dom.dim} but kernel has {self.dim} lengthscales")
        return dom

    def make_basis(self) -> Basis:
        return Basis.from_dict(self.basis.model_dump(), self.dim, self.make_domain())

    def make_kernel(self) -> KernelSpec:
        return KernelSpec.from_dict(self.kernel.model_dump())

    def resolved(self) -> dict:
        out = self.model_dump(mode="json")
        if out["domain"] is None:
            out["domain"] = self.make_domain().to_dict()
        return out


def load_config(path) -> RunConfig:
    return RunConfig.model_validate(json.loads(Path(path).read_text()))
