"""JSON chain documents.

Rational parameters are stored as ``[numerator, denominator]`` pairs and
floats are written with 17 significant digits, so a document reloads to the
same bits.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .chains import ChainSpec
from .exceptions import InvalidParameters
from .spectral import Boundary, ChainParams

FORMAT_VERSION = 1


class Provenance(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    GAMMA_SUM = "gamma_sum"
    DEFORMED = "deformed"
    SURGERY = "surgery"
    EXTERNAL = "external"


def _encode_number(x):
    if isinstance(x, Fraction):
        return [x.numerator, x.denominator]
    return float(x)


def _decode_number(x):
    if isinstance(x, list):
        if len(x) != 2:
            raise InvalidParameters(f"rational must be [num, den], got {x}")
        return Fraction(int(x[0]), int(x[1]))
    return float(x)


def params_to_dict(params: ChainParams) -> dict:
    return {
        "n_sites": params.n_sites,
        "boundary": params.boundary.value,
        "a": _encode_number(params.a),
        "c": _encode_number(params.c),
        "alpha": _encode_number(params.alpha),
        "omega_tilde": params.omega_tilde,
        "scale": params.scale,
        "relaxed": params.relaxed,
    }


def params_from_dict(d: dict) -> ChainParams:
    return ChainParams(
        n_sites=int(d["n_sites"]),
        boundary=Boundary(d["boundary"]),
        a=_decode_number(d["a"]),
        c=_decode_number(d["c"]),
        alpha=_decode_number(d["alpha"]),
        omega_tilde=float(d["omega_tilde"]),
        scale=float(d["scale"]),
        relaxed=bool(d.get("relaxed", False)),
    )


@dataclass(eq=False)
class ChainDocument:
    """Serializable chain with the spectrum it claims to have.

    ``params`` describes the full (pre-surgery) family; ``removed`` lists the
    lattice indices deleted from it.
    """

    masses: np.ndarray
    springs: np.ndarray
    boundary: Boundary
    provenance: Provenance
    params: ChainParams | None = None
    removed: tuple[int, ...] = ()
    spectrum: np.ndarray | None = None
    certificates: dict[str, Any] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    @classmethod
    def from_chain(cls, chain: ChainSpec, provenance, spectrum=None, certificates=None):
        return cls(
            masses=np.array(chain.masses),
            springs=np.array(chain.springs),
            boundary=chain.boundary,
            provenance=Provenance(provenance),
            params=chain.params,
            removed=tuple(chain.removed),
            spectrum=None if spectrum is None else np.asarray(spectrum, dtype=float),
            certificates=dict(certificates or {}),
        )

    def to_chain(self) -> ChainSpec:
        return ChainSpec(self.masses, self.springs, self.boundary, self.params, self.removed)

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "provenance": self.provenance.value,
            "boundary": Boundary(self.boundary).value,
            "params": None if self.params is None else params_to_dict(self.params),
            "removed": list(self.removed),
            "masses": [float(x) for x in self.masses],
            "springs": [float(x) for x in self.springs],
            "spectrum": None if self.spectrum is None else [float(x) for x in self.spectrum],
            "certificates": self.certificates,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChainDocument":
        version = d.get("format_version")
        if version != FORMAT_VERSION:
            raise InvalidParameters(f"unsupported format_version {version!r}")
        return cls(
            masses=np.array(d["masses"], dtype=float),
            springs=np.array(d["springs"], dtype=float),
            boundary=Boundary(d["boundary"]),
            provenance=Provenance(d["provenance"]),
            params=None if d.get("params") is None else params_from_dict(d["params"]),
            removed=tuple(int(r) for r in d.get("removed", ())),
            spectrum=None if d.get("spectrum") is None else np.array(d["spectrum"], dtype=float),
            certificates=d.get("certificates", {}),
            format_version=version,
        )

    def dumps(self) -> str:
        return dumps(self.to_dict())

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8", newline="\n")

    @classmethod
    def loads(cls, text: str) -> "ChainDocument":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "ChainDocument":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


_TOKEN = re.compile(r'"\\u0000f(\d+)"')


def dumps(obj) -> str:
    """``json.dumps`` with every float written as ``%.17g``."""
    floats: list[float] = []

    def swap(x):
        if isinstance(x, dict):
            return {k: swap(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [swap(v) for v in x]
        if isinstance(x, (float, np.floating)):
            floats.append(float(x))
            return f"\0f{len(floats) - 1}"
        if isinstance(x, np.integer):
            return int(x)
        if isinstance(x, np.bool_):
            return bool(x)
        return x

    text = json.dumps(swap(obj), indent=2)

    def fmt(m):
        x = floats[int(m.group(1))]
        if not np.isfinite(x):
            return "null"
        s = format(x, ".17g")
        return s if any(ch in s for ch in ".en") else s + ".0"

    return _TOKEN.sub(fmt, text) + "\n"
