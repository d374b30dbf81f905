"""Derived constants for a reconstruction run."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .desert import DesertParams

OVERRIDABLE = ("m", "C", "N", "alpha", "gamma", "sigma")
C_CAP = 12


def icbrt_ceil(n: int) -> int:
    """Smallest integer m with m**3 >= n."""
    m = max(1, round(n ** (1.0 / 3.0)))
    while m**3 < n:
        m += 1
    while m > 1 and (m - 1) ** 3 >= n:
        m -= 1
    return m


@dataclass(frozen=True)
class ReconParams:
    n: int
    delta: float
    epsilon: float
    m: int
    C: int
    sigma: int
    N: int
    alpha: int
    gamma: int
    provenance: Mapping[str, str] = field(default_factory=dict)
    warnings: tuple = ()

    @property
    def M(self) -> int:
        return 2 * self.m + 1

    @property
    def log2n(self) -> float:
        return math.log2(self.n)

    def desert(self) -> DesertParams:
        return DesertParams(self.m, self.C)

    def with_n(self, n: int) -> "ReconParams":
        """Re-derive for a new length, keeping delta and any overrides."""
        over = {k: getattr(self, k) for k, v in self.provenance.items() if v == "override"}
        return derive_params(n, delta=self.delta, overrides=over)

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "delta": self.delta,
            "epsilon": self.epsilon,
            "m": self.m,
            "M": self.M,
            "C": self.C,
            "sigma": self.sigma,
            "N": self.N,
            "alpha": self.alpha,
            "gamma": self.gamma,
        }


def derive_params(
    n: int,
    epsilon: Optional[float] = None,
    delta: Optional[float] = None,
    overrides: Optional[Mapping[str, int]] = None,
) -> ReconParams:
    """Fill every constant from ``n`` and one of ``epsilon``/``delta``.

    ``delta = 0`` is accepted as the noiseless channel.
    """
    if n < 8:
        raise ValueError(f"n must be at least 8, got {n}")
    if (epsilon is None) == (delta is None):
        raise ValueError("give exactly one of epsilon and delta")
    overrides = dict(overrides or {})
    unknown = set(overrides) - set(OVERRIDABLE)
    if unknown:
        raise ValueError(f"unknown override(s): {sorted(unknown)}")
    L = math.log2(n)
    if epsilon is not None:
        delta = n ** (-(1.0 / 3.0 + epsilon))
    else:
        delta = float(delta)
        if not 0.0 <= delta < 1.0:
            raise ValueError(f"delta must lie in [0, 1), got {delta}")
        epsilon = math.inf if delta == 0.0 else -math.log(delta) / math.log(n) - 1.0 / 3.0
    warnings = []
    if epsilon <= 0:
        warnings.append(f"epsilon={epsilon:.4f} <= 0: delta is above n^(-1/3), outside the supported regime")
    finite_pos = 0 < epsilon < math.inf

    derived = {
        "m": icbrt_ceil(n),
        "C": min(math.ceil(100.0 / epsilon), C_CAP) if finite_pos else C_CAP,
        "sigma": max(1, math.ceil(math.sqrt(delta * n) * L)),
        "N": math.ceil(6.0 * L) | 1,
        "alpha": max(10, math.ceil(2.0 / epsilon)) if finite_pos else 10,
    }
    vals = {k: int(overrides.get(k, v)) for k, v in derived.items()}
    derived["gamma"] = math.ceil(8.0 * vals["sigma"] ** 2 * L)
    vals["gamma"] = int(overrides.get("gamma", derived["gamma"]))
    prov = {k: ("override" if k in overrides else "derived") for k in OVERRIDABLE}

    for k, v in vals.items():
        if v < 1:
            raise ValueError(f"{k} must be positive, got {v}")
    M = 2 * vals["m"] + 1
    if vals["sigma"] >= vals["m"] / 2:
        warnings.append(f"sigma={vals['sigma']} >= m/2={vals['m'] / 2}: regime sigma << m violated")
    if M * delta >= 0.1:
        warnings.append(f"M*delta={M * delta:.3g} >= 0.1: regime m << 1/delta violated")
    if vals["C"] >= M:
        if "C" in overrides:
            raise ValueError(f"C={vals['C']} must be below M={M}")
        warnings.append(f"C lowered from {vals['C']} to M-1={M - 1} for this small n")
        vals["C"] = M - 1
    return ReconParams(
        n=n,
        delta=delta,
        epsilon=epsilon,
        m=vals["m"],
        C=vals["C"],
        sigma=vals["sigma"],
        N=vals["N"],
        alpha=vals["alpha"],
        gamma=vals["gamma"],
        provenance=prov,
        warnings=tuple(warnings),
    )


def parse_overrides(items) -> dict:
    """Turn ``["m=60", "N=31"]`` into ``{"m": 60, "N": 31}``."""
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"override {item!r} is not of the form key=value")
        key = key.strip()
        if key not in OVERRIDABLE:
            raise ValueError(f"unknown override {key!r}; choose from {', '.join(OVERRIDABLE)}")
        out[key] = int(val)
    return out


__all__ = ["ReconParams", "derive_params", "icbrt_ceil", "parse_overrides", "OVERRIDABLE"]
