"""Run configuration shared by the command line and the experiment drivers."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from .closing import ClosingConstants
from .errors import InvalidParameter
from .nondivergence import NondivConstants

DEFAULT_CONSTANTS: dict[str, float] = {
    "kappa1": 0.1,
    "kappa2": 10.0,
    "alpha": 0.5,
    "kappa4": 4.0,
    "nu": 0.5,
    "C1": 2.0,
    "tau_bal": 0.1,
    "K_bad": 0.1,
    "K_sheet": 1.0,
}

DEFAULT_BUDGETS: dict[str, int] = {
    "wedges": 10_000_000,
    "pairs": 200_000,
}

# (lower, upper, lower inclusive, upper inclusive)
_RANGES: dict[str, tuple[float, float, bool, bool]] = {
    "kappa1": (0.0, 1.0, False, False),
    "kappa2": (0.0, float("inf"), False, False),
    "alpha": (0.0, 1.0, False, True),
    "kappa4": (4.0, float("inf"), True, False),
    "nu": (0.0, 1.0, False, False),
    "C1": (1.0, float("inf"), False, False),
    "tau_bal": (0.0, float("inf"), False, False),
    "K_bad": (0.0, float("inf"), False, False),
    "K_sheet": (0.0, float("inf"), False, False),
}


@dataclass(frozen=True)
class RunConfig:
    """Seed, budgets, constants and output location of a run."""

    seed: int = 0
    budgets: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_BUDGETS))
    constants: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_CONSTANTS))
    output_dir: str = "."

    def __post_init__(self) -> None:
        for k, v in self.constants.items():
            if k not in _RANGES:
                raise InvalidParameter(f"unknown constant {k!r}")
            lo, hi, lo_in, hi_in = _RANGES[k]
            ok_lo = v >= lo if lo_in else v > lo
            ok_hi = v <= hi if hi_in else v < hi
            if not (ok_lo and ok_hi):
                raise InvalidParameter(f"constant {k}={v} outside its range")
        for k, v in self.budgets.items():
            if k not in DEFAULT_BUDGETS:
                raise InvalidParameter(f"unknown budget {k!r}")
            if int(v) <= 0:
                raise InvalidParameter(f"budget {k} must be positive")

    @classmethod
    def load(cls, path: str | os.PathLike | None = None, **overrides: Any) -> "RunConfig":
        """Defaults, updated from a JSON file, then from keyword overrides."""
        consts = dict(DEFAULT_CONSTANTS)
        budgets = dict(DEFAULT_BUDGETS)
        base: dict[str, Any] = {}
        if path is not None:
            data = json.loads(Path(path).read_text())
            consts.update(data.get("constants", {}))
            budgets.update(data.get("budgets", {}))
            base = {k: data[k] for k in ("seed", "output_dir") if k in data}
        base.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls(constants=consts, budgets=budgets, **base)
        env = os.environ.get("STRATA_LAB_OUT")
        return replace(cfg, output_dir=env) if env else cfg

    def nondiv(self) -> NondivConstants:
        c = self.constants
        return NondivConstants(kappa1=c["kappa1"], kappa2=c["kappa2"], alpha=c["alpha"])

    def closing(self) -> ClosingConstants:
        c = self.constants
        nd = self.nondiv()
        return ClosingConstants(
            C1=c["C1"],
            tau_bal=c["tau_bal"],
            nu=c["nu"],
            kappa4=c["kappa4"],
            K_sheet=c["K_sheet"],
            K_bad=c["K_bad"],
            alpha=nd.alpha,
            C4=nd.C4,
            max_pairs=int(self.budgets["pairs"]),
        )

    def to_json(self) -> dict:
        d = asdict(self)
        d["budgets"] = dict(self.budgets)
        d["constants"] = dict(self.constants)
        return d
