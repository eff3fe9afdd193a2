"""Plain-text key = value run configuration.

One assignment per line, `#` starts a comment.  Unknown keys, malformed
values and invariant violations are all collected and reported together.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict


class ConfigError(ValueError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass
class RunConfig:
    # cross section
    cross_section: str = "hard_sphere"
    beta_table: str = ""
    gamma: float = 1.0
    cutoff_const: float = 1.0
    # velocity grid
    zeta_max: float = 6.0
    n_zeta1: int = 32
    n_zeta_r: int = 16
    min_zeta1_frac: float = 1e-3
    azimuthal_order: int = 12
    # collision-integral quadrature
    n_theta: int = 12
    n_eps: int = 8
    core_speed_frac: float = -1.0   # <= 0 means resolution-aware default
    # slab
    l: float = 1.0
    tol: float = 1e-9
    max_iter: int = 500
    relaxation: float = 0.5
    x_coarse: int = 42
    dyadic_k_min: int = 6
    dyadic_k_max: int = 16
    # boundary data
    boundary: str = "temperature_step"
    boundary_T0: float = 1.1
    grad_p: float = 2.0
    # analysis
    moments: list = field(default_factory=lambda: [(0, 0, 0), (2, 0, 0), (0, 2, 0)])
    fit_k_min: int = 8
    fit_k_max: int = 14
    # bookkeeping
    seed: int = 1234
    output_dir: str = "results"

    def validate(self) -> None:
        problems = []
        if self.cross_section not in ("hard_sphere", "table"):
            problems.append(f"cross_section must be hard_sphere or table, got {self.cross_section!r}")
        if self.cross_section == "table" and not self.beta_table:
            problems.append("cross_section=table requires beta_table=<path>")
        if not 0.0 < self.gamma <= 1.0:
            problems.append(f"gamma must be in (0, 1], got {self.gamma}")
        for key in ("n_zeta1", "n_zeta_r", "azimuthal_order", "n_theta", "n_eps",
                    "max_iter", "x_coarse"):
            if getattr(self, key) <= 0:
                problems.append(f"{key} must be positive, got {getattr(self, key)}")
        if self.n_zeta1 % 2:
            problems.append(f"n_zeta1 must be even, got {self.n_zeta1}")
        if self.zeta_max <= 0:
            problems.append(f"zeta_max must be positive, got {self.zeta_max}")
        if not 0 < self.min_zeta1_frac < 0.5:
            problems.append(f"min_zeta1_frac must be in (0, 0.5), got {self.min_zeta1_frac}")
        if self.l <= 0:
            problems.append(f"l must be positive, got {self.l}")
        if not 0 < self.relaxation <= 1:
            problems.append(f"relaxation must be in (0, 1], got {self.relaxation}")
        if self.fit_k_min >= self.fit_k_max:
            problems.append(f"fit range needs fit_k_min < fit_k_max, got {self.fit_k_min} >= {self.fit_k_max}")
        if self.dyadic_k_min >= self.dyadic_k_max:
            problems.append("dyadic range needs dyadic_k_min < dyadic_k_max")
        if not (self.dyadic_k_min <= self.fit_k_min and self.fit_k_max <= self.dyadic_k_max):
            problems.append("fit range must lie inside the dyadic x-grid range")
        for alpha in self.moments:
            if len(alpha) != 3 or any(int(a) != a or a < 0 for a in alpha):
                problems.append(f"moment index {alpha} must be a triple of nonnegative integers")
            elif alpha[1] % 2 or alpha[2] % 2:
                problems.append(
                    f"moment index {alpha} has an odd transverse component; such "
                    "moments vanish identically in the axisymmetric representation"
                )
        if self.boundary not in ("maxwellian", "temperature_step") and not self.boundary.startswith("file:"):
            problems.append(f"unknown boundary preset {self.boundary!r}")
        if not 0.5 < self.boundary_T0 < 2.0:
            problems.append(f"boundary_T0 must be in (0.5, 2), got {self.boundary_T0}")
        if self.grad_p <= 1.0:
            problems.append(f"grad_p must be > 1, got {self.grad_p}")
        if problems:
            raise ConfigError(problems)

    def echo(self) -> dict:
        d = asdict(self)
        d["moments"] = [list(a) for a in self.moments]
        return d


_INT_KEYS = {"n_zeta1", "n_zeta_r", "azimuthal_order", "n_theta", "n_eps",
             "max_iter", "x_coarse", "dyadic_k_min", "dyadic_k_max",
             "fit_k_min", "fit_k_max", "seed"}
_FLOAT_KEYS = {"gamma", "cutoff_const", "zeta_max", "min_zeta1_frac", "l",
               "tol", "relaxation", "boundary_T0", "grad_p", "core_speed_frac"}
_STR_KEYS = {"cross_section", "beta_table", "boundary", "output_dir"}


def _parse_moments(text: str):
    out = []
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        parts = [p.strip() for p in item.split(",")]
        if len(parts) != 3:
            raise ValueError(f"moment index {item!r} is not a comma-separated triple")
        out.append(tuple(int(p) for p in parts))
    return out


def load_config(path: str) -> RunConfig:
    """Parse and validate a run configuration file."""
    cfg = RunConfig()
    problems = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                problems.append(f"line {lineno}: expected key = value, got {raw.strip()!r}")
                continue
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            try:
                if key in _INT_KEYS:
                    setattr(cfg, key, int(value))
                elif key in _FLOAT_KEYS:
                    setattr(cfg, key, float(value))
                elif key in _STR_KEYS:
                    setattr(cfg, key, value)
                elif key == "moments":
                    cfg.moments = _parse_moments(value)
                else:
                    problems.append(f"line {lineno}: unknown key {key!r}")
            except ValueError as exc:
                problems.append(f"line {lineno}: {exc}")
    if problems:
        raise ConfigError(problems)
    cfg.validate()
    return cfg
