"""Run configuration: INI-style ``key = value`` sections.

Example::

    [domain]
    Lx = 1.0
    Ly = 1.0
    omega0 = disk 0.5 0.5 0.1
    anchor = disk 0.5 0.5 0.05
    T = 0.25

    [material]
    kappa = 200

Unions of disks are written ``disk x y r; disk x y r``; polygons
``polygon x0 y0 x1 y1 ...``.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .constitutive import MaterialError, MaterialParams
from .geometry import Disk, DiskUnion, DomainSpec, GeometryError, Polygon, Region


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    tol_EL: float | None = None
    max_iter: int = 500
    memory: int = 10
    tol_theta: float | None = None  # default 1e-3 * T
    tol_y: float | None = None  # default 1e-4 * diameter
    K_max: int = 20
    on_nonconverged: str = "abort"  # or "continue"


@dataclass(frozen=True)
class OutputConfig:
    fields: tuple[str, ...] = ("theta", "y", "backstrain")
    snapshot_every: int = 4
    step_dumps: bool = False


@dataclass(frozen=True)
class RunConfig:
    domain: DomainSpec
    material: MaterialParams = field(default_factory=MaterialParams)
    nx: int = 65
    n_steps: int = 16
    force: tuple[float, float] = (0.0, 0.0)
    ramp_time: float = 0.0
    y0: str = "identity"
    y0_amplitude: float = 0.0
    A0: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 1.0)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0

    @property
    def T(self) -> float:
        return self.domain.T

    @property
    def tau(self) -> float:
        return self.domain.T / self.n_steps

    @property
    def tol_theta(self) -> float:
        return self.solver.tol_theta if self.solver.tol_theta is not None else 1e-3 * self.T

    @property
    def tol_y(self) -> float:
        return self.solver.tol_y if self.solver.tol_y is not None else 1e-4 * self.domain.diameter

    def A0_matrix(self) -> np.ndarray:
        return np.array(self.A0, float).reshape(2, 2)

    def force_at(self, t: float) -> np.ndarray:
        """Spatially constant force density with a smooth (cosine) start-up ramp."""
        f = np.array(self.force, float)
        if self.ramp_time <= 0 or t >= self.ramp_time:
            return f
        return f * 0.5 * (1.0 - np.cos(np.pi * t / self.ramp_time))

    def validate(self) -> "RunConfig":
        try:
            self.material.validate()
        except MaterialError as e:
            raise ConfigError(str(e)) from e
        if (self.domain.c_gamma, self.domain.C_gamma) != (self.material.c_gamma, self.material.C_gamma):
            raise ConfigError("speed bounds of domain and material disagree")
        if self.n_steps < 1:
            raise ConfigError("n_steps must be >= 1")
        if self.y0 not in ("identity", "bump"):
            raise ConfigError(f"unknown initial deformation {self.y0!r}")
        if np.linalg.det(self.A0_matrix()) <= 0:
            raise ConfigError("hypothesis (H13) violated: det A0 must be positive")
        if self.solver.on_nonconverged not in ("abort", "continue"):
            raise ConfigError("on_nonconverged must be 'abort' or 'continue'")
        # geometry gates are checked at the run resolution
        from .geometry import build_grid

        try:
            build_grid(self.domain, self.nx)
        except GeometryError as e:
            raise ConfigError(str(e)) from e
        return self

    def resolved(self) -> dict:
        """Every parameter, defaults included, as plain data."""
        d = {
            "domain": {
                "Lx": self.domain.Lx,
                "Ly": self.domain.Ly,
                "omega0": format_region(self.domain.omega0),
                "anchor": format_region(self.domain.omega_anchor),
                "T": self.domain.T,
            },
            "material": self.material.as_dict(),
            "discretization": {"nx": self.nx, "n_steps": self.n_steps, "tau": self.tau},
            "loading": {"force": list(self.force), "ramp_time": self.ramp_time},
            "initial": {"y0": self.y0, "y0_amplitude": self.y0_amplitude, "A0": list(self.A0)},
            "solver": {**asdict(self.solver), "tol_theta": self.tol_theta, "tol_y": self.tol_y},
            "output": {**asdict(self.output), "fields": list(self.output.fields)},
            "run": {"seed": self.seed},
        }
        return d


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def parse_region(text: str) -> Region:
    parts = [p.strip() for p in text.split(";") if p.strip()]
    regions = []
    for p in parts:
        tok = p.split()
        kind, nums = tok[0].lower(), [float(t) for t in tok[1:]]
        if kind == "disk" and len(nums) == 3:
            regions.append(Disk((nums[0], nums[1]), nums[2]))
        elif kind == "polygon" and len(nums) >= 6 and len(nums) % 2 == 0:
            regions.append(Polygon(tuple(zip(nums[::2], nums[1::2]))))
        else:
            raise ConfigError(f"cannot parse region {p!r}")
    if len(regions) == 1:
        return regions[0]
    if not all(isinstance(r, Disk) for r in regions):
        raise ConfigError("only disks can be combined into unions")
    return DiskUnion(tuple(regions))


def format_region(r: Region) -> str:
    if isinstance(r, Disk):
        return f"disk {r.center[0]!r} {r.center[1]!r} {r.radius!r}"
    if isinstance(r, DiskUnion):
        return "; ".join(format_region(d) for d in r.disks)
    return "polygon " + " ".join(f"{x!r} {y!r}" for x, y in r.vertices)


def _coerce(cls, section: configparser.SectionProxy | dict, name: str):
    known = {f.name: f for f in fields(cls)}
    out = {}
    for key, raw in section.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in [{name}]")
        default = getattr(cls(), key) if name != "domain" else None
        out[key] = _convert(raw, default, key)
    return out


def _convert(raw: str, default, key: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float) or default is None and key.startswith(("tol", "c_", "kappa")):
            return None if raw.lower() == "none" else float(raw)
        if isinstance(default, tuple):
            items = raw.replace(",", " ").split()
            return tuple(type(default[0])(x) if default else x for x in items)
    except ValueError as e:
        raise ConfigError(f"bad value for {key}: {raw!r}") from e
    return raw


def load_config(path: str | Path) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config {path}")
    return config_from_parser(cp)


def loads_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str
    cp.read_string(text)
    return config_from_parser(cp)


def config_from_parser(cp: configparser.ConfigParser) -> RunConfig:
    allowed = {"domain", "material", "discretization", "loading", "initial", "solver", "output", "run"}
    extra = set(cp.sections()) - allowed
    if extra:
        raise ConfigError(f"unknown sections: {sorted(extra)}")
    if "domain" not in cp:
        raise ConfigError("missing [domain] section")
    mat = _coerce(MaterialParams, cp["material"], "material") if "material" in cp else {}
    material = replace(MaterialParams(), **mat)

    d = cp["domain"]
    try:
        domain = DomainSpec(
            Lx=float(d.get("Lx", "1.0")),
            Ly=float(d.get("Ly", "1.0")),
            omega0=parse_region(d["omega0"]),
            omega_anchor=parse_region(d["anchor"]),
            T=float(d["T"]),
            c_gamma=material.c_gamma,
            C_gamma=material.C_gamma,
        )
    except KeyError as e:
        raise ConfigError(f"missing key {e} in [domain]") from e
    unknown = set(d.keys()) - {"Lx", "Ly", "omega0", "anchor", "T"}
    if unknown:
        raise ConfigError(f"unknown keys in [domain]: {sorted(unknown)}")

    kw: dict = {}
    base = RunConfig(domain=domain)
    flat_sections = {
        "discretization": ("nx", "n_steps"),
        "loading": ("force", "ramp_time"),
        "initial": ("y0", "y0_amplitude", "A0"),
        "run": ("seed",),
    }
    for sec, keys in flat_sections.items():
        if sec not in cp:
            continue
        for key, raw in cp[sec].items():
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            kw[key] = _convert(raw, getattr(base, key), key)
    solver = replace(SolverConfig(), **_coerce(SolverConfig, cp["solver"], "solver")) if "solver" in cp else SolverConfig()
    output = replace(OutputConfig(), **_coerce(OutputConfig, cp["output"], "output")) if "output" in cp else OutputConfig()
    return RunConfig(domain=domain, material=material, solver=solver, output=output, **kw)


def dumps_config(cfg: RunConfig) -> str:
    """Round-trippable INI text with every resolved parameter."""
    res = cfg.resolved()
    cp = configparser.ConfigParser()
    cp.optionxform = str

    def fmt(v):
        if isinstance(v, (list, tuple)):
            return " ".join(repr(x) if not isinstance(x, str) else x for x in v)
        return repr(v) if not isinstance(v, str) else v

    res["discretization"].pop("tau")
    res["solver"] = {k: v for k, v in asdict(cfg.solver).items()}
    for sec, vals in res.items():
        cp[sec] = {k: fmt(v) for k, v in vals.items()}
    for k in ("c_gamma", "C_gamma"):
        cp["material"][k] = repr(getattr(cfg.material, k))
    import io

    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
