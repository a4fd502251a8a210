"""Run configuration: an INI file with sections ``[model]``, ``[bath.1]``
(``[bath.2]``), ``[numerics]`` and ``[output]``.

Grammar (``;`` or ``#`` start comments)::

    [model]
    epsilon0 = 1.0            ; level splitting
    delta = 0.0               ; tunnelling
    initial_state = plus_x    ; up_z, down_z, plus_x, minus_x, plus_y, minus_y,
                              ; mixed, or a Bloch vector "x y z"

    [bath.1]
    alpha = 0.1               ; Ohmic coupling (or: spectral_file = J.txt)
    omega_c = 5.0
    temperature = 0           ; 0 means the zero-temperature sentinel
    domain_max = 50           ; hard frequency cutoff, default 10 omega_c

    [numerics]
    chain_length = 40
    local_dim = 10            ; omit to taper from d_near to d_far
    d_near = 8
    d_far = 4
    max_bond = 64
    svd_cutoff = 1e-10
    dt = 0.01                 ; default 0.01 / max(omega_c, epsilon0, delta)
    t_max = 5
    sample_stride = 10
    n_max = 2
    num_nodes = 4096

    [output]
    directory = out
    formats = csv svg
    strict = false
    checkpoint = false

Every error is reported as ``path:line: message``.  A JSON manifest written
by a run is itself a valid configuration.
"""

from __future__ import annotations

import configparser
import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .bath import DEFAULT_CUTOFF_FACTOR, BathSpec, SpectralDensity
from .model import _NAMED_STATES, SpinBosonParams
from .stats import Numerics


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = "<config>", line: int | None = None):
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {message}")
        self.line = line


@dataclass
class BathConfig:
    alpha: float | None = None
    omega_c: float | None = None
    temperature: float = 0.0
    domain_max: float | None = None
    spectral_file: str | None = None

    def spec(self, base: Path | None = None) -> BathSpec:
        if self.spectral_file:
            path = Path(self.spectral_file)
            if base is not None and not path.is_absolute():
                path = base / path
            sd = SpectralDensity.from_file(path, domain_max=self.domain_max)
        else:
            sd = SpectralDensity.ohmic(self.alpha, self.omega_c, self.domain_max)
        return BathSpec.from_temperature(sd, self.temperature)


@dataclass
class OutputConfig:
    directory: str = "out"
    formats: list[str] = field(default_factory=lambda: ["csv", "svg"])
    strict: bool = False
    checkpoint: bool = False


@dataclass
class RunConfig:
    epsilon0: float = 1.0
    delta: float = 0.0
    initial_state: object = "plus_x"
    baths: list[BathConfig] = field(default_factory=list)
    numerics: Numerics = field(default_factory=Numerics)
    output: OutputConfig = field(default_factory=OutputConfig)
    source: str = ""

    def params(self) -> SpinBosonParams:
        return SpinBosonParams(self.epsilon0, self.delta, self.initial_state)

    def bath_specs(self) -> list[BathSpec]:
        base = Path(self.source).parent if self.source else None
        return [b.spec(base) for b in self.baths]

    def resolved(self) -> dict:
        """Every setting, defaults filled in (the reproducibility record)."""
        num = asdict(self.numerics)
        num["dt"] = self.numerics.resolved_dt(self.params(), self.bath_specs())
        baths = []
        for b, spec in zip(self.baths, self.bath_specs()):
            d = asdict(b)
            d["domain_max"] = spec.spectral.domain_max
            baths.append(d)
        state = self.initial_state
        if not isinstance(state, str):
            state = [float(x) for x in state]
        return {
            "model": {"epsilon0": self.epsilon0, "delta": self.delta, "initial_state": state},
            "baths": baths,
            "numerics": num,
            "output": asdict(self.output),
        }


_MODEL_KEYS = {"epsilon0", "delta", "initial_state"}
_BATH_KEYS = {"alpha", "omega_c", "temperature", "domain_max", "spectral_file"}
_NUMERIC_INT = {"chain_length", "local_dim", "d_near", "d_far", "max_bond", "sample_stride", "n_max", "num_nodes",
                "moment_bond_factor"}
_NUMERIC_FLOAT = {"svd_cutoff", "dt", "t_max"}
_OUTPUT_KEYS = {"directory", "formats", "strict", "checkpoint"}


def _line_index(text: str) -> dict:
    """``(section, key) -> line`` and ``(section, None) -> line`` lookup."""
    where = {}
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = n
            continue
        m = re.match(r"([^=:]+)[=:]", line)
        if m and section is not None:
            where[(section, m.group(1).strip().lower())] = n
    return where


class _Reader:
    def __init__(self, parser, lines, path):
        self.parser, self.lines, self.path = parser, lines, path

    def fail(self, msg, section=None, key=None):
        line = self.lines.get((section, key)) or self.lines.get((section, None))
        raise ConfigError(msg, self.path, line)

    def number(self, section, key, kind=float, lo=None, hi=None, lo_open=False, default=None):
        sec = self.parser[section]
        if key not in sec:
            return default
        raw = sec[key].strip()
        if raw == "" and default is None:
            return None
        try:
            val = kind(raw) if kind is float else int(raw)
        except ValueError:
            self.fail(f"{key} = {raw!r} is not {'an integer' if kind is int else 'a number'}", section, key)
        if kind is float and math.isnan(val):
            self.fail(f"{key} must not be NaN", section, key)
        if lo is not None and (val < lo or (lo_open and val == lo)):
            self.fail(f"{key} = {raw} must be {'>' if lo_open else '>='} {lo}", section, key)
        if hi is not None and val > hi:
            self.fail(f"{key} = {raw} must be <= {hi}", section, key)
        return val

    def unknown(self, section, allowed):
        for key in self.parser[section]:
            if key not in allowed:
                self.fail(f"unknown key {key!r} in [{section}]", section, key)


def parse_config_text(text: str, path: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        msg = str(exc).splitlines()[0]
        raise ConfigError(msg, path, line) from None
    lines = _line_index(text)
    r = _Reader(parser, lines, path)
    cfg = RunConfig(source=path)

    known = {"model", "numerics", "output"}
    bath_sections = []
    for sec in parser.sections():
        m = re.fullmatch(r"bath\.(\d+)", sec)
        if m:
            bath_sections.append((int(m.group(1)), sec))
        elif sec not in known:
            r.fail(f"unknown section [{sec}]", sec)

    if parser.has_section("model"):
        r.unknown("model", _MODEL_KEYS)
        cfg.epsilon0 = r.number("model", "epsilon0", default=1.0)
        cfg.delta = r.number("model", "delta", default=0.0)
        raw = parser["model"].get("initial_state", "plus_x").strip()
        cfg.initial_state = _parse_state(raw, r)

    bath_sections.sort()
    if not bath_sections:
        raise ConfigError("no [bath.N] section: at least one bath is required", path,
                          max(1, len(text.splitlines())))
    if [n for n, _ in bath_sections] != list(range(1, len(bath_sections) + 1)):
        r.fail("bath sections must be numbered 1, 2, ... without gaps", bath_sections[-1][1])
    if len(bath_sections) > 2:
        r.fail("at most two baths are supported", bath_sections[2][1])
    for _, sec in bath_sections:
        r.unknown(sec, _BATH_KEYS)
        b = BathConfig()
        b.spectral_file = parser[sec].get("spectral_file", "").strip() or None
        b.alpha = r.number(sec, "alpha", lo=0.0)
        b.omega_c = r.number(sec, "omega_c", lo=0.0, lo_open=True)
        b.temperature = r.number(sec, "temperature", lo=0.0, default=0.0)
        b.domain_max = r.number(sec, "domain_max", lo=0.0, lo_open=True)
        if b.spectral_file is None:
            if b.alpha is None:
                r.fail("missing alpha (or spectral_file)", sec)
            if b.omega_c is None:
                r.fail("missing omega_c", sec)
        else:
            if b.alpha is not None:
                r.fail("give either alpha/omega_c or spectral_file, not both", sec, "alpha")
            base = Path(path).parent
            f = Path(b.spectral_file)
            if not (f if f.is_absolute() else base / f).exists():
                r.fail(f"spectral file {b.spectral_file!r} not found", sec, "spectral_file")
        cfg.baths.append(b)

    num = {}
    if parser.has_section("numerics"):
        r.unknown("numerics", _NUMERIC_INT | _NUMERIC_FLOAT)
        for key in _NUMERIC_INT:
            val = r.number("numerics", key, kind=int, lo=1 if key != "local_dim" else 2)
            if val is not None:
                num[key] = val
        for key, lo, hi, lo_open in (("svd_cutoff", 0.0, 0.999999, False), ("dt", 0.0, None, True),
                                     ("t_max", 0.0, None, True)):
            val = r.number("numerics", key, lo=lo, hi=hi, lo_open=lo_open)
            if val is not None:
                num[key] = val
        if num.get("n_max", 2) > 4:
            r.fail("n_max must be <= 4", "numerics", "n_max")
    try:
        cfg.numerics = Numerics(**num)
    except ValueError as exc:
        r.fail(str(exc), "numerics")

    if parser.has_section("output"):
        r.unknown("output", _OUTPUT_KEYS)
        sec = parser["output"]
        cfg.output.directory = sec.get("directory", "out").strip()
        fmts = sec.get("formats", "csv svg").replace(",", " ").split()
        bad = [f for f in fmts if f not in ("csv", "svg")]
        if bad:
            r.fail(f"unknown output format {bad[0]!r} (csv, svg)", "output", "formats")
        cfg.output.formats = fmts
        for key in ("strict", "checkpoint"):
            try:
                setattr(cfg.output, key, sec.getboolean(key, fallback=False))
            except ValueError:
                r.fail(f"{key} must be true or false", "output", key)
    try:
        cfg.params()
        cfg.bath_specs()
    except (ValueError, OSError) as exc:
        raise ConfigError(str(exc), path, None) from None
    return cfg


def _parse_state(raw: str, r: _Reader):
    if raw in _NAMED_STATES or raw == "mixed":
        return raw
    parts = raw.replace(",", " ").split()
    if len(parts) == 3:
        try:
            vec = tuple(float(x) for x in parts)
        except ValueError:
            vec = None
        if vec is not None:
            if math.sqrt(sum(x * x for x in vec)) > 1 + 1e-12:
                r.fail("Bloch vector norm exceeds 1", "model", "initial_state")
            return vec
    r.fail(f"initial_state {raw!r}: expected a state name, 'mixed' or a Bloch vector 'x y z'", "model",
           "initial_state")


def config_from_manifest(data: dict, path: str = "<manifest>") -> RunConfig:
    """Rebuild a configuration from the ``config`` block of a run manifest."""
    block = data.get("config", data)
    try:
        m = block["model"]
        state = m["initial_state"]
        cfg = RunConfig(
            epsilon0=m["epsilon0"],
            delta=m["delta"],
            initial_state=state if isinstance(state, str) else tuple(state),
            baths=[BathConfig(**b) for b in block["baths"]],
            numerics=Numerics(**block["numerics"]),
            output=OutputConfig(**block["output"]),
            source=path,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed manifest: {exc}", path, None) from None
    if not cfg.baths:
        raise ConfigError("manifest lists no baths", path, None)
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(str(exc), str(path), None) from None
    if path.suffix == ".json":
        try:
            return config_from_manifest(json.loads(text), str(path))
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, str(path), exc.lineno) from None
    return parse_config_text(text, str(path))


# desk-scale versions of the two experiment setups
PRESETS = {
    "fig3": """\
[model]
epsilon0 = 1.0
delta = 0.0
initial_state = plus_x

[bath.1]
alpha = 0.5
omega_c = 5.0
temperature = 0
domain_max = 30

[numerics]
chain_length = 24
local_dim = 6
max_bond = 32
dt = 0.01
t_max = 1.5
sample_stride = 10
n_max = 2

[output]
directory = out-fig3
formats = csv svg
""",
    "fig4": """\
[model]
epsilon0 = 1.0
delta = 0.0
initial_state = up_z

[bath.1]
alpha = 0.05
omega_c = 5.0
temperature = 1
domain_max = 30

[bath.2]
alpha = 0.5
omega_c = 5.0
temperature = 0
domain_max = 30

[numerics]
chain_length = 16
local_dim = 6
max_bond = 32
dt = 0.01
t_max = 1.0
sample_stride = 10
n_max = 2

[output]
directory = out-fig4
formats = csv svg
""",
}


def preset(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r} (choose from {', '.join(PRESETS)})", f"<preset:{name}>")
    return parse_config_text(PRESETS[name], f"<preset:{name}>")
