"""Network/environment data model, config parsing and generator assembly.

All energies and rates are angular frequencies with hbar = 1. A config may
declare ``unit: wavenumber`` in which case every frequency-like input is
multiplied by ``2*pi*c`` expressed in the chosen ``time_unit`` (bath mode
amplitudes ``g`` carry frequency squared and get the factor squared).
"""
from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence, Union

import numpy as np
import yaml

SPEED_OF_LIGHT_CM_PER_S = 2.99792458e10
TIME_UNITS = {"s": 1.0, "ps": 1e-12, "fs": 1e-15}

HERMITIAN_REPAIR_TOL = 1e-12
STATE_TOL = 1e-9


class ConfigError(ValueError):
    """Invalid model document or model invariant violation.

    ``path`` points at the offending field, e.g. ``relaxation[0].to``.
    """

    def __init__(self, message: str, path: str = ""):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BathMode:
    """One exponential term ``g * exp(-(gamma + i*omega) * t)`` of a bath correlation function."""

    g: float
    gamma: float
    omega: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.g) and math.isfinite(self.gamma) and math.isfinite(self.omega)):
            raise ConfigError("bath mode parameters must be finite")
        if self.g < 0:
            raise ConfigError(f"g must be >= 0, got {self.g}")
        if self.gamma <= 0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")

    @property
    def w(self) -> complex:
        return complex(self.gamma, self.omega)

    def correlation(self, t):
        return self.g * np.exp(-self.w * np.asarray(t))


@dataclass(frozen=True)
class Markovian:
    rate: float

    def __post_init__(self):
        if not math.isfinite(self.rate) or self.rate < 0:
            raise ConfigError(f"rate must be a finite value >= 0, got {self.rate}")


@dataclass(frozen=True)
class NonMarkovian:
    modes: tuple[BathMode, ...]

    def __post_init__(self):
        if len(self.modes) == 0:
            raise ConfigError("non-Markovian channel needs at least one bath mode")


ChannelKind = Union[Markovian, NonMarkovian]


@dataclass(frozen=True)
class DephasingChannel:
    site: int
    kind: ChannelKind


@dataclass(frozen=True)
class RelaxationChannel:
    """Relaxation from ``source`` to ``target``; coupling operator ``|target><source|``."""

    source: int
    target: int
    kind: ChannelKind

    def __post_init__(self):
        if self.source == self.target:
            raise ConfigError("self-relaxation forbidden")


@dataclass(frozen=True)
class SiteNetwork:
    energies: tuple[float, ...]
    couplings: tuple[tuple[int, int, float], ...] = ()
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        n = len(self.energies)
        if n < 1:
            raise ConfigError("network needs at least one site")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(n)))
        if len(self.labels) != n:
            raise ConfigError("one label per site required")
        if len(set(self.labels)) != n:
            raise ConfigError("site labels must be unique")
        seen = set()
        for l, m, v in self.couplings:
            if not (0 <= l < n and 0 <= m < n):
                raise ConfigError(f"coupling ({l}, {m}) index out of range")
            if l == m:
                raise ConfigError(f"self-coupling at site {l}")
            if l > m:
                raise ConfigError(f"coupling ({l}, {m}) must be stored with l < n")
            if (l, m) in seen:
                raise ConfigError(f"duplicate coupling ({l}, {m})")
            if not math.isfinite(v):
                raise ConfigError(f"coupling ({l}, {m}) is not finite")
            seen.add((l, m))

    @property
    def n_sites(self) -> int:
        return len(self.energies)

    def hamiltonian(self) -> np.ndarray:
        h = np.diag(np.asarray(self.energies, dtype=float))
        for l, n, v in self.couplings:
            h[l, n] = v
            h[n, l] = v
        return h


@dataclass(frozen=True)
class EnvironmentSpec:
    dephasing: tuple[DephasingChannel, ...] = ()
    relaxation: tuple[RelaxationChannel, ...] = ()

    def validate(self, n_sites: int) -> None:
        sites = set()
        for i, ch in enumerate(self.dephasing):
            if not 0 <= ch.site < n_sites:
                raise ConfigError(f"site {ch.site} out of range", f"dephasing[{i}].site")
            if ch.site in sites:
                raise ConfigError(f"duplicate dephasing channel on site {ch.site}", f"dephasing[{i}]")
            sites.add(ch.site)
        pairs = set()
        for i, ch in enumerate(self.relaxation):
            for name in ("source", "target"):
                if not 0 <= getattr(ch, name) < n_sites:
                    raise ConfigError(f"{name} {getattr(ch, name)} out of range", f"relaxation[{i}]")
            if (ch.source, ch.target) in pairs:
                raise ConfigError(
                    f"duplicate relaxation channel {ch.source}->{ch.target}", f"relaxation[{i}]"
                )
            pairs.add((ch.source, ch.target))

    @property
    def is_markovian(self) -> bool:
        return all(isinstance(ch.kind, Markovian) for ch in (*self.dephasing, *self.relaxation))


@dataclass(frozen=True)
class SingleSite:
    index: int

    def density_matrix(self, n: int) -> np.ndarray:
        if not 0 <= self.index < n:
            raise ConfigError(f"initial site {self.index} out of range")
        rho = np.zeros((n, n), dtype=complex)
        rho[self.index, self.index] = 1.0
        return rho


@dataclass(frozen=True)
class UniformSites:
    indices: tuple[int, ...]

    def __post_init__(self):
        if not self.indices:
            raise ConfigError("initial site list is empty")
        if len(set(self.indices)) != len(self.indices):
            raise ConfigError("initial site list has duplicates")

    def density_matrix(self, n: int) -> np.ndarray:
        rho = np.zeros((n, n), dtype=complex)
        for i in self.indices:
            if not 0 <= i < n:
                raise ConfigError(f"initial site {i} out of range")
            rho[i, i] = 1.0 / len(self.indices)
        return rho


@dataclass(frozen=True)
class ExplicitMatrix:
    """Explicit initial density matrix, validated on construction."""

    matrix: tuple[tuple[complex, ...], ...]

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigError("initial matrix must be square")
        if not np.all(np.isfinite(m)):
            raise ConfigError("initial matrix has non-finite entries")
        asym = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
        if asym > HERMITIAN_REPAIR_TOL:
            raise ConfigError(f"initial matrix is not Hermitian (max asymmetry {asym:.3e})")
        m = 0.5 * (m + m.conj().T)
        tr = np.trace(m).real
        if abs(tr - 1.0) > STATE_TOL:
            raise ConfigError(f"initial matrix trace is {tr!r}, expected 1")
        lam = np.linalg.eigvalsh(m)
        if lam[0] < -STATE_TOL:
            raise ConfigError(
                f"initial matrix is not positive semidefinite "
                f"(eigenvalues {', '.join(f'{x:.6g}' for x in lam)})"
            )
        object.__setattr__(self, "matrix", tuple(tuple(complex(x) for x in row) for row in m))

    def density_matrix(self, n: int) -> np.ndarray:
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (n, n):
            raise ConfigError(f"initial matrix is {m.shape[0]}x{m.shape[1]}, network has {n} sites")
        return m


InitialState = Union[SingleSite, UniformSites, ExplicitMatrix]


@dataclass(frozen=True)
class RunParameters:
    t_final: float
    dt_output: float
    dt: float | None = None
    rtol: float | None = None
    atol: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.t_final) and self.t_final >= 0):
            raise ConfigError("t_final must be >= 0", "run.t_final")
        if not (math.isfinite(self.dt_output) and self.dt_output > 0):
            raise ConfigError("dt_output must be > 0", "run.dt_output")
        if self.dt is None and (self.rtol is None or self.atol is None):
            raise ConfigError("integrator needs dt or both rtol and atol", "run.integrator")
        if self.dt is not None and not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError("dt must be > 0", "run.integrator.dt")
        for name in ("rtol", "atol"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be > 0", f"run.integrator.{name}")


@dataclass(frozen=True)
class Model:
    network: SiteNetwork
    environment: EnvironmentSpec = EnvironmentSpec()
    initial: InitialState | None = None
    run: RunParameters | None = None
    # audit only: the values above are already converted to angular units
    unit: str = field(default="angular", compare=False)
    time_unit: str | None = field(default=None, compare=False)
    unit_factor: float = field(default=1.0, compare=False)

    def __post_init__(self):
        self.environment.validate(self.network.n_sites)
        if self.initial is not None:
            self.initial.density_matrix(self.network.n_sites)

    @property
    def n_sites(self) -> int:
        return self.network.n_sites

    @property
    def labels(self) -> tuple[str, ...]:
        return self.network.labels

    def initial_density_matrix(self) -> np.ndarray:
        if self.initial is None:
            raise ConfigError("model has no initial state", "initial")
        return self.initial.density_matrix(self.n_sites)

    def model_hash(self) -> str:
        """Hash of the physical content (network, environment, initial state)."""
        doc = serialize(self)
        doc.pop("run", None)
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Channel:
    """A coupling operator ``|target><source|`` with its bath."""

    kind: str  # "dephasing" | "relaxation"
    source: int
    target: int
    rate: float | None
    modes: tuple[BathMode, ...] = ()

    @property
    def markovian(self) -> bool:
        return self.rate is not None

    def coupling(self, n: int) -> np.ndarray:
        op = np.zeros((n, n), dtype=complex)
        op[self.target, self.source] = 1.0
        return op


@dataclass(frozen=True, eq=False)
class GeneratorSet:
    """Everything the right-hand sides need, in flat array form.

    Channel ``c`` owns coupling ``L_c = |ch_tgt[c]><ch_src[c]|``. Markovian
    channels carry the constant auxiliary operator ``ch_const[c] * L_c``
    (``ch_const = rate/2``); non-Markovian ones carry the sum of their modes'
    auxiliary matrices, mode ``m`` belonging to channel ``mode_ch[m]``.
    """

    H: np.ndarray
    channels: tuple[Channel, ...]
    ch_src: np.ndarray
    ch_tgt: np.ndarray
    ch_const: np.ndarray
    mode_ch: np.ndarray
    mode_g: np.ndarray
    mode_w: np.ndarray
    gamma_dephasing: np.ndarray
    gamma_relaxation: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.H.shape[0]

    @property
    def n_modes(self) -> int:
        return len(self.mode_ch)

    @property
    def is_markovian(self) -> bool:
        return all(ch.markovian for ch in self.channels)

    def couplings(self) -> list[np.ndarray]:
        return [ch.coupling(self.n_sites) for ch in self.channels]

    def kernel_args(self) -> tuple:
        return (self.H, self.ch_src, self.ch_tgt, self.ch_const,
                self.mode_ch, self.mode_g, self.mode_w)

    def zero_aux(self) -> np.ndarray:
        return np.zeros((self.n_modes, self.n_sites, self.n_sites), dtype=complex)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def build_generators(network: SiteNetwork, env: EnvironmentSpec) -> GeneratorSet:
    n = network.n_sites
    env.validate(n)
    channels = []
    for ch in env.dephasing:
        channels.append(_channel("dephasing", ch.site, ch.site, ch.kind))
    for ch in env.relaxation:
        channels.append(_channel("relaxation", ch.source, ch.target, ch.kind))

    gamma_d = np.zeros(n)
    gamma_r = np.zeros((n, n))
    mode_ch, mode_g, mode_w = [], [], []
    for c, ch in enumerate(channels):
        if ch.markovian:
            if ch.kind == "dephasing":
                gamma_d[ch.source] = ch.rate
            else:
                gamma_r[ch.source, ch.target] = ch.rate
        for m in ch.modes:
            mode_ch.append(c)
            mode_g.append(m.g)
            mode_w.append(m.w)

    return GeneratorSet(
        H=_frozen(network.hamiltonian()),
        channels=tuple(channels),
        ch_src=_frozen(np.array([c.source for c in channels], dtype=np.int64)),
        ch_tgt=_frozen(np.array([c.target for c in channels], dtype=np.int64)),
        ch_const=_frozen(np.array([0.5 * c.rate if c.markovian else 0.0 for c in channels],
                                  dtype=complex)),
        mode_ch=_frozen(np.array(mode_ch, dtype=np.int64)),
        mode_g=_frozen(np.array(mode_g, dtype=float)),
        mode_w=_frozen(np.array(mode_w, dtype=complex)),
        gamma_dephasing=_frozen(gamma_d),
        gamma_relaxation=_frozen(gamma_r),
    )


def _channel(kind, source, target, ck: ChannelKind) -> Channel:
    if isinstance(ck, Markovian):
        return Channel(kind, source, target, ck.rate)
    return Channel(kind, source, target, None, tuple(ck.modes))


# ---------------------------------------------------------------------------
# Config documents
# ---------------------------------------------------------------------------


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats without a dot (``1e-6``)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789"),
)


def load_document(path: str | Path) -> dict:
    path = Path(path)
    text = path.read_text()
    try:
        if path.suffix.lower() == ".json":
            doc = json.loads(text)
        else:
            doc = yaml.load(text, Loader=_Loader)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse document: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a mapping")
    return doc


def load_model(path: str | Path) -> Model:
    return parse_config(load_document(path))


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", path)
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError("value must be finite", path)
    return value


def _mapping(value: Any, path: str) -> Mapping:
    if not isinstance(value, Mapping):
        raise ConfigError(f"expected a mapping, got {type(value).__name__}", path)
    return value


def _sequence(value: Any, path: str) -> Sequence:
    if value is None:
        return []
    if isinstance(value, (str, bytes)) or not isinstance(value, Sequence):
        raise ConfigError(f"expected a list, got {type(value).__name__}", path)
    return value


def _keys(obj: Mapping, allowed: set[str], path: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) {sorted(map(str, extra))}", path)


def parse_config(doc: Mapping) -> Model:
    """Build a validated :class:`Model` from a parsed document.

    Raises
    ------
    ConfigError
        With ``path`` set to the offending field.
    """
    doc = _mapping(doc, "")
    _keys(doc, {"unit", "time_unit", "sites", "couplings", "dephasing", "relaxation",
                "initial", "run"}, "")

    unit = doc.get("unit", "angular")
    time_unit = doc.get("time_unit")
    if unit == "angular":
        if time_unit is not None:
            raise ConfigError("time_unit only applies to unit: wavenumber", "time_unit")
        factor = 1.0
    elif unit == "wavenumber":
        time_unit = time_unit or "fs"
        if time_unit not in TIME_UNITS:
            raise ConfigError(f"time_unit must be one of {sorted(TIME_UNITS)}", "time_unit")
        factor = 2.0 * math.pi * SPEED_OF_LIGHT_CM_PER_S * TIME_UNITS[time_unit]
    else:
        raise ConfigError(f"unit must be 'angular' or 'wavenumber', got {unit!r}", "unit")

    sites = _sequence(doc.get("sites"), "sites")
    if not sites:
        raise ConfigError("at least one site required", "sites")
    labels, energies = [], []
    for i, s in enumerate(sites):
        p = f"sites[{i}]"
        s = _mapping(s, p)
        _keys(s, {"label", "energy"}, p)
        label = str(s.get("label", i))
        if label in labels:
            raise ConfigError(f"duplicate label {label!r}", f"{p}.label")
        labels.append(label)
        if "energy" not in s:
            raise ConfigError("missing energy", p)
        energies.append(_number(s["energy"], f"{p}.energy") * factor)
    n = len(labels)
    index = {lab: i for i, lab in enumerate(labels)}

    def site_ref(value, path):
        # strings are labels, integers are 0-based indices
        if isinstance(value, str):
            if value in index:
                return index[value]
            raise ConfigError(f"unknown site label {value!r}", path)
        if isinstance(value, int) and not isinstance(value, bool):
            if 0 <= value < n:
                return value
            raise ConfigError(f"site index {value} out of range [0, {n})", path)
        raise ConfigError(f"site reference must be a label or an index, got {value!r}", path)

    couplings = {}
    for i, c in enumerate(_sequence(doc.get("couplings"), "couplings")):
        p = f"couplings[{i}]"
        c = _mapping(c, p)
        _keys(c, {"from", "to", "value"}, p)
        for k in ("from", "to", "value"):
            if k not in c:
                raise ConfigError(f"missing {k}", p)
        a, b = site_ref(c["from"], f"{p}.from"), site_ref(c["to"], f"{p}.to")
        if a == b:
            raise ConfigError("self-coupling forbidden", p)
        key = (min(a, b), max(a, b))
        if key in couplings:
            raise ConfigError(f"duplicate coupling between {labels[a]} and {labels[b]}", p)
        couplings[key] = _number(c["value"], f"{p}.value") * factor
    network = SiteNetwork(
        energies=tuple(energies),
        couplings=tuple((l, m, v) for (l, m), v in couplings.items()),
        labels=tuple(labels),
    )

    def kind(obj, path):
        has_rate, has_modes = "rate" in obj, "modes" in obj
        if has_rate == has_modes:
            raise ConfigError("exactly one of 'rate' or 'modes' required", path)
        if has_rate:
            rate = _number(obj["rate"], f"{path}.rate")
            if rate < 0:
                raise ConfigError(f"negative rate {rate}", f"{path}.rate")
            return Markovian(rate * factor)
        modes = _sequence(obj["modes"], f"{path}.modes")
        if not modes:
            raise ConfigError("mode list is empty", f"{path}.modes")
        out = []
        for j, m in enumerate(modes):
            mp = f"{path}.modes[{j}]"
            m = _mapping(m, mp)
            _keys(m, {"g", "gamma", "omega"}, mp)
            for k in ("g", "gamma"):
                if k not in m:
                    raise ConfigError(f"missing {k}", mp)
            g = _number(m["g"], f"{mp}.g")
            gamma = _number(m["gamma"], f"{mp}.gamma")
            omega = _number(m.get("omega", 0.0), f"{mp}.omega")
            if g < 0:
                raise ConfigError(f"g must be >= 0, got {g}", f"{mp}.g")
            if gamma <= 0:
                raise ConfigError(f"gamma must be > 0, got {gamma}", f"{mp}.gamma")
            out.append(BathMode(g * factor**2, gamma * factor, omega * factor))
        return NonMarkovian(tuple(out))

    dephasing, seen = [], set()
    for i, d in enumerate(_sequence(doc.get("dephasing"), "dephasing")):
        p = f"dephasing[{i}]"
        d = _mapping(d, p)
        _keys(d, {"site", "rate", "modes"}, p)
        if "site" not in d:
            raise ConfigError("missing site", p)
        site = site_ref(d["site"], f"{p}.site")
        if site in seen:
            raise ConfigError(f"duplicate dephasing channel on site {labels[site]}", p)
        seen.add(site)
        dephasing.append(DephasingChannel(site, kind(d, p)))

    relaxation, seen = [], set()
    for i, r in enumerate(_sequence(doc.get("relaxation"), "relaxation")):
        p = f"relaxation[{i}]"
        r = _mapping(r, p)
        _keys(r, {"from", "to", "rate", "modes"}, p)
        for k in ("from", "to"):
            if k not in r:
                raise ConfigError(f"missing {k}", p)
        src, tgt = site_ref(r["from"], f"{p}.from"), site_ref(r["to"], f"{p}.to")
        if src == tgt:
            raise ConfigError("self-relaxation forbidden", f"{p}.to")
        if (src, tgt) in seen:
            raise ConfigError(f"duplicate relaxation channel {labels[src]}->{labels[tgt]}", p)
        seen.add((src, tgt))
        relaxation.append(RelaxationChannel(src, tgt, kind(r, p)))
    env = EnvironmentSpec(tuple(dephasing), tuple(relaxation))

    initial = None
    if doc.get("initial") is not None:
        ini = _mapping(doc["initial"], "initial")
        present = [k for k in ("site", "sites", "matrix") if k in ini]
        _keys(ini, {"site", "sites", "matrix"}, "initial")
        if len(present) != 1:
            raise ConfigError("exactly one of 'site', 'sites', 'matrix' required", "initial")
        if "site" in ini:
            initial = SingleSite(site_ref(ini["site"], "initial.site"))
        elif "sites" in ini:
            idx = tuple(site_ref(s, f"initial.sites[{j}]")
                        for j, s in enumerate(_sequence(ini["sites"], "initial.sites")))
            try:
                initial = UniformSites(idx)
            except ConfigError as exc:
                raise ConfigError(exc.message, "initial.sites") from None
        else:
            rows = _sequence(ini["matrix"], "initial.matrix")
            if len(rows) != n:
                raise ConfigError(f"expected {n} rows, got {len(rows)}", "initial.matrix")
            mat = []
            for a, row in enumerate(rows):
                row = _sequence(row, f"initial.matrix[{a}]")
                if len(row) != n:
                    raise ConfigError(f"expected {n} entries", f"initial.matrix[{a}]")
                mat.append(tuple(_entry(x, f"initial.matrix[{a}][{b}]") for b, x in enumerate(row)))
            try:
                initial = ExplicitMatrix(tuple(mat))
            except ConfigError as exc:
                raise ConfigError(exc.message, "initial.matrix") from None

    run = None
    if doc.get("run") is not None:
        r = _mapping(doc["run"], "run")
        _keys(r, {"t_final", "dt_output", "integrator"}, "run")
        for k in ("t_final", "dt_output"):
            if k not in r:
                raise ConfigError(f"missing {k}", "run")
        integ = _mapping(r.get("integrator", {}), "run.integrator")
        _keys(integ, {"dt", "rtol", "atol"}, "run.integrator")
        if "dt" in integ and ("rtol" in integ or "atol" in integ):
            raise ConfigError("give either dt or rtol/atol, not both", "run.integrator")
        opt = {k: _number(integ[k], f"run.integrator.{k}") for k in ("dt", "rtol", "atol")
               if k in integ}
        run = RunParameters(
            t_final=_number(r["t_final"], "run.t_final"),
            dt_output=_number(r["dt_output"], "run.dt_output"),
            **opt,
        )

    return Model(network, env, initial, run, unit=unit, time_unit=time_unit, unit_factor=factor)


def _entry(x, path) -> complex:
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return complex(_number(x, path), 0.0)
    pair = _sequence(x, path)
    if len(pair) != 2:
        raise ConfigError("matrix entry must be a number or a [re, im] pair", path)
    return complex(_number(pair[0], path), _number(pair[1], path))


def _kind_doc(k: ChannelKind) -> dict:
    if isinstance(k, Markovian):
        return {"rate": k.rate}
    return {"modes": [{"g": m.g, "gamma": m.gamma, "omega": m.omega} for m in k.modes]}


def serialize(model: Model) -> dict:
    """Inverse of :func:`parse_config`. Values are written in angular units."""
    labels = model.labels
    doc: dict[str, Any] = {
        "sites": [{"label": lab, "energy": e} for lab, e in zip(labels, model.network.energies)],
        "couplings": [{"from": labels[l], "to": labels[n], "value": v}
                      for l, n, v in model.network.couplings],
        "dephasing": [{"site": labels[ch.site], **_kind_doc(ch.kind)}
                      for ch in model.environment.dephasing],
        "relaxation": [{"from": labels[ch.source], "to": labels[ch.target], **_kind_doc(ch.kind)}
                       for ch in model.environment.relaxation],
    }
    ini = model.initial
    if isinstance(ini, SingleSite):
        doc["initial"] = {"site": labels[ini.index]}
    elif isinstance(ini, UniformSites):
        doc["initial"] = {"sites": [labels[i] for i in ini.indices]}
    elif isinstance(ini, ExplicitMatrix):
        doc["initial"] = {"matrix": [[[z.real, z.imag] for z in row] for row in ini.matrix]}
    if model.run is not None:
        r = model.run
        integ = {"dt": r.dt} if r.dt is not None else {"rtol": r.rtol, "atol": r.atol}
        doc["run"] = {"t_final": r.t_final, "dt_output": r.dt_output, "integrator": integ}
    return doc


def dump_document(doc: Mapping, fmt: str = "yaml") -> str:
    if fmt == "json":
        return json.dumps(doc, indent=2)
    return yaml.safe_dump(dict(doc), sort_keys=False)
