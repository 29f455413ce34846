"""Scenario configuration: INI text with one section per concern.

Example::

    [scenario]
    name = proton_gamma

    [bath]
    omega_c = 100

    [sweep]
    var = gamma
    values = 0.001 0.018 0.18

Every named scenario supplies defaults; keys in the file override them.
``custom`` has no defaults beyond the generic ones.
"""
from __future__ import annotations

import configparser
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass

from .bath import SpectralKind, TailPolicy
from .errors import ConfigError, DomainError
from .potential import PROTON_MASS, potential_from_config

__all__ = [
    "K_B",
    "SCENARIOS",
    "SWEEP_VARS",
    "ScenarioConfig",
    "validate_config",
    "load_config",
    "config_to_text",
]

#: Boltzmann constant in E_h per kelvin
K_B = 3.166811563e-6

SCENARIOS = ("quartic_sweep", "dw_rescale", "dw_gamma", "proton_gamma", "proton_temperature", "custom")
SWEEP_VARS = ("gamma", "temperature_K", "kT", "b")

_DECADES = "0.001 0.01 0.1 1 10 100"

_DW = {"kind": "rescaled", "inner": "quartic_dw", "b": "4", "a4": "0.5", "a2": "0.5", "a1": "0.1"}
_PROTON_BATH = {"kind": "drude", "gamma": "0.018", "omega_c": "100", "mass": repr(PROTON_MASS)}

PRESETS = {
    "quartic_sweep": {
        "potential": {"kind": "quartic", "mass": "1", "omega": "1", "a": "2.5e-3"},
        "bath": {"kind": "exponential", "omega_c": "5", "mass": "1"},
        "thermal": {"kT": "0.5"},
        "sweep": {"var": "gamma", "values": _DECADES + " 1000"},
        "observables": {"q_b": "none"},
    },
    "dw_rescale": {
        "potential": dict(_DW),
        "bath": {"kind": "drude", "gamma": "0", "omega_c": "5", "mass": "1"},
        "thermal": {"kT": "0.5"},
        "sweep": {"var": "b", "values": "2 4 8"},
    },
    "dw_gamma": {
        "potential": dict(_DW),
        "bath": {"kind": "drude", "omega_c": "5", "mass": "1"},
        "thermal": {"kT": "0.5"},
        "sweep": {"var": "gamma", "values": _DECADES},
    },
    "proton_gamma": {
        "potential": {"kind": "proton"},
        "bath": dict(_PROTON_BATH),
        "thermal": {"kT": "0.00095"},
        "sweep": {"var": "gamma", "values": "0.001 0.01 0.018 0.1 0.18 1 10 100"},
        "sensitivity": {"omegas": "50 200"},
    },
    "proton_temperature": {
        "potential": {"kind": "proton"},
        "bath": dict(_PROTON_BATH),
        "thermal": {"kT": "0.00095"},
        "sweep": {"var": "temperature_K", "values": "240 270 300 330 360"},
        "sensitivity": {"omegas": "50 200"},
    },
    "custom": {},
}

_ALLOWED = {
    "scenario": {"name", "output", "workers"},
    "potential": None,
    "bath": {"kind", "gamma", "omega_c", "mass"},
    "thermal": {"kT", "temperature_K", "beta"},
    "sweep": {"var", "values"},
    "grid": {"n_q", "n_eta", "q_min", "q_max", "tail_ratio", "eta_sigmas"},
    "series": {"n_terms", "tail"},
    "observables": {"q_b", "bracket"},
    "references": {"gibbs", "usc", "gibbs_rtol", "gibbs_max_points"},
    "sensitivity": {"omegas", "tolerance"},
}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    potential: dict
    bath_kind: str
    gamma: float
    omega_c: float
    mass: float
    kT: float
    sweep_var: str
    sweep_values: tuple
    output: str = "mfgs_out"
    workers: int = 1
    n_q: int = 2001
    n_eta: int = 201
    q_bounds: tuple | None = None
    tail_ratio: float = 1e-12
    eta_sigmas: float = 6.0
    n_terms: int = 100_000
    tail_policy: str = TailPolicy.ANALYTIC.value
    q_b: str = "auto"
    bracket: tuple | None = None
    gibbs_reference: bool = True
    usc_reference: bool = True
    gibbs_rtol: float = 1e-6
    gibbs_max_points: int = 64001
    sensitivity_omegas: tuple = ()
    sensitivity_tolerance: float = 0.01

    def to_dict(self):
        d = asdict(self)
        d["sweep_values"] = list(self.sweep_values)
        d["sensitivity_omegas"] = list(self.sensitivity_omegas)
        d["q_bounds"] = list(self.q_bounds) if self.q_bounds else None
        d["bracket"] = list(self.bracket) if self.bracket else None
        return d

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def beta_at(self, value):
        """Inverse temperature for one sweep point."""
        if self.sweep_var == "temperature_K":
            return 1.0 / (K_B * value)
        if self.sweep_var == "kT":
            return 1.0 / value
        return 1.0 / self.kT

    def gamma_at(self, value):
        return value if self.sweep_var == "gamma" else self.gamma


def _floats(text):
    return [float(t) for t in str(text).replace(",", " ").split()]


def _to_bool(text):
    t = str(text).strip().lower()
    if t in ("1", "yes", "true", "on"):
        return True
    if t in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_ini(raw):
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    cp.read_string(raw)
    return {s: dict(cp.items(s)) for s in cp.sections()}


def validate_config(raw: str) -> ScenarioConfig:
    """Parse and range-check scenario text.

    Raises :class:`ConfigError` listing every failing field.
    """
    problems = []
    try:
        user = _parse_ini(raw)
    except configparser.Error as exc:
        raise ConfigError([("<file>", f"unparseable INI: {exc}")]) from None
    name = user.get("scenario", {}).get("name", "").strip()
    if name not in SCENARIOS:
        raise ConfigError([("scenario.name", f"must be one of {', '.join(SCENARIOS)}; got {name!r}")])
    for sec, keys in user.items():
        if sec not in _ALLOWED:
            problems.append((sec, "unknown section"))
            continue
        if _ALLOWED[sec] is not None:
            for k in keys:
                if k not in _ALLOWED[sec]:
                    problems.append((f"{sec}.{k}", "unknown key"))
    merged = {s: dict(v) for s, v in PRESETS[name].items()}
    for sec, keys in user.items():
        if sec == "potential" and "kind" in keys:
            merged[sec] = dict(keys)
        else:
            merged.setdefault(sec, {}).update(keys)

    def get(sec, key, default=None):
        return merged.get(sec, {}).get(key, default)

    def num(sec, key, default, cast=float, check=None, bound=""):
        raw_v = get(sec, key)
        if raw_v is None:
            return default
        try:
            v = cast(float(raw_v)) if cast is int else cast(raw_v)
        except (TypeError, ValueError):
            problems.append((f"{sec}.{key}", f"not a number: {raw_v!r}"))
            return default
        if cast is int and float(raw_v) != int(float(raw_v)):
            problems.append((f"{sec}.{key}", f"must be an integer, got {raw_v!r}"))
        if check is not None and not check(v):
            problems.append((f"{sec}.{key}", f"must be {bound}, got {raw_v}"))
        if isinstance(v, float) and not math.isfinite(v):
            problems.append((f"{sec}.{key}", "must be finite"))
        return v

    kind = str(get("bath", "kind", "drude")).strip().lower()
    if kind not in {k.value for k in SpectralKind}:
        problems.append(("bath.kind", f"must be 'drude' or 'exponential', got {kind!r}"))
    gamma = num("bath", "gamma", 0.0, check=lambda v: v >= 0, bound=">= 0")
    omega_c = num("bath", "omega_c", None, check=lambda v: v > 0, bound="> 0")
    if omega_c is None:
        problems.append(("bath.omega_c", "required"))
    mass = num("bath", "mass", 1.0, check=lambda v: v > 0, bound="> 0")

    th = merged.get("thermal", {})
    given = [k for k in ("kT", "temperature_K", "beta") if k in th]
    user_th = [k for k in ("kT", "temperature_K", "beta") if k in user.get("thermal", {})]
    pick = user_th[0] if user_th else (given[0] if given else None)
    if len(user_th) > 1:
        problems.append(("thermal", f"give only one of kT, temperature_K, beta (found {', '.join(user_th)})"))
    kT = None
    if pick is None:
        problems.append(("thermal", "one of kT, temperature_K, beta is required"))
    else:
        v = num("thermal", pick, None, check=lambda x: x > 0, bound="> 0")
        if v is not None and v > 0:
            kT = {"kT": v, "temperature_K": K_B * v, "beta": 1.0 / v if v else None}[pick]

    var = str(get("sweep", "var", "gamma")).strip()
    if var not in SWEEP_VARS:
        problems.append(("sweep.var", f"must be one of {', '.join(SWEEP_VARS)}, got {var!r}"))
    try:
        values = tuple(_floats(get("sweep", "values", "")))
    except ValueError:
        problems.append(("sweep.values", "not a list of numbers"))
        values = ()
    if not values:
        problems.append(("sweep.values", "sweep is empty"))
    elif any(b <= a for a, b in zip(values, values[1:])):
        problems.append(("sweep.values", "must be strictly increasing"))
    elif not all(math.isfinite(v) for v in values):
        problems.append(("sweep.values", "must be finite"))
    elif var == "gamma" and values[0] < 0:
        problems.append(("sweep.values", "gamma values must be >= 0"))
    elif var != "gamma" and values[0] <= 0:
        problems.append(("sweep.values", f"{var} values must be > 0"))

    pot = dict(merged.get("potential", {}))
    if not pot:
        problems.append(("potential.kind", "required"))
    else:
        try:
            probe = dict(pot)
            if var == "b":
                if str(probe.get("kind")) != "rescaled":
                    problems.append(("sweep.var", "b sweeps need potential.kind = rescaled"))
                probe["b"] = probe.get("b", "1")
            potential_from_config(probe)
        except (DomainError, KeyError, ValueError, TypeError) as exc:
            problems.append(("potential", str(exc)))

    n_q = num("grid", "n_q", 2001, int, lambda v: v >= 101, ">= 101")
    n_eta = num("grid", "n_eta", 201, int, lambda v: v >= 3, ">= 3")
    tail_ratio = num("grid", "tail_ratio", 1e-12, check=lambda v: 0 < v < 1, bound="in (0, 1)")
    eta_sigmas = num("grid", "eta_sigmas", 6.0, check=lambda v: v > 0, bound="> 0")
    q_bounds = None
    if "q_min" in merged.get("grid", {}) or "q_max" in merged.get("grid", {}):
        lo = num("grid", "q_min", None)
        hi = num("grid", "q_max", None)
        if lo is None or hi is None:
            problems.append(("grid", "q_min and q_max must be given together"))
        elif not hi > lo:
            problems.append(("grid.q_max", "must exceed grid.q_min"))
        else:
            q_bounds = (lo, hi)
    n_terms = num("series", "n_terms", 100_000, int, lambda v: v >= 100, ">= 100")
    tail = str(get("series", "tail", TailPolicy.ANALYTIC.value)).strip().lower()
    if tail not in {t.value for t in TailPolicy}:
        problems.append(("series.tail", f"must be one of {[t.value for t in TailPolicy]}"))

    q_b = str(get("observables", "q_b", "auto")).strip().lower()
    if q_b not in ("auto", "none"):
        try:
            q_b = repr(float(q_b))
        except ValueError:
            problems.append(("observables.q_b", "must be auto, none or a number"))
    bracket = None
    if get("observables", "bracket") is not None:
        try:
            br = _floats(get("observables", "bracket"))
            if len(br) != 2 or not br[1] > br[0]:
                raise ValueError
            bracket = tuple(br)
        except ValueError:
            problems.append(("observables.bracket", "must be two increasing numbers"))

    bools = {}
    for key, default in (("gibbs", True), ("usc", True)):
        try:
            bools[key] = _to_bool(get("references", key, default))
        except ValueError as exc:
            problems.append((f"references.{key}", str(exc)))
            bools[key] = default
    gibbs_rtol = num("references", "gibbs_rtol", 1e-6, check=lambda v: v > 0, bound="> 0")
    gibbs_max = num("references", "gibbs_max_points", 64001, int, lambda v: v >= 201, ">= 201")

    try:
        omegas = tuple(_floats(get("sensitivity", "omegas", "")))
        if any(o <= 0 for o in omegas):
            problems.append(("sensitivity.omegas", "must be > 0"))
    except ValueError:
        problems.append(("sensitivity.omegas", "not a list of numbers"))
        omegas = ()
    sens_tol = num("sensitivity", "tolerance", 0.01, check=lambda v: v > 0, bound="> 0")
    workers = num("scenario", "workers", 1, int, lambda v: v >= 1, ">= 1")
    output = str(get("scenario", "output", "mfgs_out"))

    if problems:
        raise ConfigError(problems)
    return ScenarioConfig(
        scenario=name,
        potential=pot,
        bath_kind=kind,
        gamma=gamma,
        omega_c=omega_c,
        mass=mass,
        kT=kT,
        sweep_var=var,
        sweep_values=values,
        output=output,
        workers=workers,
        n_q=n_q,
        n_eta=n_eta,
        q_bounds=q_bounds,
        tail_ratio=tail_ratio,
        eta_sigmas=eta_sigmas,
        n_terms=n_terms,
        tail_policy=tail,
        q_b=q_b,
        bracket=bracket,
        gibbs_reference=bools["gibbs"],
        usc_reference=bools["usc"],
        gibbs_rtol=gibbs_rtol,
        gibbs_max_points=gibbs_max,
        sensitivity_omegas=omegas,
        sensitivity_tolerance=sens_tol,
    )


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError([("<file>", f"cannot read {path}: {exc.strerror}")]) from None
    return validate_config(raw)


def _fmt(x):
    return repr(float(x))


def config_to_text(cfg: ScenarioConfig) -> str:
    """Serialize to INI text that :func:`validate_config` maps back to ``cfg``."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["scenario"] = {"name": cfg.scenario, "output": cfg.output, "workers": str(cfg.workers)}
    cp["potential"] = {k: str(v) for k, v in cfg.potential.items()}
    cp["bath"] = {"kind": cfg.bath_kind, "gamma": _fmt(cfg.gamma), "omega_c": _fmt(cfg.omega_c), "mass": _fmt(cfg.mass)}
    cp["thermal"] = {"kT": _fmt(cfg.kT)}
    cp["sweep"] = {"var": cfg.sweep_var, "values": " ".join(_fmt(v) for v in cfg.sweep_values)}
    grid = {"n_q": str(cfg.n_q), "n_eta": str(cfg.n_eta), "tail_ratio": _fmt(cfg.tail_ratio),
            "eta_sigmas": _fmt(cfg.eta_sigmas)}
    if cfg.q_bounds:
        grid["q_min"], grid["q_max"] = (_fmt(v) for v in cfg.q_bounds)
    cp["grid"] = grid
    cp["series"] = {"n_terms": str(cfg.n_terms), "tail": cfg.tail_policy}
    obs = {"q_b": cfg.q_b}
    if cfg.bracket:
        obs["bracket"] = " ".join(_fmt(v) for v in cfg.bracket)
    cp["observables"] = obs
    cp["references"] = {"gibbs": str(cfg.gibbs_reference).lower(), "usc": str(cfg.usc_reference).lower(),
                        "gibbs_rtol": _fmt(cfg.gibbs_rtol), "gibbs_max_points": str(cfg.gibbs_max_points)}
    cp["sensitivity"] = {"omegas": " ".join(_fmt(v) for v in cfg.sensitivity_omegas),
                         "tolerance": _fmt(cfg.sensitivity_tolerance)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
