"""YAML run configuration with full validation before any computation.

Every error names the dotted field and, when the YAML parser knows it, the
line it sits on.  Relative paths are resolved against the config file's
directory; ``package:<name>`` refers to a file bundled with the package.
"""
from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .circuit import RingSpec, UnitCellParams, WirebondSpec
from .coupling import CouplingSet, load_measured_table
from .errors import ConstructionError, DomainError, ValidationError
from .hamiltonian import ModelConfig
from .transmon import TransmonParams

TOP_KEYS = {"ring", "qubits", "couplings", "model", "sweeps", "output_dir", "seed"}
SWEEP_KEYS = {"modes", "gcouple", "jsweep", "zzsweep", "fit", "synth"}


class _Lines:
    """Line lookup for dotted field paths, built from the YAML node tree."""

    def __init__(self, text):
        self.map = {}
        try:
            root = yaml.compose(text)
        except yaml.YAMLError:
            root = None
        if root is not None:
            self._walk(root, "")

    def _walk(self, node, path):
        self.map.setdefault(path, node.start_mark.line + 1)
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = f"{path}.{k.value}" if path else str(k.value)
                self.map[p] = k.start_mark.line + 1
                self._walk(v, p)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self._walk(v, f"{path}[{i}]")

    def __call__(self, path):
        while path:
            if path in self.map:
                return self.map[path]
            path = path.rsplit(".", 1)[0] if "." in path else ""
        return None


@dataclass
class RunConfig:
    """Validated configuration.

    Attributes
    ----------
    ring : RingSpec or None
    qubits : (TransmonParams, TransmonParams) or None
    couplings : CouplingSet or None
    model : ModelConfig
    sweeps : dict
        Per-command settings, already type-checked.
    output_dir : Path
    seed : int
    """

    ring: Optional[RingSpec]
    qubits: Optional[tuple]
    couplings: Optional[CouplingSet]
    model: ModelConfig
    sweeps: dict = field(default_factory=dict)
    output_dir: Path = Path("out")
    seed: int = 0
    base_dir: Path = Path(".")


class _Validator:
    def __init__(self, text, base_dir):
        self.lines = _Lines(text)
        self.base = Path(base_dir)

    def fail(self, msg, path):
        raise ValidationError(msg, field=path, line=self.lines(path))

    def mapping(self, v, path, allowed=None):
        if not isinstance(v, dict):
            self.fail("expected a mapping", path)
        if allowed is not None:
            extra = sorted(set(v) - set(allowed))
            if extra:
                self.fail(f"unknown keys {extra}; allowed {sorted(allowed)}", f"{path}.{extra[0]}" if path else extra[0])
        return v

    def number(self, v, path, positive=False, nonneg=False):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
            self.fail(f"expected a finite number, got {v!r}", path)
        if positive and v <= 0:
            self.fail("must be positive", path)
        if nonneg and v < 0:
            self.fail("must be non-negative", path)
        return float(v)

    def integer(self, v, path, minimum=None):
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(f"expected an integer, got {v!r}", path)
        if minimum is not None and v < minimum:
            self.fail(f"must be >= {minimum}", path)
        return int(v)

    def boolean(self, v, path):
        if not isinstance(v, bool):
            self.fail(f"expected true or false, got {v!r}", path)
        return v

    def window(self, v, path):
        if not isinstance(v, (list, tuple)) or len(v) != 2:
            self.fail("expected [lo, hi]", path)
        lo, hi = (self.number(x, f"{path}[{i}]") for i, x in enumerate(v))
        if not lo < hi:
            self.fail("window needs lo < hi", path)
        return (lo, hi)

    def grid(self, v, path):
        """Either a list of numbers or ``{start, stop, step}`` (stop inclusive)."""
        if isinstance(v, dict):
            self.mapping(v, path, {"start", "stop", "step"})
            for k in ("start", "stop", "step"):
                if k not in v:
                    self.fail(f"missing '{k}'", path)
            a, b = self.number(v["start"], f"{path}.start"), self.number(v["stop"], f"{path}.stop")
            s = self.number(v["step"], f"{path}.step", positive=True)
            n = int(np.floor((b - a) / s + 1e-9)) + 1
            if n < 1:
                self.fail("grid is empty", path)
            if n > 100000:
                self.fail("grid has more than 100000 points", path)
            return [round(a + i * s, 12) for i in range(n)]
        if not isinstance(v, list) or not v:
            self.fail("expected a nonempty list or {start, stop, step}", path)
        return [self.number(x, f"{path}[{i}]") for i, x in enumerate(v)]

    def path(self, v, path, must_exist=True):
        if not isinstance(v, str) or not v:
            self.fail("expected a file path", path)
        if v.startswith("package:"):
            name = v.split(":", 1)[1]
            res = resources.files("lhring.data").joinpath(name)
            if not res.is_file():
                self.fail(f"no bundled file named {name!r}", path)
            return res
        p = Path(v)
        p = p if p.is_absolute() else self.base / p
        if must_exist and not p.is_file():
            self.fail(f"file not found: {p}", path)
        return p


def _ring(vd: _Validator, r):
    vd.mapping(r, "ring", {"N", "cell", "C_C", "wirebonds", "wirebond_model", "qubit_nodes", "C_QM", "C_S",
                           "L_seg", "delta_x"})
    for k in ("N", "cell"):
        if k not in r:
            vd.fail(f"missing '{k}'", "ring")
    N = vd.integer(r["N"], "ring.N", minimum=4)
    c = vd.mapping(r["cell"], "ring.cell", {"C_L", "L_L", "C_R", "L_R"})
    for k in ("C_L", "L_L"):
        if k not in c:
            vd.fail(f"missing '{k}'", "ring.cell")
    cellkw = {k: vd.number(c[k], f"ring.cell.{k}", nonneg=True) for k in c}
    try:
        cell = UnitCellParams(**cellkw)
    except (ConstructionError, DomainError) as exc:
        vd.fail(str(exc), "ring.cell")
    bonds = []
    wb = r.get("wirebonds", []) or []
    if not isinstance(wb, list):
        vd.fail("expected a list", "ring.wirebonds")
    for i, b in enumerate(wb):
        p = f"ring.wirebonds[{i}]"
        vd.mapping(b, p, {"attach_index", "L_W"})
        if "attach_index" not in b:
            vd.fail("missing 'attach_index'", p)
        try:
            bonds.append(WirebondSpec(vd.integer(b["attach_index"], f"{p}.attach_index", 0),
                                      vd.number(b.get("L_W", 1.5), f"{p}.L_W", positive=True)))
        except (ConstructionError, DomainError) as exc:
            vd.fail(str(exc), p)
    qn = r.get("qubit_nodes", {}) or {}
    vd.mapping(qn, "ring.qubit_nodes")
    nodes = {str(k): vd.integer(v, f"ring.qubit_nodes.{k}", 0) for k, v in qn.items()}
    kw = {}
    for k in ("C_C", "C_QM", "C_S", "L_seg", "delta_x"):
        if k in r:
            kw[k] = vd.number(r[k], f"ring.{k}", positive=True)
    if "wirebond_model" in r:
        kw["wirebond_model"] = r["wirebond_model"]
    try:
        return RingSpec(N=N, cell=cell, wirebonds=bonds, qubit_nodes=nodes, **kw)
    except (ConstructionError, DomainError) as exc:
        vd.fail(str(exc), "ring")


def _qubits(vd: _Validator, q):
    vd.mapping(q, "qubits", {"A", "B"})
    out = []
    for name in ("A", "B"):
        if name not in q:
            vd.fail(f"missing qubit '{name}'", "qubits")
        d = vd.mapping(q[name], f"qubits.{name}", {"E_J0", "E_C", "d", "C_S", "C_QM", "C_QR", "n_g", "phi_ext"})
        for k in ("E_J0", "E_C"):
            if k not in d:
                vd.fail(f"missing '{k}'", f"qubits.{name}")
        kw = {k: vd.number(v, f"qubits.{name}.{k}") for k, v in d.items()}
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                out.append(TransmonParams(**kw))
        except (DomainError, TypeError) as exc:
            vd.fail(str(exc), f"qubits.{name}")
    return tuple(out)


def _model(vd: _Validator, m):
    if m is None:
        return ModelConfig()
    vd.mapping(m, "model", {"q_levels", "max_excitations", "included_modes", "direct_qubit_coupling",
                            "pair_floor", "basis_cap"})
    kw = {}
    for k, lo in (("q_levels", 2), ("max_excitations", 1), ("basis_cap", 1)):
        if k in m:
            kw[k] = vd.integer(m[k], f"model.{k}", lo)
    for k in ("direct_qubit_coupling", "pair_floor"):
        if k in m:
            kw[k] = vd.number(m[k], f"model.{k}")
    if "included_modes" in m and m["included_modes"] is not None:
        if not isinstance(m["included_modes"], list):
            vd.fail("expected a list of mode indices", "model.included_modes")
        kw["included_modes"] = [vd.integer(x, f"model.included_modes[{i}]", 0)
                                for i, x in enumerate(m["included_modes"])]
    try:
        return ModelConfig(**kw)
    except DomainError as exc:
        vd.fail(str(exc), "model")


def _couplings(vd: _Validator, c):
    if c is None:
        return None
    if c == "measured":
        return load_measured_table()
    p = vd.path(c, "couplings")
    try:
        return CouplingSet.from_csv(p.read_text())
    except ValidationError as exc:
        raise ValidationError(f"in {p}: {exc}", field="couplings", line=vd.lines("couplings")) from None


def _sweeps(vd: _Validator, s, cfg: RunConfig):
    if s is None:
        return {}
    vd.mapping(s, "sweeps", SWEEP_KEYS)
    out = {}
    if "modes" in s:
        d = vd.mapping(s["modes"] or {}, "sweeps.modes", {"window", "with_qubits"})
        out["modes"] = {"window": vd.window(d["window"], "sweeps.modes.window") if "window" in d else None,
                        "with_qubits": vd.boolean(d.get("with_qubits", True), "sweeps.modes.with_qubits")}
    if "gcouple" in s:
        d = vd.mapping(s["gcouple"] or {}, "sweeps.gcouple", {"window", "analytic", "loading"})
        out["gcouple"] = {
            "window": vd.window(d.get("window", [4.0, 6.5]), "sweeps.gcouple.window"),
            "analytic": vd.boolean(d.get("analytic", False), "sweeps.gcouple.analytic"),
            "loading": d.get("loading", "weak"),
        }
        if out["gcouple"]["loading"] not in ("weak", "static"):
            vd.fail("loading must be 'weak' or 'static'", "sweeps.gcouple.loading")
    if "jsweep" in s:
        d = vd.mapping(s["jsweep"], "sweeps.jsweep", {"freqs", "least_action", "offset", "span"})
        if "freqs" not in d:
            vd.fail("missing 'freqs'", "sweeps.jsweep")
        out["jsweep"] = {
            "freqs": vd.grid(d["freqs"], "sweeps.jsweep.freqs"),
            "least_action": vd.boolean(d.get("least_action", True), "sweeps.jsweep.least_action"),
            "offset": vd.number(d.get("offset", 0.005), "sweeps.jsweep.offset", positive=True),
            "span": vd.number(d.get("span", 0.05), "sweeps.jsweep.span", positive=True),
        }
    if "zzsweep" in s:
        d = vd.mapping(s["zzsweep"], "sweeps.zzsweep", {"f_A", "f_B", "f_B_dressed", "tracking", "jump"})
        for k in ("f_A", "f_B"):
            if k not in d:
                vd.fail(f"missing '{k}'", "sweeps.zzsweep")
        out["zzsweep"] = {
            "f_A": vd.grid(d["f_A"], "sweeps.zzsweep.f_A"),
            "f_B": vd.number(d["f_B"], "sweeps.zzsweep.f_B", positive=True),
            "f_B_dressed": vd.boolean(d.get("f_B_dressed", True), "sweeps.zzsweep.f_B_dressed"),
            "tracking": vd.boolean(d.get("tracking", False), "sweeps.zzsweep.tracking"),
            "jump": vd.number(d.get("jump", 5.0), "sweeps.zzsweep.jump", positive=True),
        }
    if "fit" in s:
        out["fit"] = _fit_section(vd, s["fit"], cfg)
    if "synth" in s:
        out["synth"] = _synth_section(vd, s["synth"], cfg)
    return out


def _qubit_ref(vd, d, path, cfg):
    name = d.get("qubit", "A")
    if name not in ("A", "B"):
        vd.fail("qubit must be 'A' or 'B'", f"{path}.qubit")
    if cfg.qubits is None:
        vd.fail("a 'qubits' section is required", path)
    return name


def _numbers(vd, v, path):
    if not isinstance(v, list) or not v:
        vd.fail("expected a nonempty list", path)
    return [vd.number(x, f"{path}[{i}]") for i, x in enumerate(v)]


def _fit_section(vd: _Validator, d, cfg):
    p = "sweeps.fit"
    vd.mapping(d, p, {"pipeline", "dataset", "init"})
    pipe = d.get("pipeline")
    if pipe not in ("g", "j", "zeta"):
        vd.fail("pipeline must be one of g, j, zeta", f"{p}.pipeline")
    # existence is checked by the fit command so synth can create the file first
    out = {"pipeline": pipe,
           "dataset": vd.path(d["dataset"], f"{p}.dataset", must_exist=False) if "dataset" in d else None}
    init = d.get("init") or {}
    if pipe == "g":
        vd.mapping(init, f"{p}.init", {"qubit", "modes", "g", "E_J0", "chi"})
        for k in ("modes", "g"):
            if k not in init:
                vd.fail(f"missing '{k}'", f"{p}.init")
        out["init"] = {
            "qubit": _qubit_ref(vd, init, f"{p}.init", cfg),
            "modes": _numbers(vd, init["modes"], f"{p}.init.modes"),
            "g": _numbers(vd, init["g"], f"{p}.init.g"),
            "E_J0": vd.number(init["E_J0"], f"{p}.init.E_J0", positive=True) if "E_J0" in init else None,
            "chi": vd.number(init.get("chi", 0.0), f"{p}.init.chi"),
        }
        if len(out["init"]["modes"]) != len(out["init"]["g"]) or len(out["init"]["g"]) > 3:
            vd.fail("need one to three modes with one g each", f"{p}.init")
    elif pipe == "j":
        vd.mapping(init, f"{p}.init", {"qubit", "f_B", "J", "E_J0", "chi"})
        if "f_B" not in init:
            vd.fail("missing 'f_B'", f"{p}.init")
        out["init"] = {
            "qubit": _qubit_ref(vd, init, f"{p}.init", cfg),
            "f_B": vd.number(init["f_B"], f"{p}.init.f_B", positive=True),
            "J": vd.number(init.get("J", 5.0), f"{p}.init.J"),
            "E_J0": vd.number(init["E_J0"], f"{p}.init.E_J0", positive=True) if "E_J0" in init else None,
            "chi": vd.number(init.get("chi", 0.0), f"{p}.init.chi"),
        }
    else:
        vd.mapping(init, f"{p}.init", {"max_err"})
        out["init"] = {"max_err": vd.number(init.get("max_err", 0.4), f"{p}.init.max_err", positive=True)}
    return out


def _synth_section(vd: _Validator, d, cfg):
    p = "sweeps.synth"
    vd.mapping(d, p, {"pipeline", "truth", "f_range", "n_flux", "window", "noise", "drive_offsets",
                      "t_max", "n_t", "T2", "time_unit"})
    pipe = d.get("pipeline")
    if pipe not in ("g", "j", "zeta"):
        vd.fail("pipeline must be one of g, j, zeta", f"{p}.pipeline")
    truth = vd.mapping(d.get("truth") or {}, f"{p}.truth")
    out = {"pipeline": pipe, "noise": vd.number(d.get("noise", 0.0), f"{p}.noise", nonneg=True)}
    if pipe in ("g", "j"):
        if "f_range" not in d:
            vd.fail("missing 'f_range'", p)
        out["f_range"] = vd.window(d["f_range"], f"{p}.f_range")
        out["n_flux"] = vd.integer(d.get("n_flux", 41), f"{p}.n_flux", 2)
        out["window"] = vd.window(d["window"], f"{p}.window") if "window" in d else None
        out["qubit"] = _qubit_ref(vd, truth, f"{p}.truth", cfg)
    if pipe == "g":
        for k in ("modes", "g"):
            if k not in truth:
                vd.fail(f"missing '{k}'", f"{p}.truth")
        out["modes"] = _numbers(vd, truth["modes"], f"{p}.truth.modes")
        out["g"] = _numbers(vd, truth["g"], f"{p}.truth.g")
        if len(out["modes"]) != len(out["g"]) or len(out["g"]) > 3:
            vd.fail("need one to three modes with one g each", f"{p}.truth")
    elif pipe == "j":
        for k in ("f_B", "J"):
            if k not in truth:
                vd.fail(f"missing '{k}'", f"{p}.truth")
        out["f_B"] = vd.number(truth["f_B"], f"{p}.truth.f_B", positive=True)
        out["J"] = vd.number(truth["J"], f"{p}.truth.J")
        out["chi"] = vd.number(truth.get("chi", 0.0), f"{p}.truth.chi")
    elif pipe == "zeta":
        for k in ("f_ground", "zeta"):
            if k not in truth:
                vd.fail(f"missing '{k}'", f"{p}.truth")
        out["f_ground"] = vd.number(truth["f_ground"], f"{p}.truth.f_ground", positive=True)
        out["zeta"] = vd.number(truth["zeta"], f"{p}.truth.zeta")
        out["drive_offsets"] = _numbers(vd, d.get("drive_offsets", [-3, -2, -1, 1, 2, 3]), f"{p}.drive_offsets")
        if any(np.diff(out["drive_offsets"]) <= 0):
            vd.fail("drive offsets must be strictly increasing", f"{p}.drive_offsets")
        out["t_max"] = vd.number(d.get("t_max", 4.0), f"{p}.t_max", positive=True)
        out["n_t"] = vd.integer(d.get("n_t", 101), f"{p}.n_t", 5)
        out["T2"] = vd.number(d.get("T2", 10.0), f"{p}.T2", positive=True)
        out["time_unit"] = d.get("time_unit", "us")
        if out["time_unit"] not in ("us", "ns"):
            vd.fail("time_unit must be 'us' or 'ns'", f"{p}.time_unit")
    return out


def parse_config(text, base_dir=".", source="<config>"):
    """Validate ``text`` and build a :class:`RunConfig`.

    Raises
    ------
    ValidationError
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ValidationError(f"{source}: not valid YAML ({getattr(exc, 'problem', exc)})",
                              line=mark.line + 1 if mark else None) from None
    vd = _Validator(text, base_dir)
    if not isinstance(raw, dict):
        raise ValidationError(f"{source}: top level must be a mapping", line=1)
    vd.mapping(raw, "", TOP_KEYS)
    cfg = RunConfig(ring=None, qubits=None, couplings=None, model=ModelConfig(), base_dir=Path(base_dir))
    if "ring" in raw:
        cfg.ring = _ring(vd, raw["ring"])
    if "qubits" in raw:
        cfg.qubits = _qubits(vd, raw["qubits"])
    cfg.couplings = _couplings(vd, raw.get("couplings"))
    cfg.model = _model(vd, raw.get("model"))
    if cfg.couplings is not None and cfg.model.included_modes is not None:
        bad = [i for i in cfg.model.included_modes if i >= len(cfg.couplings)]
        if bad:
            vd.fail(f"mode index {bad[0]} outside the coupling table ({len(cfg.couplings)} rows)",
                    "model.included_modes")
    if "seed" in raw:
        cfg.seed = vd.integer(raw["seed"], "seed", 0)
    if "output_dir" in raw:
        if not isinstance(raw["output_dir"], str) or not raw["output_dir"]:
            vd.fail("expected a directory path", "output_dir")
        od = Path(raw["output_dir"])
        cfg.output_dir = od if od.is_absolute() else Path(base_dir) / od
    cfg.sweeps = _sweeps(vd, raw.get("sweeps"), cfg)
    return cfg


def load_config(path):
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")
    return parse_config(path.read_text(), path.parent, str(path))


def check_writable(out_dir):
    """Raise :class:`ValidationError` unless ``out_dir`` exists or can be created."""
    out_dir = Path(out_dir)
    probe = out_dir
    while not probe.exists():
        probe = probe.parent
    if not probe.is_dir() or not os.access(probe, os.W_OK):
        raise ValidationError(f"output directory {out_dir} is not writable", field="output_dir")
