"""Command-line entry point.

Commands: ``modes``, ``gcouple``, ``jsweep``, ``zzsweep``, ``fit`` and
``synth``.  Exit status is 0 on success, 1 on numerical failure and 2 on
invalid input.  Outputs are built in memory and written only once the
command has finished, so a failed run leaves nothing behind.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import tempfile
from dataclasses import replace
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import circuit, coupling, interactions, spectroscopy
from .config import RunConfig, check_writable, load_config
from .errors import LHRingError, ValidationError

log = logging.getLogger("lhring")

FMT = "{:.12g}"
EXIT_OK, EXIT_NUMERIC, EXIT_INVALID = 0, 1, 2


def _f(x):
    return "nan" if x is None or (isinstance(x, float) and np.isnan(x)) else FMT.format(x)


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_outputs(out_dir, files):
    """Write ``{name: text}`` atomically (temp file then rename) into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, out_dir / name)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def _require(cfg: RunConfig, *names):
    for n in names:
        if getattr(cfg, n) is None:
            raise ValidationError(f"this command needs a '{n}' section", field=n)


def _window(args, default):
    if args.window is None:
        return default
    return args.window


# --------------------------------------------------------------------------
# commands


def cmd_modes(cfg: RunConfig, args):
    _require(cfg, "ring")
    s = cfg.sweeps.get("modes", {"window": None, "with_qubits": True})
    window = _window(args, s["window"])
    ring = cfg.ring if s["with_qubits"] else replace(cfg.ring, qubit_nodes={})
    m = circuit.build_circuit_matrices(ring)
    modes = circuit.solve_modes(m, window=window, midpoint=cfg.ring.midpoint)
    if len(cfg.ring.qubit_nodes) == 2:
        nA, nB = cfg.ring.qubit_nodes.values()
        modes = circuit.classify_parity(modes, nA, nB)
    freqs = np.array([md.freq for md in modes])
    groups = circuit.degenerate_groups(freqs)
    mult = {i: len(g) for g in groups for i in g}
    rows = [[i, _f(md.freq), md.parity.value if md.parity else "", "" if md.k_label is None else md.k_label,
             mult[i]] for i, md in enumerate(modes)]
    pairs = [g for g in groups if len(g) == 2]
    split = circuit.pair_splittings(freqs) * 1e3 if len(freqs) > 1 else np.zeros(0)
    report = [
        f"modes: {len(modes)}",
        f"window_GHz: {'' if window is None else f'{window[0]}:{window[1]}'}",
        f"lowest_GHz: {_f(freqs.min()) if len(freqs) else ''}",
        f"degenerate_pairs: {len(pairs)}",
        f"nondegenerate: {sum(1 for g in groups if len(g) == 1)}",
        "pair_splittings_MHz: " + " ".join(_f(s) for s in split),
    ]
    print("\n".join(report))
    return {
        "modes.csv": _csv(["index", "freq_GHz", "parity", "k_label", "multiplicity"], rows),
        "modes_report.txt": "\n".join(report) + "\n",
    }


def cmd_gcouple(cfg: RunConfig, args):
    _require(cfg, "ring", "qubits")
    s = cfg.sweeps.get("gcouple", {"window": (4.0, 6.5), "analytic": False, "loading": "weak"})
    window = _window(args, s["window"])
    cs, an = coupling.coupling_table(cfg.ring, cfg.qubits, window, analytic=True, loading=s["loading"]) \
        if s["analytic"] else (coupling.coupling_table(cfg.ring, cfg.qubits, window), None)
    header = ["freq_GHz", "gA_MHz", "gB_MHz", "parity", "source"]
    rows = []
    for i, en in enumerate(cs.entries):
        r = [_f(en.freq), _f(en.g_A), _f(en.g_B), en.parity.value, cs.source]
        if an is not None:
            r += ["nan", "nan"] if an[i] is None else [_f(an[i][0]), _f(an[i][1])]
        rows.append(r)
    if an is not None:
        header += ["gA_analytic_MHz", "gB_analytic_MHz"]
    g = np.abs(np.concatenate([cs.g_A, cs.g_B])) if len(cs) else np.zeros(1)
    print(f"modes: {len(cs)}  max|g|: {g.max():.3f} MHz  sign-law violations: {len(cs.sign_law_violations())}")
    return {"couplings.csv": _csv(header, rows)}


def _model(cfg: RunConfig):
    _require(cfg, "qubits")
    if cfg.couplings is None:
        raise ValidationError("this command needs a 'couplings' entry", field="couplings")
    return interactions.MultimodeModel(cfg.couplings, cfg.qubits, cfg.model)


def _point_row(p: interactions.InteractionPoint):
    return [_f(p.sweep_value), _f(p.f_A), _f(p.f_B), _f(p.J_SW), _f(p.J_LA), _f(p.zeta), p.method,
            ";".join(p.flags)]


POINT_HEADER = ["sweep_GHz", "fA_GHz", "fB_GHz", "J_SW_MHz", "J_LA_MHz", "zeta_MHz", "method", "flags"]


def _jsweep_chunk(model, freqs, la, offset, span):
    return interactions.j_sweep(model, freqs, la, offset, span)


def cmd_jsweep(cfg: RunConfig, args):
    if "jsweep" not in cfg.sweeps:
        raise ValidationError("config has no sweeps.jsweep section", field="sweeps.jsweep")
    s = cfg.sweeps["jsweep"]
    model = _model(cfg)
    freqs = s["freqs"]
    if args.window is not None:
        freqs = [f for f in freqs if args.window[0] <= f <= args.window[1]]
    n = max(1, int(args.parallel))
    if n > 1 and len(freqs) > 1:
        chunks = [c.tolist() for c in np.array_split(np.array(freqs), n) if len(c)]
        with ProcessPoolExecutor(n) as ex:
            parts = ex.map(_jsweep_chunk, [model] * len(chunks), chunks, [s["least_action"]] * len(chunks),
                           [s["offset"]] * len(chunks), [s["span"]] * len(chunks))
            points = [p for part in parts for p in part]
    else:
        points = interactions.j_sweep(model, freqs, s["least_action"], s["offset"], s["span"])
    print(f"points: {len(points)}")
    return {"jsweep.csv": _csv(POINT_HEADER, [_point_row(p) for p in points])}


def cmd_zzsweep(cfg: RunConfig, args):
    if "zzsweep" not in cfg.sweeps:
        raise ValidationError("config has no sweeps.zzsweep section", field="sweeps.zzsweep")
    s = cfg.sweeps["zzsweep"]
    model = _model(cfg)
    fa = s["f_A"]
    if args.window is not None:
        fa = [f for f in fa if args.window[0] <= f <= args.window[1]]
        if not fa:
            raise ValidationError("--window excludes every sweep point")
    res = interactions.sweep_interactions(model, fa, s["f_B"], s["f_B_dressed"], s["tracking"], jump=s["jump"])
    ev = [["zero_crossing", _f(x)] for x in res.zero_crossings] + [["discontinuity", _f(x)]
                                                                   for x in res.discontinuities]
    print(f"points: {len(res.points)}  bare f_B: {res.f_B_bare:.6f} GHz")
    for kind, x in ev:
        print(f"{kind}: {x} GHz (dressed f_A)")
    return {
        "zzsweep.csv": _csv(POINT_HEADER, [_point_row(p) for p in res.points]),
        "zz_events.csv": _csv(["kind", "fA_dressed_GHz"], ev),
    }


def _qubit(cfg, name):
    return cfg.qubits[0 if name == "A" else 1]


def cmd_fit(cfg: RunConfig, args):
    s = cfg.sweeps.get("fit")
    if s is None:
        raise ValidationError("config has no sweeps.fit section", field="sweeps.fit")
    pipe = args.pipeline or s["pipeline"]
    if pipe != s["pipeline"]:
        raise ValidationError(f"--pipeline {pipe} does not match sweeps.fit.pipeline {s['pipeline']}")
    path = args.dataset or s["dataset"]
    if path is None:
        raise ValidationError("no dataset given (use --dataset or sweeps.fit.dataset)", field="sweeps.fit.dataset")
    path = Path(path) if isinstance(path, str) else path
    if not path.is_file():
        raise ValidationError(f"dataset not found: {path}", field="sweeps.fit.dataset")
    text = path.read_text()
    init = s["init"]
    if pipe == "zeta":
        ds = spectroscopy.ramsey_from_csv(text)
        res = spectroscopy.extract_zeta_ramsey(ds, init["max_err"])
    else:
        trace = spectroscopy.SplittingTrace.from_csv(text)
        q = _qubit(cfg, init["qubit"])
        if init["E_J0"] is not None:
            q = replace(q, E_J0=init["E_J0"])
        if pipe == "g":
            m = spectroscopy.SplittingModel(q, init["modes"], init["g"], init["chi"])
            res = spectroscopy.fit_g_from_splitting(trace, m)
        else:
            m = spectroscopy.ExchangeModel(q.E_J0, q.E_C, q.d, init["f_B"], init["J"], init["chi"])
            res = spectroscopy.fit_j_from_spectroscopy(trace, m)
    for k, v in res.params.items():
        ci = "" if res.ci95 is None else f" +/- {res.ci95[k]:.6g}"
        print(f"{k}: {v:.9g}{ci}")
    if not res.converged:
        raise _NumericFailure(f"{pipe} fit did not converge", {f"fit_{pipe}.csv": res.to_csv()})
    return {f"fit_{pipe}.csv": res.to_csv()}


def cmd_synth(cfg: RunConfig, args):
    s = cfg.sweeps.get("synth")
    if s is None:
        raise ValidationError("config has no sweeps.synth section", field="sweeps.synth")
    pipe = s["pipeline"]
    if pipe == "zeta":
        fd = s["f_ground"] + np.array(s["drive_offsets"]) * 1e-3
        t = np.linspace(0.0, s["t_max"], s["n_t"])
        ds = spectroscopy.synthesize_ramsey(s["f_ground"], s["f_ground"] + s["zeta"] * 1e-3, s["T2"], fd, t,
                                            s["noise"], args.seed, s["time_unit"])
        return {"synth_zeta.csv": spectroscopy.ramsey_to_csv(ds)}
    q = _qubit(cfg, s["qubit"])
    if pipe == "g":
        m = spectroscopy.SplittingModel(q, s["modes"], s["g"])
    else:
        m = spectroscopy.ExchangeModel(q.E_J0, q.E_C, q.d, s["f_B"], s["J"], s["chi"])
    lo, hi = s["f_range"]
    grid = np.linspace(m.flux_for(hi), m.flux_for(lo), s["n_flux"])
    tr = spectroscopy.synthesize_splitting(m, grid, s["window"], s["noise"], args.seed)
    return {f"synth_{pipe}.csv": tr.to_csv()}


class _NumericFailure(LHRingError):
    def __init__(self, msg, files=None):
        super().__init__(msg)
        self.files = files or {}


COMMANDS = {
    "modes": (cmd_modes, "ring normal modes and degeneracy report"),
    "gcouple": (cmd_gcouple, "qubit-mode coupling table"),
    "jsweep": (cmd_jsweep, "qubit-qubit exchange J along a frequency grid"),
    "zzsweep": (cmd_zzsweep, "ZZ shift along a Q_A frequency sweep"),
    "fit": (cmd_fit, "fit g, J or zeta to a dataset"),
    "synth": (cmd_synth, "write a synthetic dataset for the fit pipelines"),
}


def _window_arg(text):
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected lo:hi in GHz") from None
    if not lo < hi:
        raise argparse.ArgumentTypeError("window needs lo < hi")
    return (lo, hi)


def build_parser():
    p = argparse.ArgumentParser(prog="lhring", description="Left-handed ring resonator coupling toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="YAML run configuration")
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        sp.add_argument("--seed", type=int, help="random seed (overrides seed)")
        sp.add_argument("--parallel", type=int, default=1, help="worker processes for sweeps")
        sp.add_argument("--window", type=_window_arg, help="frequency window lo:hi in GHz")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "fit":
            sp.add_argument("--dataset", help="dataset CSV (overrides sweeps.fit.dataset)")
            sp.add_argument("--pipeline", choices=["g", "j", "zeta"])
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ValidationError("--seed must be non-negative")
            cfg.seed = args.seed
        args.seed = cfg.seed
        if args.parallel < 1:
            raise ValidationError("--parallel must be >= 1")
        out = Path(args.out) if args.out else cfg.output_dir
        check_writable(out)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    func = COMMANDS[args.command][0]
    try:
        files = func(cfg, args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except _NumericFailure as exc:
        write_outputs(out, exc.files)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except LHRingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_outputs(out, files)
    for name in files:
        log.info("wrote %s", out / name)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
