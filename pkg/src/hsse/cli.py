"""Command-line front end: read a scenario configuration, run a study and
write CSV/JSON artifacts.

Usage::

    hsse run    --config case.yaml --out results/ [--threads N]
    hsse sweep  --config sweep.yaml --out results/
    hsse table1 [--config case.yaml] --out results/

``HSSE_THREADS`` overrides the thread count from the configuration; the
``--threads`` flag overrides both. Exit codes: 0 success, 2 invalid
configuration, 3 numerical failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .bem import Box, Geometry
from .errors import ConfigError, HsseError
from .kernels import Material, PlaneWave
from .solver import (CanyonModel, RickerPulse, Scenario, component_errors, eta_to_omega,
                     synthesize_seismograms, transfer_function)
from .superelement import CompressionSpec, compress, compress_threshold

log = logging.getLogger("hsse")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
STUDIES = ("Single", "ThresholdSweep", "HalfBandSweep", "Table1")
TABLE1_THRESHOLDS = (0.0, 1e-5, 1e-4, 1e-3, 1e-2)
THREADS_ENV = "HSSE_THREADS"


@dataclass(frozen=True)
class RunConfig:
    """A parsed configuration file.

    ``values`` holds the compression values of a sweep (or the thresholds of
    a Table1 study); ``error_eta`` is the frequency at which compression
    errors and Table1 bandwidths are measured.
    """

    scenario: Scenario
    study: str = "Single"
    out_dir: Path = Path("results")
    threads: int = 1
    values: tuple = ()
    error_eta: float = 1.0
    pulse_eta: float = 0.5

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ConfigError(f"unknown study {self.study!r}; expected one of {STUDIES}", "study")
        if self.threads < 1:
            raise ConfigError("thread count must be at least 1", "threads")
        if self.study in ("ThresholdSweep", "HalfBandSweep") and len(self.values) < 2:
            raise ConfigError("sweep studies need at least two compression values", "sweep.values")


@dataclass
class StudyReport:
    """Rows of ``(value, rhbw, rst, err_ux, err_uy, err_pooled, wall_time)``
    sorted by compression value, plus the files written."""

    study: str
    rows: list = field(default_factory=list)
    files: list = field(default_factory=list)


# ---------------------------------------------------------------- config parsing

def _line_index(node, path=(), out=None):
    """Map dotted key paths to one-based line numbers of a composed YAML tree."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            p = path + (str(key.value),)
            out[".".join(p)] = key.start_mark.line + 1
            _line_index(value, p, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, value in enumerate(node.value):
            p = path + (str(i),)
            out[".".join(p)] = value.start_mark.line + 1
            _line_index(value, p, out)
    return out


class _Section:
    """Typed access to one mapping of the configuration with error locations."""

    def __init__(self, data, prefix, lines, allowed):
        self.prefix = prefix
        self.lines = lines
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise self.error("must be a mapping", None)
        unknown = sorted(set(data) - set(allowed))
        if unknown:
            raise self.error(f"unknown key {unknown[0]!r}", unknown[0])
        self.data = data

    def path(self, key):
        return f"{self.prefix}.{key}" if self.prefix and key else (key or self.prefix)

    def error(self, message, key):
        p = self.path(key)
        return ConfigError(message, p, self.lines.get(p))

    def get(self, key, kind, default):
        if key not in self.data or self.data[key] is None:
            return default
        value = self.data[key]
        try:
            if kind is float:
                if isinstance(value, bool):
                    raise TypeError
                return float(value)
            if kind is int:
                if isinstance(value, bool) or int(value) != value:
                    raise TypeError
                return int(value)
            if kind is str:
                if not isinstance(value, str):
                    raise TypeError
                return value
            if kind is list:
                if not isinstance(value, list):
                    raise TypeError
                return [float(v) for v in value]
        except (TypeError, ValueError):
            raise self.error(f"expected {kind.__name__}, got {value!r}", key) from None
        raise AssertionError(kind)

    def build(self, factory, key=None, **kwargs):
        """Call ``factory`` and relocate its validation errors to this section."""
        try:
            return factory(**kwargs)
        except ConfigError as exc:
            if exc.field is None:
                raise self.error(exc.message, key) from None
            raise ConfigError(exc.message, exc.field, self.lines.get(exc.field)) from None
        except (HsseError, ValueError) as exc:
            text = str(exc)
            named = [k for k in kwargs if k in self.data and k in text]
            raise self.error(text, named[0] if named else key) from None


def _frequencies(sec: _Section):
    etas = sec.get("etas", list, None)
    if etas is not None:
        return tuple(etas)
    eta_max = sec.get("eta_max", float, 2.0)
    count = sec.get("count", int, 40)
    if count < 2 or not eta_max > 0:
        raise sec.error("need count >= 2 and eta_max > 0", "count")
    return tuple(float(e) for e in np.linspace(0.0, eta_max, count))


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse YAML configuration text into a :class:`RunConfig`.

    Errors name the offending key and, where known, its line.
    """
    try:
        root_node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"{source}: malformed YAML: {exc}",
                          None, mark.line + 1 if mark else None) from None
    lines = _line_index(root_node) if root_node is not None else {}
    top = _Section(data, "", lines, ("study", "output", "threads", "geometry", "material", "wave",
                                     "frequencies", "compression", "mesh", "sweep", "table1",
                                     "pulse"))

    g = _Section(top.data.get("geometry"), "geometry", lines,
                 ("kind", "L", "truncation", "elem_size"))
    L = g.get("L", float, 1.0)
    geometry = g.build(Geometry, None, kind=g.get("kind", str, "semicircular"), L=L,
                       truncation=g.get("truncation", float, 7.0),
                       elem_size=g.get("elem_size", float, L / 8))

    m = _Section(top.data.get("material"), "material", lines, ("rho", "alpha", "beta"))
    material = m.build(Material, None, rho=m.get("rho", float, 1.0),
                       alpha=m.get("alpha", float, 2.0), beta=m.get("beta", float, 1.0))

    w = _Section(top.data.get("wave"), "wave", lines, ("kind", "angle", "amplitude"))
    wave = w.build(PlaneWave, None, kind=w.get("kind", str, "SV"),
                   angle=w.get("angle", float, 0.0), amplitude=w.get("amplitude", float, 1.0))

    f = _Section(top.data.get("frequencies"), "frequencies", lines,
                 ("etas", "eta_max", "count", "error_eta"))
    etas = _frequencies(f)
    error_eta = f.get("error_eta", float, 1.0)
    if not error_eta > 0:
        raise f.error("error_eta must be positive", "error_eta")

    c = _Section(top.data.get("compression"), "compression", lines, ("method", "value"))
    compression = None
    if c.data:
        compression = c.build(CompressionSpec, None, method=c.get("method", str, "Threshold"),
                              value=c.get("value", float, 0.0))

    me = _Section(top.data.get("mesh"), "mesh", lines,
                  ("fem_h", "box_half_width", "box_depth", "flavor", "mass", "symmetrize",
                   "receiver_span"))
    box = None
    if "box_half_width" in me.data or "box_depth" in me.data:
        box = me.build(Box, "box_half_width",
                       half_width=me.get("box_half_width", float, 2.0 * L),
                       depth=me.get("box_depth", float, 2.5 * L))
    sym = me.data.get("symmetrize", True)
    if not isinstance(sym, bool):
        raise me.error(f"expected bool, got {sym!r}", "symmetrize")
    mass = me.get("mass", str, "blended")
    if mass not in ("consistent", "lumped", "blended"):
        raise me.error(f"unknown mass kind {mass!r}", "mass")
    scenario = top.build(Scenario, "frequencies", geometry=geometry, material=material,
                         wave=wave, etas=etas, compression=compression,
                         flavor=me.get("flavor", str, "Direct"), box=box,
                         fem_h=me.get("fem_h", float, None), symmetrize=sym,
                         receiver_span=me.get("receiver_span", float, 3.0), mass=mass)

    study = top.get("study", str, "Single")
    values = ()
    if study in ("ThresholdSweep", "HalfBandSweep"):
        s = _Section(top.data.get("sweep"), "sweep", lines, ("values",))
        values = tuple(s.get("values", list, []))
        method = "Threshold" if study == "ThresholdSweep" else "HalfBand"
        for i, v in enumerate(values):
            try:
                CompressionSpec(method, v)
            except HsseError as exc:
                raise s.error(str(exc), f"values.{i}") from None
    elif study == "Table1":
        t = _Section(top.data.get("table1"), "table1", lines, ("thresholds",))
        values = tuple(t.get("thresholds", list, list(TABLE1_THRESHOLDS)))

    p = _Section(top.data.get("pulse"), "pulse", lines, ("eta_peak",))
    pulse_eta = p.get("eta_peak", float, 0.5)
    if not pulse_eta > 0:
        raise p.error("eta_peak must be positive", "eta_peak")

    threads = top.get("threads", int, 1)
    out_dir = Path(top.get("output", str, "results"))
    return top.build(RunConfig, "study", scenario=scenario, study=study, out_dir=out_dir,
                     threads=threads, values=tuple(sorted(values)), error_eta=error_eta,
                     pulse_eta=pulse_eta)


def load_config(path) -> RunConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, str(path))


# ---------------------------------------------------------------- writers

def _fmt(v):
    """Shortest round-trip representation; identical across runs."""
    return repr(float(v))


def _write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    return path


def export_sparsity(k, path) -> Path:
    """Write the nonzero pattern of ``k`` as ``i,j,modulus`` rows in
    row-major order."""
    a = k.k if hasattr(k, "k") else np.asarray(k)
    i, j = np.nonzero(a)  # np.nonzero walks C order, i.e. row-major
    mod = np.abs(a[i, j])
    return _write_csv(Path(path), ["i", "j", "modulus"],
                      ((int(r), int(c), float(v)) for r, c, v in zip(i, j, mod)))


def write_transfer_function(tf, path) -> Path:
    rows = []
    for e, eta in enumerate(tf.etas):
        for r, x in enumerate(tf.x_over_L):
            ux, uy = tf.ux[e, r], tf.uy[e, r]
            rows.append((float(x), float(eta), ux.real, ux.imag, abs(ux),
                         uy.real, uy.imag, abs(uy)))
    return _write_csv(Path(path), ["x_over_L", "eta", "re_ux", "im_ux", "abs_ux",
                                   "re_uy", "im_uy", "abs_uy"], rows)


def write_seismogram(seis, path) -> Path:
    header = ["time"]
    for x in seis.x_over_L:
        header += [f"ux@{_fmt(x)}", f"uy@{_fmt(x)}"]
    t = seis.time
    rows = ([float(t[n])] + [float(v) for v in seis.traces[:, n, :].ravel()]
            for n in range(len(t)))
    return _write_csv(Path(path), header, rows)


# ---------------------------------------------------------------- studies

def _value_tag(v):
    return format(v, ".6g")


def _single(cfg: RunConfig, model, out: Path, report: StudyReport):
    sc = cfg.scenario
    tf = transfer_function(sc, model, cfg.threads)
    report.files.append(write_transfer_function(tf, out / "transfer_function.csv"))
    pulse = RickerPulse.for_eta(cfg.pulse_eta, sc.L, sc.material.beta)
    seis = synthesize_seismograms(tf, pulse)
    report.files.append(write_seismogram(seis, out / "seismogram.csv"))


def _sweep(cfg: RunConfig, model, out: Path, report: StudyReport):
    method = "Threshold" if cfg.study == "ThresholdSweep" else "HalfBand"
    sc = cfg.scenario
    omega = eta_to_omega(cfg.error_eta, sc.L, sc.material.beta)
    khs, ops = model.hsse(omega)
    ref, _ = model.solve(omega, khs, ops)
    for v in cfg.values:
        start = time.perf_counter()
        kc, rep = compress(khs, CompressionSpec(method, v))
        u, _ = model.solve(omega, kc, ops)
        ex, ey, ep = component_errors(u, ref)
        wall = time.perf_counter() - start
        report.rows.append((v, rep.rhbw, rep.rst, ex, ey, ep, wall))
        log.info("%s %s: rhbw=%.4f error=%.4g (%.2fs)", method, _value_tag(v), rep.rhbw, ep, wall)
        report.files.append(export_sparsity(kc, out / f"sparsity_{method}_{_value_tag(v)}.csv"))
    report.files.append(_write_csv(
        out / "error_curve.csv",
        ["compression_value", "rhbw", "rst", "err_ux", "err_uy", "err_pooled"],
        [r[:6] for r in report.rows]))


def _table1(cfg: RunConfig, out: Path, report: StudyReport):
    sc = cfg.scenario
    omega = eta_to_omega(cfg.error_eta, sc.L, sc.material.beta)
    cols = {}
    for kind in ("semicircular", "rectangular"):
        geo = replace(sc.geometry, kind=kind)
        model = CanyonModel(replace(sc, geometry=geo, compression=None))
        khs, _ = model.hsse(omega)
        cols[kind] = [compress_threshold(khs, tau)[1] for tau in cfg.values]
    rows = []
    for i, tau in enumerate(cfg.values):
        s, r = cols["semicircular"][i], cols["rectangular"][i]
        rows.append((float(tau), s.rhbw, r.rhbw, s.rst, r.rst))
        report.rows.append((float(tau), s.rhbw, s.rst, None, None, None, 0.0))
    report.files.append(_write_csv(
        out / "table1.csv",
        ["threshold", "rhbw_semicircular", "rhbw_rectangular", "rst_semicircular",
         "rst_rectangular"], rows))
    lines = ["| Threshold | Rhbw semicircular | Rhbw rectangular | Rst semicircular | Rst rectangular |",
             "|---|---|---|---|---|"]
    for tau, rs, rr, ss, sr in rows:
        lines.append(f"| {tau:g} | {rs:.3f} | {rr:.3f} | {100 * ss:.1f}% | {100 * sr:.1f}% |")
    path = out / "table1.md"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    report.files.append(path)


def _summary(cfg: RunConfig, report: StudyReport, out: Path):
    sc = cfg.scenario
    doc = {
        "study": cfg.study,
        "geometry": vars(sc.geometry),
        "material": vars(sc.material),
        "wave": vars(sc.wave),
        "flavor": sc.flavor,
        "error_eta": cfg.error_eta,
        "rows": [dict(zip(("value", "rhbw", "rst", "err_ux", "err_uy", "err_pooled"), r[:6]))
                 for r in report.rows],
        "files": sorted(p.name for p in report.files),
    }
    path = out / "summary.json"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    report.files.append(path)


def run(cfg: RunConfig) -> StudyReport:
    """Execute the configured study and write its artifacts to ``cfg.out_dir``."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = StudyReport(cfg.study)
    if cfg.study == "Table1":
        _table1(cfg, out, report)
    else:
        model = CanyonModel(cfg.scenario)
        _single(cfg, model, out, report)
        if cfg.study != "Single":
            _sweep(cfg, model, out, report)
    report.rows.sort(key=lambda r: r[0])
    _summary(cfg, report, out)
    return report


# ---------------------------------------------------------------- entry point

def _threads(flag, cfg_threads):
    if flag is not None:
        return flag
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"must be an integer, got {env!r}", THREADS_ENV) from None
        return n
    return cfg_threads


def build_parser():
    parser = argparse.ArgumentParser(prog="hsse", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, need in (("run", True), ("sweep", True), ("table1", False)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=need, help="YAML scenario file")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--threads", type=int, help=f"worker threads (overrides ${THREADS_ENV})")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else parse_config("study: Table1\n")
        if args.command == "sweep" and cfg.study not in ("ThresholdSweep", "HalfBandSweep"):
            raise ConfigError(f"'sweep' needs a sweep study, got {cfg.study!r}", "study")
        if args.command == "table1" and cfg.study != "Table1":
            cfg = replace(cfg, study="Table1", values=TABLE1_THRESHOLDS)
        overrides = {"threads": _threads(args.threads, cfg.threads)}
        if args.out:
            overrides["out_dir"] = Path(args.out)
        cfg = replace(cfg, **overrides)
        report = run(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except HsseError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for path in report.files:
        print(path)
    return EXIT_OK
