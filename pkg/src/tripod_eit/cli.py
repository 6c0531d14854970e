"""Command-line driver: sweep spectra from a config file and write tables.

Config grammar
--------------
One ``key = value`` pair per line.  ``#`` starts a comment, blank lines
are ignored, list values are comma separated and booleans are spelled
``true``/``false`` (also ``yes``/``no``, ``on``/``off``, ``1``/``0``).
Keys may appear once.  Recognized keys and defaults::

    configuration        = config1            # list allowed: config1, config2
    model                = analytic           # analytic | numeric
    delta_min_hz         = -300000
    delta_max_hz         = 300000
    points               = 2001
    powers_mW            = 1, 10, 22
    b_fields_mG          = 0, 10, 30
    optical_depth        = 1
    probe_ratio          = 0.01               # Omega_P / Omega_C
    coupling_detuning_hz = 0
    gamma0_per_s         = 1e7
    gamma_transit_per_s  = 1e3
    gamma_raman_per_s    = 1e4
    angular_rates        = true               # divide rates by 2 pi 1e9
    min_prominence       = 1e-4               # extrema filter, transmission units
    extrema = true; fwhm = true; fits = true; excess = true; slope = true
    fit_models           = auto               # or a list of model kinds
    output               = <directory>
    format               = csv                # csv | json

Command-line flags override the file.  Exit status is 0 on success, 2 for
an invalid configuration and 1 when a computation fails.  Nothing is
written unless every spectrum and analysis has been computed.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, analysis
from .model import Config, RelaxationRates
from .spectra import BACKENDS, COLUMNS, Spectrum, SpectrumTable, SweepError, SweepSpec, run_sweep

FORMATS = ("csv", "json")
SUMMARY_NAME = "summary.json"
BUNDLED_CONFIGS = ("figure3.cfg", "figure5.cfg")
THREADS_ENV = "TRIPOD_EIT_THREADS"

# model kinds fitted when ``fit_models = auto``
AUTO_FITS = {
    Config.PERP: ("single-EIT", "double-lorentzian"),
    Config.PARA: ("single-EIT", "interacting-double-dark"),
}


class ConfigError(ValueError):
    """Invalid run configuration, with an optional source line and key."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None,
                 source: str | None = None):
        self.message, self.key, self.line, self.source = message, key, line, source
        where = []
        if source is not None:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(key)
        super().__init__(": ".join(where + [message]))


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"expected a finite number, got {text!r}")
    return value


def _parse_int(text: str) -> int:
    return int(text.strip())


def _parse_list(item_parser):
    def parse(text: str) -> tuple:
        items = [t.strip() for t in text.split(",")]
        if items == [""]:
            return ()
        if any(t == "" for t in items):
            raise ValueError("empty list element")
        return tuple(item_parser(t) for t in items)
    return parse


def _parse_choice(choices):
    def parse(text: str) -> str:
        t = text.strip()
        if t not in choices:
            raise ValueError(f"expected one of {', '.join(choices)}, got {t!r}")
        return t
    return parse


def _parse_configurations(text: str) -> tuple[Config, ...]:
    return tuple(Config.parse(t) for t in _parse_list(str)(text))


def _parse_fit_models(text: str):
    if text.strip() == "auto":
        return "auto"
    return _parse_list(_parse_choice(analysis.MODEL_KINDS))(text)


_KEYS = {
    "configuration": _parse_configurations,
    "model": _parse_choice(BACKENDS),
    "delta_min_hz": _parse_float,
    "delta_max_hz": _parse_float,
    "points": _parse_int,
    "powers_mW": _parse_list(_parse_float),
    "b_fields_mG": _parse_list(_parse_float),
    "optical_depth": _parse_float,
    "probe_ratio": _parse_float,
    "coupling_detuning_hz": _parse_float,
    "gamma0_per_s": _parse_float,
    "gamma_transit_per_s": _parse_float,
    "gamma_raman_per_s": _parse_float,
    "angular_rates": _parse_bool,
    "min_prominence": _parse_float,
    "extrema": _parse_bool,
    "fwhm": _parse_bool,
    "fits": _parse_bool,
    "excess": _parse_bool,
    "slope": _parse_bool,
    "fit_models": _parse_fit_models,
    "output": str,
    "format": _parse_choice(FORMATS),
}


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; validated on construction."""

    configurations: tuple = (Config.PERP,)
    model: str = "analytic"
    delta_min_hz: float = -3.0e5
    delta_max_hz: float = 3.0e5
    points: int = 2001
    powers_mW: tuple = (1.0, 10.0, 22.0)
    b_fields_mG: tuple = (0.0, 10.0, 30.0)
    optical_depth: float = 1.0
    probe_ratio: float = 1.0e-2
    coupling_detuning_hz: float = 0.0
    gamma0_per_s: float = 1.0e7
    gamma_transit_per_s: float = 1.0e3
    gamma_raman_per_s: float = 1.0e4
    angular_rates: bool = True
    min_prominence: float = 1.0e-4
    extrema: bool = True
    fwhm: bool = True
    fits: bool = True
    excess: bool = True
    slope: bool = True
    fit_models: object = "auto"
    output: str | None = None
    format: str = "csv"
    specs: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if not self.configurations:
            raise ConfigError("at least one configuration is required", "configuration")
        if self.min_prominence <= 0:
            raise ConfigError("min_prominence must be > 0", "min_prominence")
        if self.probe_ratio < 0:
            raise ConfigError("probe_ratio must be >= 0", "probe_ratio")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}", "format")
        try:
            rates = RelaxationRates.from_lab(self.gamma0_per_s, self.gamma_transit_per_s,
                                             self.gamma_raman_per_s, self.angular_rates)
        except ValueError as exc:
            raise ConfigError(str(exc), "rates") from None
        specs = []
        for cfg in self.configurations:
            try:
                specs.append(SweepSpec(cfg, self.model, (self.delta_min_hz, self.delta_max_hz),
                                       self.points, self.powers_mW, self.b_fields_mG,
                                       self.optical_depth, rates, self.probe_ratio,
                                       self.coupling_detuning_hz))
            except ValueError as exc:
                raise ConfigError(str(exc), _guess_key(str(exc))) from None
        object.__setattr__(self, "specs", tuple(specs))

    def fit_kinds(self, configuration: Config) -> tuple[str, ...]:
        if self.fit_models == "auto":
            return AUTO_FITS[configuration]
        return tuple(self.fit_models)

    def to_dict(self) -> dict:
        d = {name: getattr(self, name) for name in _KEYS if name != "configuration"}
        d["configuration"] = [c.value for c in self.configurations]
        d["powers_mW"] = list(self.powers_mW)
        d["b_fields_mG"] = list(self.b_fields_mG)
        if d["fit_models"] != "auto":
            d["fit_models"] = list(d["fit_models"])
        d.pop("output")
        return dict(sorted(d.items()))


def _guess_key(message: str) -> str | None:
    for key in _KEYS:
        if message.startswith(key):
            return key
    if message.startswith("delta_range_hz"):
        return "delta_min_hz/delta_max_hz"
    return None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse the flat key-value grammar into typed values (no defaults)."""
    values, seen = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno, source=source)
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in _KEYS:
            raise ConfigError(f"unknown key (known: {', '.join(sorted(_KEYS))})",
                              key, lineno, source)
        if key in seen:
            raise ConfigError(f"duplicate key (first set on line {seen[key]})",
                              key, lineno, source)
        try:
            values[key] = _KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(str(exc), key, lineno, source) from None
        seen[key] = lineno
    values["_lines"] = seen
    return values


def build_run_config(values: dict, overrides: dict | None = None,
                     source: str = "<config>") -> RunConfig:
    """Merge parsed file values with flag overrides and validate."""
    lines = values.get("_lines", {})
    merged = {k: v for k, v in values.items() if k != "_lines"}
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if "configuration" in merged:
        merged["configurations"] = merged.pop("configuration")
    try:
        return RunConfig(**merged)
    except ConfigError as exc:
        key = exc.key
        line = lines.get("configuration" if key == "configurations" else key)
        if key and "/" in key:
            line = lines.get(key.split("/")[0]) or lines.get(key.split("/")[1])
        raise ConfigError(exc.message, key, line, source) from None


def bundled_config_text(name: str) -> str:
    if name not in BUNDLED_CONFIGS:
        raise FileNotFoundError(name)
    return resources.files("tripod_eit").joinpath("configs", name).read_text()


def _read_config(path: str) -> tuple[str, str]:
    p = Path(path)
    if p.is_file():
        return p.read_text(), str(p)
    if p.name in BUNDLED_CONFIGS and not p.exists():
        return bundled_config_text(p.name), f"<bundled {p.name}>"
    raise ConfigError(f"cannot read config file {path!r}")


# --------------------------------------------------------------------------
# serialization

def _fmt(value: float) -> str:
    return "%.12g" % value


def _round12(value: float) -> float:
    return float(_fmt(value))


def spectrum_filename(config: str, power_mW: float, b_mG: float, fmt: str) -> str:
    def tag(v: float) -> str:
        return _fmt(v).replace("-", "m").replace(".", "p").replace("+", "")
    return f"{config}_P{tag(power_mW)}mW_B{tag(b_mG)}mG.{fmt}"


def table_to_csv(table: SpectrumTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in table.rows():
        writer.writerow([row[0]] + [_fmt(v) for v in row[1:]])
    return buf.getvalue()


def table_to_json(table: SpectrumTable) -> str:
    records = [dict(zip(COLUMNS, [row[0]] + [_round12(v) for v in row[1:]]))
               for row in table.rows()]
    return json.dumps({"optical_depth": table.optical_depth, "rows": records},
                      indent=1) + "\n"


def _table_from_columns(cols: dict, optical_depth: float) -> SpectrumTable:
    return SpectrumTable(
        config=list(cols["config"]),
        **{k: np.asarray(cols[k], dtype=float) for k in COLUMNS[1:]},
        optical_depth=optical_depth,
    )


def read_spectrum_csv(path, optical_depth: float = 1.0) -> SpectrumTable:
    """Parse a spectrum CSV back into a SpectrumTable."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != COLUMNS:
            raise ValueError(f"unexpected header {header}")
        rows = list(reader)
    cols = {name: [r[i] for r in rows] for i, name in enumerate(COLUMNS)}
    return _table_from_columns(cols, optical_depth)


def read_spectrum_json(path) -> SpectrumTable:
    with open(path) as fh:
        data = json.load(fh)
    cols = {name: [r[name] for r in data["rows"]] for name in COLUMNS}
    return _table_from_columns(cols, float(data["optical_depth"]))


def read_spectrum(path, optical_depth: float = 1.0) -> SpectrumTable:
    if str(path).endswith(".json"):
        return read_spectrum_json(path)
    return read_spectrum_csv(path, optical_depth)


def read_summary(path) -> dict:
    """Load a summary, turning every serialized fit back into a FitResult."""
    with open(path) as fh:
        data = json.load(fh)
    for entry in data["spectra"]:
        entry["fits"] = {k: (analysis.FitResult.from_dict(v) if "model_kind" in v else v)
                         for k, v in entry.get("fits", {}).items()}
        exc = entry.get("excess")
        if isinstance(exc, dict) and "fit" in exc:
            exc["fit"] = analysis.FitResult.from_dict(exc["fit"])
    return data


def _jsonable(obj):
    """Replace non-finite floats by None so the output is strict JSON."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# --------------------------------------------------------------------------
# analyses

def analyze_spectrum(s: Spectrum, rc: RunConfig) -> dict:
    """Per-spectrum analyses selected by the run configuration."""
    out = {"config": s.config.value, "power_mW": s.power_mW, "b_mG": s.b_mG}
    feats = analysis.find_extrema(s.delta_hz, s.transmission, rc.min_prominence)
    if rc.extrema:
        out["extrema"] = [{"kind": f.kind, "center_hz": f.center_hz, "height": f.height,
                           "prominence": f.prominence} for f in feats]
    if rc.fwhm:
        widths = []
        for f in feats:
            try:
                widths.append({"kind": f.kind, "center_hz": f.center_hz,
                               "fwhm_hz": analysis.feature_fwhm(s.delta_hz, s.transmission, f)})
            except ValueError as exc:
                widths.append({"kind": f.kind, "center_hz": f.center_hz, "error": str(exc)})
        out["fwhm"] = widths
    if rc.fits:
        fits = {}
        for kind in rc.fit_kinds(s.config):
            try:
                fits[kind] = analysis.fit_model(s.delta_hz, s.im_chi, kind).to_dict()
            except ValueError as exc:
                fits[kind] = {"error": str(exc)}
        out["fits"] = fits
    if rc.excess and s.config is Config.PARA and s.b_mG != 0 and s.optical_depth > 0:
        try:
            value, fit = analysis.incoherent_excess(s, return_fit=True)
            out["excess"] = {"value": value, "fit": fit.to_dict()}
        except analysis.FitError as exc:
            out["excess"] = {"error": str(exc), "fit": exc.result.to_dict()}
    return out


def slope_analyses(spectra: list[Spectrum], rc: RunConfig) -> list[dict]:
    """Peak-separation slope per (configuration, power) over the field list."""
    results = []
    keyed = sorted(spectra, key=lambda s: (s.config.value, s.power_mW, s.b_mG))
    for (cfg, power), group in itertools.groupby(keyed, key=lambda s: (s.config.value,
                                                                       s.power_mW)):
        entry = {"config": cfg, "power_mW": power}
        try:
            entry["slope_hz_per_mG"] = analysis.separation_slope(list(group),
                                                                 rc.min_prominence)
        except ValueError as exc:
            entry["error"] = str(exc)
        results.append(entry)
    return results


# --------------------------------------------------------------------------

def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError(f"{THREADS_ENV} must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def render_outputs(rc: RunConfig, threads: int = 1) -> dict[str, str]:
    """Compute everything and return {file name: contents}; no I/O."""
    files = {}
    all_spectra = []
    for spec in rc.specs:
        table = run_sweep(spec, threads=threads)
        table.check()
        for s in table.spectra():
            one = SpectrumTable.from_spectra([s], spec.optical_depth)
            name = spectrum_filename(s.config.value, s.power_mW, s.b_mG, rc.format)
            files[name] = table_to_csv(one) if rc.format == "csv" else table_to_json(one)
            all_spectra.append(s)
    summary = {
        "tool": "tripod-eit",
        "version": __version__,
        "run": rc.to_dict(),
        "columns": list(COLUMNS),
        "files": sorted(files),
        "spectra": [analyze_spectrum(s, rc) for s in all_spectra],
    }
    if rc.slope:
        summary["slopes"] = slope_analyses(all_spectra, rc)
    files[SUMMARY_NAME] = json.dumps(_jsonable(summary), indent=1, sort_keys=True) + "\n"
    return files


def write_outputs(files: dict[str, str], out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(files):
        path = out / name
        with open(path, "w", newline="") as fh:
            fh.write(files[name])
        written.append(path)
    return written


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tripod-eit",
        description="Probe transmission spectra of tripod atoms with double dark resonances.",
    )
    p.add_argument("--config", required=True,
                   help="run configuration file (bundled: figure3.cfg, figure5.cfg)")
    p.add_argument("--output", help="output directory (overrides the config file)")
    p.add_argument("--model", choices=BACKENDS, help="susceptibility backend")
    p.add_argument("--format", choices=FORMATS, help="spectrum file format")
    p.add_argument("--quiet", action="store_true", help="print nothing on success")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def run(config_path: str, overrides: dict | None = None, quiet: bool = False) -> int:
    """Execute one configured run; returns the process exit status."""
    try:
        text, source = _read_config(config_path)
        rc = build_run_config(parse_config_text(text, source), overrides, source)
        if rc.output is None:
            raise ConfigError("no output directory (set 'output' or pass --output)", "output")
        threads = thread_count()
    except ConfigError as exc:
        print(f"tripod-eit: invalid configuration: {exc}", file=sys.stderr)
        return 2

    try:
        files = render_outputs(rc, threads)
    except (SweepError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"tripod-eit: computation failed: {exc}", file=sys.stderr)
        return 1

    written = write_outputs(files, rc.output)
    if not quiet:
        for path in written:
            print(path)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"output": args.output, "model": args.model, "format": args.format}
    return run(args.config, overrides, quiet=args.quiet)


if __name__ == "__main__":
    sys.exit(main())
