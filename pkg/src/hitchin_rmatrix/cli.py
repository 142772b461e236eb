"""Configuration, orchestration, workspace caching and JSON reports.

Verbs: ``certify`` (chart search and certificate), ``solve`` (kernel columns),
``verify`` (identity suites), ``report`` (summarize a written bundle) and
``all``.  Exit codes: 0 all PASS, 1 any FAIL, 2 usage or config error,
3 inconclusive (some window was empty or uncertified).
"""
from __future__ import annotations

import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import click
import tomli

from .chart import BundleChart, Certificate, ChartSpec, search_chart
from .curve import build_curve
from .errors import ConfigError, HitchinError, ParseError, SchemaMismatch
from .hitchin import (
    PhaseSpace, commutativity_suite, gaudin_extraction_check, hamiltonian_basis,
    hamiltonian_rank, lax_pair_check, random_phase_points,
)
from .jetring import Q, qstr
from .kernels import ColumnStore, GaugeSpec, KernelSet, default_column_depth
from .looplie import LieData
from .yangbaxter import (
    FAIL, INCONCLUSIVE, PASS, IdentityReport, auxiliary_identity_check, dcybe_residual,
    default_window, extended_dcybe_residual, frame_suite, gauge_suite, hitchin_weak_identity,
    negative_control, projection_suite, r_bracket_lemma_check, reproducing_check, szego_check,
)

SCHEMA_VERSION = 1
log = logging.getLogger("hitchin_rmatrix")

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2, 3

# suite name -> reports it produces, in run order
SUITES = {
    "certificate": ["certificate"],
    "frame": ["frame"],
    "projection": ["projection"],
    "dcybe": ["dcybe", "dcybe_control"],
    "extended_dcybe": ["extended_dcybe"],
    "auxiliary": ["auxiliary_identity"],
    "szego": ["szego", "reproducing"],
    "r_bracket": ["r_bracket_lemma"],
    "hitchin_weak": ["hitchin_weak", "hitchin_weak_extended"],
    "gauge": ["gauge"],
    "commutativity": ["commutativity", "gaudin_extraction", "hamiltonian_count"],
    "lax": ["lax_pair"],
}

PRESETS = {
    "d1": {"name": "d1", "curve": {"coefficients": [-1, 0, 0, 0, 0, 1]},
           "model": {"complement_dim": 3, "hamiltonian_rank": 5}},
    "d2": {"name": "d2", "curve": {"coefficients": [1, 1, 0, 0, 0, 0, 1]},
           "model": {"complement_dim": 3, "hamiltonian_rank": 7},
           "gauge": [{"plus": [[0, 0, 1, "1", 1, 0]], "minus": []},
                     {"plus": [[1, 0, 1, "1", 1, 0], [0, 1, 0, "3", 0, 2]],
                      "minus": [[1, 0, "1", 1, 1]]}]},
}

DEFAULT_GAUGE = [{"plus": [[0, 0, 1, "1", 1, 0]], "minus": []},
                 {"plus": [[0, 1, 0, "3", 0, 2]], "minus": [[1, 0, "1", 0, 1]]}]


@dataclass
class Config:
    name: str
    coefficients: list
    complement_dim: int | None = None
    hamiltonian_rank: int | None = None
    n: int = 2
    K: int = 3
    slack: int = 2
    jet_order: int = 2
    seed: int = 0
    attempts: int = 50
    suites: list = field(default_factory=lambda: list(SUITES))
    projection_count: int = 20
    frame_sections: int = 10
    lax_points: int = 5
    lax_hamiltonians: list | None = None
    gauge: list = field(default_factory=lambda: [dict(g) for g in DEFAULT_GAUGE])
    out: str = "report.json"
    cache_dir: str = ".hitchin-cache"
    derived: dict = field(default_factory=dict)

    def to_json(self):
        """Config echo; output locations are left out so reports do not depend on them."""
        data = asdict(self)
        data["coefficients"] = [qstr(c) for c in self.coefficients]
        for key in ("out", "cache_dir"):
            data.pop(key)
        return data

    def workspace_key(self):
        """Hash of the inputs that determine the chart and kernels."""
        core = {"coefficients": [qstr(c) for c in self.coefficients], "n": self.n, "K": self.K,
                "slack": self.slack, "jet_order": self.jet_order, "seed": self.seed,
                "attempts": self.attempts, "schema": SCHEMA_VERSION}
        return _digest(core)

    def config_hash(self):
        return _digest(self.to_json())


def _digest(data):
    return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()[:16]


def _get(table, key, kind, default):
    if key not in table:
        return default
    value = table[key]
    if kind is int and (not isinstance(value, int) or isinstance(value, bool)):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    if kind is list and not isinstance(value, list):
        raise ConfigError(f"{key} must be a list")
    if kind is str and not isinstance(value, str):
        raise ConfigError(f"{key} must be a string")
    return value


def config_from_dict(data: dict) -> Config:
    """Validate a parsed config table; raises :class:`ConfigError`."""
    known = {"name", "preset", "curve", "model", "truncation", "search", "suites", "gauge", "output"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown config sections: {sorted(extra)}")
    if "preset" in data:
        preset = PRESETS.get(data["preset"])
        if preset is None:
            raise ConfigError(f"unknown preset {data['preset']!r}; known: {sorted(PRESETS)}")
        merged = json.loads(json.dumps(preset))
        for key, value in data.items():
            if key == "preset":
                continue
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key].update(value)
            else:
                merged[key] = value
        data = merged
    curve_t = data.get("curve", {})
    coeffs = _get(curve_t, "coefficients", list, None)
    if not coeffs:
        raise ConfigError("curve.coefficients is required")
    try:
        coeffs = [Q(c) for c in coeffs]
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad curve coefficient: {exc}") from exc
    model = data.get("model", {})
    trunc = data.get("truncation", {})
    search = data.get("search", {})
    suites_t = data.get("suites", {})
    output = data.get("output", {})
    cfg = Config(
        name=_get(data, "name", str, "custom"),
        coefficients=coeffs,
        complement_dim=_get(model, "complement_dim", int, None),
        hamiltonian_rank=_get(model, "hamiltonian_rank", int, None),
        n=_get(trunc, "n", int, 2),
        K=_get(trunc, "K", int, 3),
        slack=_get(trunc, "slack", int, 2),
        jet_order=_get(trunc, "jet_order", int, 2),
        seed=_get(search, "seed", int, 0),
        attempts=_get(search, "attempts", int, 50),
        suites=_get(suites_t, "select", list, list(SUITES)),
        projection_count=_get(suites_t, "projection_count", int, 20),
        frame_sections=_get(suites_t, "frame_sections", int, 10),
        lax_points=_get(suites_t, "lax_points", int, 5),
        lax_hamiltonians=_get(suites_t, "lax_hamiltonians", list, None),
        gauge=_get(data, "gauge", list, [dict(g) for g in DEFAULT_GAUGE]),
        out=_get(output, "out", str, "report.json"),
        cache_dir=_get(output, "cache_dir", str, ".hitchin-cache"),
    )
    validate(cfg)
    return cfg


def validate(cfg: Config):
    """Check ranges and the curve model; records derived minimum precisions."""
    if cfg.n < 2:
        raise ConfigError("n must be at least 2")
    if cfg.K < 1:
        raise ConfigError("K must be at least 1")
    if cfg.jet_order < 1:
        raise ConfigError("jet_order must be at least 1 (brackets differentiate once)")
    if cfg.slack < 0 or cfg.attempts < 1:
        raise ConfigError("slack must be >= 0 and attempts >= 1")
    if cfg.projection_count < 1 or cfg.frame_sections < 1 or cfg.lax_points < 1:
        raise ConfigError("sample counts must be positive")
    unknown = [s for s in cfg.suites if s not in SUITES]
    if unknown:
        raise ConfigError(f"unknown suites {unknown}; known: {list(SUITES)}")
    try:
        curve = build_curve(cfg.coefficients)
    except HitchinError as exc:
        raise ConfigError(f"curve: {exc}") from exc
    try:
        specs = [GaugeSpec.from_json(g) for g in cfg.gauge]
        for spec in specs:
            spec.validate(curve.num_punctures, cfg.n)
    except (HitchinError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"gauge spec: {exc}") from exc
    if cfg.lax_hamiltonians is None:
        cfg.lax_hamiltonians = [[i, -1] for i in range(curve.num_punctures)] + [[0, 0], [0, -2]]
    for h in cfg.lax_hamiltonians:
        if (not isinstance(h, list) or len(h) != 2 or not 0 <= h[0] < curve.num_punctures
                or h[1] < -2):
            raise ConfigError(f"bad lax hamiltonian {h!r}; expected [puncture, degree >= -2]")
    cfg.derived = {"genus": curve.genus, "punctures": curve.num_punctures,
                   "dcybe_window": default_window(cfg.K),
                   "min_column_depth": default_column_depth(cfg.K, 0),
                   "gauge_jet_order": cfg.jet_order - 1}
    return cfg


def load_config(path) -> Config:
    """Read a TOML config file, or a preset name such as ``d1``."""
    if str(path) in PRESETS:
        return config_from_dict({"preset": str(path)})
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    return config_from_dict(data)


# -- workspace -------------------------------------------------------------------

@dataclass
class Workspace:
    config: Config
    chart: BundleChart
    ks: KernelSet | None = None

    def to_json(self):
        return {"schema": SCHEMA_VERSION, "key": self.config.workspace_key(),
                "chart": {"spec": self.chart.spec.to_json(), "jet_order": self.chart.jet_order,
                          "certificate": self.chart.certificate.to_json()},
                "kernels": None if self.ks is None else {
                    "K": self.ks.K, "store": self.ks.store.to_json()}}


def dumps(data) -> str:
    return json.dumps(data, sort_keys=True, indent=1) + "\n"


def workspace_path(cfg: Config):
    return Path(cfg.cache_dir) / f"workspace-{cfg.workspace_key()}.json"


def workspace_save(ws: Workspace, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(ws.to_json()))
    return path


def workspace_load(cfg: Config, path) -> Workspace:
    """Rebuild a workspace; raises SchemaMismatch or ParseError."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"workspace {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError(f"workspace {path}: not an object")
    if data.get("schema") != SCHEMA_VERSION:
        raise SchemaMismatch(f"workspace schema {data.get('schema')!r} != {SCHEMA_VERSION}")
    if data.get("key") != cfg.workspace_key():
        raise ParseError("workspace belongs to a different config")
    try:
        c = data["chart"]
        curve = build_curve(cfg.coefficients)
        chart = BundleChart(curve, LieData(cfg.n), ChartSpec.from_json(c["spec"]),
                            c["jet_order"], certificate=Certificate(**c["certificate"]))
        ks = None
        if data["kernels"] is not None:
            store = ColumnStore.restore(chart, data["kernels"]["store"])
            ks = KernelSet(chart, data["kernels"]["K"], slack=store.slack, store=store)
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ParseError(f"workspace {path}: {exc}") from exc
    return Workspace(cfg, chart, ks)


def _cached(cfg, need_kernels):
    path = workspace_path(cfg)
    if not path.exists():
        return None
    try:
        ws = workspace_load(cfg, path)
    except (SchemaMismatch, ParseError, HitchinError) as exc:
        log.warning("WARN ignoring cached workspace %s: %s", path, exc)
        return None
    if need_kernels and ws.ks is None:
        return None
    log.info("reusing workspace %s", path)
    return ws


class StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage = stage
        self.cause = exc


def certify(cfg: Config, use_cache=True) -> Workspace:
    ws = _cached(cfg, False) if use_cache else None
    if ws is not None:
        return ws
    try:
        curve = build_curve(cfg.coefficients)
        chart = search_chart(curve, LieData(cfg.n), seed=cfg.seed, attempts=cfg.attempts,
                             jet_order=cfg.jet_order, slack=cfg.slack)
    except HitchinError as exc:
        raise StageError("certify", exc) from exc
    ws = Workspace(cfg, chart)
    if use_cache:
        workspace_save(ws, workspace_path(cfg))
    return ws


def solve(cfg: Config, use_cache=True) -> Workspace:
    ws = _cached(cfg, True) if use_cache else None
    if ws is not None:
        return ws
    ws = certify(cfg, use_cache)
    try:
        ws.ks = KernelSet(ws.chart, cfg.K, slack=cfg.slack)
    except HitchinError as exc:
        raise StageError("solve", exc) from exc
    if use_cache:
        workspace_save(ws, workspace_path(cfg))
    return ws


# -- suites ----------------------------------------------------------------------

def _certificate_report(cfg, chart):
    cert = chart.certificate
    rep = IdentityReport("certificate", {"depth": cert.depth}, checked=1)
    if not cert.passed:
        rep.nonzero.append((("passed",), {"passed": "false"}))
    if cfg.complement_dim is not None and cert.complement_dim != cfg.complement_dim:
        rep.nonzero.append((("complement_dim",), {"got": str(cert.complement_dim),
                                                   "expected": str(cfg.complement_dim)}))
    rep.notes.append(f"complement dimension {cert.complement_dim}")
    return rep


def _merge(name, reports):
    out = IdentityReport(name, {"parts": [r.window for r in reports]})
    for r in reports:
        out.checked += r.checked
        out.uncertified += r.uncertified
        out.nonzero.extend(r.nonzero)
        out.notes.extend(r.notes)
    return out


def _rank_report(cfg, space):
    rank = hamiltonian_rank(space, hamiltonian_basis(space))
    rep = IdentityReport("hamiltonian_count", {"punctures": space.nump}, checked=1)
    rep.notes.append(f"independent quadratic Hamiltonians: {rank}")
    if cfg.hamiltonian_rank is not None and rank != cfg.hamiltonian_rank:
        rep.nonzero.append((("rank",), {"got": str(rank), "expected": str(cfg.hamiltonian_rank)}))
    return rep


def run_suite(cfg: Config, ws: Workspace, suite: str, state: dict):
    """Reports produced by one suite (see :data:`SUITES`)."""
    chart, ks = ws.chart, ws.ks
    if suite == "certificate":
        return [_certificate_report(cfg, chart)]
    if suite == "frame":
        return [frame_suite(chart, cfg.frame_sections, cfg.seed)]
    if suite == "projection":
        return [projection_suite(ks, cfg.projection_count, cfg.seed)]
    if suite == "dcybe":
        return [dcybe_residual(ks), negative_control(ks)]
    if suite == "extended_dcybe":
        return [extended_dcybe_residual(ks)]
    if suite == "auxiliary":
        return [auxiliary_identity_check(ks)]
    if suite == "szego":
        return [szego_check(ks), reproducing_check(ks)]
    if suite == "r_bracket":
        return [r_bracket_lemma_check(ks)]
    if suite == "hitchin_weak":
        return [hitchin_weak_identity(ks, name="hitchin_weak"),
                hitchin_weak_identity(ks, extended=True, name="hitchin_weak_extended")]
    if suite == "gauge":
        return [gauge_suite(ks, [GaugeSpec.from_json(g) for g in cfg.gauge])]
    space = state.get("space")
    if space is None:
        space = state["space"] = PhaseSpace(ks)
    if suite == "commutativity":
        return [commutativity_suite(space), gaudin_extraction_check(space),
                _rank_report(cfg, space)]
    if suite == "lax":
        points = random_phase_points(space, cfg.lax_points, cfg.seed)
        return [_merge("lax_pair", [lax_pair_check(space, tuple(h), points)
                                    for h in cfg.lax_hamiltonians])]
    raise ConfigError(f"unknown suite {suite!r}")


def global_status(reports):
    statuses = [r["status"] for r in reports]
    if not statuses:
        return INCONCLUSIVE
    if FAIL in statuses:
        return FAIL
    if INCONCLUSIVE in statuses:
        return INCONCLUSIVE
    return PASS


def run_pipeline(cfg: Config, suites=None, use_cache=True) -> dict:
    """Chart, kernels and the selected suites; returns the ReportBundle dict."""
    selected = list(suites) if suites else list(cfg.suites)
    ws = solve(cfg, use_cache)
    reports, state, errors = [], {}, []
    for suite in SUITES:
        if suite not in selected:
            continue
        log.info("suite %s", suite)
        try:
            reports.extend(r.to_json() for r in run_suite(cfg, ws, suite, state))
        except HitchinError as exc:
            errors.append(f"[{suite}] {type(exc).__name__}: {exc}")
            reports.append({"name": suite, "status": FAIL, "error": errors[-1]})
    derived = dict(cfg.derived, column_depth=ws.ks.Kc, pole_xi=ws.ks.pole_xi,
                   pole_bound=ws.ks.store.max_pole)
    return {
        "schema": SCHEMA_VERSION,
        "config": cfg.to_json(),
        "config_hash": cfg.config_hash(),
        "derived": derived,
        "chart": {"spec": ws.chart.spec.to_json(), "fingerprint": ws.chart.fingerprint(),
                  "certificate": ws.chart.certificate.to_json()},
        "suites": [s for s in SUITES if s in selected],
        "reports": reports,
        "status": global_status(reports),
    }


def bundle_exit_code(bundle):
    return {PASS: EXIT_PASS, FAIL: EXIT_FAIL}.get(bundle["status"], EXIT_INCONCLUSIVE)


def write_bundle(bundle, path):
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(bundle))
    return path


def read_bundle(path):
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"report {path}: {exc}") from exc
    if not isinstance(data, dict) or data.get("schema") != SCHEMA_VERSION:
        raise SchemaMismatch(f"report {path} has schema {data.get('schema') if isinstance(data, dict) else None!r}")
    return data


def summary_lines(bundle):
    lines = [f"{r['status']:<17} {r['name']}  checked={r.get('checked', 0)}"
             f" nonzero={r.get('nonzero_count', 0)} uncertified={r.get('uncertified', 0)}"
             for r in bundle["reports"]]
    lines.append(f"{bundle['status']:<17} overall ({bundle['config']['name']})")
    return lines


# -- command line ------------------------------------------------------------------

def _setup(config, seed, out, cache_dir):
    cfg = load_config(config)
    if seed is not None:
        cfg.seed = seed
    if out is not None:
        cfg.out = out
    if cache_dir is not None:
        cfg.cache_dir = cache_dir
    return cfg


def _common(fn):
    fn = click.option("--cache-dir", default=None, help="workspace cache directory")(fn)
    fn = click.option("--out", default=None, help="JSON output path")(fn)
    fn = click.option("--seed", type=int, default=None, help="override the chart search seed")(fn)
    fn = click.option("--config", "config", default="d1", show_default=True,
                      help="TOML config file or preset name (d1, d2)")(fn)
    return fn


def _guard(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_USAGE)
        except (SchemaMismatch, ParseError) as exc:
            click.echo(f"{type(exc).__name__}: {exc}", err=True)
            sys.exit(EXIT_USAGE)
        except StageError as exc:
            click.echo(str(exc), err=True)
            sys.exit(EXIT_FAIL)
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="log progress to stderr")
def main(verbose):
    """Exact dynamical r-matrix construction and verification."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)


@main.command("certify")
@_common
@_guard
def certify_cmd(config, seed, out, cache_dir):
    """Search and certify a chart; prints the certificate."""
    cfg = _setup(config, seed, out, cache_dir)
    ws = certify(cfg)
    click.echo(dumps({"spec": ws.chart.spec.to_json(), "certificate": ws.chart.certificate.to_json()}),
               nl=False)
    sys.exit(EXIT_PASS if ws.chart.certificate.passed else EXIT_FAIL)


@main.command("solve")
@_common
@_guard
def solve_cmd(config, seed, out, cache_dir):
    """Certify and solve the kernel columns; caches the workspace."""
    cfg = _setup(config, seed, out, cache_dir)
    ws = solve(cfg)
    click.echo(dumps(ws.ks.config()), nl=False)


def _verify(cfg, suites):
    bundle = run_pipeline(cfg, suites)
    write_bundle(bundle, cfg.out)
    for line in summary_lines(bundle):
        click.echo(line)
    sys.exit(bundle_exit_code(bundle))


@main.command("verify")
@_common
@click.option("--suite", "suites", multiple=True, type=click.Choice(list(SUITES)),
              help="run only this suite (repeatable)")
@_guard
def verify_cmd(config, seed, out, cache_dir, suites):
    """Run identity suites and write the JSON report bundle."""
    _verify(_setup(config, seed, out, cache_dir), suites)


@main.command("report")
@_common
@_guard
def report_cmd(config, seed, out, cache_dir):
    """Summarize a previously written report bundle."""
    cfg = _setup(config, seed, out, cache_dir)
    bundle = read_bundle(cfg.out)
    for line in summary_lines(bundle):
        click.echo(line)
    sys.exit(bundle_exit_code(bundle))


@main.command("all")
@_common
@_guard
def all_cmd(config, seed, out, cache_dir):
    """Certify, solve and run every suite."""
    _verify(_setup(config, seed, out, cache_dir), list(SUITES))


if __name__ == "__main__":
    main()
