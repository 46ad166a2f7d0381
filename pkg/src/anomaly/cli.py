"""Command-line entry point: ``anomaly <command> --config cfg.json --out dir``.

Exit codes: 0 success, 1 error (bad config or failed run), 2 verification
failed.  Artifacts are produced in a scratch directory and only published
to the output directory once the whole run has succeeded.
"""

import argparse
import hashlib
import json
import logging
import math
import os
import shutil
import sys
import tempfile
import time
from dataclasses import dataclass
from importlib import metadata, resources

import jsonschema
import numpy as np

from . import fade, rheology, stable, verification, walks
from ._accel import apply_thread_cap
from .grids import Grid1D, TimeGrid
from .operators import OrderField

log = logging.getLogger("anomaly")

COMMANDS = ("sample", "walk", "solve", "rheology", "verify")
EXIT_OK, EXIT_ERROR, EXIT_VERIFY = 0, 1, 2


class ConfigError(ValueError):
    """Invalid experiment configuration; ``errors`` lists every violation."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    seed: int
    parameters: dict
    output_dir: str = None

    def canonical(self):
        doc = {"command": self.command, "seed": self.seed, "parameters": self.parameters}
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @property
    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _schema(name):
    return json.loads(resources.files("anomaly").joinpath("schema", f"{name}.json").read_text())


def _path(err, root):
    parts = [str(p) for p in err.absolute_path]
    return ".".join(parts) if parts else root


def _collect(schema, doc, root="<root>"):
    v = jsonschema.Draft202012Validator(schema)
    errs = sorted(v.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    return [f"{_path(e, root)}: {e.message}" for e in errs]


def validate_config(doc, seed_override=None):
    """Parse and validate a JSON config document; raises ConfigError listing all problems.

    Error paths inside ``parameters`` are given relative to it (``stable.alpha``).
    """
    try:
        data = json.loads(doc) if isinstance(doc, (str, bytes)) else doc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from None
    if not isinstance(data, dict):
        raise ConfigError(["<root>: config must be a JSON object"])
    data = dict(data)
    if seed_override is not None:
        data["seed"] = seed_override
    errors = _collect(_schema("config"), data)
    cmd = data.get("command")
    params = data.get("parameters")
    if cmd in COMMANDS and isinstance(params, dict):
        errors += _collect(_schema(cmd), params, root="parameters")
        errors += _semantic_checks(cmd, params)
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(cmd, int(data["seed"]), params, data.get("output_dir"))


def _semantic_checks(cmd, p):
    """Cross-field rules that the schemas cannot express."""
    errs = []
    if cmd == "sample" and "density_grid" in p:
        g = p["density_grid"]
        if g.get("hi", 1) <= g.get("lo", 0):
            errs.append("density_grid.hi: must exceed density_grid.lo")
    if cmd == "rheology":
        try:
            rheology.RheoModel(**p["model"])
        except (TypeError, ValueError) as exc:
            errs.append(f"model: {exc}")
    return errs


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def _stable_params(d):
    return stable.StableParams(d["alpha"], d.get("gamma", 0.0), d.get("sigma", 1.0), d.get("mu", 0.0))


def _walk_spec(p, seed):
    kw = dict(kind=p["kind"], dt=p["dt"], horizon=p["horizon"], n_paths=p["n_paths"], seed=seed)
    if "stable_jump" in p:
        kw["stable_jump"] = _stable_params(p["stable_jump"])
    if "wait" in p:
        w = p["wait"]
        kw["wait"] = walks.WaitLaw(w["kind"], w.get("scale", 1.0), w.get("beta", 1.0))
    for k in ("beta", "dtau", "speed", "tau0", "gamma_lw"):
        if k in p:
            kw[k] = p[k]
    return walks.WalkSpec(**kw)


def _order(v, lo, hi, grid):
    if isinstance(v, dict):
        a, b = float(v["left"]), float(v["right"])
        x0, L = grid.x0, grid.dx * (grid.n - 1)
        return OrderField(lambda x, t: a + (b - a) * np.clip((x - x0) / L, 0.0, 1.0), lo, hi)
    return float(v)


def _ic(d, grid):
    kind = d["type"]
    c0, mass = d.get("center", 0.0), d.get("mass", 1.0)
    if kind == "delta":
        return fade.delta_ic(grid, c0, mass)
    w = d.get("width", 1.0)
    x = grid.x
    if kind == "gaussian":
        u = np.exp(-0.5 * ((x - c0) / w) ** 2)
    else:
        u = (np.abs(x - c0) <= 0.5 * w).astype(float)
    s = u.sum() * grid.dx
    if s == 0:
        raise ValueError("initial condition has no support on the grid")
    return mass * u / s


def _history(d):
    shape, amp = d["shape"], d["amplitude"]
    tr = d.get("ramp_time", d["horizon"])
    per = d.get("period", d["horizon"])
    if shape == "step":
        return rheology.StrainHistory.from_function(lambda t: np.full_like(t, amp), d["dt"], d["horizon"], step=True)
    if shape == "ramp":
        f = lambda t: amp * t / d["horizon"]
    elif shape == "ramp_hold":
        f = lambda t: amp * np.minimum(t / tr, 1.0)
    else:
        f = lambda t: amp * np.sin(2.0 * math.pi * t / per)
    return rheology.StrainHistory.from_function(f, d["dt"], d["horizon"])


# ---------------------------------------------------------------------------
# commands; each writes into ``out`` and returns (status, summary dict)
# ---------------------------------------------------------------------------


def _csv_rows(path, header, cols):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")


def cmd_sample(cfg, out):
    p = cfg.parameters
    sp = _stable_params(p["stable"])
    x = stable.sample(sp, p["n"], cfg.seed, p.get("stream_id", 0))
    _csv_rows(os.path.join(out, "samples.csv"), ["i", "x"], [np.arange(x.size), x])
    if "density_grid" in p:
        g = p["density_grid"]
        xs = np.linspace(g["lo"], g["hi"], g["n"])
        _csv_rows(os.path.join(out, "density.csv"), ["x", "pdf", "cdf"], [xs, stable.pdf(sp, xs), stable.cdf(sp, xs)])
    return EXIT_OK, {"n": int(x.size)}


def cmd_walk(cfg, out):
    p = cfg.parameters
    spec = _walk_spec(p, cfg.seed)
    e = walks.simulate(spec)
    msd = walks.msd_estimate(e)
    _csv_rows(os.path.join(out, "msd.csv"), ["t", "msd", "se"], msd.T)
    b = p.get("bins", {})
    hw = b.get("half_width", 10.0)
    bins = verification.default_bins(hw, b.get("n", verification.DEFAULT_BINS))
    dens, outside = walks.empirical_density(e, e.t[-1], bins)
    walks.write_density_csv(bins, dens, os.path.join(out, "density.csv"))
    k = min(p.get("save_paths", 0), e.n_paths)
    if k:
        sub = walks.PathEnsemble(e.times, e.positions[:k], spec)
        walks.write_paths_csv(sub, os.path.join(out, "paths.csv"))
    return EXIT_OK, {"outside_fraction": outside}


def cmd_solve(cfg, out):
    p = cfg.parameters
    gd = p["grid"]
    kind = p["kind"]
    if kind == "Spectral":
        n = int(round(2.0 * gd["half_width"] / gd["dx"]))
        grid = Grid1D.periodic(2.0 * gd["half_width"], n)
        times = p["dt"] * np.arange(0, p["n_steps"] + 1, p.get("save_every", 1))
        fs = fade.solve_spectral_fade(grid, _ic(p["ic"], grid), times, float(p.get("alpha", 2.0)), p.get("p", 0.5), p.get("D", 1.0), p.get("V", 0.0))
    else:
        grid = Grid1D.centered(gd["half_width"], gd["dx"], gd.get("bc", "FreeSpace"))
        prob = fade.FadeProblem(
            grid,
            TimeGrid(p["dt"], p["n_steps"]),
            _ic(p["ic"], grid),
            kind,
            V=p.get("V", 0.0),
            D=p.get("D", 1.0),
            alpha=_order(p.get("alpha", 2.0), 1.0, 2.0, grid),
            beta=_order(p.get("beta", 1.0), 0.0, 1.0, grid),
            p=p.get("p", 0.5),
            mim_beta_ratio=p.get("mim_beta_ratio", 0.0),
            edge_tol=p.get("edge_tol", fade.EDGE_TOL),
            save_every=p.get("save_every", 1),
        )
        solver = {
            "SpaceFADE": fade.solve_space_fade,
            "FFADE": fade.solve_space_fade,
            "TimeFADE": fade.solve_time_fade,
            "FMIM": fade.solve_fmim,
            "VOFADE": fade.solve_vo_fade,
        }[kind]
        fs = solver(prob)
        fade.write_mass_csv(fs, os.path.join(out, "mass.csv"), p["dt"])
    fade.write_snapshots_csv(fs, os.path.join(out, "snapshots.csv"))
    for i, xp in enumerate(p.get("probes", [])):
        fade.write_btc_csv(fs, xp, os.path.join(out, f"btc_{i}.csv"))
    return EXIT_OK, {"final_mass": float(np.sum(fs.final) * fs.grid.dx)}


def cmd_rheology(cfg, out):
    p = cfg.parameters
    m = rheology.RheoModel(**p["model"])
    h = _history(p["history"])
    t = h.t[1:]
    rheology.write_relaxation_csv(t, rheology.relaxation_modulus(m, t), os.path.join(out, "relaxation.csv"))
    if m.kind != "VEVP" and "omega" in p:
        o = p["omega"]
        w = np.logspace(math.log10(o["lo"]), math.log10(o["hi"]), o["n"])
        g1, g2 = rheology.dynamic_moduli(m, w)
        rheology.write_moduli_csv(w, g1, g2, os.path.join(out, "moduli.csv"))
    summary = {}
    if m.kind == "VEVP":
        s, ep, q = rheology.vevp_simulate(m, h)
    else:
        s = rheology.stress_response(m, h)
        ep = q = np.zeros_like(s)
    if m.kind == "SB" and not h.step:
        summary["free_energy"] = rheology.sb_free_energy(m.E, m.alpha, h)
    rheology.write_driver_csv(h, s, ep, q, os.path.join(out, "driver.csv"))
    return EXIT_OK, summary


def cmd_verify(cfg, out):
    p = cfg.parameters
    if "walk" not in p:
        raise ValueError("verify needs a 'walk' block")
    spec = _walk_spec(p["walk"], cfg.seed)
    e = walks.simulate(spec)
    if p["check"] == "flight_density":
        if spec.kind != "Flight":
            raise ValueError("flight_density needs a Flight walk")
        j = spec.stable_jump
        T = spec.horizon
        ref = stable.StableParams(j.alpha, j.gamma, j.sigma * T ** (1.0 / j.alpha), j.mu * T)
        bins = verification.default_bins(p.get("half_width", 20.0 * ref.sigma), p.get("n_bins", verification.DEFAULT_BINS))
        dens, _ = walks.empirical_density(e, e.t[-1], bins)
        # cell-averaged reference via the CDF so the comparison is not limited by midpoint error
        cdf = stable.cdf(ref, bins.edges)
        rep = verification.compare_density(dens, np.diff(cdf) / bins.dx, bins, p.get("threshold", 0.02), e.n_paths)
        verification.write_report_json({"flight_density": rep}, os.path.join(out, "report.json"))
        verification.write_report_csv([rep.to_dict()], os.path.join(out, "report.csv"))
        passed = rep.passed
        summary = rep.to_dict()
    else:
        msd = walks.msd_estimate(e)
        slope, icpt, r2 = verification.fit_exponent(msd[:, :2])
        expected = p.get("expected_exponent", 1.0)
        tol = p.get("tolerance", 0.05)
        passed = abs(slope - expected) <= tol
        summary = {"exponent": slope, "intercept": icpt, "r2": r2, "expected": expected, "tolerance": tol, "passed": passed}
        verification.write_report_json({"msd_exponent": summary}, os.path.join(out, "report.json"))
        verification.write_report_csv([summary], os.path.join(out, "report.csv"))
    return (EXIT_OK if passed else EXIT_VERIFY), summary


HANDLERS = {"sample": cmd_sample, "walk": cmd_walk, "solve": cmd_solve, "rheology": cmd_rheology, "verify": cmd_verify}


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def run(cfg, out_dir):
    """Execute a validated config; artifacts land in ``out_dir`` only on completion."""
    out_dir = os.path.abspath(out_dir)
    parent = os.path.dirname(out_dir)
    os.makedirs(parent, exist_ok=True)
    scratch = tempfile.mkdtemp(prefix=".anomaly-", dir=parent)
    try:
        threads = apply_thread_cap()
        t0 = time.time()
        status, summary = HANDLERS[cfg.command](cfg, scratch)
        elapsed = time.time() - t0
        files = sorted(os.listdir(scratch))
        manifest = {
            "command": cfg.command,
            "seed": cfg.seed,
            "config_sha256": cfg.digest,
            "config": json.loads(cfg.canonical()),
            "version": _version(),
            "threads": threads,
            "wall_clock_s": elapsed,
            "started_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t0)),
            "status": status,
            "summary": summary,
            "artifacts": {f: _sha256(os.path.join(scratch, f)) for f in files},
        }
        with open(os.path.join(scratch, "manifest.json"), "w", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=float)
            fh.write("\n")
        os.makedirs(out_dir, exist_ok=True)
        for f in files + ["manifest.json"]:
            os.replace(os.path.join(scratch, f), os.path.join(out_dir, f))
        return status
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def build_parser():
    ap = argparse.ArgumentParser(prog="anomaly", description="Anomalous diffusion experiments from JSON configs.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for c in COMMANDS:
        sp = sub.add_parser(c, help=f"run a {c} experiment")
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--out", help="output directory (overrides output_dir in the config)")
        sp.add_argument("--seed", type=int, help="seed (overrides the config)")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
        cfg = validate_config(text, seed_override=args.seed)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if cfg.command != args.command:
        print(f"config error: command: config is for '{cfg.command}', invoked as '{args.command}'", file=sys.stderr)
        return EXIT_ERROR
    out = args.out or cfg.output_dir
    if not out:
        print("error: no output directory (use --out or output_dir)", file=sys.stderr)
        return EXIT_ERROR
    try:
        return run(cfg, out)
    except Exception as exc:  # surfaced with the module that raised it
        mod = type(exc).__module__
        where = mod if mod.startswith("anomaly") else f"anomaly.{cfg.command}"
        print(f"error [{where}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
