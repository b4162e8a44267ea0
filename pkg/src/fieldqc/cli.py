"""Command-line entry point.

Every run writes its artifacts plus ``manifest.json`` (inputs, library
versions, SHA-256 of each output, and error detail on failure) to ``--out``.
Passing a manifest back through ``--config`` re-runs the same command.
"""

import argparse
import csv
import hashlib
import io
import json
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import mpmath
import numpy as np
import scipy

from . import __version__
from . import defectcell, elastic, homogenized, kernelfit, svg, unitcell
from .errors import FieldQCError, InputError

EXIT_OK, EXIT_USAGE, EXIT_INTERNAL = 0, 2, 5
FORMATS = ("csv", "json", "svg")

AL = {"lambda": 1.0 / 6.0, "alpha": 0.1629, "gamma": 0.9449, "a0": 7.5}

# per-command parameters: flag -> (type, default)
PARAMS = {
    "unitcell solve": {
        "a0": (float, 7.5), "lattice": (str, "fcc"), "Z": (float, 3.0), "sigma-nuc": (float, None),
        "lambda": (float, 1.0 / 6.0), "N": (int, 32), "mode": (str, "regularized-nucleus"),
        "F0": (str, None), "tol": (float, 1e-9), "dump-fields": (bool, False),
    },
    "unitcell stiffness": {
        "a0": (float, 7.5), "lattice": (str, "fcc"), "Z": (float, 3.0), "sigma-nuc": (float, None),
        "lambda": (float, 1.0 / 6.0), "N": (int, 32), "mode": (str, "regularized-nucleus"),
        "F0": (str, None), "tol": (float, 1e-9), "h": (float, None),
    },
    "greens": {
        "lambda": (float, AL["lambda"]), "alpha": (float, AL["alpha"]), "gamma": (float, AL["gamma"]),
        "r-list": (str, "0.5,1,2,5,10,20"),
    },
    "defect sweep": {
        "lambda": (float, AL["lambda"]), "alpha": (float, AL["alpha"]), "gamma": (float, AL["gamma"]),
        "rho": (float, 1.0), "r0": (float, None), "a0": (float, AL["a0"]), "r-max": (float, None),
        "points": (int, 40),
    },
    "defect energy": {
        "lambda": (float, AL["lambda"]), "alpha": (float, AL["alpha"]), "gamma": (float, AL["gamma"]),
        "rho": (float, 1.0), "r0": (float, AL["a0"] / 2), "R0": (float, 3 * AL["a0"]),
        "mu": (float, None), "kappa": (float, None), "sigma0": (float, None),
    },
    "elastic": {
        "mu": (float, None), "kappa": (float, None), "sigma0": (float, None), "rho": (float, 1.0),
        "r0": (float, None), "R0": (float, None),
    },
    "kernel fit": {
        "samples": (str, None), "m": (int, None), "seed": (int, 0), "restarts": (int, 8),
        "threshold": (float, None),
    },
    "paper-figure": {
        "lambda": (float, AL["lambda"]), "alpha": (float, AL["alpha"]), "gamma": (float, AL["gamma"]),
        "rho": (float, 1.0), "a0": (float, AL["a0"]), "r0": (float, None), "r-max": (float, None),
        "points": (int, 40),
    },
}

CHOICES = {"lattice": ("sc", "fcc", "bcc"), "mode": unitcell.MODES}


def _dest(flag):
    return "lam" if flag == "lambda" else flag.replace("-", "_")


def _key(flag):
    return flag.replace("-", "_")


def build_parser():
    p = argparse.ArgumentParser(prog="fieldqc", description="Homogenized OFDFT defect-field toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="JSON file with parameters (or a manifest from a previous run)")
    p.add_argument("--out", default="fieldqc-out", help="output directory (default: fieldqc-out)")
    p.add_argument("--format", default="csv,json,svg",
                   help="comma-separated subset of csv,json,svg to write (default: all)")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")

    def add(parser, command):
        for flag, (typ, _) in PARAMS[command].items():
            if typ is bool:
                parser.add_argument(f"--{flag}", dest=_dest(flag), action="store_true", default=None)
            else:
                parser.add_argument(f"--{flag}", dest=_dest(flag), type=typ, default=None,
                                    choices=CHOICES.get(flag))
        parser.set_defaults(command=command)

    uc = sub.add_parser("unitcell", help="periodic unit-cell problem").add_subparsers(dest="action", metavar="ACTION")
    add(uc.add_parser("solve", help="solve one cell and report its moments"), "unitcell solve")
    add(uc.add_parser("stiffness", help="finite-difference stiffness and eigenstress"), "unitcell stiffness")
    add(sub.add_parser("greens", help="Green's functions of the homogenized model"), "greens")
    df = sub.add_parser("defect", help="spherical defect in a finite ball").add_subparsers(dest="action", metavar="ACTION")
    add(df.add_parser("sweep", help="cell-size convergence of the electrostatic energy"), "defect sweep")
    add(df.add_parser("energy", help="defect energy for one cell radius"), "defect energy")
    add(sub.add_parser("elastic", help="dilatational inclusion in an isotropic ball"), "elastic")
    kf = sub.add_parser("kernel", help="partial-fraction kernels").add_subparsers(dest="action", metavar="ACTION")
    add(kf.add_parser("fit", help="fit K(k) by sum_j P_j k^2/(k^2+Q_j)"), "kernel fit")
    add(sub.add_parser("paper-figure", help="reference constants -> model -> sweep -> SVG"), "paper-figure")
    return p


# -- configuration -----------------------------------------------------------

def _load_config(path):
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError("config must be a JSON object")
    return data


def _flatten_unitcell(cfg):
    out = dict(cfg)
    lat = out.pop("lattice", None)
    if isinstance(lat, dict):
        if "a0_bohr" in lat:
            out["a0"] = lat["a0_bohr"]
        if "type" in lat:
            out["lattice"] = lat["type"]
    elif lat is not None:
        out["lattice"] = lat
    return out


def resolve_params(command, args, config):
    """Defaults <- config file <- explicit flags."""
    cfg = dict(config.get("inputs", config)) if config else {}
    if command.startswith("unitcell"):
        cfg = _flatten_unitcell(cfg)
    params = {}
    for flag, (typ, default) in PARAMS[command].items():
        val = default
        for k in (flag, _key(flag)):
            if k in cfg:
                val = cfg[k]
        cli = getattr(args, _dest(flag), None)
        if cli is not None:
            val = cli
        if val is not None and typ in (int, float) and not isinstance(val, bool):
            try:
                val = typ(val)
            except (TypeError, ValueError):
                raise InputError(f"--{flag}: expected {typ.__name__}, got {val!r}") from None
        if flag in CHOICES and val is not None and val not in CHOICES[flag]:
            raise InputError(f"--{flag}: must be one of {', '.join(CHOICES[flag])}")
        params[_key(flag)] = val
    return params


def _require(params, *names):
    missing = [n for n in names if params.get(n) is None]
    if missing:
        raise InputError("missing required parameter(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _floats(text, what):
    if isinstance(text, (list, tuple)):
        vals = text
    else:
        vals = [s for s in str(text).split(",") if s.strip()]
    try:
        return [float(v) for v in vals]
    except ValueError:
        raise InputError(f"{what}: expected comma-separated numbers") from None


# -- output ------------------------------------------------------------------

@dataclass
class Outputs:
    directory: Path
    formats: set
    written: dict = field(default_factory=dict)

    def _write(self, name, text):
        data = text.encode()
        (self.directory / name).write_bytes(data)
        self.written[name] = hashlib.sha256(data).hexdigest()

    def json(self, name, obj):
        if "json" in self.formats:
            self._write(name, json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")

    def csv(self, name, header, rows):
        if "csv" in self.formats:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])
            self._write(name, buf.getvalue())

    def svg(self, name, text):
        if "svg" in self.formats:
            self._write(name, text)

    def record(self, name):
        """Hash a file some other writer already put in the output directory."""
        self.written[name] = hashlib.sha256((self.directory / name).read_bytes()).hexdigest()


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return v


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def versions():
    return {"fieldqc": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "mpmath": mpmath.__version__, "python": platform.python_version()}


# -- commands ----------------------------------------------------------------

def _unitcell_spec(p):
    cfg = {"lattice": {"a0_bohr": p["a0"], "type": p["lattice"]}, "Z": p["Z"], "sigma_nuc": p["sigma_nuc"],
           "lambda": p["lambda"], "N": p["N"], "mode": p["mode"]}
    if p["F0"] is not None:
        cfg["F0"] = _floats(p["F0"], "--F0")
        if len(cfg["F0"]) != 9:
            raise InputError("--F0 needs 9 numbers (row-major)")
    return unitcell.spec_from_config(cfg)


def run_unitcell_solve(p, out):
    spec = _unitcell_spec(p)
    fields, runtime = unitcell.timed_solve(spec, tol=p["tol"])
    out.json("unitcell.json", unitcell.summary(fields, spec, runtime=runtime))
    if p["dump_fields"]:
        side = unitcell.dump_fields(fields, spec, out.directory)
        for name in ("fields_u.bin", "fields_phi.bin", side.name):
            out.record(name)


def run_unitcell_stiffness(p, out):
    spec = _unitcell_spec(p)
    t = unitcell.stiffness_fd(spec, h=p["h"], tol=p["tol"])
    K, G = t.voigt_moduli()
    out.json("stiffness.json", {"C": t.C, "B": t.B, "h": t.h, "F0": t.F0,
                                "symmetry_error": t.symmetry_error(), "voigt_bulk": K, "voigt_shear": G})


def _model(p):
    return homogenized.build_model(p["lambda"], p["alpha"], p["gamma"])


def run_greens(p, out):
    model = _model(p)
    r = np.array(_floats(p["r_list"], "--r-list"))
    if r.size == 0:
        raise InputError("--r-list is empty")
    eu, ep = homogenized.green_u(model, r), homogenized.green_phi(model, r)
    out.csv("greens.csv", ["r", "E_u", "E_phi"], zip(r, eu, ep))
    out.json("greens.json", model.as_dict())


def _sweep(p):
    model = _model(p)
    a0 = p["a0"]
    r0 = p["r0"] if p["r0"] is not None else a0 / 2
    r_max = p["r_max"] if p["r_max"] is not None else 10 * a0
    if p["points"] < 1:
        raise InputError("--points must be at least 1")
    radii = np.geomspace(1.2 * r0, r_max, p["points"]) if p["points"] > 1 else np.array([r_max])
    sweep = defectcell.cell_size_sweep(model, p["rho"], r0, radii, a0=a0)
    return model, r0, sweep


def _sweep_outputs(out, stem, model, r0, sweep, extra=None):
    out.csv(f"{stem}.csv", ["R0_bohr", "R0_over_a0", "E_es_hartree", "rel_error"], sweep.rows())
    r1 = sweep.R0_at_threshold
    info = {"E_inf": sweep.E_inf, "R0_at_1pct": r1, "R0_at_1pct_over_a0": None if r1 is None else r1 / sweep.a0,
            "k_plus": model.k_plus, "k_minus": model.k_minus, "r0": r0, "a0": sweep.a0,
            "failed_points": sweep.errors}
    info.update(extra or {})
    out.json(f"{stem}.json", info)
    x = sweep.R0 / sweep.a0
    series = [("electrostatic", x, sweep.rel_error)]
    if extra and "elastic_curve" in extra:
        series.append(("elastic (r0/R0)^3", x, (r0 / sweep.R0) ** 3))
    out.svg(f"{stem}.svg", svg.line_chart(series, "R0 / a0", "relative error in defect energy",
                                          title="Cell-size effect", hlines=[(0.01, "1%")]))


def run_defect_sweep(p, out):
    model, r0, sweep = _sweep(p)
    _sweep_outputs(out, "sweep", model, r0, sweep)


def run_defect_energy(p, out):
    model = _model(p)
    d = defectcell.SphericalDefect(p["rho"], p["r0"], p["R0"])
    sol = defectcell.solve_coefficients(model, d)
    e = defectcell.energy_es(sol)
    e_inf = defectcell.energy_es_infinite(model, d)
    res = {"E_es": e, "E_es_infinity": e_inf, "rel_error": abs(e - e_inf) / abs(e_inf),
           "varsigma": sol.varsigma, "b_c": d.b_c(model), "condition": sol.condition,
           "diagnostics": sol.diagnostics}
    given = [p[k] is not None for k in ("mu", "kappa", "sigma0")]
    if any(given) and not all(given):
        raise InputError("--mu, --kappa and --sigma0 must be given together")
    if all(given):
        es = elastic.ElasticSpec(p["mu"], p["kappa"], p["sigma0"], p["rho"], p["r0"], p["R0"])
        res["total"] = elastic.total_defect_energy(e, elastic.energy_el(es), d, es).as_dict()
    out.json("defect_energy.json", res)


def run_elastic(p, out):
    _require(p, "mu", "kappa", "sigma0", "r0", "R0")
    spec = elastic.ElasticSpec(p["mu"], p["kappa"], p["sigma0"], p["rho"], p["r0"], p["R0"])
    t1, t2, t3 = elastic.solve_thetas(spec)
    e = elastic.energy_el(spec)
    e_inf = elastic.energy_el_infinite(spec)
    out.json("elastic.json", {"theta1": t1, "theta2": t2, "theta3": t3, "E_el": e, "E_el_infinity": e_inf,
                              "rel_error": abs(e - e_inf) / abs(e_inf) if e_inf else 0.0,
                              "crossing_R0_over_r0": elastic.crossing_ratio()})


def run_kernel_fit(p, out):
    _require(p, "samples", "m")
    samples = kernelfit.KernelSamples.from_csv(p["samples"])
    thr = p["threshold"] if p["threshold"] is not None else float("inf")
    fit = kernelfit.fit_partial_fractions(samples, p["m"], restarts=p["restarts"], seed=p["seed"], threshold=thr)
    res = {"pairs": fit.pairs(), "residual": fit.residual, "m": fit.m}
    if p["threshold"] is not None:
        res["above_threshold"] = fit.above_threshold
    out.json("kernel_fit.json", res)


def run_paper_figure(p, out):
    model, r0, sweep = _sweep(p)
    crossing = defectcell.crossing_radius(model, r0)
    extra = {"moments": {"lambda": p["lambda"], "alpha": p["alpha"], "gamma": p["gamma"]},
             "regime": model.regime.value, "R0_crossing": crossing,
             "R0_crossing_over_a0": crossing / sweep.a0, "elastic_curve": "(r0/R0)^3"}
    _sweep_outputs(out, "paper_figure", model, r0, sweep, extra)


RUNNERS = {
    "unitcell solve": run_unitcell_solve, "unitcell stiffness": run_unitcell_stiffness,
    "greens": run_greens, "defect sweep": run_defect_sweep, "defect energy": run_defect_energy,
    "elastic": run_elastic, "kernel fit": run_kernel_fit, "paper-figure": run_paper_figure,
}


def _prepare_out(path):
    d = Path(path)
    try:
        d.mkdir(parents=True, exist_ok=True)
        probe = d / ".write-test"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise InputError(f"output directory {d} is not writable: {exc}") from exc
    return d


def _formats(text):
    fmts = {f.strip().lower() for f in text.split(",") if f.strip()}
    if not fmts or fmts - set(FORMATS):
        raise InputError(f"--format takes a comma-separated subset of {','.join(FORMATS)}")
    return fmts


def dispatch(command, params, out):
    """Run one pipeline, returning its exit status; the manifest is always written."""
    manifest = {"command": command, "inputs": params, "versions": versions()}
    status = EXIT_OK
    try:
        RUNNERS[command](params, out)
        manifest["status"] = "ok"
    except FieldQCError as exc:
        status = exc.exit_code
        manifest["status"] = "error"
        manifest["error"] = {"type": type(exc).__name__, "message": str(exc)}
        for attr in ("diagnostics", "residuals"):
            if getattr(exc, attr, None) is not None:
                manifest["error"][attr] = getattr(exc, attr)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        status = EXIT_INTERNAL
        manifest["status"] = "error"
        manifest["error"] = {"type": type(exc).__name__, "message": str(exc)}
    manifest["exit_code"] = status
    manifest["outputs"] = dict(sorted(out.written.items()))
    text = json.dumps(_plain(manifest), indent=2, sort_keys=True) + "\n"
    (out.directory / "manifest.json").write_text(text)
    return status


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config) if args.config else {}
        command = args.command
        if command is None and "command" in config:
            # re-run from a manifest: parse again with its command
            args = parser.parse_args(argv + config["command"].split())
            command = args.command
        if command not in RUNNERS:
            parser.print_usage(sys.stderr)
            print("fieldqc: error: a command is required", file=sys.stderr)
            return EXIT_USAGE
        params = resolve_params(command, args, config)
        out = Outputs(_prepare_out(args.out), _formats(args.format))
    except InputError as exc:
        print(f"fieldqc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    status = dispatch(command, params, out)
    if status:
        err = json.loads((out.directory / "manifest.json").read_text()).get("error", {})
        print(f"fieldqc: {err.get('type')}: {err.get('message')}", file=sys.stderr)
    else:
        for name in out.written:
            print(out.directory / name)
    return status


if __name__ == "__main__":
    sys.exit(main())
