"""Command-line front end.

Subcommands: lifetime, domain, map, spectest, oracle, radii.  A JSON
config file supplies the model, the reference measure, and numeric
parameters; individual flags override config entries.  Every emitted
document carries a short hash of the effective config so outputs can be
traced back to their inputs.

Exit codes: 0 on success, 2 on config or validation problems, 3 on
numerical failures.  Errors are printed to stderr as one machine-readable
JSON object.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import additive, multiplicative, rdiagonal, rmt
from . import region as region_mod
from .errors import (BadGamma, BlowUp, BrownscopeError, ContinuationFailed,
                     InversionFailed, TMaxExceeded, WrongSupportKind)
from .measures import SpectralMeasure

MODELS = ("add-circ", "add-elliptic", "mult-unitary", "mult-positive", "rdiag")


class ConfigError(Exception):
    pass


_DEFAULTS = {
    "model": None,
    "measure": None,
    "t": 1.0,
    "gamma": [0.0, 0.0],
    "grid": {"re_min": -2.0, "re_max": 2.0, "im_min": -2.0, "im_max": 2.0,
             "nx": 256, "ny": 256},
    "rgrid": {"r_min": 1e-6, "r_max": None, "n_r": 512, "n_theta": 512},
    "oracle": {"n": 400, "k": 200, "seed": 7, "dilation": None,
               "probes": None, "include_eigenvalues": False},
    "format": "json",
    "out": None,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="brownscope",
        description="spectral domains and matrix checks for free models")
    sub = p.add_subparsers(dest="command", required=True)
    for name, descr in [
        ("lifetime", "sample the lifetime function on a grid"),
        ("domain", "extract the domain boundary (and its mapped image)"),
        ("map", "push a boundary file through the model map"),
        ("spectest", "membership verdict at one point"),
        ("oracle", "finite-N matrix cross-check report"),
        ("radii", "annulus radii and the perturbed inner-radius sweep"),
    ]:
        sp = sub.add_parser(name, help=descr)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--t", type=float, default=None)
        sp.add_argument("--gamma-re", type=float, default=None)
        sp.add_argument("--gamma-im", type=float, default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--format", choices=("csv", "json", "pgm"),
                        default=None)
        sp.add_argument("--seed", type=int, default=None)
        if name == "spectest":
            sp.add_argument("--re", type=float, required=True)
            sp.add_argument("--im", type=float, required=True)
        if name == "map":
            sp.add_argument("--in", dest="infile", required=True,
                            help="boundary JSON produced by the domain command")
        if name == "radii":
            sp.add_argument("--t-max", type=float, default=None)
            sp.add_argument("--steps", type=int, default=25)
    return p


def load_config(args) -> dict:
    cfg = json.loads(json.dumps(_DEFAULTS))  # deep copy
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                user = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        for key, val in user.items():
            if key in ("grid", "rgrid", "oracle") and isinstance(val, dict):
                cfg[key].update(val)
            else:
                cfg[key] = val
    if args.t is not None:
        cfg["t"] = args.t
    if args.gamma_re is not None:
        cfg["gamma"] = [args.gamma_re, cfg["gamma"][1]]
    if args.gamma_im is not None:
        cfg["gamma"] = [cfg["gamma"][0], args.gamma_im]
    if args.format is not None:
        cfg["format"] = args.format
    if args.out is not None:
        cfg["out"] = args.out
    if getattr(args, "seed", None) is not None:
        cfg["oracle"]["seed"] = args.seed
    if cfg["model"] not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}, got {cfg['model']!r}")
    if cfg["measure"] is None:
        raise ConfigError("config must supply a measure")
    if not (isinstance(cfg["t"], (int, float)) and cfg["t"] > 0):
        raise ConfigError("t must be a positive number")
    g = cfg["gamma"]
    if not (isinstance(g, (list, tuple)) and len(g) == 2):
        raise ConfigError("gamma must be [re, im]")
    if cfg["model"] == "add-circ" and (g[0] != 0 or g[1] != 0):
        raise ConfigError("add-circ is the gamma = 0 model; use add-elliptic")
    if abs(complex(g[0], g[1])) > cfg["t"] * (1 + 1e-12):
        raise ConfigError(
            f"requires |gamma| <= t: |gamma| = {abs(complex(g[0], g[1])):.6g}, "
            f"t = {cfg['t']:.6g}")
    return cfg


def config_hash(cfg: dict) -> str:
    # destination and serialization format do not affect computed values,
    # so two runs of the same computation hash the same
    blob = json.dumps({k: v for k, v in cfg.items()
                       if k not in ("out", "format")},
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def resolve_measure(cfg: dict) -> SpectralMeasure:
    try:
        mu = SpectralMeasure.load(cfg["measure"])
    except (OSError, ValueError, KeyError, WrongSupportKind) as exc:
        raise ConfigError(f"bad measure: {exc}") from exc
    model = cfg["model"]
    need = {"mult-unitary": ("circle",), "mult-positive": ("nonneg",),
            "rdiag": ("nonneg",)}.get(model)
    if need and mu.support not in need:
        raise ConfigError(
            f"model {model} needs a measure supported on {need[0]}")
    return mu


def _gamma(cfg) -> complex:
    return complex(cfg["gamma"][0], cfg["gamma"][1])


def _meta(cfg, command) -> dict:
    return {"command": command, "config": config_hash(cfg)}


def _lifetime_fn(cfg, mu):
    model = cfg["model"]
    if model in ("add-circ", "add-elliptic"):
        return lambda z: additive.T_additive(mu, z)
    if model == "mult-unitary":
        return lambda z: multiplicative.T_mult_unitary(mu, z)
    if model == "mult-positive":
        return lambda z: multiplicative._T_positive_values(mu, np.asarray(z, dtype=complex))
    raise ConfigError(f"model {model} has no lifetime function")


def _grid_bounds(cfg):
    g = cfg["grid"]
    return (g["re_min"], g["re_max"], g["im_min"], g["im_max"]), g["nx"], g["ny"]


def cmd_lifetime(cfg, args) -> bytes:
    mu = resolve_measure(cfg)
    bounds, nx, ny = _grid_bounds(cfg)
    grid = region_mod.evaluate_grid(_lifetime_fn(cfg, mu), bounds, nx, ny)
    return region_mod.emit(grid, cfg["format"], meta=_meta(cfg, "lifetime"))


def _extract_domain(cfg, mu):
    model = cfg["model"]
    t = cfg["t"]
    if model in ("add-circ", "add-elliptic"):
        bounds, nx, ny = _grid_bounds(cfg)
        return additive.sigma_boundary(mu, t, bounds, nx, ny)
    if model == "mult-unitary":
        bounds, nx, ny = _grid_bounds(cfg)
        return multiplicative.sigma_boundary_unitary(mu, t, bounds, nx, ny)
    if model == "mult-positive":
        rg = cfg["rgrid"]
        return multiplicative.sigma_boundary_positive(
            mu, t, r_min=rg["r_min"], r_max=rg["r_max"],
            n_r=rg["n_r"], n_theta=rg["n_theta"])
    raise ConfigError(f"model {model} has no domain boundary")


def _domain_map_fn(cfg, mu):
    model = cfg["model"]
    gamma = _gamma(cfg)
    if model in ("add-circ", "add-elliptic"):
        return lambda z: additive.phi_formula(mu, gamma, z)
    if model == "mult-unitary":
        return lambda z: multiplicative.psi_formula(mu, gamma, z)
    if model == "mult-positive":
        return lambda z: multiplicative.f_gamma_formula(mu, gamma, z)
    raise ConfigError(f"model {model} has no push-forward map")


def cmd_domain(cfg, args) -> bytes:
    mu = resolve_measure(cfg)
    sigma = _extract_domain(cfg, mu)
    if _gamma(cfg) == 0:
        mapped = sigma
    else:
        mapped = region_mod.map_boundary(sigma, _domain_map_fn(cfg, mu))
    fmt = cfg["format"]
    meta = _meta(cfg, "domain")
    if fmt == "json":
        doc = {
            "schema": "brownscope-region/1",
            "kind": "domain",
            "meta": meta,
            "level": float(sigma.level),
            "sigma": json.loads(region_mod.emit(sigma, "json")),
            "mapped": json.loads(region_mod.emit(mapped, "json")),
        }
        return (json.dumps(doc, sort_keys=True) + "\n").encode()
    if fmt == "csv":
        lines = [f"# {k} = {meta[k]}" for k in sorted(meta)]
        lines.append("re,im,chain,closed,role")
        for role, b in (("sigma", sigma), ("mapped", mapped)):
            for c_idx, chain in enumerate(b.polylines):
                for pnt in chain.points:
                    lines.append(f"{float(pnt.real)!r},{float(pnt.imag)!r},"
                                 f"{c_idx},{int(chain.closed)},{role}")
        return ("\n".join(lines) + "\n").encode()
    raise ConfigError("domain output supports csv or json")


def _boundary_from_doc(doc) -> region_mod.Boundary:
    if doc.get("schema") != "brownscope-region/1":
        raise ConfigError("input is not a brownscope-region/1 document")
    if doc.get("kind") == "domain":
        doc = doc["sigma"]
    if doc.get("kind") != "boundary":
        raise ConfigError("input document does not hold a boundary")
    chains = [region_mod.Chain(
        np.asarray([complex(p[0], p[1]) for p in ch["points"]]),
        bool(ch["closed"])) for ch in doc["polylines"]]
    return region_mod.Boundary(chains, float(doc.get("level", 0.0)))


def cmd_map(cfg, args) -> bytes:
    mu = resolve_measure(cfg)
    try:
        with open(args.infile, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read boundary file: {exc}") from exc
    boundary = _boundary_from_doc(doc)
    mapped = region_mod.map_boundary(boundary, _domain_map_fn(cfg, mu))
    if cfg["format"] == "pgm":
        raise ConfigError("map output supports csv or json")
    return region_mod.emit(mapped, cfg["format"], meta=_meta(cfg, "map"))


def cmd_spectest(cfg, args) -> bytes:
    mu = resolve_measure(cfg)
    model = cfg["model"]
    t = cfg["t"]
    z = complex(args.re, args.im)
    params = additive.ModelParams(t, _gamma(cfg))
    doc = {"schema": "brownscope-spectest/1", "meta": _meta(cfg, "spectest"),
           "model": model, "point": [args.re, args.im], "t": t,
           "gamma": cfg["gamma"], "zero_atom": None}
    if model in ("add-circ", "add-elliptic"):
        verdict = additive.spectral_test_additive(
            mu, lambda w: float(np.min(mu.support_distance(w))), z, t)
        doc["verdict"] = verdict.value
        doc["lifetime"] = float(additive.T_additive(mu, z))
    elif model == "mult-unitary":
        res = multiplicative.spectral_test_mult("unitary", mu, z, params)
        doc["verdict"] = res.verdict.value
        doc["lifetime"] = float(multiplicative.T_mult_unitary(mu, z))
    elif model == "mult-positive":
        res = multiplicative.spectral_test_mult("positive", mu, z, params)
        doc["verdict"] = res.verdict.value
        doc["zero_atom"] = res.zero_atom
    else:
        raise ConfigError("spectest supports the add and mult models")
    return (json.dumps(doc, sort_keys=True) + "\n").encode()


def _default_probes(cfg, mu):
    r = mu.support_radius() + np.sqrt(cfg["t"]) + 1.0
    return [[r, 0.0, 1e-3], [0.0, r, 1e-3], [-r, 0.0, 1e-3]]


def cmd_oracle(cfg, args) -> bytes:
    mu = resolve_measure(cfg)
    model = cfg["model"]
    t = float(cfg["t"])
    gamma = _gamma(cfg)
    o = cfg["oracle"]
    n, k, seed = int(o["n"]), int(o["k"]), int(o["seed"])
    report = {"schema": "brownscope-oracle/1", "meta": _meta(cfg, "oracle"),
              "model": model, "n": n, "t": t,
              "gamma": [gamma.real, gamma.imag], "seed": seed}

    if model == "rdiag":
        h = rmt.sample_atomic_positive(n, mu, seed, stream=0)
        u = rmt.sample_haar_unitary(n, seed, stream=1)
        a = u @ h
        if t > 0:
            a = a + rmt.sample_ginibre(n, t, seed, stream=2)
        eig = rmt.eigenvalues(a)
        ann = rdiagonal.hl_radii(mu)
        moduli = np.abs(eig)
        report["annulus"] = {"inner": ann.inner, "outer": ann.outer}
        report["min_modulus"] = float(moduli.min())
        report["max_modulus"] = float(moduli.max())
        if t > 0:
            try:
                report["predicted_inner"] = rdiagonal.circ_inner_radius(mu, t)
            except TMaxExceeded:
                report["predicted_inner"] = 0.0
        else:
            slack = o["dilation"] if o["dilation"] is not None else 3.0 / np.sqrt(n)
            inside = (moduli >= ann.inner * (1 - slack)) & \
                     (moduli <= ann.outer * (1 + slack))
            report["support"] = {"fraction": float(np.mean(inside)),
                                 "dilation": float(slack)}
        return (json.dumps(report, sort_keys=True) + "\n").encode()

    if mu.kind != "atomic":
        raise ConfigError("the oracle command needs an atomic measure")

    if model in ("add-circ", "add-elliptic"):
        x = rmt.sample_atomic(n, mu.positions, mu.weights, seed, stream=0)
        g = rmt.sample_elliptic(n, t, gamma, seed, stream=1)
        a = x + g
    else:
        if model == "mult-unitary":
            x = rmt.sample_atomic_unitary(n, mu, seed, stream=0)
        else:
            x = rmt.sample_atomic_positive(n, mu, seed, stream=0)
        b = rmt.sample_b(n, t, gamma, k=k, seed=seed, stream=1)
        a = x @ b
        report["k"] = k
    eig = rmt.eigenvalues(a)
    spectrum = rmt.EmpiricalSpectrum(eig, {"model": model, "n": n, "t": t,
                                           "gamma": [gamma.real, gamma.imag],
                                           "seed": seed})
    sigma = _extract_domain(cfg, mu)
    mapped = sigma if gamma == 0 else region_mod.map_boundary(
        sigma, _domain_map_fn(cfg, mu))
    dil = o["dilation"] if o["dilation"] is not None else 3.0 / np.sqrt(n)
    report["support"] = rmt.support_report(spectrum, boundary=mapped,
                                           dilation=float(dil))

    probes = o["probes"] if o["probes"] is not None else _default_probes(cfg, mu)
    a0 = None
    if model in ("mult-unitary", "mult-positive"):
        # second draw with the rotation turned off, for the pairing below
        a0 = x @ rmt.sample_b(n, t, 0.0, k=k, seed=seed, stream=2)
    probe_rows = []
    for pre, pim, eps in probes:
        lam = complex(pre, pim)
        row = {"lambda": [pre, pim], "eps": eps}
        if model in ("add-circ", "add-elliptic"):
            row["empirical"] = float(rmt.empirical_dSde(a, lam, eps))
            try:
                row["reference"] = float(additive.analytic_extension_trace(
                    mu, lam, t, eps))
            except (InversionFailed, BrownscopeError) as exc:
                row["reference_error"] = str(exc)
        else:
            # pairing check: the rotated flow probed at the mapped point
            # should agree with the plain flow probed at the source point
            if model == "mult-unitary":
                target = complex(multiplicative.psi_formula(mu, gamma, lam))
            else:
                target = complex(multiplicative.f_gamma_formula(mu, gamma, lam))
            row["empirical"] = float(rmt.empirical_dSde(a, target, eps))
            row["reference"] = float(rmt.empirical_dSde(a0, lam, eps))
            row["mapped_lambda"] = [target.real, target.imag]
        if "reference" in row:
            row["abs_diff"] = abs(row["empirical"] - row["reference"])
            row["tol_hint"] = 5.0 / np.sqrt(n)
        probe_rows.append(row)
    report["dsde_probes"] = probe_rows
    if o.get("include_eigenvalues"):
        report["eigenvalues"] = [[float(z.real), float(z.imag)] for z in eig]
    return (json.dumps(report, sort_keys=True) + "\n").encode()


def cmd_radii(cfg, args) -> bytes:
    mu = resolve_measure(cfg)
    if cfg["model"] != "rdiag":
        raise ConfigError("radii needs the rdiag model")
    ann = rdiagonal.hl_radii(mu)
    cap = None
    if ann.inner > 0:
        cap = ann.inner ** 2
    t_max = args.t_max
    if t_max is None:
        t_max = 0.9 * cap if cap else 1.0
    steps = max(int(args.steps), 2)
    ts = np.linspace(0.0, t_max, steps)
    rows = []
    for tv in ts:
        try:
            rows.append((float(tv), rdiagonal.circ_inner_radius(mu, float(tv))))
        except TMaxExceeded:
            rows.append((float(tv), float("nan")))
    meta = _meta(cfg, "radii")
    if cfg["format"] == "csv":
        lines = [f"# {kk} = {meta[kk]}" for kk in sorted(meta)]
        lines.append(f"# annulus_inner = {ann.inner!r}")
        lines.append(f"# annulus_outer = {ann.outer!r}")
        lines.append("t,inner_radius")
        lines.extend(f"{tv!r},{rv!r}" for tv, rv in rows)
        return ("\n".join(lines) + "\n").encode()
    doc = {"schema": "brownscope-radii/1", "meta": meta,
           "annulus": {"inner": ann.inner, "outer": ann.outer},
           "sweep": [{"t": tv, "inner_radius": rv} for tv, rv in rows]}
    return (json.dumps(doc, sort_keys=True) + "\n").encode()


_COMMANDS = {
    "lifetime": cmd_lifetime,
    "domain": cmd_domain,
    "map": cmd_map,
    "spectest": cmd_spectest,
    "oracle": cmd_oracle,
    "radii": cmd_radii,
}


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps(
        {"error": {"code": code, "kind": kind, "message": message}},
        sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        out = _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        return _fail(2, "config", str(exc))
    except BadGamma as exc:
        return _fail(2, "config", f"requires |gamma| <= t: {exc}")
    except (BlowUp, ContinuationFailed, InversionFailed, TMaxExceeded) as exc:
        return _fail(3, "numerical", str(exc))
    except np.linalg.LinAlgError as exc:
        return _fail(3, "numerical", f"linear algebra failure: {exc}")
    if cfg["out"]:
        with open(cfg["out"], "wb") as fh:
            fh.write(out)
    else:
        try:
            sys.stdout.buffer.write(out)
            sys.stdout.buffer.flush()
        except BrokenPipeError:
            # reader closed early (e.g. piped into head); not an error
            os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
    return 0


if __name__ == "__main__":
    sys.exit(main())
