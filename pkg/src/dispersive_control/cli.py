"""Command-line experiment runner.

Workflows: certify, control-linear, control-kdv, decay, verify.  Each run
writes <workflow>.json (plus CSV series) into --out.  Reports are
deterministic for a given configuration and seed.
"""
import argparse
import configparser
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import damping, hum, kdv_nonlinear, mass_op, observability, region, spectral_core
from .region import IntervalUnion, SpaceTimeRegion, TWO_PI
from .spectral_core import DispersionSymbol, FourierState

EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2
WORKFLOWS = ("certify", "control-linear", "control-kdv", "decay", "verify")

CONVENTIONS = {
    "fourier": "c_k = (1/2pi) int u exp(-ikx) dx; ||u||^2 = 2pi sum |c_k|^2",
    "indicator": "1hat_G(a) = 1/(2pi T) int int 1_G exp(-i(a_x x + a_t 2pi t/T)); sum |1hat|^2 = |G|/(2pi T)",
    "gram": "entry (l, m) = int int_G exp(i(l - m).(x, t)); constant = normalization / lambda_min",
    "frequency_order": "(space, time)",
    "geometry_order": "(time, space)",
}

DEFAULTS = {
    "symbol": {"coefficients": "1, 0, 0, 0"},
    "region": {"time": "[0, pi)", "space": "[0, 2*pi)", "t_period": "2*pi"},
    "control": {"E": "[0, 1), [1.5, 2)", "F": "[0, pi), [4, 5)", "T": "2",
                "v0": "random", "v1": "random",
                "u0": "1: -0.005j, -1: 0.005j", "u1": "2: -0.005j, -2: 0.005j"},
    "damping": {"kind": "periodic_blocks", "G0_time": "[0, 0.5)", "G0_space": "[0, pi)",
                "profile": "[0, pi)", "a0": "1", "block_T": "1", "n_blocks": "10"},
    "run": {"nmax": "16", "dt": "1e-3", "seed": "0", "tol": "1e-8", "picard_tol": "1e-6",
            "max_iter": "12"},
}


class ConfigError(ValueError):
    pass


def _dumps(obj):
    def default(o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, (complex, np.complexfloating)):
            return [float(o.real), float(o.imag)]
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, tuple):
            return list(o)
        raise TypeError(f"cannot serialize {type(o)}")
    return json.dumps(obj, sort_keys=True, indent=2, default=default, allow_nan=True)


def load_config(path, args):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_dict(DEFAULTS)
    if path:
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"config syntax: {exc}") from exc
    for key in ("nmax", "dt", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            cp["run"][key] = str(val)
    return {s: dict(cp[s]) for s in cp.sections()}


def _field(cfg, section, key, parse):
    raw = cfg[section][key]
    try:
        return parse(raw)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def _positive(parse):
    def inner(raw):
        v = parse(raw)
        if not v > 0:
            raise ValueError("must be positive")
        return v
    return inner


def _modes(raw, nmax):
    out = {}
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        k, v = part.split(":")
        out[int(k)] = complex(v.strip().replace(" ", ""))
    return FourierState.from_modes(out, nmax)


def _random_zero_mean(rng, nmax):
    c = rng.normal(size=2 * nmax + 1) + 1j * rng.normal(size=2 * nmax + 1)
    c /= np.arange(-nmax, nmax + 1) ** 2 + 1.0
    c[nmax] = 0.0
    return FourierState(c, nmax, zero_mean=True)


def validate(cfg):
    run = {
        "nmax": _field(cfg, "run", "nmax", int),
        "dt": _field(cfg, "run", "dt", _positive(float)),
        "seed": _field(cfg, "run", "seed", int),
        "tol": _field(cfg, "run", "tol", _positive(float)),
        "picard_tol": _field(cfg, "run", "picard_tol", _positive(float)),
        "max_iter": _field(cfg, "run", "max_iter", int),
    }
    if run["nmax"] < 4:
        raise ConfigError(f"[run] nmax = {run['nmax']}: must be at least 4")
    p = _field(cfg, "symbol", "coefficients", DispersionSymbol.parse)
    return run, p


def _interval_union(cfg, section, key, period=TWO_PI):
    u = _field(cfg, section, key, lambda s: IntervalUnion.parse(s, period))
    if u.measure <= 0:
        raise ConfigError(f"[{section}] {key}: region has zero measure")
    return u


def provenance(workflow, cfg, run):
    canon = json.dumps(cfg, sort_keys=True)
    return {"workflow": workflow, "config_sha256": hashlib.sha256(canon.encode()).hexdigest(),
            "seed": run["seed"], "nmax": run["nmax"], "dt": run["dt"],
            "conventions": CONVENTIONS, "config": cfg}


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


# ------------------------------------------------------------- workflows

def wf_certify(cfg, run, p, out):
    t_period = _field(cfg, "region", "t_period", _positive(region.parse_endpoint))
    time_set = _interval_union(cfg, "region", "time", t_period)
    space = _interval_union(cfg, "region", "space")
    G = SpaceTimeRegion.product(time_set, space, t_period)
    N = observability.highfreq_threshold(G, p)
    nmax = max(run["nmax"], N + 1)
    band = observability.band_certificate(G, p, N, nmax)
    sweep = observability.augmented_sweep(p, G, N, nmax)
    final = sweep[-1]
    full = observability.gram_matrix(observability.FrequencySet.full(p, nmax), G, N_threshold=N)
    lhs, rhs, holds = observability.threshold_condition(G, p, N)
    report = {
        "N": N, "threshold_lhs": lhs, "threshold_rhs": rhs, "threshold_holds": holds,
        "band": band.to_dict() | {"certified_lower": band.diagnostics["certified_lower"],
                                  "separation_ok": band.diagnostics["separation_ok"]},
        "sweep": [{"added": r.diagnostics.get("added_point"), "lambda_min": r.lambda_min,
                   "constant": r.observability_constant} for r in sweep],
        "full": full.to_dict(),
        "order_independence_gap": abs(final.lambda_min - full.lambda_min),
    }
    ev = np.linalg.eigvalsh(full.gram)
    _write_csv(out / "eigenvalues.csv", ["index", "eigenvalue"], list(enumerate(ev)))
    ok = full.available and band.available
    return report, ok, "" if ok else "observability constant unavailable"


def _control_system(cfg, run, p):
    T = _field(cfg, "control", "T", _positive(region.parse_endpoint))
    E = _interval_union(cfg, "control", "E", T)
    F = _interval_union(cfg, "control", "F")
    return hum.HumSystem(E, F, T, run["nmax"], p)


def wf_control_linear(cfg, run, p, out):
    sys_ = _control_system(cfg, run, p)
    rng = np.random.default_rng(run["seed"])
    data = []
    for key in ("v0", "v1"):
        raw = cfg["control"][key].strip()
        if raw == "random":
            data.append(_random_zero_mean(rng, run["nmax"]))
        else:
            s = _field(cfg, "control", key, lambda r: _modes(r, run["nmax"]))
            if s.mean != 0:
                raise ConfigError(f"[control] {key}: data must be zero-mean")
            data.append(s.without_mean())
    sol = hum.synthesize_control(sys_, data[0], data[1], tol=run["tol"])
    h = [complex(0.3, -0.2), complex(-0.1, 0.4)]
    lhs, rhs, gap = hum.duality_gap(sys_, [1, -2], h, [0.5, 3.0], _random_zero_mean(rng, run["nmax"]),
                                    _random_zero_mean(rng, run["nmax"]))
    report = sol.to_dict() | {"duality_gap": gap, "T": sys_.T,
                              "E": sys_.E.intervals, "F": sys_.F.intervals}
    nt, nx = 41, 64
    ts = np.linspace(0.0, sys_.T, nt, endpoint=False)
    xs = TWO_PI * np.arange(nx) / nx
    rows = []
    for t in ts:
        hv = hum.control_values(sys_, sol.psi, t, xs)
        rows += [(t, x, v.real, v.imag) for x, v in zip(xs, hv)]
    _write_csv(out / "control_samples.csv", ["t", "x", "re_h", "im_h"], rows)
    ok = sol.endpoint_residual <= 10 * run["tol"]
    return report, ok, "" if ok else "endpoint residual above 10*tol"


def wf_control_kdv(cfg, run, p, out):
    sys_ = _control_system(cfg, run, p)
    u0 = _field(cfg, "control", "u0", lambda r: _modes(r, run["nmax"]))
    u1 = _field(cfg, "control", "u1", lambda r: _modes(r, run["nmax"]))
    res = kdv_nonlinear.picard_control(u0, u1, sys_, dt=run["dt"], max_iter=run["max_iter"],
                                       tol=run["picard_tol"])
    if res.final_trajectory is not None:
        header, rows = res.final_trajectory.to_csv_rows()
        _write_csv(out / "trajectory.csv", header, rows[::max(1, len(rows) // 200)])
    return res.to_dict(), res.converged, res.message


def _damping_field(cfg, run):
    kind = cfg["damping"]["kind"].strip()
    a0 = _field(cfg, "damping", "a0", float)
    if a0 < 0:
        raise ConfigError("[damping] a0: damping must be nonnegative")
    T = _field(cfg, "damping", "block_T", _positive(region.parse_endpoint))
    n_blocks = _field(cfg, "damping", "n_blocks", int)
    rng = np.random.default_rng(run["seed"])
    if kind == "time_independent":
        return damping.DampingField.time_independent(_interval_union(cfg, "damping", "profile"), a0), T, n_blocks
    if kind == "modulated_wave":
        prof = _interval_union(cfg, "damping", "profile")
        return damping.DampingField.modulated_wave(prof, T, rng.uniform(0, TWO_PI, n_blocks), a0), T, n_blocks
    t_set = _interval_union(cfg, "damping", "G0_time", T)
    s_set = _interval_union(cfg, "damping", "G0_space")
    G0 = SpaceTimeRegion.product(t_set, s_set, T)
    if kind == "periodic_blocks":
        return damping.DampingField.periodic_blocks(G0, a0), T, n_blocks
    if kind == "block_indicator":
        return damping.DampingField.block_indicator(G0, rng.uniform(0, T, n_blocks), a0), T, n_blocks
    raise ConfigError(f"[damping] kind = {kind!r}: expected one of {damping.KINDS}")


def wf_decay(cfg, run, p, out):
    fld, T, n_blocks = _damping_field(cfg, run)
    rng = np.random.default_rng(run["seed"])
    nmax = run["nmax"]
    u0 = FourierState(rng.normal(size=2 * nmax + 1) + 1j * rng.normal(size=2 * nmax + 1), nmax)
    traj = damping.solve_damped(u0, fld, p, n_blocks * T, run["dt"])
    rep = damping.decay_rate(traj, T)
    rep.energy_identity_gaps = [damping.energy_identity_gap(traj, fld, (n * T, (n + 1) * T))
                                for n in range(len(rep.alphas))]
    rep.operator_alphas = damping.block_contraction(fld, p, nmax, T, n_blocks, run["dt"])
    header, rows = rep.csv_rows()
    _write_csv(out / "decay.csv", header, rows)
    report = rep.to_dict() | {"field": fld.describe(),
                              "assumption_A_min": min(fld.block_l1_linf(n) for n in range(n_blocks))}
    ok = not rep.flags and rep.gamma_fit > 0
    return report, ok, "; ".join(rep.flags) if rep.flags else ("" if ok else "no decay")


def _check(name, value, threshold, passed=None):
    value = float(value)
    if passed is None:
        passed = value <= threshold
    return {"name": name, "value": value, "threshold": threshold, "passed": bool(passed)}


def verify_suite(seed, nmax=8):
    rng = np.random.default_rng(seed)
    p = DispersionSymbol.kdv()
    checks = []
    # spectral core
    s = FourierState(rng.normal(size=2 * nmax + 1) + 1j * rng.normal(size=2 * nmax + 1), nmax)
    t1, t2 = rng.uniform(0, 3, size=2)
    a = spectral_core.evolve_free(spectral_core.evolve_free(s, p, t1), p, t2)
    b = spectral_core.evolve_free(s, p, t1 + t2)
    checks.append(_check("flow_composition", np.max(np.abs(a.coeffs - b.coeffs)), 1e-12))
    checks.append(_check("flow_norm", abs(spectral_core.l2_norm(a) / spectral_core.l2_norm(s) - 1), 1e-12))
    rt = spectral_core.from_grid(spectral_core.to_grid(s, 4 * nmax + 3), nmax)
    checks.append(_check("grid_round_trip", np.max(np.abs(rt.coeffs - s.coeffs)), 1e-13))
    # regions
    cuts = np.sort(rng.uniform(0, TWO_PI, 4))
    F = IntervalUnion(((cuts[0], cuts[1]), (cuts[2], cuts[3])))
    G = SpaceTimeRegion.product(IntervalUnion(((0.0, 2.0),)), F)
    tot = region.partial_energy(G, 12) + region.tail_energy(G, 12)
    checks.append(_check("plancherel", abs(tot - region.plancherel_total(G)), 1e-12))
    h = (0.3, 0.7)
    Gh = G.translate((-h[0], -h[1]))
    checks.append(_check("set_additivity", abs(G.measure - G.intersect(Gh).measure - G.set_difference(Gh).measure), 1e-12))
    # operator
    op = mass_op.MassControlOperator(F)
    ks = np.r_[-nmax:0, 1:nmax + 1]
    lhs, rhs, tail = mass_op.identity_gap_matrix(op, ks, 4096)
    checks.append(_check("L_identity_excess", np.max(np.abs(lhs - rhs) - tail), 1e-10))
    d = mass_op.coercivity_delta(op)
    checks.append(_check("coercivity_positive", d, 0.0, d > 0))
    s0 = s.without_mean()
    Ls = mass_op.apply_L(op, s)
    checks.append(_check("L_zero_mean", abs(Ls.mean), 1e-14))
    s2 = FourierState(rng.normal(size=2 * nmax + 1) + 1j * rng.normal(size=2 * nmax + 1), nmax)
    ip1 = spectral_core.inner(mass_op.apply_L(op, s0.with_nmax(4 * nmax)), s2.with_nmax(4 * nmax))
    ip2 = spectral_core.inner(s0.with_nmax(4 * nmax), mass_op.apply_L(op, s2.with_nmax(4 * nmax)))
    checks.append(_check("L_self_adjoint", abs(ip1 - ip2) / max(abs(ip1), 1e-300), 1e-12))
    # observability
    sc = observability.theta_scan(p, 50, 200, rng)
    checks.append(_check("theta_bound", sc["max"], p.degree - 1))
    two = observability.strichartz_l4_ratio({0: 1.0, 1: 1.0}, p)
    checks.append(_check("two_mode_l4", abs(two - (6 * np.pi ** 2) ** 0.25), 1e-10))
    coeffs = {k: complex(*rng.normal(size=2)) for k in range(-4, 4)}
    rep = observability.l4_bound_report(coeffs, p)
    checks.append(_check("l4_corrected_bound_slack", -rep["corrected_slack"], 0.0))
    Gs = SpaceTimeRegion.rectangle((0, np.pi), (0, TWO_PI))
    N = observability.highfreq_threshold(Gs, p)
    sweep = observability.augmented_sweep(p, Gs, N, 6, order=list(rng.permutation(np.arange(-N, N + 1))))
    full = observability.gram_matrix(observability.FrequencySet.full(p, 6), Gs)
    checks.append(_check("sweep_order_independence", abs(sweep[-1].lambda_min - full.lambda_min), 1e-10))
    # control
    sys_ = hum.HumSystem(IntervalUnion(((0, 1), (1.5, 2)), period=2.0), F, 2.0, nmax, p)
    v0, v1 = _random_zero_mean(rng, nmax), _random_zero_mean(rng, nmax)
    sol = hum.synthesize_control(sys_, v0, v1, tol=1e-12)
    checks.append(_check("hum_endpoint_residual", sol.endpoint_residual, 1e-10))
    _, _, gap = hum.duality_gap(sys_, [2, -1], [0.4 + 0.1j, -0.3j], [1.0, -7.0], v0, v1)
    checks.append(_check("duality_gap", gap, 1e-10))
    checks.append(_check("phi_positive", sol.lambda_min_phi, 0.0, sol.lambda_min_phi > 0))
    # nonlinear flow
    model = kdv_nonlinear.KdVModel(p, nmax)
    u = FourierState.from_modes({1: -0.005j, -1: 0.005j, 0: 0.002}, nmax)
    tr = kdv_nonlinear.integrate(u, 0.2, 1e-3, model)
    checks.append(_check("kdv_mass_drift", kdv_nonlinear.mass_drift(tr), 1e-12))
    nrm = tr.norms
    checks.append(_check("kdv_norm_drift", abs(nrm[-1] - nrm[0]) / nrm[0], 1e-10))
    v1c = kdv_nonlinear.duhamel_correction(tr, model)
    checks.append(_check("duhamel_zero_mean", abs(v1c.mean), 0.0))
    # damping
    fld = damping.DampingField.constant(1.0)
    trd = damping.solve_damped(s, fld, p, 5.0, 1e-2)
    dr = damping.decay_rate(trd, 1.0)
    checks.append(_check("uniform_damping_gamma", abs(dr.gamma_fit - 1), 1e-6))
    checks.append(_check("uniform_damping_energy_gap", damping.energy_identity_gap(trd, fld, (0.0, 1.0)), 1e-6))
    rr = damping.resolvent_ratio(p, 1j, FourierState.from_modes({0: 1.0}, 4))
    checks.append(_check("resolvent_constant_mode", abs(rr - 1 / TWO_PI), 1e-12))
    return checks


def wf_verify(cfg, run, p, out):
    checks = verify_suite(run["seed"])
    ok = all(c["passed"] for c in checks)
    failed = [c["name"] for c in checks if not c["passed"]]
    return {"checks": checks, "all_passed": ok}, ok, "failed: " + ", ".join(failed) if failed else ""


HANDLERS = {"certify": wf_certify, "control-linear": wf_control_linear,
            "control-kdv": wf_control_kdv, "decay": wf_decay, "verify": wf_verify}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dispersive-control",
        description="Observability, control and decay experiments for dispersive equations on the torus.",
        epilog="exit codes: 0 ok, 1 numerical failure (constant unavailable, control or "
               "Picard failure, failed checks), 2 configuration error",
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="workflow", required=True)
    for name in WORKFLOWS:
        sp = sub.add_parser(name, help=f"run the {name} workflow")
        sp.add_argument("--config", type=str, default=None, help="INI file with [symbol], [region], ... sections")
        sp.add_argument("--out", type=str, default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--nmax", type=int, default=None)
        sp.add_argument("--dt", type=float, default=None)
    return parser


def run(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args)
        run_cfg, p = validate(cfg)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report, ok, message = HANDLERS[args.workflow](cfg, run_cfg, p, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (hum.ControlError, kdv_nonlinear.BlowUpError, mass_op.CoercivityError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    body = {"provenance": provenance(args.workflow, cfg, run_cfg), "report": report,
            "status": "ok" if ok else "numerical_failure", "message": message}
    path = out / f"{args.workflow.replace('-', '_')}.json"
    path.write_text(_dumps(body) + "\n")
    print(f"{args.workflow}: {'ok' if ok else 'FAILED'} -> {path}" + (f" ({message})" if message else ""))
    return EXIT_OK if ok else EXIT_NUMERICAL


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
