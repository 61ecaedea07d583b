"""Command-line interface.

Exit codes: 0 when every record passes, 1 when any record fails, 2 for
configuration errors and 3 for numerical failures (domain exit, closure
failure, singular points).
"""
from __future__ import annotations

import argparse
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import acceptance
from .averaging import averaged, lie_upsilon_field, s_field
from .errors import ConfigError, NotInvariantError, S1AvgError, SolvabilityError
from .homological import (necessary_conditions_kform, necessary_conditions_kvector, probe_points,
                          solve_function, solve_kform, solve_kvector, solve_vector)
from .normal_forms import DEFAULT_EPSILONS, PerturbedSystem, normalize_first_order
from .report import Report, RunConfig, parse_config_file
from .scenarios import SCENARIOS, get_scenario, sphere_probes
from .slowfast import hamiltonize, invariant_symplectic, monodromy, resonance_table
from .tensor import lie_derivative

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULT_R_VALUES = "1/2,1/3,2/3,1/4,3/4,1,2,9/2,13/3"


def _scenario(cfg: RunConfig, default: str):
    name = cfg.get("scenario", default)
    params = {}
    if name == "quartic":
        for key in ("delta", "r", "n", "k"):
            if cfg.get(key) is not None:
                params[key] = cfg.get(key)
    elif cfg.get("delta") is not None:
        raise ConfigError("--delta only applies to the quartic scenario")
    if name == "sphere" and cfg.get("epsilon") is not None:
        params["epsilon"] = cfg.floats("epsilon")[0]
    return get_scenario(name, **params)


def _probes(cfg: RunConfig, sc, default: int = 20):
    return sc.probes(cfg.get("probes", default), cfg.seed)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_average(cfg: RunConfig) -> Report:
    sc = _scenario(cfg, "harmonic")
    Xi = sc.field(cfg.get("field", "q2"))
    pts = cfg.points(sc.chart.dim)
    sc.chart.check(pts)
    N = cfg.get("nodes")
    rep = Report("average", cfg.params)
    avg = averaged(sc.pf, Xi, N).evaluate(pts)
    s = s_field(sc.pf, Xi, N).evaluate(pts)
    lu = lie_upsilon_field(sc.pf, Xi, N).evaluate(pts)
    for m, a, sv, lv in zip(pts, avg, s, lu):
        scalar = Xi.valence.ncomp(sc.chart.dim) == 1
        rep.add(f"{sc.name}:{Xi.label}@{m.tolist()}", "avg.average",
                {"point": m, "avg": a[0] if scalar else a, "s": sv[0] if scalar else sv,
                 "lie_upsilon": lv[0] if scalar else lv})
    if cfg.get("identity_check"):
        tol = cfg.get("tol", 1e-7)
        S = s_field(sc.pf, Xi, N)
        res = np.max(np.abs(lie_derivative(sc.pf.upsilon, S).evaluate(pts) - (Xi.evaluate(pts) - avg)),
                     axis=1)
        rep.add(f"{sc.name}:{Xi.label}:L_U S = id - A", "avg.LS",
                {"residual": res, "tol": tol}, bool(np.all(res < tol)))
    return rep


def cmd_solve(cfg: RunConfig) -> Report:
    sc = _scenario(cfg, "harmonic")
    B = sc.field(cfg.get("field", "q2"))
    gauge = sc.field(cfg.get("gauge")) if cfg.get("gauge") else None
    pts = _probes(cfg, sc)
    tol = cfg.get("tol", 1e-6)
    N = cfg.get("nodes")
    kind = cfg.get("kind") or {"scalar": "function", "vector": "vector" if B.degree == 1 else "kvector",
                               "form": "kform"}[B.valence.kind]
    solvers = {"function": solve_function, "vector": solve_vector, "kvector": solve_kvector,
               "kform": solve_kform}
    if kind not in solvers:
        raise ConfigError(f"unknown solver kind {kind!r}; use one of {', '.join(solvers)}")
    rep = Report("solve", cfg.params)
    try:
        bundle = solvers[kind](sc.pf, B, gauge, probes=pts, repair_gauge=True, N=N)
    except (SolvabilityError, NotInvariantError) as exc:
        rep.add(f"{sc.name}:{B.label}:{kind}", "hom.necessary", {"error": str(exc)}, False)
        return rep
    tag = {"function": "hom.function", "vector": "hom.vector", "kvector": "hom.kvector",
           "kform": "hom.kform"}[kind]
    rep.add(f"{sc.name}:{B.label}:{kind}", tag,
            {"residual": bundle.residual, "invariance": bundle.invariance, "probes": len(pts),
             "tol": tol}, bool(bundle.residual < tol and bundle.invariance < 1e-8))
    if B.valence.kind == "scalar":
        a = solve_kvector(sc.pf, B, N=N).solution.evaluate(pts)
        b = solve_kform(sc.pf, B, N=N).solution.evaluate(pts)
        c = bundle.solution.evaluate(pts) if gauge is None else solve_function(sc.pf, B, N=N) \
            .solution.evaluate(pts)
        diff = float(max(np.max(np.abs(a - c)), np.max(np.abs(b - c))))
        rep.add(f"{sc.name}:{B.label}:k=0 paths agree", "hom.function", {"max_difference": diff},
                diff < 1e-12)
    else:
        cond = (necessary_conditions_kform if B.valence.kind == "form"
                else necessary_conditions_kvector)(sc.pf, B, pts)
        for name, info in cond.summary().items():
            rep.add(f"{sc.name}:{B.label}:{name}", "hom.necessary", info)
    return rep


def cmd_normalize(cfg: RunConfig) -> Report:
    sc = _scenario(cfg, "harmonic")
    eps = cfg.floats("epsilon", list(DEFAULT_EPSILONS))
    nodes = cfg.get("nodes", 64)
    offset = cfg.get("control_offset", 1.0)
    rep = Report("normalize", cfg.params)
    if sc.name == "harmonic":
        pf, dim = sc.pf, 2
        fname = cfg.get("field", "W_q4")
        W = pf.X if fname == "X" else sc.field(fname)
        pts = sc.probes(cfg.get("probes", 10), cfg.seed, box=((-1.0, -1.0), (1.0, 1.0)))
    elif sc.name == "quartic":
        pf = sc.extras.get("pf4")
        if pf is None:
            raise ConfigError("this delta is not resonant; the unperturbed flow is not periodic")
        dim = 4
        W = pf.X if cfg.get("field") == "X" else sc.sfh.WW
        pts = probe_points(pf.chart, cfg.get("probes", 8),
                           ((-1.0, -1.0, -0.8, -0.8), (1.0, 1.0, 0.8, 0.8)), cfg.seed, pf,
                           sc.extras["accept4"])
    else:
        raise ConfigError("normalize supports the harmonic and quartic scenarios")
    ctrl = np.zeros(dim)
    ctrl[0] = offset
    r = normalize_first_order(PerturbedSystem(pf, W, eps, nodes), pts, control_offset=ctrl)
    if W is pf.X:
        worst = float(np.max(r.residuals))
        rep.add(f"{sc.name}:W=X", "nf.order", {"residuals": r.residuals, "max": worst},
                worst < 1e-9)
        return rep
    rep.add(f"{sc.name}:slope", "nf.order",
            {"epsilons": r.epsilons, "residuals": r.residuals, "slope": r.fitted_order},
            bool(1.8 <= r.fitted_order <= 2.2))
    rep.add(f"{sc.name}:negative control", "nf.order",
            {"offset": ctrl, "residuals": r.control_residuals, "slope": r.control_order},
            bool(0.8 <= r.control_order <= 1.2))
    return rep


def cmd_monodromy(cfg: RunConfig) -> Report:
    if cfg.get("scenario", "quartic") != "quartic":
        raise ConfigError("monodromy is implemented for the quartic scenario")
    sc = _scenario(cfg, "quartic")
    k_req = cfg.get("k")
    k_max = cfg.get("k_max", max(8, k_req or 0))
    tol = cfg.get("tol", 1e-5)
    pts = cfg.points(2) if cfg.get("point") else np.array([[1.0, 0.0], [0.7, 0.3], [0.0, 1.2]])
    rep = Report("monodromy", cfg.params)
    for m1 in pts:
        rec = monodromy(sc.sfh, m1, k_max=k_max, hint=sc.extras["slow_period_at_1"] /
                        max(1e-3, float(np.sqrt(np.sqrt(2 * m1[1] ** 2 + m1[0] ** 4)))), tol=tol)
        periodic = rec.error(k_req) < tol if k_req else rec.is_k_periodic
        rep.add(f"delta={sc.params['delta']}@{m1.tolist()}", "sf.monodromy",
                {"tau": rec.tau, "errors": rec.errors, "minimal_k": rec.minimal_k,
                 "k_tested": k_max, "symplectic_error": rec.symplectic_error,
                 "linearity_error": rec.linearity_error}, bool(periodic))
    k = k_req or sc.params.get("k")
    if k and rep.all_passed:
        pf = sc.sfh.periodic_flow(sc.extras["varpi1"] / k)
        base = np.array([[m[0], m[1], 0.3, -0.2] for m in pts])
        orbit = pf.sample(base, 64)
        rep.add(f"return time 2*pi*k/varpi (k={k})", "sf.monodromy",
                {"closure_error": orbit.closure_error}, bool(np.all(orbit.closure_error < 1e-8)))
    return rep


def cmd_hamiltonize(cfg: RunConfig) -> Report:
    name = cfg.get("scenario", "cylinder")
    sc = _scenario(cfg, "cylinder")
    eps = cfg.floats("epsilon", [1e-2, 1e-3])
    tol = cfg.get("tol", 1e-5)
    if name == "harmonic":
        e = sc.extras["slow_fast"]
        sfh, pf, mu = e["sfh"], e["pf"], None
        pts = probe_points(pf.chart, cfg.get("probes", 20), e["box"], cfg.seed, pf, e["accept"])
    elif name in ("cylinder", "adiabatic-negative"):
        sfh, pf, mu = sc.sfh, sc.pf, sc.extras.get("mu")
        pts = _probes(cfg, sc)
    else:
        raise ConfigError("hamiltonize supports the cylinder, harmonic and adiabatic-negative scenarios")
    rep = Report("hamiltonize", cfg.params)
    try:
        r = hamiltonize(sfh, pf, mu, pts, eps)
    except (SolvabilityError, NotInvariantError) as exc:
        rep.add(f"{name}:solvability", "sf.solvability", {"error": str(exc)}, False)
        return rep
    rep.add(f"{name}:solvability", "sf.solvability", {"residual": r.asp_residual}, True)
    for e_, v in r.residuals.items():
        rep.add(f"{name}:eps={e_:g}", "sf.hamiltonization",
                {"residual": v, "tol": tol, "poisson": r.poisson[e_]}, v < tol)
    for k, v in r.first_integrals.items():
        rep.add(f"{name}:L_V({k})", "sf.hamiltonization", {"value": v}, v < 1e-6)
    rep.add(f"{name}:L_V theta - d1 F", "sf.solvability", {"residual": r.homological_residual},
            r.homological_residual < 1e-6)
    return rep


def cmd_invariant_symplectic(cfg: RunConfig) -> Report:
    if cfg.get("scenario", "sphere") != "sphere":
        raise ConfigError("invariant-symplectic is implemented for the sphere scenario")
    sc = _scenario(cfg, "sphere")
    e = sc.extras
    pts = sphere_probes(sc, cfg.get("probes", 20), cfg.seed)
    r = invariant_symplectic(e["pps"], e["h"], e["J"], pts, generator=e["generator"],
                             N=cfg.get("nodes"))
    pps = e["pps"]
    beta = float(np.max(np.abs(pps.restrict(r.beta, pts) - pps.restrict(e["beta_exact"], pts))))
    rep = Report("invariant-symplectic", cfg.params)
    rep.add("<sigma> two ways", "sf.averaged-symplectic", {"difference": r.representation_difference},
            r.representation_difference < 1e-6)
    rep.add("beta vs (phi x x).d1 phi", "sf.averaged-symplectic", {"difference": beta}, beta < 1e-6)
    rep.add("<d1 J>", "sf.adiabatic", {"residual": r.adiabatic_residual}, r.adiabatic_ok)
    rep.add("momentum identity", "sf.momentum", {"residual": r.momentum_residual},
            bool(r.momentum_residual < 1e-5))
    return rep


def cmd_resonance_table(cfg: RunConfig) -> Report:
    raw = cfg.get("r_values") or DEFAULT_R_VALUES
    try:
        rs = [Fraction(v.strip()) for v in raw.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad r values {raw!r}") from exc
    rep = Report("resonance-table", cfg.params)
    for row in resonance_table(rs, cfg.get("k_max", 64)):
        rep.add(f"r={row['r']}", "sf.resonance", row)
    return rep


def cmd_accept(cfg: RunConfig, list_only: bool = False) -> Report:
    rep = Report("accept", cfg.params)
    if list_only:
        for n, (title, tag, _) in acceptance.CRITERIA.items():
            rep.add(f"criterion {n}: {title}", tag, {})
            print(f"{n:2d}  {title}", file=sys.stderr)
        return rep
    only = None
    if cfg.get("criteria"):
        try:
            only = [int(v) for v in cfg.get("criteria").split(",")]
        except ValueError as exc:
            raise ConfigError("criteria must be a comma-separated list of numbers") from exc
        bad = [n for n in only if n not in acceptance.CRITERIA]
        if bad:
            raise ConfigError(f"unknown criteria {bad}")
    results = acceptance.run_acceptance(cfg.seed, cfg.get("tol_scale", 1.0), only,
                                        progress=lambda r: print(r.line(), file=sys.stderr,
                                                                 flush=True))
    out = acceptance.to_report(results, cfg.params)
    return out


COMMANDS = {
    "average": cmd_average,
    "solve": cmd_solve,
    "normalize": cmd_normalize,
    "monodromy": cmd_monodromy,
    "hamiltonize": cmd_hamiltonize,
    "invariant-symplectic": cmd_invariant_symplectic,
    "accept": cmd_accept,
    "resonance-table": cmd_resonance_table,
}


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override its values")
    common.add_argument("--scenario", choices=sorted(SCENARIOS))
    common.add_argument("--point", help="coordinates 'x,y,...'; several points separated by ';'")
    common.add_argument("--delta", help="quartic coupling, e.g. 3/8")
    common.add_argument("--epsilon", help="comma-separated epsilon values")
    common.add_argument("--nodes", type=int, help="orbit nodes (power of two)")
    common.add_argument("--tol", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--probes", type=int, help="number of probe points")
    common.add_argument("--output", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"))

    parser = argparse.ArgumentParser(prog="s1avg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("average", parents=[common], help="average, S and L_U of a field at points")
    p.add_argument("--field")
    p.add_argument("--identity-check", action="store_true", default=None)
    p = sub.add_parser("solve", parents=[common], help="solve a homological equation")
    p.add_argument("--field")
    p.add_argument("--gauge")
    p.add_argument("--kind", choices=("function", "vector", "kvector", "kform"))
    p = sub.add_parser("normalize", parents=[common], help="first-order normal form and its order")
    p.add_argument("--field", help="perturbation name, or X for the trivial control")
    p.add_argument("--control-offset", type=float)
    p = sub.add_parser("monodromy", parents=[common], help="monodromy of the quartic model")
    p.add_argument("--r")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--k-max", type=int)
    sub.add_parser("hamiltonize", parents=[common], help="make the unperturbed field Hamiltonian")
    sub.add_parser("invariant-symplectic", parents=[common], help="averaged symplectic form")
    p = sub.add_parser("accept", parents=[common], help="run the acceptance suite")
    p.add_argument("--list", action="store_true", help="list the criteria without running them")
    p.add_argument("--criteria", help="comma-separated criterion numbers")
    p.add_argument("--tol-scale", type=float, help="multiply every threshold (below 1 tightens)")
    p = sub.add_parser("resonance-table", parents=[common], help="resonant (delta, n/k) pairs")
    p.add_argument("--r-values", help="comma-separated rationals r")
    p.add_argument("--k-max", type=int)
    return parser


_NOT_CONFIG = {"command", "config", "list"}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        file_values = parse_config_file(Path(args.config).read_text()) if args.config else {}
        overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
        cfg = RunConfig.build(args.command, file_values, overrides)
        t0 = time.time()
        if args.command == "accept":
            rep = cmd_accept(cfg, list_only=args.list)
        else:
            rep = COMMANDS[args.command](cfg)
        rep.started, rep.finished = t0, time.time()
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except S1AvgError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = rep.render(cfg.get("format", "json"))
    if cfg.get("output"):
        Path(cfg.get("output")).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return rep.exit_code()


if __name__ == "__main__":
    sys.exit(main())
