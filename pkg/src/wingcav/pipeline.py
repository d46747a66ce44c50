"""Stage runners behind the CLI: single runs and Cartesian sweeps of the
geometry -> modes -> mirror -> QED chain, with deterministic CSV emission.

Each sweep point is computed independently (solves run in worker processes);
mode tracking across a wing-width sweep happens afterwards in the parent by
maximal field overlap between adjacent points, so output bytes do not depend
on worker count.
"""
from __future__ import annotations

import csv
import io
import logging
import math

import numpy as np

from .config import parse_grid_spec
from .constants import C_LIGHT
from .errors import (ConfigError, ConvergenceError, FactorizationError,
                     NumericalError, ParameterError, SingularLiouvillian,
                     StepFailure)
from .fdfd import PmlParams, find_modes
from .geometry import CavityParams, DIELECTRIC_STACK, build_geometry, grid_for_cavity
from .mirrors import (mirror_loss_rate, quarter_wave_stack, total_decay,
                      transfer_matrix)
from .modes import analytic_frequency, build_report, mode_overlap
from .qed import (QedParams, blockade_spectrum, cooperativity,
                  coupling_from_mode, evolve, fock_qubit_state)
from .sweep import apply_point, plan_from_config, run_points

log = logging.getLogger(__name__)

STATUS_OK = "ok"

VALUE_FMT = "%.17g"

STAGE_COLUMNS = {
    "modes": ["d_over_L", "m_order", "k_order", "freq_hz", "Q", "V_m3",
              "q_over_v", "rc_x_m", "rc_y_m", "subwavelength", "residual",
              "tracked"],
    "pipeline": ["d_over_L", "n_h", "k_h", "freq_hz", "Q_geom", "V_m3", "R",
                 "A", "kappa_hz", "g_hz", "C"],
    "qed-dynamics": ["t_s", "p_0e", "p_1g", "n_a"],
    "qed-spectrum": ["delta_over_gamma", "g2_0", "n_a"],
    "mirror": ["lambda_m", "R", "T", "A"],
}

_EXIT_BY_ERROR = {
    ConvergenceError: 3,
    FactorizationError: 3,
    StepFailure: 3,
    ParameterError: 4,
    NumericalError: 4,
    SingularLiouvillian: 5,
}


def exit_code_for(exc: Exception) -> int:
    for klass, code in _EXIT_BY_ERROR.items():
        if isinstance(exc, klass):
            return code
    return 3


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return VALUE_FMT % value
    return str(value)


def emit_csv(columns: list[str], rows: list[dict]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c, math.nan)) for c in columns])
    return buf.getvalue().encode()


def cavity_from_cfg(cfg: dict) -> CavityParams:
    geo = cfg["geometry"]
    stack = None
    if geo["mirror_model"] == DIELECTRIC_STACK:
        stack = stack_from_cfg(cfg)
    L = geo["L_m"]
    return CavityParams(
        L=L, h=geo["h_over_L"] * L, d=geo["d_over_L"] * L,
        l_pml=geo["l_pml_over_L"] * L, eta=geo["eta"],
        mirror_model=geo["mirror_model"], profile=geo["profile"], stack=stack)


def stack_from_cfg(cfg: dict):
    mir = cfg["mirror"]
    return quarter_wave_stack(
        n_h=mir["n_h"], k_h=mir["k_h"], n_l=mir["n_l"], k_l=mir["k_l"],
        lambda0=mir["lambda0_mm"] * 1e-3, n_pairs=mir["n_pairs"],
        n_sub=mir["n_sub"])


def _solve_point(cfg: dict) -> dict:
    """Worker: build geometry, solve, and report every accepted mode."""
    sol = cfg["solver"]
    try:
        params = cavity_from_cfg(cfg)
        grid = grid_for_cavity(params, sol["ppw"], sol["shift_ghz"] * 1e9)
        mat = build_geometry(params, grid)
        pml = PmlParams(width=params.l_pml, order=sol["pml_order"],
                        target_reflection=sol["pml_target_reflection"])
        shift = 2.0 * math.pi * sol["shift_ghz"] * 1e9
        modes = find_modes(mat, pml, shift, sol["n_modes"], sol["seed"],
                           max_pml_fraction=sol["max_pml_energy_fraction"],
                           refine=sol["refine"])
        out = []
        for mode in modes:
            report = build_report(mode, mat, params)
            out.append({
                "freq_hz": report.freq_hz, "Q": report.Q, "V_m3": report.V,
                "q_over_v": report.q_over_v, "m_order": report.m_order,
                "k_order": report.k_order, "rc_x_m": report.r_c[0],
                "rc_y_m": report.r_c[1], "subwavelength": report.subwavelength,
                "residual": report.residual, "mode": mode,
            })
        return {"status": STATUS_OK, "modes": out}
    except Exception as exc:  # fail loud per point, keep the sweep going
        log.error("sweep point failed: %s: %s", type(exc).__name__, exc)
        return {"status": f"error:{type(exc).__name__}", "modes": [],
                "exit_code": exit_code_for(exc)}


def _select_tracked(payloads: list[dict], cfgs: list[dict]) -> None:
    """Mark the tracked mode per point: classification picks the target at the
    first wing width of each group, field overlap follows it across the rest.
    Groups share every sweep coordinate except geometry.d_over_L."""
    groups: dict[tuple, list[int]] = {}
    for i, cfg in enumerate(cfgs):
        key = tuple(
            (sec, k, repr(v)) for sec in sorted(cfg) for k, v in sorted(cfg[sec].items())
            if not (sec == "geometry" and k == "d_over_L") and sec != "sweep")
        groups.setdefault(key, []).append(i)

    for indices in groups.values():
        indices.sort(key=lambda i: cfgs[i]["geometry"]["d_over_L"])
        prev_mode = None
        for i in indices:
            payload = payloads[i]
            cfg = cfgs[i]
            target = (cfg["solver"]["target_m"], cfg["solver"]["target_k"])
            chosen = None
            if payload["modes"]:
                if prev_mode is None:
                    nu_ref = analytic_frequency(target[1], target[0],
                                                cfg["geometry"]["L_m"],
                                                cfg["geometry"]["eta"])
                    cands = [m for m in payload["modes"]
                             if (m["m_order"], m["k_order"]) == target]
                    if cands:
                        chosen = min(cands, key=lambda m: abs(m["freq_hz"] - nu_ref))
                else:
                    chosen = max(payload["modes"],
                                 key=lambda m: mode_overlap(prev_mode, m["mode"]))
                    if (chosen["m_order"], chosen["k_order"]) != target:
                        log.warning(
                            "tracked mode reclassified to (m=%d, k=%d) at d/L=%g",
                            chosen["m_order"], chosen["k_order"],
                            cfg["geometry"]["d_over_L"])
            for m in payload["modes"]:
                m["tracked"] = m is chosen
            payload["tracked"] = chosen
            if chosen is not None:
                prev_mode = chosen["mode"]


def run_modes(resolved: dict, jobs: int = 1) -> tuple[list[str], list[dict], int]:
    plan = plan_from_config(resolved)
    cfgs = [apply_point(resolved, pt) for pt in plan.points()]
    payloads = run_points(_solve_point, cfgs, jobs)
    _select_tracked(payloads, cfgs)

    coord_cols = [k for k in plan.coord_names if k not in STAGE_COLUMNS["modes"]]
    columns = coord_cols + STAGE_COLUMNS["modes"] + ["status"]
    rows, worst = [], 0
    for cfg, payload in zip(cfgs, payloads):
        coords = {k: cfg[sec][k] for sec, k, _ in plan.axes}
        base = dict(coords)
        base["d_over_L"] = cfg["geometry"]["d_over_L"]
        if payload["status"] != STATUS_OK:
            rows.append({**base, "status": payload["status"]})
            worst = max(worst, payload.get("exit_code", 3))
            continue
        for m in sorted(payload["modes"], key=lambda m: m["freq_hz"]):
            row = {**base, **{k: m[k] for k in STAGE_COLUMNS["modes"]
                              if k not in ("d_over_L", "tracked")}}
            row["tracked"] = m["tracked"]
            row["status"] = STATUS_OK
            rows.append(row)
    return columns, rows, worst


def run_pipeline(resolved: dict, jobs: int = 1) -> tuple[list[str], list[dict], int]:
    """Cooperativity chain: Q_geom and V from an ideal-PEC solve, mirror loss
    from the transfer matrix, kappa from the additive two-channel model,
    g from the mode volume, C = g^2/(kappa gamma)."""
    if resolved["geometry"]["mirror_model"] != "ideal_pec":
        raise ConfigError(
            "pipeline stage needs geometry.mirror_model = ideal_pec; mirror "
            "loss enters through the transfer-matrix stage")
    plan = plan_from_config(resolved)
    cfgs = [apply_point(resolved, pt) for pt in plan.points()]
    payloads = run_points(_solve_point, cfgs, jobs)
    _select_tracked(payloads, cfgs)

    coord_cols = [k for k in plan.coord_names if k not in STAGE_COLUMNS["pipeline"]]
    columns = coord_cols + STAGE_COLUMNS["pipeline"] + ["status"]
    rows, worst = [], 0
    for cfg, payload in zip(cfgs, payloads):
        coords = {k: cfg[sec][k] for sec, k, _ in plan.axes}
        mir = cfg["mirror"]
        base = dict(coords)
        base.update(d_over_L=cfg["geometry"]["d_over_L"], n_h=mir["n_h"],
                    k_h=mir["k_h"])
        if payload["status"] != STATUS_OK:
            rows.append({**base, "status": payload["status"]})
            worst = max(worst, payload.get("exit_code", 3))
            continue
        tracked = payload.get("tracked")
        if tracked is None:
            rows.append({**base, "status": "error:NoTrackedMode"})
            worst = max(worst, 3)
            continue
        try:
            row = _pipeline_row(cfg, tracked)
        except Exception as exc:
            rows.append({**base, "status": f"error:{type(exc).__name__}"})
            worst = max(worst, max(exit_code_for(exc), 4))
            continue
        rows.append({**base, **row, "status": STATUS_OK})
    return columns, rows, worst


def _pipeline_row(cfg: dict, tracked: dict) -> dict:
    geo, mir, qed = cfg["geometry"], cfg["mirror"], cfg["qed"]
    freq = tracked["freq_hz"]
    omega = 2.0 * math.pi * freq
    lam = C_LIGHT / freq
    if mir["n_pairs"] > 0:
        resp = transfer_matrix(stack_from_cfg(cfg), lam)
        R, A = resp.R, resp.A
        kappa_mirror = mirror_loss_rate(resp, geo["L_m"], geo["eta"])
    else:
        R, A, kappa_mirror = 1.0, 0.0, 0.0
    if mir["kappa_mirror_hz"] is not None:
        kappa_mirror = 2.0 * math.pi * mir["kappa_mirror_hz"]
    kappa = total_decay(tracked["Q"], omega, kappa_mirror)
    gamma = 2.0 * math.pi * qed["gamma_hz"]
    omega_sigma = 2.0 * math.pi * qed["omega_ghz"] * 1e9
    if qed["g_over_gamma"] is not None and not qed["derive_g_from_V"]:
        g = qed["g_over_gamma"] * gamma
    else:
        g = coupling_from_mode(tracked["V_m3"], gamma, omega_sigma)
    return {
        "freq_hz": freq, "Q_geom": tracked["Q"], "V_m3": tracked["V_m3"],
        "R": R, "A": A, "kappa_hz": kappa / (2.0 * math.pi),
        "g_hz": g / (2.0 * math.pi), "C": cooperativity(g, kappa, gamma),
    }


def _qed_rates(cfg: dict, cache=None) -> tuple[float, float, float, float]:
    """(omega_sigma, gamma, g, kappa) in rad/s, either direct from the config
    or pulled from a cached pipeline artifact by run id and wing width."""
    qed = cfg["qed"]
    gamma = 2.0 * math.pi * qed["gamma_hz"]
    omega_sigma = 2.0 * math.pi * qed["omega_ghz"] * 1e9
    g = kappa = None
    if qed["g_over_gamma"] is not None:
        g = qed["g_over_gamma"] * gamma
    if qed["kappa_hz"] is not None:
        kappa = 2.0 * math.pi * qed["kappa_hz"]
    if (g is None or kappa is None) and qed["from_run_id"]:
        row = _artifact_row(cache, qed["from_run_id"], qed["row_d_over_L"])
        if g is None:
            g = 2.0 * math.pi * float(row["g_hz"])
        if kappa is None and qed["derive_kappa_from_pipeline"]:
            kappa = 2.0 * math.pi * float(row["kappa_hz"])
    if g is None:
        raise ConfigError("qed.g_over_gamma missing and no pipeline artifact given")
    if kappa is None:
        raise ConfigError("qed.kappa_hz missing and derive_kappa_from_pipeline off")
    return omega_sigma, gamma, g, kappa


def _artifact_row(cache, rid: str, d_over_l) -> dict:
    if cache is None:
        raise ConfigError("qed.from_run_id needs an enabled cache (--cache)")
    data = cache.lookup(rid)
    if data is None:
        raise ConfigError(f"pipeline artifact {rid} not found in cache")
    reader = csv.DictReader(io.StringIO(data.decode()))
    rows = [r for r in reader if r.get("status") == STATUS_OK]
    if d_over_l is not None:
        rows = [r for r in rows
                if abs(float(r["d_over_L"]) - d_over_l) < 1e-12]
    if not rows:
        raise ConfigError(f"no matching row in pipeline artifact {rid}")
    return rows[0]


def _dynamics_point(args) -> dict:
    cfg, rates = args
    qed = cfg["qed"]
    omega_sigma, gamma, g, kappa = rates
    try:
        p = QedParams(omega_a=omega_sigma, omega_sigma=omega_sigma, g=g,
                      kappa=kappa, gamma=gamma, n_max=qed["n_max"])
        t_end = qed["t_end_s"]
        if t_end is None:
            t_end = 6.0 / (kappa + gamma) if kappa + gamma > 0 else 10.0 * 2.0 * math.pi / g
        series = evolve(fock_qubit_state(0, True, p.n_max), t_end, p,
                        rel_tol=qed["rel_tol"])
        return {"status": STATUS_OK, "series": series}
    except Exception as exc:
        log.error("dynamics point failed: %s: %s", type(exc).__name__, exc)
        return {"status": f"error:{type(exc).__name__}",
                "exit_code": exit_code_for(exc)}


def run_qed_dynamics(resolved: dict, jobs: int = 1, cache=None):
    plan = plan_from_config(resolved)
    cfgs = [apply_point(resolved, pt) for pt in plan.points()]
    tasks = [(cfg, _qed_rates(cfg, cache)) for cfg in cfgs]
    payloads = run_points(_dynamics_point, tasks, jobs)

    coord_cols = [k for k in plan.coord_names if k not in STAGE_COLUMNS["qed-dynamics"]]
    columns = coord_cols + STAGE_COLUMNS["qed-dynamics"] + ["status"]
    rows, worst = [], 0
    for cfg, payload in zip(cfgs, payloads):
        coords = {k: cfg[sec][k] for sec, k, _ in plan.axes}
        if payload["status"] != STATUS_OK:
            rows.append({**coords, "status": payload["status"]})
            worst = max(worst, payload.get("exit_code", 3))
            continue
        s = payload["series"]
        for i in range(len(s.times)):
            rows.append({**coords, "t_s": s.times[i], "p_0e": s.p_0e[i],
                         "p_1g": s.p_1g[i], "n_a": s.n_a[i], "status": STATUS_OK})
    return columns, rows, worst


def _spectrum_point(args) -> dict:
    cfg, rates = args
    qed = cfg["qed"]
    omega_sigma, gamma, g, kappa = rates
    try:
        if qed["delta_over_gamma"] is None:
            raise ConfigError("qed.delta_over_gamma grid required for a spectrum")
        grid = parse_grid_spec(qed["delta_over_gamma"], "qed.delta_over_gamma")
        p = QedParams(omega_a=omega_sigma, omega_sigma=omega_sigma, g=g,
                      kappa=kappa, gamma=gamma,
                      Omega=qed["omega_drive_over_gamma"] * gamma,
                      n_max=qed["n_max"])
        spec = blockade_spectrum(p, grid * gamma)
        return {"status": STATUS_OK, "spectrum": spec}
    except Exception as exc:
        log.error("spectrum point failed: %s: %s", type(exc).__name__, exc)
        return {"status": f"error:{type(exc).__name__}",
                "exit_code": exit_code_for(exc)}


def run_qed_spectrum(resolved: dict, jobs: int = 1, cache=None):
    plan = plan_from_config(resolved)
    cfgs = [apply_point(resolved, pt) for pt in plan.points()]
    tasks = [(cfg, _qed_rates(cfg, cache)) for cfg in cfgs]
    payloads = run_points(_spectrum_point, tasks, jobs)

    coord_cols = [k for k in plan.coord_names if k not in STAGE_COLUMNS["qed-spectrum"]]
    columns = coord_cols + STAGE_COLUMNS["qed-spectrum"] + ["status"]
    rows, worst = [], 0
    for cfg, payload in zip(cfgs, payloads):
        coords = {k: cfg[sec][k] for sec, k, _ in plan.axes}
        if payload["status"] != STATUS_OK:
            rows.append({**coords, "status": payload["status"]})
            worst = max(worst, payload.get("exit_code", 3))
            continue
        for dg, g2, na in payload["spectrum"]:
            rows.append({**coords, "delta_over_gamma": dg, "g2_0": g2,
                         "n_a": na, "status": STATUS_OK})
    return columns, rows, worst


def run_mirror(resolved: dict, jobs: int = 1):
    plan = plan_from_config(resolved)
    cfgs = [apply_point(resolved, pt) for pt in plan.points()]
    coord_cols = [k for k in plan.coord_names if k not in STAGE_COLUMNS["mirror"]]
    columns = coord_cols + STAGE_COLUMNS["mirror"] + ["status"]
    rows, worst = [], 0
    for cfg in cfgs:
        coords = {k: cfg[sec][k] for sec, k, _ in plan.axes}
        mir = cfg["mirror"]
        lambda0 = mir["lambda0_mm"] * 1e-3
        if mir["lambda_scan"]:
            lams = parse_grid_spec(mir["lambda_scan"], "mirror.lambda_scan") * 1e-3
        else:
            lams = np.linspace(0.7 * lambda0, 1.3 * lambda0, 201)
        try:
            stack = stack_from_cfg(cfg)
            for lam in lams:
                resp = transfer_matrix(stack, float(lam))
                rows.append({**coords, "lambda_m": resp.lam, "R": resp.R,
                             "T": resp.T, "A": resp.A, "status": STATUS_OK})
        except Exception as exc:
            rows.append({**coords, "status": f"error:{type(exc).__name__}"})
            worst = max(worst, max(exit_code_for(exc), 4))
    return columns, rows, worst


STAGE_RUNNERS = {
    "modes": lambda cfg, jobs, cache: run_modes(cfg, jobs),
    "pipeline": lambda cfg, jobs, cache: run_pipeline(cfg, jobs),
    "qed-dynamics": run_qed_dynamics,
    "qed-spectrum": run_qed_spectrum,
    "mirror": lambda cfg, jobs, cache: run_mirror(cfg, jobs),
}


def run_stage(stage: str, resolved: dict, jobs: int = 1, cache=None):
    """Returns (csv_bytes, exit_code)."""
    runner = STAGE_RUNNERS[stage]
    columns, rows, worst = runner(resolved, jobs, cache)
    return emit_csv(columns, rows), worst
