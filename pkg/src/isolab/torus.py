"""Verification experiments on the invariant-torus structure: spectrum
conservation along flows, involution of the eigenvalue functionals,
normal/tangent basis structure, derivative bounds of the gradient
fields, the neighboring-level-set estimate, and a near-recurrence scan.

Every experiment returns an ExperimentReport; a report that consumed an
ambiguous spectral classification, or for which eigenvalue pairing
between two spectra broke down, is marked inconclusive rather than
passed or failed.
"""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .field import PeriodicField, l2_norm, real_pairing
from .flows import FlowSpec, evolve
from .invariants import invariant_eval, invariant_gradient, poisson_bracket
from .report import ExperimentReport, INFO, INCONCLUSIVE, PASS, FAIL
from .spectrum import (
    AMBIGUOUS,
    DOUBLE,
    SIMPLE,
    EigenPair,
    Spectrum,
    TrackingError,
    eigenpair,
    family_pair,
    flat_reference_square,
    local_gap_guard,
    locate_spectrum,
    spectral_deviation,
    track_root,
)


def _field_as_real_vector(w: PeriodicField) -> np.ndarray:
    s = w.samples / math.sqrt(w.grid.n_points)
    return np.concatenate([s.real, s.imag])


def _fit_log_slope(xs, ys):
    """Least-squares slope of log|y| against log|x|."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    keep = (np.abs(xs) > 0) & (ys > 0)
    if np.count_nonzero(keep) < 2:
        return float("nan")
    return float(np.polyfit(np.log(np.abs(xs[keep])), np.log(ys[keep]), 1)[0])


def _classification_counts(spec: Spectrum):
    counts = {SIMPLE: 0, DOUBLE: 0, AMBIGUOUS: 0}
    for p in spec.points:
        counts[p.classification] += 1
    return counts


# -- spectrum conservation -------------------------------------------------


def isospectral_drift(
    u0: PeriodicField,
    flow: FlowSpec,
    sample_times,
    window,
    index_limit: int | None = None,
    tolerance: float = 1e-5,
) -> ExperimentReport:
    """Largest eigenvalue movement along a flow, per sample time.

    Spectra are compared with multiplicity through the aligned order
    statistics, so double points splitting by integrator noise stay
    paired; a change in the multiplicity count (pairing breakdown) or an
    ambiguous classification marks the report inconclusive.
    """
    rep = ExperimentReport(
        name="isospectral_drift",
        columns=["max_drift", "max_drift_all", "n_values"],
        metadata={
            "grid_n": u0.grid.n_points,
            "flow": flow.kind,
            "dt": "%.17g" % flow.dt,
            "window": f"[{window[0]:g}:{window[1]:g}]",
            "index_limit": str(index_limit),
        },
    )
    spec0 = locate_spectrum(u0, window)
    base_counts = _classification_counts(spec0)
    if spec0.has_ambiguous:
        rep.add("initial_spectrum", {"max_drift": float("nan"),
                                     "max_drift_all": float("nan"),
                                     "n_values": len(spec0.points)},
                tolerance, INCONCLUSIVE)
        return rep
    e0 = spec0.expanded_values()

    for t in sample_times:
        ut = evolve(u0, replace(flow, t_final=float(t)))
        spec_t = locate_spectrum(ut, window)
        label = "drift_t=%.17g" % t
        if spec_t.has_ambiguous:
            rep.add(label, {"max_drift": float("nan"),
                            "max_drift_all": float("nan"),
                            "n_values": len(spec_t.points)},
                    tolerance, INCONCLUSIVE)
            continue
        et = spec_t.expanded_values()
        if et.size != e0.size:
            rep.add(label, {"max_drift": float("nan"),
                            "max_drift_all": float("nan"),
                            "n_values": et.size},
                    tolerance, INCONCLUSIVE)
            continue
        dev = spectral_deviation(spec_t, spec0)
        drift_all = float(np.max(np.abs(dev.values))) if dev.values.size else 0.0
        if index_limit is not None:
            sel = np.abs(dev.indices) <= index_limit
            drift = float(np.max(np.abs(dev.values[sel]))) if np.any(sel) else 0.0
        else:
            drift = drift_all
        rep.add(label, {"max_drift": drift, "max_drift_all": drift_all,
                        "n_values": et.size},
                tolerance, drift <= tolerance)
        counts_t = _classification_counts(spec_t)
        if counts_t != base_counts:
            rep.add_info(
                "classification_change_t=%.17g" % t,
                {"max_drift": counts_t[SIMPLE], "max_drift_all": counts_t[DOUBLE],
                 "n_values": counts_t[AMBIGUOUS]},
            )
    return rep


# -- involution -------------------------------------------------------------


def involution_matrix(u: PeriodicField, indices, window,
                      tol_scale: float = 1e-7) -> ExperimentReport:
    """Pairwise brackets of the eigenvalue functionals over an index set.

    Each entry is <i f1_m^2, J i f1_n^2> under the real pairing; the
    tolerance scales with the gradient norms as tol_scale * (1 + |Gm||Gn|).
    """
    rep = ExperimentReport(
        name="involution_matrix",
        columns=["bracket", "tolerance_used", "norm_product"],
        metadata={"grid_n": u.grid.n_points,
                  "window": f"[{window[0]:g}:{window[1]:g}]"},
    )
    spec = locate_spectrum(u, window)
    grads = {}
    for m in indices:
        p = spec.by_index(m)
        if p.classification != SIMPLE:
            rep.add(f"grad[{m}]", {"bracket": float("nan"),
                                   "tolerance_used": float("nan"),
                                   "norm_product": float("nan")},
                    tol_scale, INCONCLUSIVE)
            continue
        grads[m] = eigenpair(u, p).normal_field()
    worst = 0.0
    for i, m in enumerate(sorted(grads)):
        for n in sorted(grads)[i:]:
            gm, gn = grads[m], grads[n]
            entry = poisson_bracket(gm, gn)
            tol = tol_scale * (1.0 + l2_norm(gm) * l2_norm(gn))
            worst = max(worst, abs(entry) / tol)
            rep.add(
                f"bracket[{m},{n}]",
                {"bracket": entry, "tolerance_used": tol,
                 "norm_product": l2_norm(gm) * l2_norm(gn)},
                tol, abs(entry) <= tol,
            )
    rep.add_info("worst_ratio", {"bracket": worst, "tolerance_used": 1.0,
                                 "norm_product": float("nan")})
    return rep


def functional_involution(u: PeriodicField, tolerance: float = 1e-7) -> ExperimentReport:
    """Brackets of the polynomial conserved functionals on one field."""
    rep = ExperimentReport(
        name="functional_involution",
        columns=["bracket", "tolerance_used", "norm_product"],
        metadata={"grid_n": u.grid.n_points},
    )
    ids = (1, 2, 3, 5)
    grads = {i: invariant_gradient(i, u) for i in ids}
    for a in range(len(ids)):
        for b in range(a, len(ids)):
            m, n = ids[a], ids[b]
            entry = poisson_bracket(grads[m], grads[n])
            tol = tolerance * (1.0 + l2_norm(grads[m]) * l2_norm(grads[n]))
            rep.add(
                f"bracket[I{m},I{n}]",
                {"bracket": entry, "tolerance_used": tol,
                 "norm_product": l2_norm(grads[m]) * l2_norm(grads[n])},
                tol, abs(entry) <= tol,
            )
    return rep


# -- basis structure --------------------------------------------------------


def gram_basis_analysis(u: PeriodicField, indices, window,
                        rank_tol: float = 1e-12) -> ExperimentReport:
    """Gram matrix of the squared eigenfunction family and its deviation
    from the flat reference family.

    At the exactly-zero potential the family is constructed analytically
    on the lattice of multiples of pi. Elsewhere simple points use the
    transfer-matrix eigenfunction and double points the symmetric
    convention. The condition number is reported over the numerically
    positive part of the Gram spectrum, with the count of dependent
    directions alongside (antipodal split pairs of a constant potential
    produce exactly parallel squares).
    """
    rep = ExperimentReport(
        name="gram_basis",
        columns=["value", "aux"],
        metadata={"grid_n": u.grid.n_points,
                  "window": f"[{window[0]:g}:{window[1]:g}]",
                  "indices": f"{min(indices)}..{max(indices)}"},
    )
    grid = u.grid
    is_flat_zero = float(np.max(np.abs(u.samples))) == 0.0
    squares = []
    lams = []
    if is_flat_zero:
        lam0 = [k * math.pi for k in
                range(int(math.ceil(window[0] / math.pi)),
                      int(math.floor(window[1] / math.pi)) + 1)]
        center = int(np.argmin(np.abs(lam0)))
        for m in indices:
            k = center + m
            if not (0 <= k < len(lam0)):
                raise IndexError(f"index {m} outside the flat lattice window")
            squares.append(flat_reference_square(grid, lam0[k]))
            lams.append(lam0[k])
    else:
        spec = locate_spectrum(u, window)
        for m in indices:
            p = spec.by_index(m)
            if p.classification == AMBIGUOUS:
                rep.add(f"member[{m}]", {"value": float("nan"), "aux": p.lam},
                        float("inf"), INCONCLUSIVE)
                continue
            squares.append(PeriodicField(grid, family_pair(u, p).f1.samples ** 2))
            lams.append(p.lam)

    k = len(squares)
    gram = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            gram[i, j] = gram[j, i] = real_pairing(squares[i], squares[j])
    eigs = np.sort(np.linalg.eigvalsh(gram))
    positive = eigs[eigs > rank_tol * max(eigs[-1], 1.0)]
    dependent = k - positive.size
    cond = float(positive[-1] / positive[0]) if positive.size else float("inf")
    off_diag = gram - np.diag(np.diag(gram))
    rep.add_info("gram_min_eig", {"value": float(eigs[0]), "aux": k})
    rep.add_info("gram_max_eig", {"value": float(eigs[-1]), "aux": k})
    rep.add_info("condition_positive", {"value": cond, "aux": dependent})
    rep.add_info("max_offdiag", {"value": float(np.max(np.abs(off_diag))), "aux": k})
    rep.add_info("max_diag_dev_from_2",
                 {"value": float(np.max(np.abs(np.diag(gram) - 2.0))), "aux": k})

    # deviation from the flat family paired at the nearest lattice point
    terms = []
    lam0s = []
    for sq, lam in zip(squares, lams):
        lam0 = math.pi * round(lam / math.pi)
        ref = flat_reference_square(grid, lam0)
        terms.append(l2_norm(sq - ref) ** 2)
        lam0s.append(lam0)
    order = np.argsort(np.abs(lam0s))
    csum = 0.0
    prev = 0.0
    for pos in order:
        csum += terms[pos]
        rep.add_info(
            "hs_partial[lam0=%.6g]" % lam0s[pos],
            {"value": csum, "aux": terms[pos]},
        )
        prev = csum
    tail = [(abs(lam0s[p]), terms[p]) for p in order if abs(lam0s[p]) > 1.5 * math.pi]
    slope = _fit_log_slope([t[0] for t in tail], [t[1] for t in tail])
    rep.add("hs_decay_slope", {"value": slope, "aux": len(tail)},
            -1.5, (not math.isnan(slope)) and slope <= -1.5)
    return rep


def normal_tangent_residual(u: PeriodicField, v: PeriodicField, truncation: int,
                            window) -> ExperimentReport:
    """Least-squares residual of v against span{i f1_m^2, -f2_m^2}.

    Reports the residual for nested truncations up to the requested one;
    rank deficiency of the stacked system is reported, not hidden.
    """
    rep = ExperimentReport(
        name="normal_tangent_residual",
        columns=["residual", "rank", "n_columns"],
        metadata={"grid_n": u.grid.n_points, "truncation": str(truncation),
                  "window": f"[{window[0]:g}:{window[1]:g}]"},
    )
    spec = locate_spectrum(u, window)
    pairs = {}
    for m in range(-truncation, truncation + 1):
        p = spec.by_index(m)
        if p.classification != SIMPLE:
            rep.add(f"member[{m}]", {"residual": float("nan"), "rank": 0,
                                     "n_columns": 0}, float("inf"), INCONCLUSIVE)
            return rep
        pairs[m] = eigenpair(u, p)
    target = _field_as_real_vector(v)
    norm_v = l2_norm(v)
    steps = sorted({min(4, truncation), truncation,
                    *range(4, truncation + 1, 4)})
    for m_cut in steps:
        cols = []
        for m in range(-m_cut, m_cut + 1):
            cols.append(_field_as_real_vector(pairs[m].normal_field()))
            cols.append(_field_as_real_vector(pairs[m].tangent_field()))
        a = np.stack(cols, axis=1)
        coef, _, rank, _ = np.linalg.lstsq(a, target, rcond=None)
        resid = float(np.linalg.norm(target - a @ coef))
        rep.add_info(f"residual[M={m_cut}]",
                     {"residual": resid, "rank": int(rank), "n_columns": a.shape[1]})
    rep.add_info("v_norm", {"residual": norm_v, "rank": 0, "n_columns": 0})
    return rep


# -- derivative bounds -------------------------------------------------------


def _tracked_pair(u: PeriodicField, point, lam_guess: float) -> EigenPair:
    moved = replace(point, lam=lam_guess, classification=SIMPLE)
    return eigenpair(u, moved)


def dG_bound_scan(u: PeriodicField, directions, indices, eps: float,
                  window, slope_limit: float = -0.8,
                  plateau_limit: float = 0.05) -> ExperimentReport:
    """Finite-difference bounds on the derivative of the gradient fields.

    For each index m the scan reports c_m = max over directions of
    ||dG_m v|| / ||v||, the partial sums of c_m^2 ordered by |index|,
    the fitted decay slope of c_m against |lambda_m|, and the normalized
    tangent-direction bilinear form alongside ||G_m||.
    """
    rep = ExperimentReport(
        name="dg_bound_scan",
        columns=["value", "lam", "aux"],
        metadata={"grid_n": u.grid.n_points, "eps": "%.17g" % eps,
                  "window": f"[{window[0]:g}:{window[1]:g}]",
                  "n_directions": str(len(directions))},
    )
    spec = locate_spectrum(u, window)
    c_by_index = {}
    for m in indices:
        p = spec.by_index(m)
        if p.classification != SIMPLE:
            rep.add(f"c[{m}]", {"value": float("nan"), "lam": p.lam,
                                "aux": float("nan")}, float("inf"), INCONCLUSIVE)
            continue
        pair = eigenpair(u, p)
        guard = local_gap_guard(spec, p)
        best = 0.0
        failed = False
        for v in directions:
            nv = l2_norm(v)
            if nv == 0.0:
                continue
            try:
                lam_p = track_root(u + eps * v, p.lam, p.kind, guard)
                lam_m = track_root(u + (-eps) * v, p.lam, p.kind, guard)
                gp = _tracked_pair(u + eps * v, p, lam_p).normal_field()
                gm = _tracked_pair(u + (-eps) * v, p, lam_m).normal_field()
            except TrackingError:
                failed = True
                break
            dg = (1.0 / (2.0 * eps)) * (gp - gm)
            best = max(best, l2_norm(dg) / nv)
        if failed:
            rep.add(f"c[{m}]", {"value": float("nan"), "lam": p.lam,
                                "aux": float("nan")}, float("inf"), INCONCLUSIVE)
            continue
        c_by_index[m] = (p.lam, best)
        rep.add_info(f"c[{m}]", {"value": best, "lam": p.lam, "aux": eps})
        # normalized bilinear form along the tangent direction
        k_field = pair.tangent_field()
        try:
            lam_p = track_root(u + eps * k_field, p.lam, p.kind, guard)
            lam_m = track_root(u + (-eps) * k_field, p.lam, p.kind, guard)
            gp = _tracked_pair(u + eps * k_field, p, lam_p).normal_field()
            gm = _tracked_pair(u + (-eps) * k_field, p, lam_m).normal_field()
            dgk = (1.0 / (2.0 * eps)) * (gp - gm)
            q = 0.5 * real_pairing(dgk, k_field) / max(l2_norm(k_field) ** 2, 1e-300)
            rep.add_info(f"tangent_form[{m}]",
                         {"value": q, "lam": p.lam,
                          "aux": l2_norm(pair.normal_field())})
        except TrackingError:
            rep.add(f"tangent_form[{m}]", {"value": float("nan"), "lam": p.lam,
                                           "aux": float("nan")},
                    float("inf"), INCONCLUSIVE)

    if c_by_index:
        order = sorted(c_by_index, key=lambda m: (abs(m), m))
        csum = 0.0
        last_inc = 0.0
        for m in order:
            lam, c = c_by_index[m]
            csum += c * c
            last_inc = c * c
            rep.add_info(f"partial_sum[|m|<={abs(m)}]",
                         {"value": csum, "lam": lam, "aux": last_inc})
        frac = last_inc / csum if csum > 0 else 0.0
        rep.add("plateau_final_increment", {"value": frac, "lam": 0.0, "aux": csum},
                plateau_limit, frac <= plateau_limit)
        lams = [c_by_index[m][0] for m in order if abs(c_by_index[m][0]) > 1.0]
        cs = [c_by_index[m][1] for m in order if abs(c_by_index[m][0]) > 1.0]
        slope = _fit_log_slope(lams, cs)
        rep.add("c_decay_slope", {"value": slope, "lam": 0.0, "aux": len(cs)},
                slope_limit, (not math.isnan(slope)) and slope <= slope_limit)
    return rep


# -- neighboring level sets ---------------------------------------------------


def neighbor_level_set_scan(u0: PeriodicField, m0: int, eps_list, window,
                            truncation: int = 8,
                            spread_limit: float = 0.10) -> ExperimentReport:
    """Ratio of truncated spectral displacement to potential displacement.

    Transverse rows displace along the gradient field of the chosen
    eigenvalue and must have epsilon-stable, positive ratios; tangent
    rows displace along the flow field and their ratio must shrink
    linearly with epsilon.
    """
    rep = ExperimentReport(
        name="neighbor_level_sets",
        columns=["ratio", "spectral_l2", "potential_l2"],
        metadata={"grid_n": u0.grid.n_points, "index": str(m0),
                  "window": f"[{window[0]:g}:{window[1]:g}]",
                  "truncation": str(truncation)},
    )
    spec0 = locate_spectrum(u0, window)
    p0 = spec0.by_index(m0)
    if p0.classification != SIMPLE:
        rep.add("base_point", {"ratio": float("nan"), "spectral_l2": float("nan"),
                               "potential_l2": float("nan")},
                float("inf"), INCONCLUSIVE)
        return rep
    pair0 = eigenpair(u0, p0)
    ratios = {"transverse": [], "tangent": []}
    for eps in eps_list:
        eps = float(eps)
        if eps == 0.0:
            continue
        for label, direction in (("transverse", pair0.normal_field()),
                                 ("tangent", pair0.tangent_field())):
            u_f = u0 + eps * direction
            spec_f = locate_spectrum(u_f, window)
            if spec_f.has_ambiguous:
                rep.add(f"{label}[eps={eps:g}]",
                        {"ratio": float("nan"), "spectral_l2": float("nan"),
                         "potential_l2": float("nan")},
                        float("inf"), INCONCLUSIVE)
                continue
            dev = spectral_deviation(spec_f, spec0)
            sel = np.abs(dev.indices) <= truncation
            spectral = float(np.sqrt(np.sum(dev.values[sel] ** 2)))
            pot = eps * l2_norm(direction)
            ratio = spectral / pot
            ratios[label].append((eps, ratio))
            rep.add_info(f"{label}[eps={eps:g}]",
                         {"ratio": ratio, "spectral_l2": spectral,
                          "potential_l2": pot})
    tr = [r for _, r in ratios["transverse"]]
    if tr:
        spread = max(tr) / min(tr) - 1.0 if min(tr) > 0 else float("inf")
        rep.add("transverse_spread", {"ratio": spread, "spectral_l2": max(tr),
                                      "potential_l2": min(tr)},
                spread_limit, spread <= spread_limit)
        rep.add("transverse_lower_bound", {"ratio": min(tr), "spectral_l2": 0.0,
                                           "potential_l2": 0.0},
                0.0, min(tr) > 0.0)
    tg = sorted(ratios["tangent"], key=lambda t: -t[0])
    for (e1, r1), (e2, r2) in zip(tg, tg[1:]):
        expected = e2 / e1
        factor = r2 / r1 if r1 > 0 else float("inf")
        ok = 0.5 * expected <= factor <= 1.5 * expected
        rep.add(f"tangent_decay[{e1:g}->{e2:g}]",
                {"ratio": factor, "spectral_l2": r1, "potential_l2": r2},
                1.5 * expected, ok)
    return rep


# -- recurrence ---------------------------------------------------------------


def recurrence_scan(u0: PeriodicField, flow: FlowSpec, horizon: float,
                    tol: float) -> ExperimentReport:
    """Near-return times of a trajectory: local minima of ||u(t) - u0||
    below tol, with parabolic refinement of each minimum. Illustrative;
    rows are informational except for the returns themselves."""
    rep = ExperimentReport(
        name="recurrence_scan",
        columns=["t_return", "distance"],
        metadata={"grid_n": u0.grid.n_points, "flow": flow.kind,
                  "dt": "%.17g" % flow.dt, "horizon": "%.17g" % horizon,
                  "tol": "%.17g" % tol},
    )
    dt = flow.dt
    n_steps = int(round(horizon / dt))
    u = u0
    dists = [0.0]
    for _ in range(n_steps):
        u = evolve(u, replace(flow, t_final=dt))
        dists.append(l2_norm(u - u0))
    d = np.array(dists)
    count = 0
    for i in range(1, len(d) - 1):
        if d[i] <= d[i - 1] and d[i] <= d[i + 1] and d[i] < tol:
            # parabolic refinement on the squared distance
            a, b, c = d[i - 1] ** 2, d[i] ** 2, d[i + 1] ** 2
            denom = a - 2 * b + c
            shift = 0.5 * (a - c) / denom if denom > 0 else 0.0
            t_ref = (i + shift) * dt
            d_ref = math.sqrt(max(b - 0.25 * (a - c) * shift, 0.0))
            count += 1
            rep.add(f"return[{count}]", {"t_return": t_ref, "distance": d_ref},
                    tol, d_ref < tol)
    rep.add_info("n_returns", {"t_return": float(count), "distance": float(np.min(d[1:])) if len(d) > 1 else 0.0})
    return rep
