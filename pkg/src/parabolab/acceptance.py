"""The end-to-end verification suite.

Each criterion is a function of a :class:`VerifyContext` returning a
:class:`CriterionResult`. Criteria fix their own resolutions where the check
is tied to a mesh size; ``VerifyContext.resolution`` drives the rest.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .catalog import make_case
from .contact import contact_set, lower_transform, moreau_envelope
from .covering import (
    BallFamily,
    random_balls,
    covering_check,
    random_instance,
    vitali_check,
    vitali_select,
)
from .density import density_scan, nonempty_witness, step_pipeline
from .grid import CellSet, GridFunction, build_ball_grid, sample_function
from .measure import (
    DyadicParams,
    c2_inclusion,
    decay_profile,
    dyadic_norm,
    hessian_frobenius,
    normalize_and_ratio,
)
from .operators import Ellipticity, pucci_eval
from .oracles import (
    brute_lower_transform,
    brute_upper_envelope,
    decay_from_openings,
    minimal_opening,
    quadratic_lower_complement,
)
from .solver import residual_report, solve_plaplace

__all__ = ["VerifyContext", "CriterionResult", "CRITERIA", "run_criterion", "run_all",
           "catalog_cases", "theoretical_M"]


@dataclass(frozen=True)
class VerifyContext:
    resolution: int = 129
    seed: int = 0


@dataclass
class CriterionResult:
    number: int
    name: str
    ok: bool
    runtime: float
    budget: float
    details: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict)  # name -> GridFunction, written as GF01

    @property
    def within_budget(self) -> bool:
        return self.runtime <= self.budget

    @property
    def passed(self) -> bool:
        return self.ok and self.within_budget

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = "" if self.within_budget else " over budget"
        return (f"[{tag}] {self.number:2d} {self.name}: {self.summary()} "
                f"({self.runtime:.1f}s of {self.budget:.0f}s{extra})")

    def summary(self) -> str:
        return self.details.get("summary", "")

    def to_dict(self) -> dict:
        # runtimes stay out of the report so that reruns are byte-identical
        return {"number": self.number, "name": self.name, "ok": self.ok,
                "details": self.details}


def catalog_cases(ndim: int = 2):
    """The catalog instances used across the suite."""
    return [
        make_case("quadratic", ndim, a=1.0),
        make_case("quadratic", ndim, a=-3.0),
        make_case("cone", ndim),
        make_case("radial_plaplace", ndim, p=1.5),
        make_case("radial_plaplace", ndim, p=1.8),
        make_case("bump", ndim),
    ]


def theoretical_M(A: float = 3.0) -> float:
    """Smallest integer M above ``128 e^A / 3 + 1``."""
    return float(math.floor(128 * math.exp(A) / 3 + 1) + 1)


def _spec_for_h(h: float, ndim: int = 2):
    return build_ball_grid(ndim, int(round(2 / h)) + 1)


# -- 1 -------------------------------------------------------------------------------------


def _sym(rng, n, k):
    A = rng.normal(size=(k, n, n))
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def c01_pucci_algebra(ctx: VerifyContext):
    rng = np.random.default_rng(ctx.seed)
    tol = 1e-10
    worst = 0.0
    exact_ok = True
    for n in (2, 3):
        for ell in (Ellipticity(1, 1), Ellipticity(1, 2), Ellipticity(0.5, 3)):
            X, Y = _sym(rng, n, 1000), _sym(rng, n, 1000)
            k = rng.uniform(0, 5, size=1000)
            Pp, Pm = pucci_eval(X, ell, "plus"), pucci_eval(X, ell, "minus")
            kX = k[:, None, None] * X
            worst = max(worst, np.max(np.abs(pucci_eval(kX, ell, "plus") - k * Pp)),
                        np.max(np.abs(pucci_eval(kX, ell, "minus") - k * Pm)),
                        np.max(np.abs(pucci_eval(-X, ell, "plus") + Pm)),
                        np.max(np.abs(pucci_eval(-X, ell, "minus") + Pp)))
            chain = [Pm + pucci_eval(Y, ell, "minus"), pucci_eval(X + Y, ell, "minus"),
                     Pm + pucci_eval(Y, ell, "plus"), pucci_eval(X + Y, ell, "plus"),
                     Pp + pucci_eval(Y, ell, "plus")]
            for a, b in zip(chain, chain[1:]):
                worst = max(worst, float(np.max(a - b)))
            B = rng.normal(size=(1000, n, n))
            Pos = B @ np.swapaxes(B, -1, -2)
            tr = np.trace(Pos, axis1=-2, axis2=-1)
            worst = max(worst, np.max(np.abs(pucci_eval(Pos, ell, "plus") - ell.Lam * tr)),
                        np.max(np.abs(pucci_eval(Pos, ell, "minus") - ell.lam * tr)))
            I = np.eye(n)
            exact_ok &= pucci_eval(I, ell, "minus") == n * ell.lam
            exact_ok &= pucci_eval(I, ell, "plus") == n * ell.Lam
    ok = bool(worst <= tol and exact_ok)
    return ok, {"worst_defect": float(worst), "identity_exact": bool(exact_ok),
                "summary": f"worst defect {worst:.2e}, identity exact {bool(exact_ok)}"}


# -- 2 -------------------------------------------------------------------------------------


def c02_envelope(ctx: VerifyContext):
    spec = build_ball_grid(2, 33)
    rng = np.random.default_rng(ctx.seed + 2)
    worst = 0.0
    for i in range(20):
        u = GridFunction(spec, np.where(spec.mask, rng.normal(size=spec.shape), np.nan))
        kappa = float(rng.choice([0.5, 4.0, 40.0]))
        V = spec.mask & (rng.uniform(size=spec.shape) < 0.5) if i % 2 else None
        for field_ in (u, -u):
            tr = lower_transform(field_, kappa, V)
            m = brute_lower_transform(field_, kappa, V)
            w = brute_upper_envelope(m, kappa, spec)
            worst = max(worst, float(np.nanmax(np.abs(tr.m - m))),
                        float(np.nanmax(np.abs(tr.w - w))))
    return worst <= 1e-12, {"worst_error": worst, "fields": 20,
                            "summary": f"max deviation from brute force {worst:.2e}"}


# -- 3 -------------------------------------------------------------------------------------


def c03_contact_geometry(ctx: VerifyContext):
    spec = _spec_for_h(1 / 64)
    u = make_case("quadratic", a=1.0).sample(spec)
    cs = contact_set(u, 1.0, direction="lower")
    target = spec.ball_raster(np.zeros(2), 0.5, closed=True)
    sym = CellSet(spec, cs.mask ^ target).measure()
    return sym <= 8 * spec.h, {"symmetric_difference": sym, "bound": 8 * spec.h,
                               "summary": f"|T ^ B_1/2| = {sym:.4f} <= {8 * spec.h:.4f}"}


# -- 4 -------------------------------------------------------------------------------------


def c04_invariants(ctx: VerifyContext):
    spec = build_ball_grid(2, ctx.resolution)
    scaling_fail, mono_fail, mirror_fail = [], [], []
    ladder = [2.0**k for k in range(6)]
    for case in catalog_cases():
        u = case.sample(spec)
        for a in (0.1, 3.0, 17.0):
            for kappa in (1.0, 4.0, 16.0):
                lhs = contact_set(u.scaled(a), kappa, tol=a * (kappa / a) * spec.h**2).mask
                rhs = contact_set(u, kappa / a).mask
                if not np.array_equal(lhs, rhs):
                    scaling_fail.append((case.name, a, kappa))
        for d in ("lower", "upper"):
            masks = [contact_set(u, k, direction=d).mask for k in ladder]
            for k, (s, t) in enumerate(zip(masks, masks[1:])):
                if np.any(s & ~t):
                    mono_fail.append((case.name, d, ladder[k]))
        for kappa in ladder:
            if not np.array_equal(contact_set(u, kappa, direction="upper").mask,
                                  contact_set(-u, kappa, direction="lower").mask):
                mirror_fail.append((case.name, kappa))
    ok = not (scaling_fail or mono_fail or mirror_fail)
    return ok, {"scaling_failures": scaling_fail, "monotonicity_failures": mono_fail,
                "mirror_failures": mirror_fail,
                "summary": f"{len(scaling_fail)} scaling, {len(mono_fail)} monotonicity, "
                           f"{len(mirror_fail)} mirror failures"}


# -- 5 -------------------------------------------------------------------------------------


def c05_moreau(ctx: VerifyContext):
    spec = _spec_for_h(1 / 64)
    eps = 0.5
    kappa = 2.0 / eps**4
    # u = -kappa/4 |x|^2: the minimiser is 2x, a grid node for |x| <= 1/2
    u = sample_function(lambda x: -0.25 * kappa * np.sum(x**2, axis=-1), spec)
    ue = moreau_envelope(u, eps)
    exact = -0.5 * kappa * spec.radius**2
    inner = spec.mask & (spec.radius <= 0.5)
    rel = float(np.max(np.abs(ue.values[inner] - exact[inner]) / np.maximum(np.abs(exact[inner]),
                                                                            1e-300)))
    below_ok, mono_ok = True, True
    schedule = (0.3, 0.4, 0.5, 0.6)
    for case in catalog_cases():
        v = case.sample(spec)
        envs = [moreau_envelope(v, e).values[spec.mask] for e in schedule]
        below_ok &= bool(np.all(envs[0] <= v.values[spec.mask]))
        mono_ok &= all(bool(np.all(b <= a)) for a, b in zip(envs, envs[1:]))
    ok = rel <= 1e-8 and below_ok and mono_ok
    return ok, {"closed_form_rel_error": rel, "below": below_ok, "monotone": mono_ok,
                "summary": f"closed form rel err {rel:.1e}, u_eps <= u {below_ok}, "
                           f"monotone {mono_ok}"}


# -- 6 -------------------------------------------------------------------------------------


def c06_decay(ctx: VerifyContext):
    # oracle: per-node minimal opening by brute force on 65^2
    coarse = build_ball_grid(2, 65)
    cone = make_case("cone")
    openings = minimal_opening(cone.sample(coarse), 2.0 ** (np.arange(9) / 2), "upper")
    ts = [1.0, 2.0, 4.0, 8.0, 16.0]
    oracle = decay_from_openings(openings, coarse, ts)
    fast = np.array([contact_set(cone.sample(coarse), t, direction="upper").complement_measure()
                     for t in ts])
    oracle_match = bool(np.array_equal(oracle, fast))

    fine = _spec_for_h(1 / 128)
    rc = decay_profile(cone.sample(fine), "upper")
    rq = decay_profile(make_case("quadratic", a=1.0).sample(fine), "lower")
    closed = quadratic_lower_complement(1.0, rq.t)
    tol = 2 * 2 * math.pi * fine.h
    closed_ok = bool(np.all(np.abs(rq.measure_lower[rq.fit_steps] - closed[rq.fit_steps]) <= tol))
    ok = oracle_match and closed_ok and 1.6 <= rc.sigma <= 2.4 and 0.8 <= rq.sigma <= 1.2
    tables = {"decay_cone_upper": list(rc.rows()), "decay_quadratic_lower": list(rq.rows())}
    return ok, {
        "cone_sigma": rc.sigma, "quadratic_sigma": rq.sigma,
        "cone_fit_steps": rc.fit_steps, "quadratic_fit_steps": rq.fit_steps,
        "oracle_measures_65": oracle.tolist(), "oracle_match": oracle_match,
        "closed_form_ok": closed_ok,
        "summary": f"cone sigma {rc.sigma:.3f}, quadratic sigma {rq.sigma:.3f}, "
                   f"oracle match {oracle_match}",
    }, tables


# -- 7 -------------------------------------------------------------------------------------


def c07_dyadic(ctx: VerifyContext):
    spec = build_ball_grid(2, ctx.resolution)
    rng = np.random.default_rng(ctx.seed + 7)
    fields = []
    for case in catalog_cases():
        g, valid = hessian_frobenius(case.sample(spec))
        fields.append((case.name, GridFunction(spec, np.where(spec.mask, np.where(valid, g, 0.0),
                                                                np.nan))))
    for i in range(50):
        vals = np.exp(rng.uniform(0.5, 3.0) * rng.normal(size=spec.shape))
        fields.append((f"random:{i}", GridFunction(spec, np.where(spec.mask, vals, np.nan))))
    fails = []
    for p in (0.3, 0.5, 1.0):
        params = DyadicParams.default(2, p)
        for name, g in fields:
            if not dyadic_norm(g, params).holds:
                fails.append((name, p))
    return not fails, {"failures": fails, "fields": len(fields),
                       "summary": f"{len(fields)} fields x 3 exponents, {len(fails)} failures"}


# -- 8 -------------------------------------------------------------------------------------


def c08_inclusion(ctx: VerifyContext):
    spec = build_ball_grid(2, ctx.resolution)
    ladder = 2.0 ** np.arange(9)
    cases = [make_case("quadratic", a=a) for a in (1.0, 4.0, -10.0)]
    cases += [make_case("bump"), make_case("radial_plaplace", p=1.5),
              make_case("radial_plaplace", p=1.8)]
    total, tested = 0, 0
    per_case = {}
    for case in cases:
        steps = c2_inclusion(case.sample(spec), ladder)
        per_case[case.name] = [[s.t, s.level_count, s.violations] for s in steps]
        total += sum(s.violations for s in steps)
        tested += sum(s.level_count for s in steps)
    return total == 0, {"violations": total, "level_nodes_tested": tested, "per_case": per_case,
                        "summary": f"{total} interior violations over {tested} level-set nodes"}


# -- 9 -------------------------------------------------------------------------------------


def c09_solver(ctx: VerifyContext):
    details, fields = {}, {}
    ok = True
    # Poisson: Delta u = 1 with boundary data from (|x|^2 - 1)/4, which vanishes on the sphere
    exact = lambda x: 0.25 * (np.sum(x**2, axis=-1) - 1.0)  # noqa: E731
    pois = []
    for h in (1 / 32, 1 / 64):
        spec = _spec_for_h(h)
        res = solve_plaplace(1.0, exact, 2.0, spec)
        err = float(np.nanmax(np.abs(res.u.values - sample_function(exact, spec).values)))
        pois.append({"h": h, "error": err, "bound": 2 * h * h, "converged": res.converged})
        fields[f"poisson_m{spec.cells_per_axis}"] = res.u
        ok &= err <= 2 * h * h and res.converged
    details["poisson"] = pois
    rates, violations = {}, 0
    for p in (1.5, 1.8):
        case = make_case("radial_plaplace", p=p)
        errs = []
        for h in (1 / 32, 1 / 64):
            spec = _spec_for_h(h)
            res = solve_plaplace(1.0, case.u, p, spec)
            errs.append(float(np.nanmax(np.abs(res.u.values - case.sample(spec).values))))
            fields[f"plaplace_p{p:g}_m{spec.cells_per_axis}"] = res.u
            rep = residual_report(res.u, 1.0, case.gamma, case.ell, C=10.0)
            violations += rep.violations
            ok &= res.converged
        rates[str(p)] = {"errors": errs, "ratio": errs[0] / errs[1]}
        ok &= errs[0] / errs[1] >= 1.5
    ok &= violations == 0
    details.update(plaplace=rates, residual_violations=violations)
    details["summary"] = (f"Poisson err/bound {max(d['error'] / d['bound'] for d in pois):.2e}; "
                          + ", ".join(f"p={p} ratio {r['ratio']:.2f}" for p, r in rates.items())
                          + f"; {violations} residual violations")
    return bool(ok), details, {}, fields


# -- 10 ------------------------------------------------------------------------------------


def c10_density(ctx: VerifyContext):
    spec = build_ball_grid(2, ctx.resolution)
    h = spec.h
    # nonemptiness on admissible fields (sup norm at most 1/16)
    admissible = [("zero", sample_function(lambda x: 0.0 * x[:, 0], spec)),
                  ("linear", sample_function(lambda x: (0.6 * x[:, 0] + 0.8 * x[:, 1]) / 32, spec))]
    for case in catalog_cases():
        u = case.sample(spec)
        admissible.append((case.name, u.scaled((1 - 1e-12) / (16 * u.sup_norm()))))
    witness_fail = []
    for name, u in admissible:
        for K in (1.0, 2.0, 4.0):
            try:
                x = nonempty_witness(u, K)
                if np.linalg.norm(x) > 0.5 + h:
                    witness_fail.append((name, K))
            except AssertionError:
                witness_fail.append((name, K))
    # density scan
    scans = {}
    scan_ok = True
    for case in (make_case("quadratic", a=1.0), make_case("radial_plaplace", p=1.8)):
        u = case.sample(spec)
        for K in (1.0, 2.0, 4.0):
            rep = density_scan(u, K, (2.0, 4.0, 8.0), 200, seed=ctx.seed)
            scans[f"{case.name}/K={K:g}"] = rep.to_dict()
            scan_ok &= rep.kept > 0 and all(v > 0 for v in rep.min_ratio.values())
    # barrier + vertex set on catalog and solver fields
    # the determinant cap rests on the differential inequality, so fields
    # outside the class (the cone) are checked for containment only
    fields = [(c.name, c.sample(spec), c.ell, c.in_class) for c in catalog_cases()]
    for p in (1.5, 1.8):
        case = make_case("radial_plaplace", p=p)
        fields.append((f"solver:{p:g}", solve_plaplace(1.0, case.u, p, spec).u, case.ell, True))
    step_fail, runs, covered, det_outside = [], 0, set(), 0
    for name, u, ell, in_class in fields:
        for K in (1.0, 2.0, 4.0, 16.0):
            for M in (4.0, 16.0, theoretical_M()):
                for rec in step_pipeline(u, K, M, ell, balls=3, seed=ctx.seed):
                    if rec.status != "ok":
                        continue
                    runs += 1
                    covered.add(name)
                    v = rec.vertex
                    good = (rec.barrier.within_bound and v.containment
                            and v.exception_fraction <= 0.01)
                    if in_class:
                        good &= v.det_fraction_ok >= 0.99
                    else:
                        det_outside += v.det_violations
                    if not good:
                        step_fail.append((name, K, M, rec.to_dict()))
    all_covered = covered == {f[0] for f in fields}
    ok = not witness_fail and scan_ok and not step_fail and all_covered
    return ok, {
        "witness_failures": witness_fail, "scans": scans, "scan_ok": bool(scan_ok),
        "step_runs": runs, "step_failures": step_fail, "fields_covered": sorted(covered),
        "det_violations_outside_class": det_outside,
        "summary": f"{len(witness_fail)} witness failures, scan min ratios positive {scan_ok}, "
                   f"{len(step_fail)} step failures in {runs} runs",
    }


# -- 11 ------------------------------------------------------------------------------------


def c11_covering(ctx: VerifyContext):
    spec = build_ball_grid(2, ctx.resolution)
    passed, failures, tried, sharp_fail = 0, [], 0, []
    seed = ctx.seed * 1000
    while passed < 100 and tried < 300:
        E, F, mu = random_instance(spec, seed + tried)
        v = covering_check(E, F, mu, 120, seed=seed + tried)
        tried += 1
        if not v.hypothesis:
            continue
        passed += 1
        if not v.conclusion:
            failures.append(seed + tried - 1)
        # the same instance at the largest mu the sampled balls allow
        v2 = covering_check(E, F, min(v.worst_ratio, 0.999), 120, seed=seed + tried - 1)
        if v2.hypothesis and not v2.conclusion:
            sharp_fail.append(seed + tried - 1)
    rng = np.random.default_rng(ctx.seed + 11)
    vitali_ok = True
    for _ in range(10):
        fam = BallFamily(spec, random_balls(spec, 100, rng))
        sel = vitali_select(fam)
        vitali_ok &= all(vitali_check(fam, sel))
    ok = passed == 100 and not failures and not sharp_fail and vitali_ok
    return ok, {"instances_passing_hypothesis": passed, "tried": tried,
                "conclusion_failures": failures, "sharp_mu_failures": sharp_fail,
                "vitali_ok": bool(vitali_ok),
                "summary": f"{passed} instances, {len(failures)} conclusion failures, "
                           f"Vitali exact {bool(vitali_ok)}"}


# -- 12 ------------------------------------------------------------------------------------


def c12_ratio(ctx: VerifyContext):
    out, ok = {}, True
    for case in (make_case("radial_plaplace", p=1.5), make_case("bump")):
        ratios = []
        for h in (1 / 64, 1 / 128):
            spec = _spec_for_h(h)
            params, R = normalize_and_ratio(case.sample(spec), case.sample_f(spec), case.gamma,
                                            1e-12, 0.3)
            ok &= params.hypotheses_hold
            ratios.append(R)
        change = abs(ratios[1] - ratios[0]) / abs(ratios[0])
        ok &= change < 0.2
        out[case.name] = {"ratios": ratios, "relative_change": change}
    return bool(ok), {"cases": out, "summary": ", ".join(
        f"{k} change {v['relative_change']:.1%}" for k, v in out.items())}


# -- registry ------------------------------------------------------------------------------

CRITERIA: list[tuple[int, str, float, Callable]] = [
    (1, "pucci algebra", 1.0, c01_pucci_algebra),
    (2, "envelope transforms", 5.0, c02_envelope),
    (3, "contact geometry", 2.0, c03_contact_geometry),
    (4, "scaling and monotonicity", 10.0, c04_invariants),
    (5, "moreau envelope", 2.0, c05_moreau),
    (6, "decay exponents", 60.0, c06_decay),
    (7, "dyadic bound", 30.0, c07_dyadic),
    (8, "C2 inclusion", 30.0, c08_inclusion),
    (9, "solver oracles", 300.0, c09_solver),
    (10, "density and nonemptiness", 180.0, c10_density),
    (11, "covering lemma", 60.0, c11_covering),
    (12, "theorem ratio stability", 120.0, c12_ratio),
]


def run_criterion(number: int, ctx: VerifyContext | None = None) -> CriterionResult:
    ctx = ctx or VerifyContext()
    for num, name, budget, fn in CRITERIA:
        if num == number:
            t = time.perf_counter()
            out = fn(ctx)
            runtime = time.perf_counter() - t
            ok, details = bool(out[0]), out[1]
            tables = out[2] if len(out) > 2 else {}
            fields = out[3] if len(out) > 3 else {}
            return CriterionResult(num, name, ok, runtime, budget, details, tables, fields)
    raise KeyError(f"no criterion {number}")


def run_all(ctx: VerifyContext | None = None, only=None, echo=None) -> list[CriterionResult]:
    results = []
    for num, *_ in CRITERIA:
        if only and num not in only:
            continue
        res = run_criterion(num, ctx)
        if echo:
            echo(res.line())
        results.append(res)
    return results
