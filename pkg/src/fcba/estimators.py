"""Monte Carlo estimators and their comparison against the closed forms.

A truncated window observes exactly those origin visits of the infinite
one-sided system that happen by time ``x_n`` (the window edge); later visits
can only come from outside. Every per-trial quantity is therefore carried as a
window value together with lower and upper bounds over what the unseen part of
the line could still do. Bounds collapse when the outcome is certified.

Trials are independent. Results are collected per trial index and reduced in
index order, so the outcome does not depend on worker scheduling.
"""

from __future__ import annotations

import enum
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from . import _backend, theory
from .engine import (
    FATE_ALIVE,
    FATE_BY_LEFT,
    FATE_COALESCE,
    FATE_MUTUAL_ARROW,
    FATES_BY_BLOCKADE,
    blockade_survival_counts,
    default_shield_depth,
    right_arrow_fate,
)
from .model import BLOCKADE, RIGHT, Exponential, InitialConfig, ReactionParams, Side, sample_initial_config
from .rng import KeyedStream, substream_seed, trial_seed
from ._kernel_py import HIT_MUTUAL, HIT_STRONG, HIT_WEAK

Z95 = float(stats.norm.ppf(0.975))
Z_PASS = 3.0
EPSILON_SURVIVAL = 0.01
DEFAULT_CENTRAL_FRACTION = 1.0 / 3.0
DEFAULT_VISIT_DEPTH = 64


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    ph = k / n
    den = 1 + z * z / n
    centre = (ph + z * z / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class EstimateResult:
    point: float
    ci_low: float
    ci_high: float
    trials: int
    certified_fraction: float
    uncertain_low: float
    uncertain_high: float
    inconclusive: bool = False
    diagnostics: str = ""

    def __post_init__(self):
        tol = 1e-12
        if not (self.ci_low - tol <= self.point <= self.ci_high + tol):
            raise ValueError(f"point {self.point} outside CI [{self.ci_low}, {self.ci_high}]")
        if not (self.uncertain_low - tol <= self.point <= self.uncertain_high + tol):
            raise ValueError(f"point {self.point} outside band [{self.uncertain_low}, {self.uncertain_high}]")

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(window, lo, hi, binary: bool = True) -> EstimateResult:
    """Estimate from per-trial window values and their bounds."""
    window = np.asarray(window, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    t = len(window)
    if t == 0:
        raise ValueError("no trials")
    point = math.fsum(window) / t
    if binary:
        ci = wilson_interval(int(round(math.fsum(window))), t)
    else:
        se = float(np.std(window, ddof=1)) / math.sqrt(t) if t > 1 else math.inf
        ci = (point - Z95 * se, point + Z95 * se)
    certified = float(np.count_nonzero(lo == hi)) / t
    return EstimateResult(point, ci[0], ci[1], t, certified, math.fsum(lo) / t, math.fsum(hi) / t)


class Verdict(str, enum.Enum):
    PASS = "Pass"
    FAIL = "Fail"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class IdentityReport:
    """Monte Carlo value against its closed form.

    ``z_score`` is (mc - closed) / se where se is the standard error of the
    difference, including the first-order effect of plugging estimated inputs
    into the closed form. Verdict: Pass when ``|mc - closed| <= 3 se + band``
    (``band`` is a deterministic truncation bound); Inconclusive when the closed
    value lies within 3 se of the interval spanned by the uncertain trials;
    Fail otherwise.
    """

    name: str
    mc_value: EstimateResult
    closed_value: float
    z_score: float
    verdict: Verdict
    se: float = 0.0
    band: float = 0.0
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict.value
        d["mc_value"] = self.mc_value.to_dict()
        return d


def decide(diff: float, se: float, band: float, closed: float, est: EstimateResult,
           offset: float = 0.0) -> tuple[float, Verdict]:
    """z-score and verdict; ``offset`` maps the estimate's scale onto ``diff``'s."""
    if se > 0:
        z = diff / se
    else:
        z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
    if abs(diff) <= Z_PASS * se + band:
        return z, Verdict.PASS
    lo = est.uncertain_low - offset - Z_PASS * se - band
    hi = est.uncertain_high - offset + Z_PASS * se + band
    if lo <= closed <= hi and est.uncertain_high > est.uncertain_low:
        return z, Verdict.INCONCLUSIVE
    return z, Verdict.FAIL


def plugin_report(name: str, x: dict, inputs: Sequence[dict], closed: Callable[..., float],
                  band: float = 0.0, binary: bool = True, details: Optional[dict] = None) -> IdentityReport:
    """Compare mean of ``x`` with ``closed(*means of inputs)``.

    ``x`` and each input are dicts of per-trial arrays ``window``, ``lo``, ``hi``.
    """
    est = summarize(x["window"], x["lo"], x["hi"], binary)
    means = [float(np.mean(y["window"])) for y in inputs]
    value = float(closed(*means))
    influence = np.asarray(x["window"], dtype=np.float64).copy()
    for k, y in enumerate(inputs):
        h = 1e-6 * max(1.0, abs(means[k]))
        up = list(means)
        dn = list(means)
        up[k] += h
        dn[k] -= h
        grad = (closed(*up) - closed(*dn)) / (2 * h)
        influence -= grad * np.asarray(y["window"], dtype=np.float64)
    t = len(influence)
    se = float(np.std(influence, ddof=1)) / math.sqrt(t) if t > 1 else math.inf
    diff = est.point - value
    z, verdict = decide(diff, se, band, value, est)
    info = {"inputs": means}
    if details:
        info.update(details)
    return IdentityReport(name, est, value, z, verdict, se, band, info)


# ---------------------------------------------------------------- trial runners

def _chunks(trials: int, size: int) -> list[tuple[int, int]]:
    return [(lo, min(trials, lo + size)) for lo in range(0, trials, size)]


def _default_workers() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover
        return os.cpu_count() or 1


def run_trials(worker: Callable, args: tuple, trials: int, workers: Optional[int] = None,
               chunk: int = 256) -> dict:
    """Run ``worker(args, lo, hi)`` over trial index ranges and stack the columns.

    ``worker`` returns a dict of arrays indexed by trial; the pieces are joined in
    trial order whatever order they finish in.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    workers = _default_workers() if workers is None else workers
    ranges = _chunks(trials, chunk)
    if workers <= 1 or len(ranges) == 1:
        parts = [worker(args, lo, hi) for lo, hi in ranges]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(worker, args, lo, hi) for lo, hi in ranges]
            parts = [f.result() for f in futures]
    return merge_tables(parts)


def merge_tables(parts: Sequence[dict]) -> dict:
    """Concatenate per-trial tables and sort rows by ``trial``."""
    cols = parts[0].keys()
    table = {k: np.concatenate([p[k] for p in parts]) for k in cols}
    order = np.argsort(table["trial"], kind="stable")
    return {k: v[order] for k, v in table.items()}


@dataclass(frozen=True)
class TrialSpec:
    params: ReactionParams
    p: float
    n: int
    master_seed: int
    spacing: object = field(default_factory=Exponential)
    shield_depth: Optional[float] = None
    k_max: int = DEFAULT_VISIT_DEPTH


def one_sided_trial(spec: TrialSpec, t: int, backend: Optional[str] = None) -> dict:
    """Summary of trial ``t`` of the one-sided system."""
    cfg = InitialConfig(spec.n, spec.p, Side.RIGHT_HALF_LINE, spec.spacing, trial_seed(spec.master_seed, t))
    conf = sample_initial_config(cfg)
    evolve = _backend.evolve if backend is None else _backend.evolve_with(backend)
    a, b, al, be = spec.params.as_tuple()
    raw = evolve(conf.positions, conf.velocities, conf.keys, KeyedStream(cfg.seed).reaction_seed,
                 a, b, al, be, False, None)
    n_slots = int(raw["n_slots"])
    alive = raw["death_kind"][:n_slots] == 0
    vel = raw["vel"][:n_slots]
    visits = np.sort(raw["birth_pos"][:n_slots][alive & (vel == -1)])
    edge = float(conf.positions[-1])
    shield = int(np.count_nonzero(alive & (vel == BLOCKADE)))
    depth = default_shield_depth(spec.n, spec.params) if spec.shield_depth is None else spec.shield_depth
    closed = spec.p >= 1.0 or shield >= depth
    first = int(conf.velocities[0])
    fate, fate_known = 0, True
    if first == RIGHT:
        fate = right_arrow_fate(raw, 0)
        if fate == FATE_ALIVE:
            fate_known = False
        else:
            fate_known = raw["death_pos"][0] + raw["death_time"][0] <= edge
    hit, hit_known = 0, True
    if first == BLOCKADE:
        hit = int(raw["first_right"][0])
        if hit == 0:
            others = shield - (1 if alive[0] else 0)
            hit_known = spec.p >= 1.0 or others >= depth
    times = np.full(spec.k_max, np.inf)
    m = min(spec.k_max, len(visits))
    times[:m] = visits[:m]
    return {
        "trial": t, "n_visits": len(visits), "closed": closed, "edge": edge, "first": first,
        "fate": fate, "fate_known": fate_known, "hit": hit, "hit_known": hit_known,
        "shield": shield, "times": times,
    }


def _one_sided_chunk(args: tuple, lo: int, hi: int) -> dict:
    spec, backend = args
    rows = [one_sided_trial(spec, t, backend) for t in range(lo, hi)]
    out = {}
    for k in rows[0]:
        out[k] = np.array([r[k] for r in rows])
    return out


def one_sided_table(spec: TrialSpec, trials: int, workers: Optional[int] = None,
                    backend: Optional[str] = None) -> dict:
    return run_trials(_one_sided_chunk, (spec, backend), trials, workers)


# ---------------------------------------------------------------- per-trial indicators

def _ind(window, known) -> dict:
    """Binary indicator with window value ``window``; unknown rows span [0, 1]."""
    w = np.asarray(window, dtype=np.float64)
    known = np.asarray(known, dtype=bool)
    return {"window": w, "lo": np.where(known, w, 0.0), "hi": np.where(known, w, 1.0)}


def visit_at_least(tab: dict, i: int) -> dict:
    """Indicator of at least ``i`` visits to the origin."""
    seen = tab["n_visits"] >= i
    return _ind(seen, seen | tab["closed"])


def _q_indicator(tab: dict) -> dict:
    return visit_at_least(tab, 1)


def _and(x: dict, y: dict) -> dict:
    w = x["window"] * y["window"]
    return {"window": w, "lo": x["lo"] * y["lo"], "hi": x["hi"] * y["hi"]}


def _not(x: dict) -> dict:
    return {"window": 1 - x["window"], "lo": 1 - x["hi"], "hi": 1 - x["lo"]}


def _fate_in(tab: dict, fates) -> dict:
    hit = (tab["first"] == RIGHT) & np.isin(tab["fate"], list(fates))
    return _ind(hit, tab["fate_known"])


def _hit_is(tab: dict, kinds) -> dict:
    hit = (tab["first"] == BLOCKADE) & np.isin(tab["hit"], list(kinds))
    return _ind(hit, tab["hit_known"])


# ---------------------------------------------------------------- estimates

def estimate_q(params: ReactionParams, p: float, n: int, trials: int, master_seed: int, *,
               spacing=None, shield_depth: Optional[float] = None, workers: Optional[int] = None,
               table: Optional[dict] = None) -> EstimateResult:
    """Origin-visit probability of the one-sided system.

    ``point`` is the visit fraction among certified trials. Certification is not
    independent of the outcome (non-visits are the ones left uncertain), so the
    band reaches from the 95% Wilson lower limit with every uncertain trial
    counted as a non-visit to the upper limit with every one counted as a visit.
    """
    if n < 10:
        raise ValueError("n must be >= 10")
    if table is None:
        spec = TrialSpec(params, p, n, master_seed, spacing or Exponential(), shield_depth, 1)
        table = one_sided_table(spec, trials, workers)
    ind = _q_indicator(table)
    known = ind["lo"] == ind["hi"]
    t = len(known)
    k_cert = int(np.count_nonzero(known))
    k_yes = int(round(ind["lo"].sum()))
    k_opt = int(round(ind["hi"].sum()))
    u_lo, u_hi = wilson_interval(k_yes, t)[0], wilson_interval(k_opt, t)[1]
    if k_cert == 0:
        return EstimateResult(k_yes / t, 0.0, 1.0, t, 0.0, u_lo, u_hi, True,
                              f"all {t} trials uncertain; increase n (currently {n})")
    point = k_yes / k_cert
    ci = wilson_interval(k_yes, k_cert)
    return EstimateResult(point, ci[0], ci[1], t, k_cert / t, min(u_lo, point), max(u_hi, point))


def _q_of(table: dict) -> dict:
    return _q_indicator(table)


def estimate_rec2(params: ReactionParams, p: float, n: int, trials: int, seed: int, *,
                  table: Optional[dict] = None, workers: Optional[int] = None) -> IdentityReport:
    """P(origin visited and the first particle is a blockade) against its closed form."""
    table = table if table is not None else one_sided_table(TrialSpec(params, p, n, seed, k_max=1), trials, workers)
    q = _q_of(table)
    first_b = _ind(table["first"] == BLOCKADE, np.ones(len(q["window"]), bool))
    x = _and(first_b, q)
    return plugin_report("rec2", x, [q], lambda qh: theory.rec2_closed(params, p, qh))


def estimate_s_r_phat(params: ReactionParams, p: float, n: int, trials: int, seed: int, *,
                      table: Optional[dict] = None, workers: Optional[int] = None) -> list[IdentityReport]:
    """Reports for ``s``, ``r`` and (when ``c > 0``) the coalescence probability."""
    table = table if table is not None else one_sided_table(TrialSpec(params, p, n, seed, k_max=1), trials, workers)
    q = _q_of(table)
    by_blockade = _fate_in(table, FATES_BY_BLOCKADE)
    phat = _fate_in(table, [FATE_COALESCE])
    s = _and(by_blockade, q)
    r = _and(by_blockade, _not(q))
    reports = [
        plugin_report("s", s, [phat, q], lambda ph, qh: theory.s_closed(params, p, ph, qh)),
        plugin_report("r", r, [phat, q], lambda ph, qh: theory.r_closed(params, p, ph, qh)),
    ]
    if params.c > 0:
        mutual = _fate_in(table, [FATE_MUTUAL_ARROW])
        reports.append(plugin_report("p_hat", phat, [mutual], lambda m: theory.hatp_from_mutual(params, m)))
    return reports


def _ratio_pair(name: str, x: dict, wx: float, y: dict, wy: float) -> dict:
    diff = {k: x[k] / wx for k in ("window", "lo", "hi")}
    diff_y = {k: y[k] / wy for k in ("window", "lo", "hi")}
    w = diff["window"] - diff_y["window"]
    t = len(w)
    d = float(np.mean(w))
    se = float(np.std(w, ddof=1)) / math.sqrt(t) if t > 1 else math.inf
    z = d / se if se > 0 else (0.0 if d == 0 else math.inf)
    lo = float(np.mean(diff["lo"] - diff_y["hi"]))
    hi = float(np.mean(diff["hi"] - diff_y["lo"]))
    return {"pair": name, "difference": d, "se": se, "z": z, "band_low": lo, "band_high": hi}


def estimate_change_of_measure(params: ReactionParams, p: float, n: int, trials: int, seed: int, *,
                               table: Optional[dict] = None, workers: Optional[int] = None) -> IdentityReport:
    """Reaction-ratio identities for the first particle.

    First particle a right arrow: P(killed by a left arrow)/(a/2), P(coalesces)/b
    and P(mutual with a left arrow)/c coincide. First particle a blockade: the
    probability of a hit from the right, and the strong/weak/mutual outcomes of
    that hit divided by alpha/beta/xi, coincide. Every pair with positive
    weights is compared; the report carries the worst pair.
    """
    table = table if table is not None else one_sided_table(TrialSpec(params, p, n, seed, k_max=1), trials, workers)
    arrow = [("left-arrow-survives", _fate_in(table, [FATE_BY_LEFT]), params.a / 2),
             ("coalesce", _fate_in(table, [FATE_COALESCE]), params.b),
             ("mutual-arrow", _fate_in(table, [FATE_MUTUAL_ARROW]), params.c)]
    block = [("hit-from-right", _hit_is(table, [HIT_STRONG, HIT_WEAK, HIT_MUTUAL]), 1.0),
             ("strong", _hit_is(table, [HIT_STRONG]), params.alpha),
             ("weak", _hit_is(table, [HIT_WEAK]), params.beta),
             ("mutual-blockade", _hit_is(table, [HIT_MUTUAL]), params.xi)]
    pairs = []
    zero_weight = []
    for group in (arrow, block):
        for k, (na, xa, wa) in enumerate(group):
            if wa == 0:
                zero_weight.append((na, int(xa["window"].sum())))
                continue
            for nb, xb, wb in group[k + 1:]:
                if wb > 0:
                    pairs.append(_ratio_pair(f"{na}/{nb}", xa, wa, xb, wb))
    t = len(table["trial"])
    impossible = [name for name, count in zero_weight if count > 0]
    if not pairs:
        est = EstimateResult(0.0, 0.0, 0.0, t, 1.0, 0.0, 0.0)
        verdict = Verdict.FAIL if impossible else Verdict.PASS
        return IdentityReport("change_of_measure", est, 0.0, 0.0, verdict,
                              details={"pairs": [], "zero_weight_events": zero_weight})
    worst = max(pairs, key=lambda d: abs(d["z"]))
    d, se = worst["difference"], worst["se"]
    est = EstimateResult(d, d - Z95 * se, d + Z95 * se, t, 1.0,
                         min(worst["band_low"], d), max(worst["band_high"], d))
    z, verdict = decide(d, se, 0.0, 0.0, est)
    if impossible:
        verdict = Verdict.FAIL
    ratios = {name: float(x["window"].mean()) / w for name, x, w in arrow + block if w > 0}
    return IdentityReport("change_of_measure", est, 0.0, z, verdict, se, 0.0,
                          {"worst_pair": worst["pair"], "pairs": pairs, "ratios": ratios,
                           "zero_weight_events": zero_weight})


def estimate_visit_powers(params: ReactionParams, p: float, n: int, trials: int, seed: int, i_max: int = 4, *,
                          table: Optional[dict] = None, workers: Optional[int] = None) -> list[IdentityReport]:
    """P(at least i visits) against q^i for i = 1..i_max."""
    table = table if table is not None else one_sided_table(TrialSpec(params, p, n, seed, k_max=i_max),
                                                            trials, workers)
    q = _q_of(table)
    return [plugin_report(f"visit_power_{i}", visit_at_least(table, i), [q], lambda qh, i=i: qh ** i)
            for i in range(1, i_max + 1)]


# ---------------------------------------------------------------- S and the triple sum

def _interval_times(table: dict, rows: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-visit (lower, upper) bounds on the first ``k`` visit times.

    Observed visits are exact; unseen ones lie in (edge, inf], or are exactly
    infinite when the trial is closed.
    """
    times = table["times"][rows, :k]
    seen = np.isfinite(times)
    edge = table["edge"][rows][:, None]
    closed = table["closed"][rows][:, None]
    lo = np.where(seen, times, np.where(closed, np.inf, edge))
    hi = np.where(seen, times, np.inf)
    return lo, hi


def _pair_sums(right: dict, left: dict, beta: float, k: int) -> dict:
    """Per-trial truncated sums for S and for the triple sum.

    ``left`` supplies the visits from the left (tau_right), ``right`` the
    visits from the right (tau_left); row t of each is one independent pair.
    """
    t = len(right["trial"])
    rows = np.arange(t)
    xl, xh = _interval_times(left, rows, k)      # tau->_i, i = 1..k
    yl, yh = _interval_times(right, rows, k)     # tau<-_j, j = 1..k
    zl = np.concatenate([np.zeros((t, 1)), yl[:, :-1]], axis=1)  # tau<-_{j-1}
    zh = np.concatenate([np.zeros((t, 1)), yh[:, :-1]], axis=1)
    w = beta ** (np.arange(1, k + 1)[:, None] + np.arange(1, k + 1)[None, :])
    X_l, X_h = xl[:, :, None], xh[:, :, None]
    Y_l, Y_h = yl[:, None, :], yh[:, None, :]
    Z_l, Z_h = zl[:, None, :], zh[:, None, :]
    x_exact = X_l == X_h
    y_exact = Y_l == Y_h
    z_exact = Z_l == Z_h
    with np.errstate(invalid="ignore"):
        # window value: unseen visits never happen
        x_w = np.where(np.isfinite(X_h), X_h, np.inf)
        s_win = (x_w < Y_h) & np.isfinite(Y_h)
        s_poss = np.isfinite(Y_l) & np.isfinite(X_l) & (X_l < Y_h)
        s_cert = (x_exact & y_exact) | ~s_poss
        tr_win = (Z_h < x_w) & s_win
        tr_poss = s_poss & (Z_l < X_h) & (np.maximum(Z_l, X_l) < np.minimum(X_h, Y_h))
        tr_cert = (x_exact & y_exact & z_exact) | ~tr_poss
    out = {}
    for name, win, cert in (("S", s_win, s_cert), ("triple", tr_win, tr_cert)):
        win_v = np.einsum("tij,ij->t", win.astype(float), w)
        lo_v = np.einsum("tij,ij->t", (win & cert).astype(float), w)
        hi_v = lo_v + np.einsum("tij,ij->t", (~cert).astype(float), w)
        out[name] = {"window": win_v, "lo": lo_v, "hi": hi_v}
    return out


def _pair_tables(params, p, n, trials, seed, k, workers, spacing=None):
    spacing = spacing or Exponential()
    right = one_sided_table(TrialSpec(params, p, n, seed, spacing, k_max=k), trials, workers)
    left = one_sided_table(TrialSpec(params, p, n, substream_seed(seed, 0x5EED), spacing, k_max=k), trials, workers)
    return right, left


def _sum_report(name: str, sums: dict, right: dict, left: dict, beta: float, k: int, closed) -> IdentityReport:
    q_both = {key: np.concatenate([_q_of(right)[key], _q_of(left)[key]]) for key in ("window", "lo", "hi")}
    # each pair uses one trial from each system; pool q over both, weight per pair
    q_pair = {key: (_q_of(right)[key] + _q_of(left)[key]) / 2 for key in ("window", "lo", "hi")}
    band = theory.truncation_bound(beta, k)
    rep = plugin_report(name, sums, [q_pair], closed, band=band, binary=False,
                        details={"K": k, "truncation_bound": band, "q_hat": float(q_both["window"].mean())})
    return rep


def estimate_S(params: ReactionParams, p: float, n: int, trials: int, K: Optional[int] = None, seed: int = 0, *,
               tables: Optional[tuple[dict, dict]] = None, workers: Optional[int] = None) -> IdentityReport:
    """Truncated sum over i, j <= K of beta^(i+j) P(tau->_i < tau<-_j < inf)."""
    beta = params.beta
    K = theory.truncation_index(beta) if K is None else K
    right, left = tables if tables is not None else _pair_tables(params, p, n, trials, seed, K, workers)
    sums = _pair_sums(right, left, beta, K)["S"]
    return _sum_report("S", sums, right, left, beta, K, lambda qh: theory.S_closed(beta, qh))


def estimate_triple_sum(params: ReactionParams, p: float, n: int, trials: int, K: Optional[int] = None,
                        seed: int = 0, *, tables: Optional[tuple[dict, dict]] = None,
                        workers: Optional[int] = None) -> IdentityReport:
    """Truncated sum of beta^(i+j) P(tau<-_{j-1} < tau->_i < tau<-_j < inf), tau<-_0 = 0."""
    beta = params.beta
    K = theory.truncation_index(beta) if K is None else K
    right, left = tables if tables is not None else _pair_tables(params, p, n, trials, seed, K, workers)
    sums = _pair_sums(right, left, beta, K)["triple"]
    return _sum_report("triple_sum", sums, right, left, beta, K, lambda qh: theory.triple_sum_closed(beta, qh))


# ---------------------------------------------------------------- full suite

def identity_suite(params: ReactionParams, p: float, n: int, trials: int, seed: int, *,
                   K: Optional[int] = None, i_max: int = 4, workers: Optional[int] = None,
                   pc_checks: int = 1000) -> list[IdentityReport]:
    """Every identity on one shared set of trials (plus an independent mirror set)."""
    K = theory.truncation_index(params.beta) if K is None else K
    right, left = _pair_tables(params, p, n, trials, seed, max(K, i_max), workers)
    reports = [estimate_rec2(params, p, n, trials, seed, table=right)]
    reports += estimate_s_r_phat(params, p, n, trials, seed, table=right)
    reports.append(estimate_change_of_measure(params, p, n, trials, seed, table=right))
    reports.append(estimate_S(params, p, n, trials, K, seed, tables=(right, left)))
    reports.append(estimate_triple_sum(params, p, n, trials, K, seed, tables=(right, left)))
    reports += estimate_visit_powers(params, p, n, trials, seed, i_max, table=right)
    reports.append(critical_root_report(params, pc_checks, seed))
    return reports


def critical_root_report(params: ReactionParams, samples: int = 1000, seed: int = 0, tol: float = 1e-9) -> IdentityReport:
    """g(p_c, 1) = 0 at ``params`` and at ``samples`` random parameter tuples."""
    tuples = [params] + random_params(samples, seed)
    worst = 0.0
    with warnings.catch_warnings():
        # a formula value outside (0, 1) is legitimate here; only the root matters
        warnings.simplefilter("ignore", RuntimeWarning)
        for prm in tuples:
            worst = max(worst, abs(float(theory.g(prm, theory.pc_closed_form(prm), 1.0))))
    est = EstimateResult(worst, worst, worst, len(tuples), 1.0, worst, worst)
    verdict = Verdict.PASS if worst < tol else Verdict.FAIL
    return IdentityReport("g_at_critical", est, 0.0, 0.0, verdict, 0.0, tol, {"max_abs_g": worst})


def random_params(count: int, seed: int = 0) -> list[ReactionParams]:
    """Uniform draws from the valid parameter region."""
    gen = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        a, b = gen.uniform(0, 1, 2)
        al, be = gen.uniform(0, 1, 2)
        if a + b <= 1 and al + be <= 1 and b < 1 and be < 1:
            out.append(ReactionParams(float(a), float(b), float(al), float(be)))
    return out


# ---------------------------------------------------------------- critical density

@dataclass(frozen=True)
class SurvivalPoint:
    p: float
    n: int
    mean: float
    ci_low: float
    ci_high: float
    trials: int
    se: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PhaseBracket:
    p_lower: float
    p_upper: float
    classes: dict
    points: list
    warnings: list
    slopes: dict = field(default_factory=dict)
    rule: str = "scaling"

    def contains(self, value: float) -> bool:
        return self.p_lower <= value <= self.p_upper

    def to_dict(self) -> dict:
        return {
            "p_lower": self.p_lower, "p_upper": self.p_upper, "rule": self.rule,
            "classes": {repr(k): v for k, v in self.classes.items()},
            "slopes": {repr(k): v for k, v in self.slopes.items()},
            "points": [[pt.to_dict() for pt in row] for row in self.points],
            "warnings": list(self.warnings),
        }


def _two_sided_chunk(args: tuple, lo: int, hi: int) -> dict:
    params, p, n, seed, spacing, cf = args
    a, b, al, be = params.as_tuple()
    surv, tot = [], []
    for t in range(lo, hi):
        cfg = InitialConfig(n, p, Side.TWO_SIDED, spacing, trial_seed(seed, t))
        conf = sample_initial_config(cfg)
        raw = _backend.evolve(conf.positions, conf.velocities, conf.keys, KeyedStream(cfg.seed).reaction_seed,
                              a, b, al, be, False, None)
        s, k = blockade_survival_counts(raw, conf.positions, conf.velocities, cf)
        surv.append(s)
        tot.append(k)
    return {"trial": np.arange(lo, hi), "surviving": np.array(surv), "total": np.array(tot)}


def survival_fraction(params: ReactionParams, p: float, n: int, trials: int, seed: int, *,
                      central_fraction: float = DEFAULT_CENTRAL_FRACTION, spacing=None,
                      workers: Optional[int] = None) -> SurvivalPoint:
    """Mean over trials of the surviving fraction of central-window blockades."""
    spacing = spacing or Exponential()
    tab = run_trials(_two_sided_chunk, (params, p, n, seed, spacing, central_fraction), trials, workers)
    frac = np.where(tab["total"] > 0, tab["surviving"] / np.maximum(tab["total"], 1), 0.0)
    mean = math.fsum(frac) / len(frac)
    se = float(np.std(frac, ddof=1)) / math.sqrt(len(frac)) if len(frac) > 1 else math.inf
    return SurvivalPoint(p, n, mean, mean - Z95 * se, mean + Z95 * se, len(frac), se)


class Phase(str, enum.Enum):
    SUPERCRITICAL = "supercritical"
    SUBCRITICAL = "subcritical"
    UNDECIDED = "undecided"


CRITICAL_SLOPE = -0.5


def survival_slope(points: Sequence[SurvivalPoint]) -> tuple[float, float]:
    """Least-squares slope of log(survival) against log(n) and its standard error."""
    x = np.log([pt.n for pt in points])
    if len(points) < 2 or np.ptp(x) == 0:
        raise ValueError("the n schedule needs at least two distinct sizes")
    if any(pt.mean <= 0 for pt in points):
        return -math.inf, 0.0
    y = np.log([pt.mean for pt in points])
    var_y = np.array([(pt.se / pt.mean) ** 2 for pt in points])
    w = (x - x.mean()) / np.sum((x - x.mean()) ** 2)
    return float(np.dot(w, y)), float(math.sqrt(np.dot(w * w, var_y)))


def classify_point(points: Sequence[SurvivalPoint], epsilon: float = EPSILON_SURVIVAL,
                   rule: str = "scaling") -> Phase:
    """Phase of one density from its survival fractions along the n schedule.

    ``threshold``: supercritical when the lower CI stays above ``epsilon`` at
    every n, subcritical when the mean is below ``epsilon`` at the largest n.

    ``scaling``: the log-log slope of survival against n. It is near 0 when a
    positive fraction survives and near -1 when survivors are a boundary
    effect of the finite window; supercritical when the 95% interval of the
    slope lies above -1/2, subcritical when it lies below.
    """
    if rule == "threshold":
        if all(pt.ci_low > epsilon for pt in points):
            return Phase.SUPERCRITICAL
        if points[-1].mean < epsilon:
            return Phase.SUBCRITICAL
        return Phase.UNDECIDED
    if rule != "scaling":
        raise ValueError(f"unknown rule {rule!r}")
    slope, se = survival_slope(points)
    if slope - Z95 * se > CRITICAL_SLOPE and points[-1].ci_low > 0:
        return Phase.SUPERCRITICAL
    if slope + Z95 * se < CRITICAL_SLOPE:
        return Phase.SUBCRITICAL
    return Phase.UNDECIDED


def bracket_from_classes(grid: Sequence[float], classes: Sequence[Phase]) -> tuple[float, float, list[str]]:
    """Largest subcritical and smallest supercritical density; widened when they cross."""
    notes = []
    sup = [p for p, c in zip(grid, classes) if c is Phase.SUPERCRITICAL]
    sub = [p for p, c in zip(grid, classes) if c is Phase.SUBCRITICAL]
    if not sup:
        notes.append("no grid point classified supercritical; upper end is the grid maximum")
    if not sub:
        notes.append("no grid point classified subcritical; lower end is the grid minimum")
    if sup and sub and max(sub) > min(sup):
        notes.append("non-monotone classification across the grid; bracket widened")
        lower = max([p for p in sub if p < min(sup)], default=min(grid))
        upper = min([p for p in sup if p > max(sub)], default=max(grid))
        return lower, upper, notes
    lower = max(sub) if sub else min(grid)
    upper = min(sup) if sup else max(grid)
    return lower, upper, notes


def empirical_pc(params: ReactionParams, p_grid: Sequence[float], n_schedule: Sequence[int], trials: int, seed: int,
                 *, central_fraction: float = DEFAULT_CENTRAL_FRACTION, epsilon: float = EPSILON_SURVIVAL,
                 rule: str = "scaling", spacing=None, workers: Optional[int] = None) -> PhaseBracket:
    """Bracket the critical density from blockade survival in growing windows."""
    grid = [float(p) for p in p_grid]
    if not grid:
        raise ValueError("p_grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("p_grid must be strictly increasing")
    if not n_schedule:
        raise ValueError("n_schedule is empty")
    if rule == "scaling" and len(set(n_schedule)) < 2:
        raise ValueError("the scaling rule needs at least two window sizes")
    points, classes, slopes = [], [], {}
    for k, p in enumerate(grid):
        row = [survival_fraction(params, p, n, trials, substream_seed(seed, 1000 * k + j),
                                 central_fraction=central_fraction, spacing=spacing, workers=workers)
               for j, n in enumerate(n_schedule)]
        points.append(row)
        classes.append(classify_point(row, epsilon, rule))
        if len(set(n_schedule)) > 1:
            slopes[p] = survival_slope(row)
    lower, upper, notes = bracket_from_classes(grid, classes)
    for note in notes:
        warnings.warn(note, RuntimeWarning)
    return PhaseBracket(lower, upper, {p: c.value for p, c in zip(grid, classes)}, points, notes, slopes, rule)
