"""Embedding sweeps and the fits used by the capacity/scaling studies.

A sweep runs embedding trials over a circuit collection and records one
row per trial (never dropping failures). Fits: the success-probability
model p(N) = erfc((N - mu)/Delta)/2 whose mu is the 50%-embeddable
circuit size, power laws y = A x^b for usage/runtime scaling, and the
yield model mu(n_dis) = mu0 (1 - alpha n_dis^beta).

Parameter errors are Gauss-Newton covariance errors (labelled as such in
fit metadata). Wall times are wall-clock per single-threaded trial; a
sweep can zero them (`wall_mode="zero"`) when byte-identical replay
matters more than timing.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, asdict, field
from multiprocessing import get_context

import numpy as np
from scipy import special

from qcanneal import chimera, convert, dense, heuristic
from qcanneal.circuit import ConnectivityGraph

CSV_COLUMNS = ["circuit_id", "n_cells", "algorithm", "adjacency", "rows",
               "cols", "n_dis", "seed", "success", "n_qubits", "max_model",
               "wall_ms"]


@dataclass
class TrialRecord:
    circuit_id: str
    n_cells: int
    algorithm: str
    adjacency: str
    rows: int
    cols: int
    n_dis: float
    seed: int
    success: bool
    n_qubits: int
    max_model: int
    wall_ms: int

    def row(self):
        return [self.circuit_id, self.n_cells, self.algorithm,
                self.adjacency, self.rows, self.cols, repr(self.n_dis),
                self.seed, int(self.success), self.n_qubits,
                self.max_model, self.wall_ms]

    @classmethod
    def from_row(cls, row):
        return cls(circuit_id=row[0], n_cells=int(row[1]), algorithm=row[2],
                   adjacency=row[3], rows=int(row[4]), cols=int(row[5]),
                   n_dis=float(row[6]), seed=int(row[7]),
                   success=bool(int(row[8])), n_qubits=int(row[9]),
                   max_model=int(row[10]), wall_ms=int(row[11]))


def records_to_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def records_from_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    if rows and rows[0] == CSV_COLUMNS:
        rows = rows[1:]
    return [TrialRecord.from_row(r) for r in rows if r]


def save_records(records, path):
    with open(path, "w") as fp:
        fp.write(records_to_csv(records))


def load_records(path):
    with open(path) as fp:
        return records_from_csv(fp.read())


# ------------------------------------------------------------------ trials

def trial_seed(root_seed, circuit_index, trial_index):
    """Deterministic per-trial seed from the run's root seed."""
    ss = np.random.SeedSequence([int(root_seed), int(circuit_index),
                                 int(trial_index)])
    return int(ss.generate_state(1)[0])


_HW_CACHE = {}


def _hardware(spec_dims, n_dis, seed):
    key = spec_dims
    if key not in _HW_CACHE:
        _HW_CACHE[key] = chimera.build_chimera(chimera.ChimeraSpec(*spec_dims))
    hw = _HW_CACHE[key]
    if n_dis > 0:
        mask = chimera.YieldMask.random_qubits(hw.spec, n_dis, seed=seed)
        hw = chimera.apply_yield(hw, mask)
    return hw


def run_trial(circuit_id, circuit, algorithm, spec_dims, n_dis, seed,
              timeout_s=30.0, wall_mode="measure", collect_details=False):
    """One embedding attempt. Failures come back as records, not raises.

    A fresh yield mask is drawn per trial from the trial seed. Successful
    embeddings are re-validated; a validator violation is an internal
    error and raises.
    """
    hw = _hardware(spec_dims, n_dis, seed)
    t0 = time.monotonic()
    details = None
    try:
        if algorithm == "dense":
            emb = dense.embed_dense(
                circuit, hw, cfg=dense.DenseConfig(timeout_s=timeout_s),
                seed=seed)
            models = convert.convert(circuit, emb).models
            if collect_details:
                details = {"chain_lengths": sorted(
                    len(ch) - 1 for ch in emb.routes.values())}
        elif algorithm == "heuristic":
            emb = heuristic.embed_heuristic(
                circuit, hw, cfg=heuristic.HeurConfig(timeout_s=timeout_s),
                seed=seed)
            models = emb.models
            if collect_details:
                details = {}
        else:
            raise ValueError(f"unknown algorithm {algorithm!r}")
        violations = convert.validate(models, circuit, hw)
        if violations:
            raise AssertionError(
                f"invalid embedding reported as success: {violations[0]}")
        success = True
        n_qubits = sum(len(m) for m in models.values())
        max_model = max(len(m) for m in models.values())
        if collect_details:
            details["model_sizes"] = sorted(len(m) for m in models.values())
    except dense.EmbeddingFailure:
        success, n_qubits, max_model = False, 0, 0
        details = {} if collect_details else None
    wall_ms = 0 if wall_mode == "zero" else int(
        round(1000 * (time.monotonic() - t0)))
    rec = TrialRecord(
        circuit_id=str(circuit_id), n_cells=circuit.n_nodes,
        algorithm=algorithm, adjacency=circuit.adjacency,
        rows=spec_dims[0], cols=spec_dims[1], n_dis=float(n_dis),
        seed=seed, success=success, n_qubits=n_qubits, max_model=max_model,
        wall_ms=wall_ms)
    return (rec, details) if collect_details else rec


def _worker(task):
    return run_trial(*task)


def run_sweep(circuits, algorithm, spec_dims, trials_per_circuit=1,
              timeout_s=30.0, n_dis=0.0, root_seed=0, jobs=1,
              wall_mode="measure"):
    """TrialRecords for every (circuit, trial); order is deterministic.

    `circuits` is a list of (circuit_id, ConnectivityGraph). Workers fan
    out per trial; seeds derive from (root_seed, circuit index, trial).
    """
    if not circuits:
        raise ValueError("no circuits to sweep")
    tasks = []
    for ci, (cid, circ) in enumerate(circuits):
        for t in range(trials_per_circuit):
            tasks.append((cid, circ, algorithm, tuple(spec_dims), n_dis,
                          trial_seed(root_seed, ci, t), timeout_s, wall_mode))
    if jobs > 1:
        with get_context("fork").Pool(jobs) as pool:
            records = pool.map(_worker, tasks, chunksize=1)
    else:
        records = [run_trial(*t) for t in tasks]
    records.sort(key=lambda r: (r.circuit_id, r.seed))
    return records


# -------------------------------------------------------------------- fits

@dataclass
class FitResult:
    model: str
    params: dict
    errors: dict
    residual_norm: float
    meta: dict = field(default_factory=dict)

    def to_json_obj(self):
        return {"model": self.model, "params": self.params,
                "errors": self.errors, "residual_norm": self.residual_norm,
                "meta": self.meta}


def bin_success(records, width=20):
    """Success rates in fixed-width cell-count bins: (centers, rates,
    counts)."""
    agg = {}
    for r in records:
        b = r.n_cells // width
        n, k = agg.get(b, (0, 0))
        agg[b] = (n + 1, k + (1 if r.success else 0))
    bins = sorted(agg)
    centers = np.array([(b + 0.5) * width for b in bins], dtype=float)
    rates = np.array([agg[b][1] / agg[b][0] for b in bins])
    counts = np.array([agg[b][0] for b in bins])
    return centers, rates, counts


def erfc_model(n, mu, delta):
    return 0.5 * special.erfc((n - mu) / delta)


def fit_erfc(records=None, width=20, xs=None, ps=None, max_iter=200):
    """Least-squares fit of p(N) = erfc((N - mu)/Delta)/2 to binned rates.

    Initialized by a probit transform of the partial-success bins, then
    Gauss-Newton refined on the untransformed rates.
    """
    if xs is None:
        xs, ps, _ = bin_success(records, width=width)
    xs = np.asarray(xs, dtype=float)
    ps = np.asarray(ps, dtype=float)
    if len(xs) < 3:
        raise ValueError("need at least 3 bins")
    if np.all(ps >= 1.0) or np.all(ps <= 0.0):
        raise ValueError("degenerate data: all success or all failure")
    mid = (ps > 0.0) & (ps < 1.0)
    if mid.sum() >= 2:
        z = special.erfcinv(2.0 * ps[mid])
        a, b = np.polyfit(xs[mid], z, 1)
        if a <= 0:
            a = 1.0 / (xs.max() - xs.min() + 1.0)
        mu, delta = -b / a, 1.0 / a
    else:
        lo = xs[ps > 0.5].max() if np.any(ps > 0.5) else xs.min()
        hi = xs[ps < 0.5].min() if np.any(ps < 0.5) else xs.max()
        mu, delta = 0.5 * (lo + hi), max(width, (hi - lo) / 2.0)
    theta = np.array([mu, max(delta, 1e-6)])
    for _ in range(max_iter):
        mu, delta = theta
        u = (xs - mu) / delta
        f = 0.5 * special.erfc(u)
        r = ps - f
        g = np.exp(-u ** 2) / np.sqrt(np.pi)   # -d erfc(u)/du / 2 = g
        J = np.column_stack([g / delta, g * u / delta])
        step, *_ = np.linalg.lstsq(J, r, rcond=None)
        theta = theta + step
        theta[1] = max(abs(theta[1]), 1e-9)
        if np.linalg.norm(step) < 1e-10 * (1 + np.linalg.norm(theta)):
            break
    mu, delta = theta
    u = (xs - mu) / delta
    r = ps - 0.5 * special.erfc(u)
    g = np.exp(-u ** 2) / np.sqrt(np.pi)
    J = np.column_stack([g / delta, g * u / delta])
    dof = max(len(xs) - 2, 1)
    sigma2 = float(r @ r) / dof
    try:
        cov = sigma2 * np.linalg.inv(J.T @ J)
        err = np.sqrt(np.abs(np.diag(cov)))
    except np.linalg.LinAlgError:
        err = np.array([np.nan, np.nan])
    return FitResult(
        model="erfc",
        params={"mu": float(mu), "delta": float(abs(delta))},
        errors={"mu": float(err[0]), "delta": float(err[1])},
        residual_norm=float(np.linalg.norm(r)),
        meta={"error_method": "gauss-newton-covariance",
              "n_points": int(len(xs)), "bin_width": width})


def fit_power(xs, ys):
    """Least squares for y = A x^b in log-log space."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 3:
        raise ValueError("need at least 3 points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("power-law fit needs positive data")
    X = np.column_stack([np.ones_like(xs), np.log(xs)])
    y = np.log(ys)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    lnA, b = coef
    r = y - X @ coef
    dof = max(len(xs) - 2, 1)
    sigma2 = float(r @ r) / dof
    cov = sigma2 * np.linalg.inv(X.T @ X)
    errs = np.sqrt(np.abs(np.diag(cov)))
    A = float(np.exp(lnA))
    return FitResult(
        model="power",
        params={"A": A, "b": float(b)},
        errors={"A": float(A * errs[0]), "b": float(errs[1])},
        residual_norm=float(np.linalg.norm(r)),
        meta={"error_method": "gauss-newton-covariance",
              "n_points": int(len(xs)), "space": "log-log"})


def fit_yield(n_dis, mu, max_iter=200):
    """Fit mu(n_dis) = mu0 [1 - alpha n_dis^beta]; mu0 is the n_dis=0
    value."""
    n_dis = np.asarray(n_dis, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if len(set(n_dis.tolist())) < 3 or 0.0 not in n_dis:
        raise ValueError("need >=3 distinct n_dis values including 0")
    mu0 = float(np.mean(mu[n_dis == 0.0]))
    if mu0 <= 0:
        raise ValueError("mu at zero yield loss must be positive")
    mask = n_dis > 0
    y = 1.0 - mu[mask] / mu0
    x = n_dis[mask]
    good = y > 0
    if good.sum() < 2:
        raise ValueError("no measurable drop to fit")
    coef, *_ = np.linalg.lstsq(
        np.column_stack([np.ones(good.sum()), np.log(x[good])]),
        np.log(y[good]), rcond=None)
    alpha, beta = float(np.exp(coef[0])), float(coef[1])
    theta = np.array([alpha, beta])
    for _ in range(max_iter):
        a, bta = theta
        f = mu0 * (1.0 - a * x ** bta)
        r = mu[mask] - f
        J = np.column_stack([-mu0 * x ** bta,
                             -mu0 * a * x ** bta * np.log(x)])
        step, *_ = np.linalg.lstsq(J, r, rcond=None)
        theta = theta + step
        if np.linalg.norm(step) < 1e-12 * (1 + np.linalg.norm(theta)):
            break
    a, bta = theta
    r = mu[mask] - mu0 * (1.0 - a * x ** bta)
    J = np.column_stack([-mu0 * x ** bta, -mu0 * a * x ** bta * np.log(x)])
    dof = max(mask.sum() - 2, 1)
    sigma2 = float(r @ r) / dof
    try:
        cov = sigma2 * np.linalg.inv(J.T @ J)
        errs = np.sqrt(np.abs(np.diag(cov)))
    except np.linalg.LinAlgError:
        errs = np.array([np.nan, np.nan])
    return FitResult(
        model="yield",
        params={"mu0": mu0, "alpha": float(a), "beta": float(bta)},
        errors={"alpha": float(errs[0]), "beta": float(errs[1])},
        residual_norm=float(np.linalg.norm(r)),
        meta={"error_method": "gauss-newton-covariance",
              "n_points": int(mask.sum() + (n_dis == 0).sum())})


# ---------------------------------------------------------------- summary

def summarize(records, details=None, bin_width=20):
    """Aggregate means, success rates, and histograms per condition."""
    groups = {}
    for i, r in enumerate(records):
        key = (r.algorithm, r.adjacency, r.n_dis)
        groups.setdefault(key, []).append(i)
    report = {"groups": []}
    for key in sorted(groups):
        idx = groups[key]
        recs = [records[i] for i in idx]
        succ = [r for r in recs if r.success]
        entry = {
            "algorithm": key[0], "adjacency": key[1], "n_dis": key[2],
            "trials": len(recs), "successes": len(succ),
            "success_rate": len(succ) / len(recs),
            "mean_qubits": (float(np.mean([r.n_qubits for r in succ]))
                            if succ else None),
            "mean_max_model": (float(np.mean([r.max_model for r in succ]))
                               if succ else None),
            "mean_wall_ms": float(np.mean([r.wall_ms for r in recs])),
        }
        if len({r.n_cells for r in succ}) >= 3:
            try:
                pf = fit_power([r.n_cells for r in succ],
                               [r.n_qubits for r in succ])
                entry["usage_power_fit"] = pf.params
            except (ValueError, np.linalg.LinAlgError):
                pass
        if details is not None:
            chain_hist = {}
            size_hist = {}
            for i in idx:
                d = details[i] or {}
                for L in d.get("chain_lengths", []):
                    chain_hist[L] = chain_hist.get(L, 0) + 1
                for s in d.get("model_sizes", []):
                    size_hist[s] = size_hist.get(s, 0) + 1
            if chain_hist:
                entry["chain_length_hist"] = dict(sorted(chain_hist.items()))
            if size_hist:
                entry["model_size_hist"] = dict(sorted(size_hist.items()))
        report["groups"].append(entry)
    return report


def report_text(report):
    lines = [f"{'algorithm':10s} {'adjacency':9s} {'n_dis':6s} "
             f"{'trials':7s} {'succ':5s} {'rate':6s} {'qubits':8s} "
             f"{'maxmod':7s} {'ms':8s}"]
    for g in report["groups"]:
        lines.append(
            f"{g['algorithm']:10s} {g['adjacency']:9s} {g['n_dis']:<6g} "
            f"{g['trials']:<7d} {g['successes']:<5d} "
            f"{g['success_rate']:<6.3f} "
            f"{(g['mean_qubits'] or 0):<8.1f} "
            f"{(g['mean_max_model'] or 0):<7.2f} "
            f"{g['mean_wall_ms']:<8.1f}")
    return "\n".join(lines) + "\n"
