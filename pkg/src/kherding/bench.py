"""Experiment harness: configs, candidate generation, runs, CSV output and rate fits."""

import configparser
import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.spatial import cKDTree

from .embedding import CandidatePool
from .herding import HerdingConfig, herd
from .kernels import Domain, KernelSpec, analytic_embedding, empirical_embedding, sample_measure

log = logging.getLogger(__name__)

METHODS = ("eq_weight", "linesearch", "fc", "pmp", "gcos", "fc_pmp", "fc_gcos")
_CAND_STREAM = 1
_EMB_STREAM = 2


class AnalysisError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    kernel: str = "gaussian"
    domain: str = "box"
    dim: int = 2
    rho: float = math.sqrt(3.0)
    measure: str = "truncated_gaussian"
    methods: list = field(default_factory=lambda: ["linesearch", "gcos"])
    T: int = 100
    T_by_method: dict = field(default_factory=dict)
    k_max: int = 10
    delta: dict = field(default_factory=dict)
    candidates: int = 2000
    embedding: str = "analytic"
    embedding_size: int = 20000
    embedding_seed: int = 2024
    seeds: list = field(default_factory=lambda: [0])
    fill_probe: int = 0
    out: str = "results"
    jobs: int = 1

    def __post_init__(self):
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        for m in self.delta:
            if m not in METHODS:
                raise ValueError(f"delta given for unknown method {m!r}")

    def steps_for(self, method):
        return int(self.T_by_method.get(method, self.T))

    def herding_config(self, method, seed):
        return HerdingConfig.for_method(
            method, T=self.steps_for(method), k_max=self.k_max, delta=self.delta.get(method),
            candidate_count=self.candidates, seed=seed,
        )

    def kernel_spec(self):
        dom = Domain.sphere() if self.domain == "sphere" else Domain.box(self.dim)
        kind = "sphere_distance" if self.kernel in ("sphere", "sphere_distance") else self.kernel
        return KernelSpec(kind, dom, self.rho)

    def digest(self):
        blob = json.dumps(asdict(self), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


def _split(value, conv=str):
    return [conv(v) for v in value.replace(",", " ").split()]


def load_config(path, **overrides):
    """Read an INI experiment file; keyword `overrides` win over file values.

    The ``[experiment]`` section holds scalar keys; ``T.<method>`` and
    ``delta.<method>`` set per-method values.
    """
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    sec = parser["experiment"]
    kw = {"T_by_method": {}, "delta": {}}
    conv = {f.name: f.type for f in fields(ExperimentConfig)}
    for key, raw in sec.items():
        if key.startswith("t."):
            kw["T_by_method"][key[2:]] = int(raw)
        elif key.startswith("delta."):
            kw["delta"][key[6:]] = float(raw)
        elif key == "methods":
            kw["methods"] = _split(raw)
        elif key == "seeds":
            kw["seeds"] = _split(raw, int)
        elif key == "t":
            kw["T"] = int(raw)
        elif key in conv:
            kw[key] = conv[key](raw)
        else:
            raise ValueError(f"unknown config key {key!r}")
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**kw)


# -- building blocks -------------------------------------------------------


def _stream(seed, stream):
    return np.random.default_rng(np.random.SeedSequence([int(seed), stream]))


def generate_candidates(domain, measure, m, seed):
    """`m` i.i.d. candidate points from `measure`; deterministic in `seed`."""
    if m < 1:
        raise ValueError("m must be at least 1")
    return sample_measure(domain, measure, m, _stream(seed, _CAND_STREAM))


def fill_distance(nodes, probe):
    """``max_p min_j |p - x_j|`` over the probe set."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    if nodes.shape[0] == 0 or nodes.size == 0:
        raise ValueError("fill distance of an empty node set")
    dist, _ = cKDTree(nodes).query(np.atleast_2d(probe))
    return float(dist.max())


def build_embedding(config, spec):
    if config.embedding == "analytic":
        return analytic_embedding(spec, config.measure)
    return empirical_embedding(spec, config.embedding_size, _stream(config.embedding_seed, _EMB_STREAM),
                               measure=config.measure)


@dataclass
class ResultRow:
    method: str
    seed: int
    t: int
    node_count: int
    mmd: float
    wall_time_seconds: float
    cos_theta: float
    gamma: float
    K_t: int


CSV_FIELDS = [f.name for f in fields(ResultRow)]


def trace_rows(method, seed, trace):
    mmd = trace.mmd
    return [
        ResultRow(method, seed, t + 1, trace.node_count[t], float(mmd[t]), trace.wall_time[t],
                  float(trace.cos_theta[t]), float(trace.gamma[t]), int(trace.rounds[t]))
        for t in range(len(trace))
    ]


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_FIELDS)
        for r in rows:
            wr.writerow([_fmt(getattr(r, f)) for f in CSV_FIELDS])


def read_csv(path):
    types = {f.name: f.type for f in fields(ResultRow)}
    with open(path, newline="") as fh:
        return [ResultRow(**{k: types[k](v) for k, v in rec.items()}) for rec in csv.DictReader(fh)]


def loglog_slope(rows, x="nodes", lo=None, hi=None):
    """Least-squares slope of ``log(mmd)`` against ``log(x)`` over ``lo <= x <= hi``.

    `rows` should come from a single run; `x` is ``"nodes"`` or ``"time"``.
    """
    attr = {"nodes": "node_count", "time": "wall_time_seconds"}[x]
    xs = np.array([getattr(r, attr) for r in rows], dtype=float)
    ys = np.array([r.mmd for r in rows], dtype=float)
    sel = np.ones(xs.shape, dtype=bool)
    if lo is not None:
        sel &= xs >= lo
    if hi is not None:
        sel &= xs <= hi
    sel &= xs > 0
    if sel.sum() < 5:
        raise AnalysisError(f"need at least 5 rows in range, got {int(sel.sum())}")
    if (ys[sel] <= 0).any():
        raise AnalysisError("mmd must be positive for a log-log fit")
    return float(np.polyfit(np.log(xs[sel]), np.log(ys[sel]), 1)[0])


def group_runs(rows):
    runs = {}
    for r in rows:
        runs.setdefault((r.method, r.seed), []).append(r)
    return runs


# -- running ---------------------------------------------------------------


def _run_one(args):
    config, method, seed, spec, emb, cand, z, probe = args
    if emb is None:  # worker process: closures do not pickle, rebuild deterministically
        emb = build_embedding(config, spec)
    pool = CandidatePool(spec, emb, cand, z=z, check=False)
    measure, trace = herd(config.herding_config(method, seed), spec, emb, pool)
    info = {"method": method, "seed": seed, "iterations": len(trace), "nodes": len(measure),
            "converged": trace.converged, "final_mmd": float(trace.mmd[-1])}
    if probe is not None:
        info["fill_distance"] = fill_distance(measure.nodes, probe)
    return trace_rows(method, seed, trace), info


def run_experiment(config, write=True):
    """Run every (method, seed) pair; returns ``(rows, manifest)``.

    Failed runs are logged and recorded in the manifest; the rest continue.
    """
    spec = config.kernel_spec()
    emb = build_embedding(config, spec)
    jobs = []
    for seed in config.seeds:
        cand = generate_candidates(spec.domain, config.measure, config.candidates, seed)
        z = emb(cand)
        probe = None
        if config.fill_probe:
            probe = sample_measure(spec.domain, "uniform", config.fill_probe, _stream(seed, 3))
        jobs.extend((config, m, seed, spec, emb, cand, z, probe) for m in config.methods)

    rows, runs = [], []

    def collect(job, fut_result):
        try:
            r, info = fut_result()
        except Exception as exc:  # one failed run must not stop the rest
            log.exception("run %s seed %s failed", job[1], job[2])
            runs.append({"method": job[1], "seed": job[2], "error": repr(exc)})
            return
        rows.extend(r)
        runs.append(info)

    if config.jobs > 1:
        with ProcessPoolExecutor(config.jobs) as ex:
            futs = [ex.submit(_run_one, j[:4] + (None,) + j[5:]) for j in jobs]
            for j, f in zip(jobs, futs):
                collect(j, f.result)
    else:
        for j in jobs:
            collect(j, lambda j=j: _run_one(j))

    manifest = {"name": config.name, "config_sha256": config.digest(), "seeds": list(config.seeds),
                "methods": list(config.methods), "config": asdict(config), "runs": runs}
    if write:
        os.makedirs(config.out, exist_ok=True)
        csv_path = os.path.join(config.out, f"{config.name}.csv")
        write_csv(csv_path, rows)
        with open(os.path.join(config.out, f"{config.name}.manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, default=str)
        with open(os.path.join(config.out, f"{config.name}_plot.py"), "w") as fh:
            fh.write(plot_script(f"{config.name}.csv", config.name))
        manifest["csv"] = csv_path
    return rows, manifest


def plot_script(csv_name, title):
    return f'''"""Log-log convergence plots for {title}."""
import csv
import os
from collections import defaultdict

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
series = defaultdict(lambda: ([], [], []))
with open(os.path.join(here, "{csv_name}")) as fh:
    for r in csv.DictReader(fh):
        s = series[(r["method"], r["seed"])]
        s[0].append(int(r["node_count"]))
        s[1].append(float(r["wall_time_seconds"]))
        s[2].append(float(r["mmd"]))

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.5))
for (method, seed), (n, t, e) in sorted(series.items()):
    ax1.loglog(n, e, label=f"{{method}} (seed {{seed}})")
    ax2.loglog(t, e, label=f"{{method}} (seed {{seed}})")
ax1.set_xlabel("number of nodes")
ax2.set_xlabel("time [s]")
for ax in (ax1, ax2):
    ax.set_ylabel("MMD")
    ax.grid(True, which="both", alpha=0.3)
ax1.legend(fontsize=7)
fig.suptitle("{title}")
fig.tight_layout()
fig.savefig(os.path.join(here, "{title}.png"), dpi=150)
'''
