"""The three experiments and the oracle suite, run from a declarative config.

Each run writes into one output directory:

``model.json``       the final generative model
``discovery.csv``    one row per ingested epoch of structure learning
``episodes.csv``     one row per babbling or goal-directed step
``metrics.json``     summary numbers (schema in the README)
``embedding.csv``    principal coordinates of the learned states

All randomness is derived from the root seed, so reruns are byte-identical.
"""

from __future__ import annotations

import copy
import json
import logging
import os
import time

import numpy as np
from scipy import stats

from . import agent, environments as env, geometry, mnist, oracles
from .inference import infer_epoch
from .learning import mutual_information
from .model import new_minimal, save_model, validate
from .structure import IngestConfig, StyleHyperprior, bmr, coverage_bound, ingest_stream, prune, write_trace

log = logging.getLogger(__name__)

EXPERIMENTS = ("mnist", "gridworld", "hanoi", "unit-oracles")

DEFAULTS = {
    "mnist": {
        "images": None,
        "labels": None,
        "test_images": None,
        "test_labels": None,
        "data_dir": None,
        "classes": [0, 1],
        "n_train": 256,
        "n_test": 200,
        "n_pixels": 128,
        # Gaussian smoothing width and support (in standard deviations)
        "sigma": 1.0,
        "truncate": 2.0,
        # prior count for every new likelihood column
        "concentration": 1 / 16,
        # precision of the information gate on likelihood updates
        "alpha": 8.0,
        # assumed upper bound on the number of styles
        "max_styles": 128,
        "embed_states": 64,
    },
    "gridworld": {
        "phase": "all",
        "concentration": 1 / 16,
        "epoch_len": 2,
        "babble_steps": 128,
        "babble_depth": 2,
        "babble_precision": 1.0,
        "n_seeds": 1,
        "goal_trials": 9,
        "goal_depth": 1,
        "goal_moves": 16,
        # log preference for sensing reward over no reward
        "reward_nats": 4.0,
    },
    "hanoi": {
        # prior count for new columns; smaller than for images
        "concentration": 1 / 64,
        "epoch_len": 2,
        "babble_steps": 320,
        "babble_depth": 1,
        "babble_precision": 1.0,
        # planning depths 1..depth are each run on the same trials
        "depth": 5,
        "trials": 100,
        "max_moves": 8,
        "max_difficulty": 5,
        # log preference for each target ball location
        "preference_nats": 1.0,
        "inner_precision": 4.0,
    },
    "unit-oracles": {
        # random models for the sweep-monotonicity check
        "n_models": 1000,
        "n_enumerated": 200,
        "n_quadrature": 100,
        "tolerance_mi": 1e-9,
        "tolerance_bmr": 1e-3,
        "tolerance_enum": 1e-6,
    },
}


class ConfigError(ValueError):
    """Bad experiment name, unknown key or malformed config file."""


def load_config(experiment, path=None, overrides=None):
    """Defaults, then the config file, then command-line overrides."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    cfg = copy.deepcopy(DEFAULTS[experiment])
    layers = []
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        data.pop("experiment", None)
        layers.append(data)
    if overrides:
        layers.append({k: v for k, v in overrides.items() if v is not None})
    for layer in layers:
        for k, v in layer.items():
            if k not in cfg:
                raise ConfigError(f"unknown setting {k!r} for {experiment}")
            cfg[k] = v
    return cfg


def _rng(seed, *stream):
    """Independent generator for a named stream under the root seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed)] + [int(s) for s in stream]))


def _round(x, digits=12):
    """Floats rounded to ``digits`` significant digits for stable JSON output."""
    if isinstance(x, dict):
        return {str(k): _round(v, digits) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v, digits) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(format(float(x), f".{digits}g"))
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _write_metrics(metrics, out):
    with open(os.path.join(out, "metrics.json"), "w") as fh:
        json.dump(_round(metrics), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_episodes(trace, out):
    (trace or agent.EpisodeTrace()).write_csv(os.path.join(out, "episodes.csv"))


class _Timer:
    def __init__(self, what):
        self.what = what

    def __enter__(self):
        self.t = time.perf_counter()
        return self

    def __exit__(self, *exc):
        log.info("%s: %.1f s", self.what, time.perf_counter() - self.t)


# ---------------------------------------------------------------------------
# MNIST
# ---------------------------------------------------------------------------


def threshold_accuracy(F, correct, fractions=(1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1)):
    """Accuracy over the fraction of items with the highest evidence (lowest F)."""
    order = np.argsort(F, kind="stable")
    out = []
    for q in fractions:
        k = max(1, int(round(q * len(F))))
        out.append((q, float(np.mean(correct[order[:k]]))))
    return out


def _classify_all(model, data, state_labels, classes):
    pred, F = [], []
    for o in data.observations("test"):
        p, f = agent.classify(model, o, state_labels, classes)
        pred.append(classes[int(np.argmax(p))])
        F.append(f)
    pred = np.array(pred)
    return pred, np.array(F), pred == data.test_labels


def run_mnist(cfg, seed, out):
    images, labels = cfg["images"], cfg["labels"]
    if not images:
        images, labels = mnist.write_bundled_sample(cfg["data_dir"] or os.path.join(out, "data"))
    mc = mnist.MnistConfig(
        images,
        labels,
        cfg["test_images"],
        cfg["test_labels"],
        tuple(cfg["classes"]),
        cfg["n_train"],
        cfg["n_test"],
        cfg["sigma"],
        cfg["truncate"],
        cfg["n_pixels"],
    )
    data = mnist.load_mnist(mc)
    classes = list(cfg["classes"])
    model = new_minimal([(f"px{int(i)}", 2) for i in data.pixels], cfg["concentration"], alpha=cfg["alpha"])
    stream = [[o] for o in data.observations("train")]
    ic = IngestConfig(
        alpha=cfg["alpha"],
        kinds=("parent", "add_state"),
        labels=[int(x) for x in data.train_labels],
        hyperprior_N=cfg["max_styles"],
    )
    with _Timer("mnist structure learning"):
        res = ingest_stream(model, stream, ic)
    labels_of = [int(x) for x in res.state_labels]
    pred, F, correct = _classify_all(res.model, data, labels_of, classes)
    reduced, report = prune(res.model)
    _, _, correct_r = _classify_all(reduced, data, labels_of, classes)
    n = len(correct)
    k = int(correct.sum())
    discovery = [int(np.prod(r[2])) for r in res.trace]
    half = len(discovery) // 2
    first = discovery[half - 1] - 1 if half else 0
    second = discovery[-1] - discovery[half - 1] if half else 0
    emb_states = list(range(min(cfg["embed_states"], len(labels_of))))
    emb = geometry.embed(res.model, emb_states) if len(emb_states) > 1 else None
    metrics = {
        "experiment": "mnist",
        "seed": seed,
        "n_train": len(stream),
        "n_test": n,
        "n_states": int(res.model.n_states[0]),
        "styles_per_class": {str(c): labels_of.count(c) for c in classes},
        "accuracy": k / n,
        "binomial_p": float(stats.binomtest(k, n, 1.0 / len(classes), alternative="greater").pvalue),
        "threshold_accuracy": threshold_accuracy(F, correct),
        "discovery_first_half": first,
        "discovery_second_half": second,
        "discovery": discovery,
        "mi_curve": [r[6] for r in res.trace],
        "prune_removed": report.removed,
        "prune_dF": report.dF,
        "accuracy_pruned": float(np.mean(correct_r)),
        "embedding_stress": emb.stress if emb else 0.0,
        "coverage_bound": coverage_bound(0.001, cfg["max_styles"]),
    }
    save_model(res.model, os.path.join(out, "model.json"))
    write_trace(res.trace, os.path.join(out, "discovery.csv"))
    _write_episodes(None, out)
    if emb is not None:
        geometry.write_embedding(emb, os.path.join(out, "embedding.csv"), labels_of)
    return metrics


# ---------------------------------------------------------------------------
# gridworld
# ---------------------------------------------------------------------------


def learn_gridworld(concentration=1 / 16, epoch_len=2):
    """Structure learning from the canonical curriculum; returns ``(source, IngestResult)``."""
    source = env.gridworld_source_model()
    model = new_minimal([(m.id, 2) for m in source.modalities], concentration)
    res = ingest_stream(model, env.generate_curriculum(source, epoch_len), IngestConfig(gate=False))
    return source, res


def known_locations(source, epoch_len=2):
    """``(obj, row, col)`` locations experienced during the curriculum."""
    return {(s[2], s[0], s[1]) for s in env.curriculum_states(source, epoch_len)}


def prepare_for_action(model):
    """Prune unused transition counts and make every multi-path factor controllable."""
    reduced, _ = prune(model, transitions=True, modalities=[])
    for fac in reduced.factors:
        fac.controllable = fac.n_paths > 1
    return reduced


def identity_paths(model):
    """True if every factor's stationary slice normalises to the identity exactly."""
    for fac in model.factors:
        b0 = fac.transition[:, :, 0]
        if not np.array_equal(b0 / b0.sum(axis=0, keepdims=True), np.eye(fac.n_states)):
            return False
    return True


def babble_gridworld(model, known, steps, depth, precision, seed):
    """Babble in each object context from the top-left corner.

    ``known`` holds ``(obj, row, col)`` locations already experienced during
    structure learning; coverage counts them together with visited ones.
    Returns ``(model, trace, coverage, raw_coverage)``.
    """
    trace = agent.EpisodeTrace()
    cover, raw = [], []
    for obj in range(3):
        world = env.GridWorld(obj, 0, 0)
        start = len(trace)
        model, trace = agent.run_babbling(
            model, world, steps, depth, int(_rng(seed, 1, obj).integers(2**31)), precision, trace=trace, trial=obj
        )
        visited = {r["location"] for r in trace.rows[start:]} | {world.location}
        raw.append(len(visited))
        cover.append(len(visited | {k for k in known if k[0] == obj}))
    for r in trace.rows:
        r["phase"] = "babble"
    return model, trace, cover, raw


def information_decay(trace, head=50, tail_fraction=0.1):
    """Mean expected information gain over the first ``head`` and the last ``tail_fraction`` steps."""
    ig = np.array(trace.column("info_gain"), dtype=float)
    tail = max(1, int(round(tail_fraction * len(ig))))
    return float(ig[:head].mean()), float(ig[-tail:].mean())


def gridworld_goals(model, n_trials, depth, moves, nats, seed):
    rng = _rng(seed, 2)
    trials = []
    for k in range(n_trials):
        obj = k % 3
        r, c = (int(x) for x in rng.integers(env.GRID, size=2))
        tr, tc = env.REWARD_TARGETS[obj]
        d = env.torus_distance(r, tr) + env.torus_distance(c, tc)
        at_target = lambda w: (w.row, w.col) == env.REWARD_TARGETS[w.obj]
        trials.append((env.GridWorld(obj, r, c), env.gridworld_preferences(model, nats), at_target, d))
    res = agent.run_goal(model, trials, depth, moves, novelty=False, stop_at_goal=False)
    stays = []
    for k in range(n_trials):
        locs = [r["location"] for r in res.trace.rows if r["trial"] == k] + [trials[k][0].location]
        hits = [(l[1], l[2]) == env.REWARD_TARGETS[l[0]] for l in locs]
        first = hits.index(True) if True in hits else None
        stays.append(first is not None and all(hits[first:]))
    for r in res.trace.rows:
        r["phase"] = "goal"
    return res, stays


def run_gridworld(cfg, seed, out):
    with _Timer("gridworld structure learning"):
        source, res = learn_gridworld(cfg["concentration"], cfg["epoch_len"])
    model = res.model
    metrics = {
        "experiment": "gridworld",
        "seed": seed,
        "n_states": list(model.n_states),
        "n_paths": list(model.n_paths),
        "identity_paths": identity_paths(model),
        "valid": not validate(model),
    }
    trace = agent.EpisodeTrace()
    if cfg["phase"] in ("babble", "goal", "all"):
        known = known_locations(source, cfg["epoch_len"])
        ready = prepare_for_action(model)
        covers, raws, decay = [], [], []
        with _Timer("gridworld babbling"):
            for i in range(cfg["n_seeds"]):
                m, tr, cover, raw = babble_gridworld(
                    ready, known, cfg["babble_steps"], cfg["babble_depth"], cfg["babble_precision"], seed + i
                )
                covers.append(cover)
                raws.append(raw)
                decay.append(information_decay(tr))
                if i == 0:
                    model, trace = m, tr
        full = [c == env.GRID * env.GRID for cover in covers for c in cover]
        metrics.update(
            coverage=covers,
            coverage_visited_only=raws,
            full_coverage_fraction=float(np.mean(full)),
            info_gain_head=[d[0] for d in decay],
            info_gain_tail=[d[1] for d in decay],
            info_gain_ratio=[d[1] / d[0] if d[0] > 0 else 0.0 for d in decay],
        )
    if cfg["phase"] in ("goal", "all"):
        goal, stays = gridworld_goals(
            model, cfg["goal_trials"], cfg["goal_depth"], cfg["goal_moves"], cfg["reward_nats"], seed
        )
        for r in goal.trace.rows:
            trace.rows.append(r)
        metrics.update(goal_success_rate=goal.success_rate, goal_stay_rate=float(np.mean(stays)))
    save_model(model, os.path.join(out, "model.json"))
    write_trace(res.trace, os.path.join(out, "discovery.csv"))
    _write_episodes(trace, out)
    emb = geometry.embed(model)
    geometry.write_embedding(emb, os.path.join(out, "embedding.csv"))
    metrics["embedding_stress"] = emb.stress
    return metrics


# ---------------------------------------------------------------------------
# Tower of Hanoi
# ---------------------------------------------------------------------------


def learn_hanoi(concentration=1 / 64, epoch_len=2):
    model = new_minimal([(f"loc{i}", env.N_BALLS + 1) for i in range(env.HanoiWorld.n_modalities)], concentration)
    return ingest_stream(model, env.hanoi_curriculum(epoch_len), IngestConfig(gate=False))


def hanoi_trials(n, max_difficulty, rng):
    """Random start and target pairs, cycling through difficulties ``1..max_difficulty``."""
    arrangements = sorted(env.enumerate_arrangements())
    dist = {a: env.enumerate_arrangements(a) for a in arrangements}
    out = []
    for k in range(n):
        d = k % max_difficulty + 1
        start = arrangements[int(rng.integers(len(arrangements)))]
        targets = [b for b in arrangements if dist[start][b] == d]
        while not targets:
            start = arrangements[int(rng.integers(len(arrangements)))]
            targets = [b for b in arrangements if dist[start][b] == d]
        out.append((start, targets[int(rng.integers(len(targets)))], d))
    return out


def hanoi_goal_runs(model, trials, depth, max_moves, nats, inner_precision):
    """Goal trials at one planning depth; returns :class:`agent.GoalResult`."""
    specs = []
    for start, target, d in trials:
        done = lambda w, target=target: w.arrangement == target
        specs.append((env.HanoiWorld(start), env.hanoi_preferences(target, nats), done, d))
    res = agent.run_goal(model, specs, depth, max_moves, inner_precision=inner_precision, novelty=False)
    for r in res.trace.rows:
        r["phase"] = f"goal-depth-{depth}"
    return res


def run_hanoi(cfg, seed, out):
    with _Timer("hanoi structure learning"):
        res = learn_hanoi(cfg["concentration"], cfg["epoch_len"])
    model = res.model
    for fac in model.factors:
        fac.controllable = fac.n_paths > 1
    with _Timer("hanoi babbling"):
        model, babble = agent.run_babbling(
            model,
            env.HanoiWorld(),
            cfg["babble_steps"],
            cfg["babble_depth"],
            int(_rng(seed, 1).integers(2**31)),
            cfg["babble_precision"],
        )
    for r in babble.rows:
        r["phase"] = "babble"
    early = [a[0] for a in babble.column("action")[:64]]
    path_counts = [early.count(u) for u in range(model.factors[0].n_paths)]
    reduced = agent.reduce_for_planning(model)
    trials = hanoi_trials(cfg["trials"], cfg["max_difficulty"], _rng(seed, 2))
    trace = babble
    table = {}
    with _Timer("hanoi goal trials"):
        for depth in range(1, cfg["depth"] + 1):
            g = hanoi_goal_runs(
                reduced, trials, depth, cfg["max_moves"], cfg["preference_nats"], cfg["inner_precision"]
            )
            table[str(depth)] = {"overall": g.success_rate, "by_difficulty": g.by_difficulty()}
            trace.rows.extend(g.trace.rows)
    metrics = {
        "experiment": "hanoi",
        "seed": seed,
        "n_states": list(res.model.n_states),
        "n_paths": list(res.model.n_paths),
        "n_arrangements": len(env.enumerate_arrangements()),
        "babble_path_counts_first64": path_counts,
        "babble_legal_fraction": float(np.mean(babble.column("legal")[: cfg["babble_steps"]])),
        "success_by_depth": table,
        "success_rate": table[str(cfg["depth"])]["overall"],
        "difficulties": {str(d): sum(1 for t in trials if t[2] == d) for d in range(1, cfg["max_difficulty"] + 1)},
    }
    save_model(reduced, os.path.join(out, "model.json"))
    write_trace(res.trace, os.path.join(out, "discovery.csv"))
    _write_episodes(trace, out)
    emb = geometry.embed(reduced)
    geometry.write_embedding(emb, os.path.join(out, "embedding.csv"))
    metrics["embedding_stress"] = emb.stress
    return metrics


# ---------------------------------------------------------------------------
# oracle suite
# ---------------------------------------------------------------------------


def random_model(rng, n_states=(2,), n_paths=(1,), levels=(2,), concentration=1.0):
    """Small random model with dense positive counts (for oracle checks)."""
    from .model import Factor, GenerativeModel, Modality

    factors = []
    for f, (n, P) in enumerate(zip(n_states, n_paths)):
        b = rng.gamma(1.0, size=(n, n, P)) + 0.05
        b[:, :, 0] = np.eye(n)
        factors.append(Factor(f"f{f}", b, rng.gamma(1.0, size=n) + 0.1, rng.gamma(1.0, size=P) + 0.1))
    parents = [f.id for f in factors]
    mods = [
        Modality(f"g{g}", rng.gamma(1.0, size=(L,) + tuple(n_states)) + 0.05, np.zeros(L), list(parents))
        for g, L in enumerate(levels)
    ]
    return GenerativeModel(factors, mods, concentration=concentration)


def random_epoch(model, T, rng):
    return [[np.eye(m.n_levels)[int(rng.integers(m.n_levels))] for m in model.modalities] for _ in range(T)]


def run_oracles(cfg, seed, out):
    rng = _rng(seed, 3)
    checks = {}
    worst = 0.0
    for _ in range(cfg["n_models"]):
        a = rng.gamma(1.0, size=(int(rng.integers(2, 5)), int(rng.integers(1, 6))))
        worst = max(worst, abs(mutual_information(a) - oracles.mi_double_loop(a)))
    checks["mi"] = {"max_error": worst, "pass": worst <= cfg["tolerance_mi"]}
    worst = 0.0
    for _ in range(cfg["n_quadrature"]):
        L = int(rng.integers(2, 5))
        a0 = rng.uniform(0.5, 2.0, size=L)
        a = a0 + rng.uniform(0.0, 5.0, size=L)
        r = a0 * rng.uniform(0.3, 1.0, size=L)
        gain, _ = bmr(a0[:, None], a[:, None], r[:, None])
        ref = oracles.bmr_quadrature(a0, a, r)
        worst = max(worst, abs(gain - ref) / max(abs(ref), 1e-12))
    checks["bmr"] = {"max_relative_error": worst, "pass": worst <= cfg["tolerance_bmr"]}
    worst = 0.0
    for _ in range(cfg["n_enumerated"]):
        m = random_model(rng, (2,), (2,), (2, 3))
        ep = random_epoch(m, 2, rng)
        marg, paths, logz = oracles.enumerate_posterior(m, ep)
        bel = infer_epoch(m, ep, use_digamma=False)
        worst = max(worst, np.abs(bel.states[0] - marg[0]).max(), np.abs(bel.paths[0] - paths[0]).max(), abs(-bel.F - logz))
    checks["enumeration"] = {"max_error": float(worst), "pass": worst <= cfg["tolerance_enum"]}
    gap = np.inf
    for _ in range(cfg["n_enumerated"]):
        m = random_model(rng, (2, 3), (2, 1), (2, 2))
        ep = random_epoch(m, 2, rng)
        _, _, logz = oracles.enumerate_posterior(m, ep)
        gap = min(gap, infer_epoch(m, ep, use_digamma=False).F + logz)
    checks["bound"] = {"min_gap": float(gap), "pass": gap >= -1e-9}
    rises = 0
    for _ in range(cfg["n_models"]):
        m = random_model(rng, (2, 3), (2, 2), (2, 3))
        bel = infer_epoch(m, random_epoch(m, 3, rng))
        rises += any(b > a + 1e-9 for a, b in zip(bel.trace, bel.trace[1:]))
    checks["monotone_sweeps"] = {"models": cfg["n_models"], "violations": rises, "pass": rises == 0}
    ratio = coverage_bound(0.001, 128)
    checks["coverage_bound"] = {"value": ratio, "pass": abs(ratio - 880) <= 1}
    hp = StyleHyperprior(128, 1)
    metrics = {
        "experiment": "unit-oracles",
        "seed": seed,
        "checks": checks,
        "style_log_odds_n1": hp.dH,
        "all_pass": all(c["pass"] for c in checks.values()),
    }
    _write_episodes(None, out)
    return metrics


RUNNERS = {"mnist": run_mnist, "gridworld": run_gridworld, "hanoi": run_hanoi, "unit-oracles": run_oracles}


def run(experiment, cfg, seed, out):
    """Run one experiment and write its artifacts; returns the metrics."""
    os.makedirs(out, exist_ok=True)
    metrics = RUNNERS[experiment](cfg, int(seed), out)
    metrics["config"] = cfg
    _write_metrics(metrics, out)
    return metrics


# ---------------------------------------------------------------------------
# golden comparison
# ---------------------------------------------------------------------------

DEFAULT_TOLERANCE = {"rel": 1e-9, "abs": 1e-12}


def _close(a, b, tol):
    return abs(a - b) <= tol["abs"] + tol["rel"] * max(abs(a), abs(b))


def _compare_json(a, b, where, tolerances, report):
    tol = tolerances.get(where.split("/")[-1], tolerances.get("*", DEFAULT_TOLERANCE))
    if isinstance(b, dict):
        if not isinstance(a, dict):
            report.append(f"{where}: expected an object")
            return
        for k in sorted(set(a) | set(b)):
            if k not in a:
                report.append(f"{where}/{k}: missing")
            elif k not in b:
                report.append(f"{where}/{k}: unexpected")
            else:
                _compare_json(a[k], b[k], f"{where}/{k}", tolerances, report)
    elif isinstance(b, list):
        if not isinstance(a, list) or len(a) != len(b):
            report.append(f"{where}: length differs")
            return
        for i, (x, y) in enumerate(zip(a, b)):
            _compare_json(x, y, f"{where}/{i}" if not isinstance(y, (int, float)) else where, tolerances, report)
    elif isinstance(b, bool) or isinstance(a, bool) or not isinstance(b, (int, float)):
        if a != b:
            report.append(f"{where}: {a!r} != {b!r}")
    elif isinstance(b, int) and isinstance(a, int):
        if a != b:
            report.append(f"{where}: {a} != {b}")
    elif not isinstance(a, (int, float)) or not _close(float(a), float(b), tol):
        report.append(f"{where}: {a!r} differs from {b!r}")


def _compare_csv(path_a, path_b, name, tolerances, report):
    import csv

    with open(path_a) as fa, open(path_b) as fb:
        ra, rb = list(csv.reader(fa)), list(csv.reader(fb))
    if not rb or not ra or ra[0] != rb[0]:
        report.append(f"{name}: header differs")
        return
    if len(ra) != len(rb):
        report.append(f"{name}: {len(ra) - 1} rows, expected {len(rb) - 1}")
        return
    header = rb[0]
    for i, (x, y) in enumerate(zip(ra[1:], rb[1:]), start=1):
        for col, u, v in zip(header, x, y):
            if u == v:
                continue
            try:
                ok = _close(float(u), float(v), tolerances.get(col, tolerances.get("*", DEFAULT_TOLERANCE)))
            except ValueError:
                ok = False
            if not ok:
                report.append(f"{name}: row {i} column {col}: {u} != {v}")


def compare_golden(run_dir, golden_dir, tolerances=None):
    """Differences between a run directory and a golden one (empty if they match).

    Structural fields (strings, integers, booleans, shapes) must match
    exactly; floats are compared within ``tolerances``, a mapping from
    metric or column name (or ``"*"``) to ``{"rel": ..., "abs": ...}``.
    """
    tolerances = dict(tolerances or {})
    report = []
    for d in (run_dir, golden_dir):
        if not os.path.isdir(d):
            return [f"{d}: not a directory"]
    for name in sorted(os.listdir(golden_dir)):
        gold = os.path.join(golden_dir, name)
        if os.path.isdir(gold):
            continue
        mine = os.path.join(run_dir, name)
        if not os.path.exists(mine):
            report.append(f"{name}: missing")
            continue
        if name.endswith(".json"):
            with open(mine) as fa, open(gold) as fb:
                try:
                    a, b = json.load(fa), json.load(fb)
                except json.JSONDecodeError as exc:
                    report.append(f"{name}: unreadable ({exc})")
                    continue
            _compare_json(a, b, name, tolerances, report)
        elif name.endswith(".csv"):
            _compare_csv(mine, gold, name, tolerances, report)
        else:
            with open(mine, "rb") as fa, open(gold, "rb") as fb:
                if fa.read() != fb.read():
                    report.append(f"{name}: contents differ")
    return report
