"""Command-line front end: ``solve``, ``sweep``, ``estimate-cycles`` and
``gen-instance``.

A run is described by a JSON config::

    {
      "instance": {"generator": "cdma", "n": 256, "alpha": 0.6, "zeta": 0.05},
      "algorithm": "closed-loop",
      "preset": "cdma",
      "params": {"closed-loop": {"n_step": 501}},
      "seed": 7,
      "precision": "f32",
      "tiling": {"p_b": 1, "p_r": 64, "p_c": 32}
    }

``instance`` is a generator spec (``cdma``, ``cs-random``, ``cs-image``), a
``{"file": path}`` reference or ``{"bundled": "cdma16"}``.  ``params`` holds
one section per algorithm (``open-loop``, ``closed-loop``, ``sor``,
``threshold``, ``alternating``) layered over the preset.  Every result file
embeds the fully resolved config, which replays the run exactly.

Exit codes: 0 success, 2 validation, 3 divergence, 4 I/O.
"""

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from datetime import datetime, timezone
from importlib import resources

import numpy as np

from . import formats, problems
from .errors import CimError, DivergenceError, InstanceFormatError, ValidationError
from .kernel import (
    CYCLES_PER_UPDATE,
    TilingConfig,
    estimate_cycles_overlapped,
    estimate_cycles_sequential,
)
from .presets import preset
from .schedules import ThresholdSchedule
from .solvers import (
    AlternatingConfig,
    ClosedLoopConfig,
    OpenLoopConfig,
    Recording,
    SorConfig,
    run_alternating,
    run_closed_loop,
    run_jacobi_sor,
    run_open_loop,
)

__all__ = ["main", "resolve_config", "execute", "EXIT_OK", "EXIT_VALIDATION", "EXIT_DIVERGENCE", "EXIT_IO"]

EXIT_OK, EXIT_VALIDATION, EXIT_DIVERGENCE, EXIT_IO = 0, 2, 3, 4

ALGORITHMS = ("open-loop", "closed-loop", "sor", "alternating")
GENERATORS = ("cdma", "cs-random", "cs-image")
BUNDLED = {"cdma16": "cdma16.ccim"}
SB_TILING = TilingConfig(8, 32, 32)
_PRECISION = {"f32": np.float32, "f64": np.float64}
_INSTANCE_KEYS = {
    "cdma": {"n": 16, "alpha": 1.25, "zeta": 0.0},
    "cs-random": {"n": 64, "alpha": 0.8, "a": 0.1, "zeta": 0.0},
    "cs-image": {"image": "phantom", "size": 16, "keep": 0.182, "alpha": 0.4, "gamma": 0.0,
                 "zeta": 0.0, "spread": 0.25},
}
_SECTIONS = ("open-loop", "closed-loop", "sor", "threshold", "alternating")
_ALT_DEFAULTS = {"inner": "open-loop", "r_init": "lasso", "l1_weight": 0.05, "lasso_iters": 500}


# -- instances ----------------------------------------------------------------


@dataclass
class Loaded:
    problem: object
    truth: np.ndarray = None
    truth_kind: str = None  # "spins" or "signal"
    observation: np.ndarray = None
    observed: np.ndarray = None


def _bundled_path(name):
    if name not in BUNDLED:
        raise ValidationError(f"unknown bundled instance {name!r}, choose from {sorted(BUNDLED)}", "instance.bundled")
    return str(resources.files("cybercim") / "data" / BUNDLED[name])


def _read_file_instance(path, truth_path, dtype):
    if not os.path.exists(path):
        raise FileNotFoundError(f"instance file not found: {path}")
    if path.endswith(".csv"):
        inst = formats.read_instance_csv(path, dtype)
    else:
        inst = formats.read_instance(path, dtype)
    truth_path = truth_path or (path + ".truth.csv" if os.path.exists(path + ".truth.csv") else None)
    if truth_path is None:
        return Loaded(inst)
    truth = formats.read_vector_csv(truth_path)
    if truth.size != inst.n:
        raise ValidationError(f"truth has {truth.size} entries, instance has {inst.n}", "instance.truth")
    kind = "spins" if inst.mode.value == "ising" else "signal"
    return Loaded(inst, truth.astype(np.int8) if kind == "spins" else truth, kind)


def _load_image(spec):
    src = spec["image"]
    if src == "phantom":
        img = problems.phantom(int(spec["size"]))
    elif not os.path.exists(src):
        raise FileNotFoundError(f"image file not found: {src}")
    elif src.endswith((".pgm", ".PGM")):
        img = problems.read_pgm(src)
    else:
        img = problems.read_raw_f32(src)
    if spec.get("keep") is not None:
        img, _ = problems.sparsify_haar(img, float(spec["keep"]))
    return img


def build_instance(spec, dtype):
    """Instance and ground truth for a resolved instance spec."""
    if "bundled" in spec:
        return _read_file_instance(_bundled_path(spec["bundled"]), None, dtype)
    if "file" in spec:
        return _read_file_instance(spec["file"], spec.get("truth"), dtype)
    gen = spec["generator"]
    if gen == "cdma":
        c = problems.gen_cdma(int(spec["n"]), spec["alpha"], spec["zeta"], spec["seed"], dtype=dtype)
        return Loaded(c.problem, c.truth, "spins")
    if gen == "cs-random":
        c = problems.gen_cs_random(int(spec["n"]), spec["alpha"], spec["a"], spec["zeta"], spec["seed"], dtype=dtype)
    else:
        c = problems.gen_cs_image(_load_image(spec), spec["alpha"], spec["gamma"], spec["seed"],
                                  spec["zeta"], spec["spread"], dtype=dtype)
    return Loaded(c.problem, c.truth_x, "signal", c.observation, c.observed)


def _resolve_instance(spec, seed):
    if not isinstance(spec, dict):
        raise ValidationError("must be an object", "instance")
    spec = dict(spec)
    sources = [k for k in ("generator", "file", "bundled") if k in spec]
    if len(sources) != 1:
        raise ValidationError("exactly one of generator, file, bundled is required", "instance")
    if "generator" not in spec:
        extra = set(spec) - {"file", "truth", "bundled"}
        if extra:
            raise ValidationError(f"unknown key(s) {sorted(extra)}", "instance")
        return spec
    gen = spec["generator"]
    if gen not in GENERATORS:
        raise ValidationError(f"unknown generator {gen!r}, choose from {list(GENERATORS)}", "instance.generator")
    allowed = _INSTANCE_KEYS[gen]
    extra = set(spec) - set(allowed) - {"generator", "seed"}
    if extra:
        raise ValidationError(f"unknown key(s) {sorted(extra)} for generator {gen}", "instance")
    out = {"generator": gen, **allowed, **spec}
    out.setdefault("seed", seed)
    return out


# -- config resolution --------------------------------------------------------


def _make(cls, params, where):
    names = {f.name for f in fields(cls)}
    bad = sorted(set(params) - names)
    if bad:
        raise ValidationError(f"unknown parameter(s) {bad}", where)
    try:
        return cls(**params)
    except ValidationError as exc:
        raise ValidationError(str(exc), where) from None
    except TypeError as exc:
        raise ValidationError(str(exc), where) from None


def _default_preset(inst_spec, loaded):
    if "generator" in inst_spec:
        return inst_spec["generator"]
    return "cdma" if loaded.problem.mode.value == "ising" else "cs-random"


def resolve_config(raw, overrides=None):
    """Fill defaults, validate and return ``(resolved_config, loaded_instance)``.

    The resolved config is idempotent: resolving it again gives the same
    dict, which is what makes result files replayable.
    """
    if not isinstance(raw, dict):
        raise ValidationError("config must be a JSON object", "config")
    cfg = dict(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = value
    known = {"command", "instance", "algorithm", "preset", "params", "seed", "precision",
             "tiling", "support", "record"}
    extra = set(cfg) - known
    if extra:
        raise ValidationError(f"unknown key(s) {sorted(extra)}", "config")
    seed = cfg.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ValidationError(f"must be a non-negative integer, got {seed!r}", "seed")
    algorithm = cfg.get("algorithm", "open-loop")
    if algorithm not in ALGORITHMS:
        raise ValidationError(f"unknown algorithm {algorithm!r}, choose from {list(ALGORITHMS)}", "algorithm")
    precision = cfg.get("precision", "f32")
    if precision not in _PRECISION:
        raise ValidationError(f"must be one of {sorted(_PRECISION)}, got {precision!r}", "precision")
    inst_spec = _resolve_instance(cfg.get("instance", {"bundled": "cdma16"}), seed)
    loaded = build_instance(inst_spec, _PRECISION[precision])
    inst = loaded.problem

    pname = cfg.get("preset") or _default_preset(inst_spec, loaded)
    base = preset(pname)
    user = cfg.get("params") or {}
    if not isinstance(user, dict) or set(user) - set(_SECTIONS):
        raise ValidationError(f"must map sections {list(_SECTIONS)} to objects", "params")
    merged = {}
    for sec in _SECTIONS:
        merged[sec] = {**base.get(sec, {}), **(user.get(sec) or {})}
    merged["alternating"] = {**_ALT_DEFAULTS, **merged["alternating"]}
    if loaded.observation is None and "r_init" not in (user.get("alternating") or {}):
        merged["alternating"]["r_init"] = "zeros"

    if algorithm == "alternating":
        inner = merged["alternating"]["inner"]
        if inner not in ("open-loop", "closed-loop"):
            raise ValidationError(f"must be open-loop or closed-loop, got {inner!r}", "params.alternating.inner")
        if merged["alternating"]["r_init"] not in ("lasso", "zeros"):
            raise ValidationError("must be 'lasso' or 'zeros'", "params.alternating.r_init")
        if merged["alternating"]["r_init"] == "lasso" and loaded.observation is None:
            raise ValidationError("LASSO start needs a generated instance with an observation matrix",
                                  "params.alternating.r_init")
        sections = ["alternating", inner, "sor", "threshold"]
    else:
        sections = [algorithm]
    params = {sec: merged[sec] for sec in sections}
    # building the objects validates every field before any compute
    _solver_objects(algorithm, params, seed)

    if algorithm in ("sor", "alternating") and inst.diag_inv is None:
        raise ValidationError(f"{algorithm} needs an instance with an inverse-diagonal vector (QUBO)", "instance")
    if algorithm == "alternating" and inst.mode.value != "qubo":
        raise ValidationError("alternating needs a QUBO instance", "instance")

    tiling = cfg.get("tiling")
    if tiling is None:
        tiling = asdict(TilingConfig.for_size(inst.n))
    tiling = asdict(_make(TilingConfig, tiling, "tiling").validate(inst.n))

    out = {
        "instance": inst_spec,
        "algorithm": algorithm,
        "preset": pname,
        "params": params,
        "seed": seed,
        "precision": precision,
        "tiling": tiling,
    }
    if algorithm == "sor":
        support = cfg.get("support", "truth")
        _support_vector(support, loaded)
        out["support"] = support
    record = cfg.get("record")
    if record is not None:
        if algorithm not in ("open-loop", "closed-loop"):
            raise ValidationError("trajectories are recorded for open-loop and closed-loop only", "trajectory")
        out["record"] = asdict(_make(Recording, record, "record"))
    return out, loaded


def _support_vector(support, loaded):
    if support == "truth":
        if loaded.truth is None or loaded.truth_kind != "signal":
            raise ValidationError("'truth' support needs a compressed-sensing instance with ground truth", "support")
        return (loaded.truth != 0).astype(np.int8)
    if isinstance(support, str):
        if not os.path.exists(support):
            raise FileNotFoundError(f"support file not found: {support}")
        support = formats.read_vector_csv(support)
    q = np.asarray(support)
    if q.shape != (loaded.problem.n,) or not np.isin(q, (0, 1)).all():
        raise ValidationError(f"must be a 0/1 vector of length {loaded.problem.n}", "support")
    return q.astype(np.int8)


def _solver_objects(algorithm, params, seed):
    if algorithm == "open-loop":
        return _make(OpenLoopConfig, {**params["open-loop"], "seed": seed}, "params.open-loop")
    if algorithm == "closed-loop":
        return _make(ClosedLoopConfig, {**params["closed-loop"], "seed": seed}, "params.closed-loop")
    if algorithm == "sor":
        return _make(SorConfig, params["sor"], "params.sor")
    alt = params["alternating"]
    extra = set(alt) - set(_ALT_DEFAULTS)
    if extra:
        raise ValidationError(f"unknown parameter(s) {sorted(extra)}", "params.alternating")
    inner = _solver_objects(alt["inner"], params, seed)
    return AlternatingConfig(
        inner=inner,
        sor=_make(SorConfig, params["sor"], "params.sor"),
        threshold=_make(ThresholdSchedule, params["threshold"], "params.threshold"),
    )


# -- execution ----------------------------------------------------------------


def _metric(loaded, res):
    if loaded.truth is None:
        return None
    if loaded.truth_kind == "spins":
        return {"ber": problems.ber(res.spins, loaded.truth)}
    signal = res.signal
    if signal is None:
        signal = loaded.problem.aux_r.astype(np.float64) * res.spins
    return {"rmse": problems.rmse(signal, loaded.truth)}


def execute(config, loaded=None, workers=1):
    """Run a resolved config; returns ``(result_dict, RunResult)``."""
    if loaded is None:
        config, loaded = resolve_config(config)
    inst = loaded.problem
    alg = config["algorithm"]
    solver_cfg = _solver_objects(alg, config["params"], config["seed"])
    tiling = TilingConfig(**config["tiling"])
    record = Recording(**config["record"]) if "record" in config else None
    t0 = time.perf_counter()
    if alg == "open-loop":
        res = run_open_loop(inst, solver_cfg, record, tiling, workers)
    elif alg == "closed-loop":
        res = run_closed_loop(inst, solver_cfg, record, tiling, workers)
    elif alg == "sor":
        q = _support_vector(config["support"], loaded)
        res = run_jacobi_sor(inst, q, solver_cfg, tiling=tiling, workers=workers, residual_every=1)
    else:
        alt = config["params"]["alternating"]
        if alt["r_init"] == "lasso":
            r0 = problems.lasso_init(loaded.observation, loaded.observed, alt["l1_weight"], alt["lasso_iters"])
            solver_cfg = AlternatingConfig(solver_cfg.inner, solver_cfg.sor, solver_cfg.threshold, r0)
        truth = loaded.truth if loaded.truth_kind == "signal" else None
        res = run_alternating(inst, solver_cfg, truth=truth, tiling=tiling, workers=workers)
    wall_ms = (time.perf_counter() - t0) * 1e3
    out = {
        "algorithm": res.algorithm,
        "seed": config["seed"],
        "n": inst.n,
        "mode": inst.mode.value,
        "spins": res.spins,
        "energy": res.energy,
        "energy_trace": {"steps": res.trace.steps, "energies": res.trace.energies},
        "cycles_per_step": res.cycles_per_step,
        "config": config,
        "timing": {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "wall_ms": wall_ms,
        },
    }
    if res.signal is not None:
        out["signal"] = res.signal
    if res.residual is not None:
        out["residual"] = res.residual
    if res.outer:
        out["outer"] = res.outer
    metric = _metric(loaded, res)
    if metric is not None:
        out["metric"] = metric
    return formats.to_jsonable(out), res


def _load_json(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceFormatError(f"{path}: invalid JSON ({exc})") from None
    # a result file carries its resolved config
    if isinstance(data, dict) and isinstance(data.get("config"), dict) and "timing" in data:
        data = data["config"]
    return data


def _workers(arg):
    if arg is not None:
        value = arg
    elif os.environ.get("CCIM_WORKERS"):
        try:
            value = int(os.environ["CCIM_WORKERS"])
        except ValueError:
            raise ValidationError(f"must be an integer, got {os.environ['CCIM_WORKERS']!r}", "CCIM_WORKERS") from None
    else:
        value = os.cpu_count() or 1
    if value < 1:
        raise ValidationError(f"must be >= 1, got {value}", "workers")
    return value


def _instance_override(path):
    if path is None:
        return None
    if path.startswith("bundled:"):
        return {"bundled": path.split(":", 1)[1]}
    return {"file": path}


def cmd_solve(args):
    raw = _load_json(args.config) if args.config else {}
    overrides = {
        "seed": args.seed,
        "algorithm": args.algorithm,
        "precision": args.precision,
        "preset": args.preset,
        "instance": _instance_override(args.instance),
    }
    if args.trajectory:
        overrides["record"] = raw.get("record") or {}
    config, loaded = resolve_config(raw, overrides)
    result, res = execute(config, loaded, workers=_workers(args.workers) if args.workers else 1)
    if args.trajectory:
        formats.write_trajectory_csv(args.trajectory, res.trajectory)
    if args.out:
        formats.dump_json(args.out, result)
    else:
        json.dump(result, sys.stdout, indent=1, sort_keys=True)
        sys.stdout.write("\n")
    return EXIT_OK


# -- sweep --------------------------------------------------------------------

SWEEP_COLUMNS = ["algorithm", "seed", "param", "value", "metric", "energy", "wall_ms", "status"]


def parse_seeds(text):
    """``"0-19"``, ``"1,5,9"`` or a mix such as ``"0-3,10"``."""
    seeds = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = (int(x) for x in part.split("-", 1))
                seeds.extend(range(lo, hi + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise ValidationError(f"cannot parse {part!r}", "seeds") from None
    return seeds


def _seed_list(spec):
    if isinstance(spec, str):
        return parse_seeds(spec)
    if isinstance(spec, dict):
        return list(range(int(spec.get("start", 0)), int(spec["stop"])))
    if isinstance(spec, list):
        return [int(s) for s in spec]
    raise ValidationError("must be a list, a range object or a string like '0-19'", "seeds")


def _with_param(raw, name, value):
    cfg = json.loads(json.dumps(raw))
    inst = cfg.setdefault("instance", {})
    params = cfg.setdefault("params", {})
    if "generator" in inst and name in _INSTANCE_KEYS.get(inst["generator"], {}):
        inst[name] = value
    elif name == "eta" and cfg.get("algorithm") == "alternating":
        params.setdefault("threshold", {}).update(eta_init=value, eta_end=value)
    elif name in ("eta", "lam"):
        params.setdefault("open-loop" if name == "eta" else "closed-loop", {})[name] = value
    elif "." in name:
        sec, key = name.split(".", 1)
        params.setdefault(sec, {})[key] = value
    else:
        raise ValidationError(f"cannot map {name!r} to an instance or solver parameter", "grid.param")
    return cfg


def _sweep_task(task):
    config, meta = task
    row = dict(meta)
    t0 = time.perf_counter()
    try:
        result, _ = execute(config)
        metric = result.get("metric")
        row.update(metric=next(iter(metric.values())) if metric else "", energy=result["energy"], status="ok")
    except DivergenceError as exc:
        row.update(metric="", energy="", status=f"diverged: {exc}")
    except (CimError, ValueError, ArithmeticError) as exc:
        row.update(metric="", energy="", status=f"error: {exc}")
    row["wall_ms"] = round((time.perf_counter() - t0) * 1e3, 3)
    return row


def build_sweep(raw, seeds=None, algorithms=None):
    """Ordered ``(config, row_meta)`` tasks: grid value, then algorithm, then seed."""
    raw = dict(raw)
    seeds = _seed_list(seeds if seeds is not None else raw.pop("seeds", None) or [])
    raw.pop("seeds", None)
    if not seeds:
        raise ValidationError("seed list is empty", "seeds")
    algs = algorithms or raw.pop("algorithms", None) or [raw.get("algorithm", "open-loop")]
    raw.pop("algorithms", None)
    grid = raw.pop("grid", None)
    if grid is None:
        points = [("", None)]
    else:
        values = grid.get("values") if isinstance(grid, dict) else None
        if not values or "param" not in grid:
            raise ValidationError("grid needs a 'param' name and a nonempty 'values' list", "grid")
        points = [(grid["param"], v) for v in values]
    tasks = []
    for name, value in points:
        base = raw if name == "" else _with_param(raw, name, value)
        for alg in algs:
            for seed in seeds:
                cfg = dict(base, algorithm=alg, seed=seed)
                resolved, _ = resolve_config(cfg)
                meta = {"algorithm": alg, "seed": seed, "param": name, "value": "" if value is None else value}
                tasks.append((resolved, meta))
    return tasks


def run_sweep(tasks, workers=1):
    if workers == 1 or len(tasks) == 1:
        return [_sweep_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(_sweep_task, tasks))


def write_sweep_csv(fh, rows):
    w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def cmd_sweep(args):
    raw = _load_json(args.config) if args.config else {}
    if args.precision:
        raw["precision"] = args.precision
    if args.instance:
        raw["instance"] = _instance_override(args.instance)
    algorithms = args.algorithm if args.algorithm else None
    seeds = args.seeds if args.seeds is not None else (str(args.seed) if args.seed is not None else None)
    tasks = build_sweep(raw, seeds, algorithms)
    rows = run_sweep(tasks, _workers(args.workers))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_sweep_csv(fh, rows)
    else:
        write_sweep_csv(sys.stdout, rows)
    return EXIT_OK


# -- cycles and instances ---------------------------------------------------


def cycle_table(ns, algorithm="all", tiling=None, clock_mhz=None):
    algs = ["open-loop", "closed-loop", "sor", "sb"] if algorithm == "all" else [algorithm]
    rows = []
    for n in ns:
        for alg in algs:
            t = tiling or (SB_TILING if alg == "sb" else TilingConfig())
            if alg == "sb":
                c_e, cycles = "", estimate_cycles_overlapped(n, t)
            else:
                c_e = CYCLES_PER_UPDATE[alg]
                cycles = estimate_cycles_sequential(n, t, c_e)
            row = {"algorithm": alg, "n": n, "p_b": t.p_b, "p_r": t.p_r, "p_c": t.p_c,
                   "c_e": c_e, "cycles": cycles}
            if clock_mhz:
                row["time_us"] = round(cycles / clock_mhz, 3)
            rows.append(row)
    return rows


def cmd_estimate_cycles(args):
    if args.clock_mhz is not None and not args.clock_mhz > 0:
        raise ValidationError(f"must be > 0, got {args.clock_mhz}", "clock-mhz")
    given = [args.p_b, args.p_r, args.p_c]
    tiling = None
    if any(v is not None for v in given):
        default = SB_TILING if args.algorithm == "sb" else TilingConfig()
        tiling = TilingConfig(args.p_b or default.p_b, args.p_r or default.p_r, args.p_c or default.p_c)
    rows = cycle_table(args.n, args.algorithm, tiling, args.clock_mhz)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def cmd_gen_instance(args):
    spec = _load_json(args.config).get("instance", {}) if args.config else {}
    spec = dict(spec)
    if args.generator:
        spec["generator"] = args.generator
    spec.setdefault("generator", "cdma")
    for key in ("n", "alpha", "zeta", "a", "gamma", "image", "size", "keep", "spread"):
        value = getattr(args, key, None)
        if value is not None:
            spec[key] = value
    seed = args.seed if args.seed is not None else 0
    if args.seed is not None:
        spec["seed"] = seed
    spec = _resolve_instance(spec, seed)
    loaded = build_instance(spec, _PRECISION[args.precision or "f32"])
    formats.write_instance(args.out, loaded.problem)
    formats.write_vector_csv(args.out + ".truth.csv", loaded.truth)
    return EXIT_OK


# -- entry point --------------------------------------------------------------


def _parser():
    p = argparse.ArgumentParser(prog="cybercim", description="Software coherent Ising machine.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config (a result file also works)")
        sp.add_argument("--instance", help="instance file (.ccim or .csv) or bundled:<name>")
        sp.add_argument("--preset", help="parameter preset: cdma, cs-random, cs-image")
        sp.add_argument("--precision", choices=sorted(_PRECISION))
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--workers", type=int, help="worker count (env CCIM_WORKERS)")
        sp.add_argument("--seed", type=int)

    s = sub.add_parser("solve", help="run one instance/algorithm/seed")
    common(s)
    s.add_argument("--algorithm", choices=ALGORITHMS)
    s.add_argument("--trajectory", help="write step,spin,c,s_or_e CSV here")
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="seeds x parameter grid, one CSV row per run")
    common(w)
    w.add_argument("--seeds", help="e.g. 0-19 or 1,2,3")
    w.add_argument("--algorithm", action="append", choices=ALGORITHMS,
                   help="repeat to sweep several algorithms")
    w.set_defaults(func=cmd_sweep)

    e = sub.add_parser("estimate-cycles", help="cycle-model table")
    e.add_argument("--n", type=int, nargs="+", required=True)
    e.add_argument("--algorithm", default="all", choices=["open-loop", "closed-loop", "sor", "sb", "all"])
    e.add_argument("--p-b", type=int)
    e.add_argument("--p-r", type=int)
    e.add_argument("--p-c", type=int)
    e.add_argument("--clock-mhz", type=float)
    e.add_argument("--out")
    e.set_defaults(func=cmd_estimate_cycles)

    g = sub.add_parser("gen-instance", help="write a generated instance and its truth")
    g.add_argument("--config")
    g.add_argument("--generator", choices=GENERATORS)
    g.add_argument("--n", type=int)
    g.add_argument("--alpha", type=float)
    g.add_argument("--zeta", type=float)
    g.add_argument("--a", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--image", help="'phantom', a .pgm or a raw float32 file")
    g.add_argument("--size", type=int)
    g.add_argument("--keep", type=float)
    g.add_argument("--spread", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--precision", choices=sorted(_PRECISION))
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_instance)
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (InstanceFormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValidationError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
