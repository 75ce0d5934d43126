"""Command-line workflows: ``synthesize``, ``region``, ``evaluate``, ``compare``.

Each command reads a TOML configuration (validated against
``config_schema.json``), writes plain-text outputs into ``--out`` and exits
with 0 on success, 2 on a configuration error, 3 when the QoS floors are
infeasible and 4 when exhaustive enumeration would exceed its budget. On
failure ``error.json`` in the output directory records the cause.

Outputs are pure functions of the configuration and seed: no timestamps,
no wall-clock figures, floats written with 17 significant digits.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import os
import sys
import tempfile
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .baselines import KINDS, BaselinePolicy, goodman_target_sinr
from .evaluation import paired_difference, simulate
from .model import (Psi, UtilitySpec, build_smallcell_scenario, interference_scenario,
                    mac_scenario)
from .observe import build_state_alphabet, discrete_state_alphabet
from .presets import Problem, observation_for
from .region import (BudgetExceeded, enumerate_vertices, exhaustive_frontier, lambda_grid,
                     qos_mixture_lp)
from .synth import DecisionProfile, multistart_synthesize, per_user_utilities

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_BUDGET = 0, 1, 2, 3, 4
DECISION_MAGIC = "# partialcsi decision functions v1"


class ConfigError(ValueError):
    """Configuration failed validation."""


class QoSInfeasible(RuntimeError):
    """No lottery over the vertex profiles meets the QoS floors."""


# -- configuration ---------------------------------------------------------------

def load_schema():
    return json.loads(resources.files("partialcsi").joinpath("config_schema.json").read_text())


def parse_config(text):
    try:
        cfg = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    validate_config(cfg)
    return cfg


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config(text)


def validate_config(cfg):
    """Schema check followed by the cross-field range checks."""
    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from exc
    sc = cfg["scenario"]
    K = sc["K"]
    if "noise" in sc and "snr_db" in sc:
        raise ConfigError("scenario: give either noise or snr_db, not both")
    if sc["topology"] == "smallcell" and len(sc.get("ms_coords", [[0, 0]] * 9)) != K:
        raise ConfigError("scenario: ms_coords must list K points")
    if "p_total" in sc and sc["p_total"] < sc.get("p_max", 0.1):
        raise ConfigError("scenario: p_total must be >= p_max")
    ut = cfg["utility"]
    w = ut.get("weights")
    if w is not None and (len(w) != K or abs(sum(w) - 1.0) > 1e-9):
        raise ConfigError("utility: weights must have K entries summing to 1")
    if ut["kind"] == "energy_efficiency" and ut.get("psi") in ("packet_success", "outage") \
            and "psi_param" not in ut:
        raise ConfigError("utility: psi_param is required for this psi")
    obs = cfg.get("observation", {})
    esnr = obs.get("esnr_db")
    if isinstance(esnr, str) and esnr != "inf":
        raise ConfigError("observation: esnr_db must be a number or \"inf\"")
    if obs.get("structure") == "noisy_individual" and esnr is None:
        raise ConfigError("observation: noisy_individual needs esnr_db")
    qos = cfg.get("region", {}).get("qos")
    if qos is not None and len(qos) != K:
        raise ConfigError("region: qos must have K entries")
    if "compare" in cfg:
        axis = cfg["compare"]["axis"]
        section, key = axis.split(".")
        if key not in load_schema()["properties"][section]["properties"]:
            raise ConfigError(f"compare: unknown axis {axis!r}")


def config_hash(cfg, seed):
    blob = json.dumps({"config": cfg, "seed": seed}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def build_spec(cfg):
    ut = cfg["utility"]
    K = cfg["scenario"]["K"]
    w = tuple(ut.get("weights", [1.0 / K] * K))
    if ut["kind"] == "shannon_rate":
        return UtilitySpec("shannon_rate", Psi("shannon"), w)
    name = ut.get("psi", "shannon")
    param = ut.get("psi_param")
    if name == "packet_success":
        param = int(param)
    return UtilitySpec("energy_efficiency", Psi(name, param), w)


def build_problem(cfg, seed=0):
    """Scenario, states, observation and utility described by ``cfg``."""
    sc = dict(cfg["scenario"])
    try:
        topo = sc.pop("topology")
        K = sc.pop("K")
        p_max = sc.get("p_max", 0.1)
        if "snr_db" in sc:
            sc["noise"] = p_max / 10 ** (sc.pop("snr_db") / 10)
        common = {k: sc[k] for k in ("B", "p_max", "noise", "p0", "r0", "n_levels", "spacing")
                  if k in sc}
        if "power_levels" in sc:
            common["power_levels"] = np.asarray(sc["power_levels"], dtype=float)
        if topo == "interference":
            kw = {k: sc[k] for k in ("direct_mean", "cross_mean", "cross_db", "p_total") if k in sc}
            scenario = interference_scenario(K, **{**common, **kw})
        elif topo == "mac":
            kw = {k: sc[k] for k in ("gain_mean", "p_total") if k in sc}
            scenario = mac_scenario(K, **{**common, **kw})
        else:
            kw = {"ms_coords": sc["ms_coords"]} if "ms_coords" in sc else {}
            scenario = build_smallcell_scenario(sc.get("isd", 5.0), **kw, **common)
        st_cfg = cfg.get("states", {})
        if "levels" in st_cfg:
            states = discrete_state_alphabet(scenario, st_cfg["levels"])
        else:
            states = build_state_alphabet(scenario, st_cfg.get("n_cells", 4))
        obs = cfg.get("observation", {})
        esnr = obs.get("esnr_db")
        esnr = math.inf if esnr == "inf" else esnr
        observation = observation_for(obs.get("structure", "individual"), scenario, states,
                                      esnr, obs.get("mc_samples", 100_000), seed)
        spec = build_spec(cfg)
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    if len(spec.weights) != scenario.K:
        raise ConfigError("utility: weights must have K entries")
    return Problem(scenario, states, observation, spec)


# -- file formats ------------------------------------------------------------------

def fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows):
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def decision_text(profiles, problem, seed, chash):
    """Header plus one row per (profile, transmitter, signal)."""
    sc, ob = problem.scenario, problem.observation
    head = [
        DECISION_MAGIC,
        f"# K={sc.K} B={sc.B} n_actions={len(sc.actions)} "
        f"n_signals={','.join(str(n) for n in ob.n_signals)} n_profiles={len(profiles)}",
        f"# structure={ob.label}",
        "# power_levels=" + " ".join(fmt(p) for p in sc.power_levels),
    ]
    for i, vars_i in enumerate(ob.observed_vars):
        for v in vars_i:
            bnd = problem.states.quantizers[v].boundaries
            head.append(f"# boundaries tx={i} var={v}: " + " ".join(fmt(b) for b in bnd))
    head += [f"# seed={seed}", f"# config_sha256={chash}",
             "# profile tx signal action " + " ".join(f"p{b + 1}" for b in range(sc.B))]
    acts = sc.actions.actions
    rows = []
    for k, prof in enumerate(profiles):
        for i, table in enumerate(prof.tables):
            for s, a in enumerate(table):
                rows.append(" ".join([str(k), str(i), str(s), str(int(a))]
                                     + [fmt(p) for p in acts[a]]))
    return "\n".join(head + rows) + "\n"


def read_decision_file(path):
    """Profiles and header fields of a decision-function file."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != DECISION_MAGIC:
        raise ValueError("not a decision-function file")
    header = {}
    for ln in lines:
        if ln.startswith("# ") and "=" in ln and not ln.startswith("# boundaries"):
            for tok in ln[2:].split(" "):
                if "=" in tok:
                    key, val = tok.split("=", 1)
                    header.setdefault(key, val)
    K = int(header["K"])
    n_sig = [int(x) for x in header["n_signals"].split(",")]
    n_prof = int(header["n_profiles"])
    tables = [[np.full(n, -1, dtype=np.int64) for n in n_sig] for _ in range(n_prof)]
    for ln in lines:
        if ln.startswith("#") or not ln.strip():
            continue
        k, i, s, a = (int(x) for x in ln.split()[:4])
        tables[k][i][s] = a
    if any((t < 0).any() for prof in tables for t in prof) or any(len(p) != K for p in tables):
        raise ValueError("decision-function file is incomplete")
    return [DecisionProfile(tuple(p)) for p in tables], header


def _synthesize(problem, cfg, seed):
    alg = cfg.get("algorithm", {})
    return multistart_synthesize(problem.scenario, problem.observation, problem.spec,
                                 n_starts=alg.get("n_starts", 1), seed=seed,
                                 eps=alg.get("eps", 1e-9), iter_max=alg.get("iter_max", 100),
                                 stop=alg.get("stop", "fixed_point"))


def _baseline(kind, spec):
    if kind == "goodman_inversion":
        try:
            return BaselinePolicy(kind, {"beta": goodman_target_sinr(spec.psi)})
        except ValueError as exc:
            raise ConfigError(f"goodman_inversion: {exc}") from exc
    return BaselinePolicy(kind)


# -- commands ----------------------------------------------------------------------

def cmd_synthesize(cfg, seed, out, threads=1):
    """Decision functions, per-sweep trace and exact per-user utilities."""
    problem = build_problem(cfg, seed)
    rep = _synthesize(problem, cfg, seed)
    chash = config_hash(cfg, seed)
    out = Path(out)
    atomic_write(out / "decision_functions.txt", decision_text([rep.profile], problem, seed, chash))
    rows = [(k, w, rep.ops[k - 1] if k else 0) for k, w in enumerate(rep.trace)]
    atomic_write(out / "synth_trace.csv", csv_text(["sweep", "w_lambda", "utility_terms"], rows))
    u = per_user_utilities(rep.profile, problem.scenario, problem.observation, problem.spec)
    atomic_write(out / "utilities.csv",
                 csv_text(["user", "utility"], [(i + 1, x) for i, x in enumerate(u)]))
    return rep


def cmd_region(cfg, seed, out, threads=1):
    """Exhaustive frontier and, with QoS floors, the optimal lottery."""
    problem = build_problem(cfg, seed)
    sc, ob, spec = problem.scenario, problem.observation, problem.spec
    reg = cfg.get("region", {})
    budget = reg.get("budget", 1_000_000)
    grid = lambda_grid(sc.K, reg.get("n_weights", 101), seed)
    front = exhaustive_frontier(sc, ob, spec, grid, budget)
    profiles, ids = [], {}

    def pid(prof):
        if prof not in ids:
            ids[prof] = len(profiles)
            profiles.append(prof)
        return ids[prof]

    header = [f"lambda_{i + 1}" for i in range(sc.K)] + [f"U_{i + 1}" for i in range(sc.K)] + ["profile_id"]
    rows = [(*pt.weights, *pt.payoff, pid(pt.achiever)) for pt in front.points]
    out = Path(out)
    solution = None
    if "qos" in reg:
        vertices = enumerate_vertices(sc, ob, spec, budget, seed=seed)
        solution = qos_mixture_lp(vertices, spec.weights, reg["qos"])
        if solution.status != "optimal":
            raise QoSInfeasible("no lottery over the vertex profiles meets the QoS floors")
        mix_rows = []
        for k, (p, prof) in enumerate(solution.mix.support):
            pay = per_user_utilities(prof, sc, ob, spec)
            mix_rows.append((k, p, pid(prof), *pay))
    chash = config_hash(cfg, seed)
    atomic_write(out / "frontier.csv", csv_text(header, rows))
    atomic_write(out / "region_profiles.txt", decision_text(profiles, problem, seed, chash))
    if solution is not None:
        atomic_write(out / "mixture.csv", csv_text(
            ["atom", "probability", "profile_id"] + [f"U_{i + 1}" for i in range(sc.K)], mix_rows))
        atomic_write(out / "mixture_summary.csv", csv_text(
            ["status", "value"] + [f"U_{i + 1}" for i in range(sc.K)],
            [(solution.status, solution.value, *solution.payoff)]))
    return front, solution


def _eval_rows(label, res):
    return [(label, i + 1, m, s, res.n_blocks, res.seed, res.draw_digest)
            for i, (m, s) in enumerate(zip(res.means, res.stderrs))]


def cmd_evaluate(cfg, seed, out, threads=1):
    """Monte Carlo utilities of one policy."""
    problem = build_problem(cfg, seed)
    ev = cfg.get("evaluation", {})
    kind = ev.get("policy", "synthesized")
    if kind == "synthesized":
        if "decision_file" in ev:
            try:
                policy = read_decision_file(ev["decision_file"])[0][0]
                policy.validate(problem.scenario, problem.observation)
            except (OSError, ValueError, KeyError) as exc:
                raise ConfigError(f"evaluation.decision_file: {exc}") from exc
        else:
            policy = _synthesize(problem, cfg, seed).profile
    else:
        policy = _baseline(kind, problem.spec)
    res = simulate(policy, problem.scenario, problem.observation, problem.spec,
                   ev.get("n_blocks", 100_000), seed, ev.get("channel", "continuous"), threads)
    atomic_write(Path(out) / "evaluation.csv", csv_text(
        ["policy", "user", "mean", "stderr", "n_blocks", "seed", "draw_digest"], _eval_rows(kind, res)))
    return res


def _with_axis(cfg, axis, value):
    section, key = axis.split(".")
    new = copy.deepcopy(cfg)
    new.setdefault(section, {})[key] = value
    if key == "snr_db":
        new["scenario"].pop("noise", None)
    if key == "noise":
        new["scenario"].pop("snr_db", None)
    if isinstance(new[section].get(key), float) and key in ("n_cells", "n_levels", "K", "B"):
        new[section][key] = int(value)
    validate_config(new)
    return new


def cmd_compare(cfg, seed, out, threads=1):
    """Synthesized policy against baselines along one parameter axis, with
    common random numbers at every axis point."""
    cmp_cfg = cfg["compare"]
    ev = cfg.get("evaluation", {})
    n_blocks = ev.get("n_blocks", 100_000)
    channel = ev.get("channel", "continuous")
    names = cmp_cfg.get("baselines", list(KINDS))
    rows = []
    for value in cmp_cfg["values"]:
        point = _with_axis(cfg, cmp_cfg["axis"], value)
        problem = build_problem(point, seed)
        sc, ob, spec = problem.scenario, problem.observation, problem.spec
        syn = simulate(_synthesize(problem, point, seed).profile, sc, ob, spec,
                       n_blocks, seed, channel, threads)
        results = [("synthesized", syn)]
        for name in names:
            results.append((name, simulate(_baseline(name, spec), sc, ob, spec,
                                           n_blocks, seed, channel, threads)))
        for name, res in results:
            diff, se = (0.0, 0.0) if res is syn else paired_difference(syn, res)
            rows.append((value, name, res.sum_mean, res.sum_stderr, diff, se, res.draw_digest))
    atomic_write(Path(out) / "compare.csv", csv_text(
        ["axis_value", "policy", "sum_mean", "sum_stderr", "synthesized_minus_policy",
         "diff_stderr", "draw_digest"], rows))
    return rows


COMMANDS = {"synthesize": cmd_synthesize, "region": cmd_region,
            "evaluate": cmd_evaluate, "compare": cmd_compare}


def _parser():
    p = argparse.ArgumentParser(prog="partialcsi", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        s = sub.add_parser(name, help=" ".join(fn.__doc__.split()).rstrip("."))
        s.add_argument("--config", required=True, help="TOML configuration file")
        s.add_argument("--seed", type=int, default=None, help="seed (overrides the config)")
        s.add_argument("--out", required=True, help="output directory")
        s.add_argument("--threads", type=int, default=1, help="Monte Carlo worker threads")
    return p


def _fail(out, code, exc):
    record = {"exit_code": code, "error": type(exc).__name__, "message": str(exc)}
    try:
        atomic_write(Path(out) / "error.json", json.dumps(record, indent=2, sort_keys=True) + "\n")
    except OSError:
        pass
    print(f"error: {exc}", file=sys.stderr)
    return code


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = cfg.get("seed", 0) if args.seed is None else args.seed
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.command == "compare" and "compare" not in cfg:
            raise ConfigError("compare needs a [compare] section")
        COMMANDS[args.command](cfg, seed, args.out, args.threads)
    except ConfigError as exc:
        return _fail(args.out, EXIT_CONFIG, exc)
    except QoSInfeasible as exc:
        return _fail(args.out, EXIT_INFEASIBLE, exc)
    except BudgetExceeded as exc:
        return _fail(args.out, EXIT_BUDGET, exc)
    except Exception as exc:  # noqa: BLE001 - every failure leaves a record
        return _fail(args.out, EXIT_FAILURE, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
