"""Command-line entry points: train, eval, sweep, tune-pid.

Exit codes: 0 ok, 2 configuration error, 3 numeric failure, 4 corrupt artifact.
Every file written starts with ``#`` comment lines holding the resolved
configuration, so each result can be reproduced from its own artifacts.
"""
import argparse
import csv
import io
import os
import sys

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config, parse_config, resolved_text, set_key
from .errors import (AllCandidatesDiverged, CdprError, ConfigError, InfeasibleEquilibrium,
                     NonFiniteGradient, PolicyFileError)
from .persistence import atomic_write, load_policy, save_policy
from .pid import PidController, PidGains, search_gains
from .rl.training import METRIC_FIELDS, evaluate, train
from .trajectories import PolicyController, default_trajectories, dt_sweep, track

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ARTIFACT = 0, 2, 3, 4
EVAL_EPISODES = 100


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def csv_text(header_lines, columns, rows):
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n" if line else "#\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def config_header(command, cfg, extra=()):
    lines = [f"cdprlab {__version__} {command}"]
    lines += list(extra)
    lines += resolved_text(cfg).splitlines()
    return lines


# -- argument plumbing -------------------------------------------------------

def build_config(args):
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = ExperimentConfig()
    for item in args.set or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}", key=item)
        set_key(cfg, key.strip(), value)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "algo", None):
        set_key(cfg, "train.algo", args.algo)
    if getattr(args, "action_mode", None):
        set_key(cfg, "action.mode", args.action_mode)
    if getattr(args, "budget", None) is not None:
        set_key(cfg, "train.budget", str(args.budget))
    if getattr(args, "gains", None):
        set_key(cfg, "pid.gains", args.gains)
    return cfg.validate()


def parse_dt_list(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad dt list {text!r}", key="--dt") from None
    if not values or any(not v > 0 for v in values):
        raise ConfigError(f"dt values must be > 0: {text!r}", key="--dt")
    return values


def parse_gains(text):
    if text == "auto":
        return None
    try:
        kp, ki, kd = (float(v) for v in text.split(","))
        return PidGains(kp, ki, kd)
    except ValueError:
        raise ConfigError(f"gains must be 'auto' or 'kp,ki,kd', got {text!r}",
                          key="pid.gains") from None


def parse_trajectories(text):
    known = default_trajectories()
    names = list(known) if text == "all" else [t.strip() for t in text.split(",") if t.strip()]
    for name in names:
        if name not in known:
            raise ConfigError(f"unknown trajectory {name!r}; expected one of {sorted(known)} "
                              f"or 'all'", key="--trajectory")
    return [(name, known[name]) for name in names]


def make_controller(token, cfg):
    """``pid``, ``pid:kp,ki,kd`` or ``name:policy-file``."""
    name, sep, arg = token.partition(":")
    if name == "pid":
        gains = parse_gains(arg if sep else cfg.pid.gains)
        return PidController(gains, "pid", cfg.pid.integral_limit), None
    if not sep:
        raise ConfigError(f"controller {token!r} needs a policy file (name:path)",
                          key="--controllers")
    loaded = load_policy(arg)
    return PolicyController(loaded.policy, name), f"{name} = {arg}"


def controller_list(args, cfg):
    if args.controllers:
        tokens = [t.strip() for t in args.controllers.split(",")]
        # "pid:15,0.5,5" contains commas: glue numeric pieces back on
        merged = []
        for t in tokens:
            if merged and merged[-1].startswith("pid:") and _is_number(t):
                merged[-1] += "," + t
            else:
                merged.append(t)
        tokens = merged
    elif getattr(args, "policy", None):
        tokens = [f"policy:{args.policy}"]
    else:
        tokens = [getattr(args, "controller", None) or "pid"]
    controllers, notes = [], []
    for t in tokens:
        ctrl, note = make_controller(t, cfg)
        controllers.append(ctrl)
        if note:
            notes.append(f"controller {note}")
    return controllers, notes


def _is_number(text):
    try:
        float(text)
        return True
    except ValueError:
        return False


def tuned(ctrl, cfg, spec, dt):
    """PID with gains fixed for this (trajectory, dt); other controllers unchanged."""
    if isinstance(ctrl, PidController) and ctrl.auto:
        params = cfg.dynamics_obj().with_dt(dt)
        gains, _, _ = search_gains(cfg.geometry_obj(), params, spec)
        return PidController(gains, ctrl.name, ctrl.integral_limit)
    return ctrl


# -- commands ------------------------------------------------------------------

def cmd_train(args, out):
    cfg = build_config(args)
    if not args.out:
        raise ConfigError("--out is required", key="--out")
    algo, budget, seed = cfg.train.algo, cfg.train.budget, cfg.seed
    metrics_path = args.metrics or args.out + ".metrics.csv"
    ckpt_path = args.out + ".ckpt"
    meta = {"algo": algo, "seed": seed, "budget": budget, "config": resolved_text(cfg)}

    def on_iteration(result):
        interval = cfg.train.checkpoint_interval
        if interval and (len(result.metrics) % interval == 0):
            save_policy(ckpt_path, _saveable(result.policy), dict(meta, stage=result.stage))

    try:
        result = train(algo, cfg, budget, seed, on_iteration=on_iteration)
        policy = _saveable(result.policy)
        report = evaluate(policy, cfg, EVAL_EPISODES, seed, result.stage)
    finally:
        if os.path.exists(ckpt_path):
            os.unlink(ckpt_path)
    meta.update(stage=result.stage, eval_episodes=EVAL_EPISODES, eval_seed=seed,
                eval=report)
    rows = [[m[k] for k in METRIC_FIELDS] for m in result.metrics]
    header = config_header("train", cfg, [f"policy = {os.path.basename(args.out)}"])
    metrics = csv_text(header, METRIC_FIELDS, rows)
    save_policy(args.out, policy, meta)
    atomic_write(metrics_path, metrics.encode("utf-8"))
    last = result.metrics[-1] if result.metrics else {}
    out.write(f"algo {algo} steps {budget} iterations {len(result.metrics)} "
              f"stage {result.stage}\n")
    if last:
        out.write(f"final mean_episode_reward {fmt(last['mean_episode_reward'])} "
                  f"mean_episode_length {fmt(last['mean_episode_length'])}\n")
    out.write(f"eval success_rate {fmt(report['success_rate'])} "
              f"mean_reward {fmt(report['mean_reward'])}\n")
    return EXIT_OK


def _saveable(policy):
    return policy.actor_policy() if hasattr(policy, "actor_policy") else policy


def cmd_eval(args, out):
    cfg = build_config(args)
    if args.episodes:
        return _eval_episodes(args, cfg, out)
    dts = parse_dt_list(args.dt)
    if len(dts) != 1:
        raise ConfigError("eval takes a single --dt (use sweep for several)", key="--dt")
    dt = dts[0]
    trajectories = parse_trajectories(args.trajectory)
    controllers, notes = controller_list(args, cfg)
    geom, params = cfg.geometry_obj(), cfg.dynamics_obj()
    results = {}
    for tname, spec in trajectories:
        for ctrl in controllers:
            runner = tuned(ctrl, cfg, spec, dt)
            res = track(runner, geom, params, spec, dt)
            results[tname, ctrl.name] = res
            extra = ""
            if isinstance(runner, PidController):
                extra = f" gains {runner.gains.as_text()}"
                notes.append(f"gains {tname} {ctrl.name} = {runner.gains.as_text()}")
            flag = " diverged" if res.diverged else ""
            out.write(f"{tname} {ctrl.name} rms {fmt(res.rms)}{flag}{extra}\n")

    header = config_header("eval", cfg, notes + [f"dt = {dt!r}"])
    writes = []
    if args.csv:
        if len(results) != 1:
            raise ConfigError("--csv needs exactly one controller and one trajectory; use "
                              "--summary for tables", key="--csv")
        res = next(iter(results.values()))
        rows = [[t, *r, *a, e] for t, r, a, e in zip(res.times, res.reference, res.actual,
                                                        res.errors)]
        writes.append((args.csv, csv_text(header, ["t", "ref_x", "ref_y", "ref_z", "x", "y",
                                                   "z", "err"], rows)))
    if args.summary:
        names = [c.name for c in controllers]
        rows = []
        for tname, _ in trajectories:
            div = [n for n in names if results[tname, n].diverged]
            rows.append([tname] + [results[tname, n].rms for n in names] + [";".join(div)])
        writes.append((args.summary, csv_text(header, ["trajectory"] + names + ["diverged"],
                                              rows)))
    for path, text in writes:
        atomic_write(path, text.encode("utf-8"))
    return EXIT_OK


def _eval_episodes(args, cfg, out):
    if not args.policy:
        raise ConfigError("--episodes needs --policy", key="--episodes")
    loaded = load_policy(args.policy)
    header = loaded.header
    if "config" in header and not args.config and not args.set:
        cfg = parse_config(header["config"]).validate()
    seed = args.seed if args.seed is not None else header.get("eval_seed", cfg.seed)
    report = evaluate(loaded.policy, cfg, args.episodes, seed, header.get("stage"))
    out.write(f"episodes {args.episodes} success_rate {fmt(report['success_rate'])} "
              f"mean_reward {fmt(report['mean_reward'])} "
              f"mean_length {fmt(report['mean_length'])}\n")
    return EXIT_OK


def cmd_sweep(args, out):
    cfg = build_config(args)
    dts = parse_dt_list(args.dt)
    trajectories = parse_trajectories(args.trajectory)
    if len(trajectories) != 1:
        raise ConfigError("sweep runs one trajectory", key="--trajectory")
    tname, spec = trajectories[0]
    controllers, notes = controller_list(args, cfg)
    rows = dt_sweep(controllers, spec, dts, cfg.geometry_obj(), cfg.dynamics_obj())
    for r in rows:
        out.write(f"{r.controller} dt {fmt(r.dt)} rms {fmt(r.rms)}"
                  f"{' diverged' if r.diverged else ''}{' ' + r.gains if r.gains else ''}\n")
    if args.csv:
        header = config_header("sweep", cfg, notes + [f"trajectory = {tname}"])
        text = csv_text(header, ["controller", "dt", "rms", "diverged", "gains"],
                        [list(r) for r in rows])
        atomic_write(args.csv, text.encode("utf-8"))
    return EXIT_OK


def cmd_tune_pid(args, out):
    cfg = build_config(args)
    dts = parse_dt_list(args.dt)
    trajectories = parse_trajectories(args.trajectory)
    geom = cfg.geometry_obj()
    rows = []
    for tname, spec in trajectories:
        for dt in dts:
            params = cfg.dynamics_obj().with_dt(dt)
            try:
                gains, rms, table = search_gains(geom, params, spec)
                out.write(f"{tname} dt {fmt(dt)} best {gains.as_text()} rms {fmt(rms)}\n")
            except AllCandidatesDiverged as exc:
                out.write(f"{tname} dt {fmt(dt)} all candidates diverged\n")
                table = getattr(exc, "table", [])
                gains = None
            for g, r, div in table:
                rows.append([tname, dt, g.as_text(), r, div, int(gains is not None and g == gains)])
    if args.csv:
        header = config_header("tune-pid", cfg)
        text = csv_text(header, ["trajectory", "dt", "gains", "rms", "diverged", "best"], rows)
        atomic_write(args.csv, text.encode("utf-8"))
    return EXIT_OK


# -- entry point -----------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="cdprlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cdprlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value configuration file "
                       "(relative paths also searched in $CDPRLAB_CONFIG_DIR)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one configuration key (repeatable)")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("train", help="train a policy and write it with its metrics")
    common(p)
    p.add_argument("--algo", choices=("trpo", "ppo", "ddpg"))
    p.add_argument("--action-mode", choices=("continuous", "discrete"))
    p.add_argument("--budget", type=int, help="environment steps (train.budget)")
    p.add_argument("--out", required=True, help="policy file to write")
    p.add_argument("--metrics", help="metrics CSV (default: <out>.metrics.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="track trajectories, or replay reach episodes")
    common(p)
    p.add_argument("--controller", choices=("pid",), help="classical controller")
    p.add_argument("--gains", help="'auto' or 'kp,ki,kd' for the PID controller")
    p.add_argument("--policy", help="trained policy file")
    p.add_argument("--controllers", help="comma list: pid, pid:kp,ki,kd, name:policy-file")
    p.add_argument("--trajectory", default="circle", help="circle, spiral1, spiral2, list or all")
    p.add_argument("--dt", default="0.1", help="control interval in seconds")
    p.add_argument("--csv", help="per-step CSV (one controller, one trajectory)")
    p.add_argument("--summary", help="RMS table CSV: trajectories x controllers")
    p.add_argument("--episodes", type=int, help="instead of tracking, run N reach episodes")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="RMS tracking error over several control intervals")
    common(p)
    p.add_argument("--controllers", default="pid")
    p.add_argument("--trajectory", default="circle")
    p.add_argument("--dt", required=True, help="comma list of intervals")
    p.add_argument("--csv", help="comparison table CSV")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("tune-pid", help="grid search PID gains per trajectory and dt")
    common(p)
    p.add_argument("--trajectory", default="circle")
    p.add_argument("--dt", default="0.1")
    p.add_argument("--csv", help="table of every candidate")
    p.set_defaults(func=cmd_tune_pid)
    return parser


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except ConfigError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        err.write(f"configuration error{key}: {exc}\n")
        return EXIT_CONFIG
    except PolicyFileError as exc:
        err.write(f"corrupt policy file: {exc}\n")
        return EXIT_ARTIFACT
    except (NonFiniteGradient, FloatingPointError, InfeasibleEquilibrium) as exc:
        err.write(f"numeric failure: {exc}\n")
        return EXIT_NUMERIC
    except CdprError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except OSError as exc:
        err.write(f"I/O error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
