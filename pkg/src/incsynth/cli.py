"""``incsynth`` command line.

File-based subcommands run in process; ``serve`` starts the HTTP service and
``client`` talks to a running one.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import ops
from .bench import bench_protocol, write_csv
from .errors import IncsynthError
from .learning import LearnerConfig, NoiseSupport, read_dataset, read_samples, write_dataset
from .scenario import Scenario, batch_rollouts, corner_scenario, generate_dataset
from .session import initialise, load_checkpoint, policy_table, save_checkpoint


def _cells(text: str | None) -> list[int]:
    """``"3,4,7"``, ``"[3, 4]"`` or ``"@file.json"``; empty for None."""
    if not text:
        return []
    if text.startswith("@"):
        return [int(c) for c in json.loads(Path(text[1:]).read_text())]
    text = text.strip()
    if text.startswith("["):
        return [int(c) for c in json.loads(text)]
    return [int(c) for c in text.split(",") if c.strip()]


def _pair(text: str) -> tuple[float, float]:
    a, b = text.split(",")
    return float(a), float(b)


def _grid_cells(text: str) -> list[int]:
    return [int(c) for c in text.lower().replace(",", "x").split("x")]


def _emit(args, payload, text: str | None = None) -> None:
    body = text if text is not None else json.dumps(payload, indent=1)
    if args.out:
        Path(args.out).write_text(body if body.endswith("\n") else body + "\n")
    else:
        sys.stdout.write(body if body.endswith("\n") else body + "\n")


def _write_regions(path: str | None, regions) -> None:
    if path:
        Path(path).write_text(json.dumps(sorted(int(c) for c in regions)) + "\n")


def _config(args, n: int, file_noise: NoiseSupport | None = None) -> LearnerConfig:
    if args.noise is not None:
        lo, hi = _pair(args.noise)
        noise = NoiseSupport(np.full(n, lo), np.full(n, hi))
    elif file_noise is not None:
        noise = file_noise
    else:
        raise ValueError("noise support unknown: pass --noise lo,hi")
    return LearnerConfig(args.lipschitz, noise, args.subdivisions, args.clip)


def _grid(args, n: int):
    if not args.grid:
        raise ValueError("--grid is required (e.g. 20x20)")
    cells = _grid_cells(args.grid)
    if len(cells) == 1:
        cells = cells * n
    lo, hi = _pair(args.domain) if args.domain else (None, None)
    return ops.make_grid(cells, lo, hi)


# subcommands --------------------------------------------------------------

def cmd_learn(args) -> None:
    d, noise = read_dataset(args.dataset)
    doc = ops.learn_table(d, _grid(args, d.n), _config(args, d.n, noise), _cells(args.obstacles))
    _emit(args, doc)


def cmd_abstract(args) -> None:
    doc = json.loads(Path(args.table).read_text())
    _emit(args, ops.abstract_game(doc, _cells(args.goal)))


def cmd_init(args) -> None:
    d, noise = read_dataset(args.dataset)
    sess = initialise(d, _config(args, d.n, noise), _grid(args, d.n), _cells(args.goal), _cells(args.start),
                      _cells(args.obstacles))
    if not args.out:
        raise ValueError("init needs --out for the checkpoint")
    save_checkpoint(sess, args.out)
    _write_regions(args.regions, sess.win0)


def cmd_solve(args) -> None:
    doc = json.loads(Path(args.input).read_text())
    if args.fresh:
        # re-solve a checkpoint from its data alone
        old = load_checkpoint(args.input)
        sess = initialise(old.dataset, old.cfg, old.grid, old.B, old.I, old.obstacles, synthesize=False)
        result = {"win0": sorted(sess.win0), "regions": sorted(sess.win0), "pm": sess.rho.to_dict()}
    else:
        result = ops.solve_game(doc, args.method)
    _write_regions(args.regions, result["regions"])
    _emit(args, result)


def cmd_increment(args) -> None:
    sess = load_checkpoint(args.checkpoint)
    samples = read_samples(args.samples, sess.grid.dim)
    rep = sess.step(samples)
    save_checkpoint(sess, args.out or args.checkpoint)
    _write_regions(args.regions, sess.win0)
    sys.stdout.write(json.dumps(rep.to_dict()) + "\n")


def cmd_scenario(args) -> None:
    sc = corner_scenario(args.size, density=args.density, room_density=args.density, seed=args.seed or 0)
    _emit(args, sc.to_dict())


def cmd_simulate(args) -> None:
    sc = Scenario.load(args.scenario)
    seed = sc.seed if args.seed is None else args.seed
    if args.what == "dataset":
        if not args.out:
            raise ValueError("simulate dataset needs --out")
        d = generate_dataset(sc.model, sc, seed=seed)
        write_dataset(args.out, d, sc.model.noise_support())
        return
    if not args.checkpoint:
        raise ValueError("simulate rollouts needs --checkpoint with an emitted policy")
    sess = load_checkpoint(args.checkpoint)
    grid = sess.grid
    starts = sorted(set(sc.start) & sess.win0)
    if not starts:
        raise ValueError("no start cell is winning")
    rng = np.random.default_rng(seed)
    X0 = np.concatenate([rng.uniform(grid.cell_box(s).lo, grid.cell_box(s).hi, size=(args.runs, grid.dim))
                         for s in starts])
    res = batch_rollouts(sc.model, policy_table(sess), X0, args.horizon, seed, grid, sc.goal, sc.obstacles)
    visits = res["goal_visits"]
    summary = {
        "starts": len(starts),
        "runs": int(visits.size),
        "obstacle_hits": int(res["obstacle_hits"].sum()),
        "left_domain": int(res["left_domain"].sum()),
        "stuck": int(res["stuck"].sum()),
        "goal_visits_min": int(visits.min()),
        "fraction_goal_5": float(np.mean(visits >= 5)),
    }
    _emit(args, summary)


def cmd_bench(args) -> None:
    sc = Scenario.load(args.scenario)
    rows = bench_protocol(sc, seed=args.seed)
    if args.out:
        write_csv(rows, args.out)
    else:
        write_csv(rows, sys.stdout)


def cmd_serve(args) -> None:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)


def cmd_client(args) -> None:
    from .service import Client

    client = Client(args.url)
    if args.action == "health":
        result = client.health()
    elif args.action == "create":
        d, noise = read_dataset(args.dataset)
        cfg = _config(args, d.n, noise)
        result = client.create_session(d, cfg, _grid(args, d.n), _cells(args.goal), _cells(args.start),
                                       _cells(args.obstacles))
    elif args.action == "step":
        result = client.step(args.session, read_samples(args.samples, args.dim))
    elif args.action == "regions":
        result = client.regions(args.session)
    elif args.action == "solve":
        result = client.solve(json.loads(Path(args.game).read_text()), args.method)
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(args.action)
    _emit(args, result)


# parser -------------------------------------------------------------------

def _add_globals(p: argparse.ArgumentParser, sub: bool) -> None:
    dflt = (lambda v: argparse.SUPPRESS) if sub else (lambda v: v)
    p.add_argument("--seed", type=int, default=dflt(None), help="random seed")
    p.add_argument("--grid", default=dflt(None), help="cells per axis, e.g. 20x20")
    p.add_argument("--domain", default=dflt(None), help="lo,hi of the gridded box (default 0,cells)")
    p.add_argument("--lipschitz", type=float, default=dflt(1.0), help="Lipschitz bound L_X")
    p.add_argument("--noise", default=dflt(None), help="noise support lo,hi (per axis)")
    p.add_argument("--subdivisions", type=int, default=dflt(1), help="subcells per axis when bounding cells")
    p.add_argument("--clip", action="store_true", default=dflt(False),
                   help="treat the domain as invariant (clip over boxes instead of using the sink)")
    p.add_argument("--out", default=dflt(None), help="output file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="incsynth", description=__doc__.splitlines()[0])
    _add_globals(parser, sub=False)
    subs = parser.add_subparsers(dest="command", required=True)

    def sub(name: str, func, help_: str) -> argparse.ArgumentParser:
        p = subs.add_parser(name, help=help_)
        _add_globals(p, sub=True)
        p.set_defaults(func=func)
        return p

    p = sub("learn", cmd_learn, "dataset -> approximation table")
    p.add_argument("dataset")
    p.add_argument("--obstacles", help="absorbing cells")

    p = sub("abstract", cmd_abstract, "approximation table -> game dump")
    p.add_argument("table")
    p.add_argument("--goal", required=True, help="Büchi cells")

    p = sub("init", cmd_init, "dataset -> solved session checkpoint")
    p.add_argument("dataset")
    p.add_argument("--goal", required=True)
    p.add_argument("--start")
    p.add_argument("--obstacles")
    p.add_argument("--regions", help="write the winning cells here")

    p = sub("solve", cmd_solve, "game dump -> measure and regions")
    p.add_argument("input", help="game dump, or a checkpoint with --fresh")
    p.add_argument("--method", choices=("psi", "lifting"), default="psi")
    p.add_argument("--fresh", action="store_true", help="re-solve a checkpoint from its dataset")
    p.add_argument("--regions", help="write the region list here")

    p = sub("increment", cmd_increment, "checkpoint + new samples -> step report")
    p.add_argument("checkpoint")
    p.add_argument("samples")
    p.add_argument("--regions", help="write the winning cells here")

    p = sub("scenario", cmd_scenario, "write the single low-data region scenario")
    p.add_argument("--size", type=int, default=20)
    p.add_argument("--density", type=float, default=30.0)

    p = sub("simulate", cmd_simulate, "scenario -> dataset or rollout statistics")
    p.add_argument("scenario")
    p.add_argument("what", choices=("dataset", "rollouts"))
    p.add_argument("--checkpoint")
    p.add_argument("--runs", type=int, default=50, help="rollouts per start cell")
    p.add_argument("--horizon", type=int, default=500)

    p = sub("bench", cmd_bench, "scenario -> CSV of incremental vs fresh timings")
    p.add_argument("scenario")

    p = sub("serve", cmd_serve, "run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    p = sub("client", cmd_client, "call a running service")
    p.add_argument("action", choices=("health", "create", "step", "regions", "solve"))
    p.add_argument("--url", default="http://127.0.0.1:8000")
    p.add_argument("--session")
    p.add_argument("--dataset")
    p.add_argument("--samples")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--game")
    p.add_argument("--method", choices=("psi", "lifting"), default="psi")
    p.add_argument("--goal")
    p.add_argument("--start")
    p.add_argument("--obstacles")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (IncsynthError, ValueError, KeyError, OSError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
