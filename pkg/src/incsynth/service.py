"""HTTP front end: synthesis sessions and one-shot game solving.

Sessions live in an in-process registry; each has its own lock since a
session is single-writer.
"""
from __future__ import annotations

import threading
import uuid
from typing import Any, Optional

import httpx
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import ops
from .errors import IncsynthError, NotWinning
from .learning import Dataset
from .session import SynthesisSession, controller_lookup, initialise


class NoiseModel(BaseModel):
    l: list[float]
    h: list[float]


class GridModel(BaseModel):
    lo: list[float]
    hi: list[float]
    cells: list[int]


class SessionCreate(BaseModel):
    grid: GridModel
    n_inputs: int = Field(gt=0)
    lipschitz: float = Field(ge=0)
    noise: NoiseModel
    subdivisions: int = Field(default=1, ge=1)
    clip_to_domain: bool = False
    goal: list[int]
    start: list[int] = []
    obstacles: list[int] = []
    samples: list[tuple[list[float], int, list[float]]] = []


class SessionInfo(BaseModel):
    id: str
    cells: int
    vertices: int
    win0: list[int]
    policy: bool


class StepRequest(BaseModel):
    samples: list[tuple[list[float], int, list[float]]]


class StepResponse(BaseModel):
    win0_before: list[int]
    win0_after: list[int]
    deltas_applied: int
    lifts: int
    reset: int
    wall_time: float
    policy_emitted: bool


class ControlResponse(BaseModel):
    cell: int
    input: int


class SolveRequest(BaseModel):
    game: dict[str, Any]
    method: str = "psi"


class SolveResponse(BaseModel):
    win0: list[int]
    regions: list[int]
    pm: dict[str, Any]


class _Entry:
    def __init__(self, sess: SynthesisSession):
        self.sess = sess
        self.lock = threading.Lock()


class Registry:
    def __init__(self):
        self._lock = threading.Lock()
        self._items: dict[str, _Entry] = {}

    def add(self, sess: SynthesisSession) -> str:
        key = uuid.uuid4().hex[:12]
        with self._lock:
            self._items[key] = _Entry(sess)
        return key

    def get(self, key: str) -> _Entry:
        with self._lock:
            entry = self._items.get(key)
        if entry is None:
            raise HTTPException(status_code=404, detail=f"no session {key}")
        return entry

    def drop(self, key: str) -> None:
        with self._lock:
            if self._items.pop(key, None) is None:
                raise HTTPException(status_code=404, detail=f"no session {key}")


app = FastAPI(title="incsynth")
registry = Registry()


@app.exception_handler(IncsynthError)
async def _domain_error(request: Request, exc: IncsynthError):
    status = 409 if isinstance(exc, NotWinning) else 422
    return JSONResponse(status_code=status, content={"error": type(exc).__name__, "message": str(exc)})


def _info(key: str, sess: SynthesisSession) -> SessionInfo:
    return SessionInfo(id=key, cells=sess.grid.cell_count, vertices=len(sess.game.vertices()),
                       win0=sorted(sess.win0), policy=sess.policy is not None)


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/sessions", response_model=SessionInfo)
def create_session(req: SessionCreate) -> SessionInfo:
    from .geometry import Box, GridPartition

    try:
        grid = GridPartition(Box.from_bounds(req.grid.lo, req.grid.hi), req.grid.cells)
        cfg = ops.config_from_dict({"lipschitz": req.lipschitz, "noise": req.noise.model_dump(),
                                    "subdivisions": req.subdivisions, "clip_to_domain": req.clip_to_domain})
        d = Dataset(grid.dim, req.n_inputs, ops.samples_from_rows(req.samples))
        sess = initialise(d, cfg, grid, req.goal, req.start, req.obstacles)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    key = registry.add(sess)
    return _info(key, sess)


@app.get("/sessions/{key}", response_model=SessionInfo)
def get_session(key: str) -> SessionInfo:
    entry = registry.get(key)
    with entry.lock:
        return _info(key, entry.sess)


@app.delete("/sessions/{key}")
def delete_session(key: str) -> dict:
    registry.drop(key)
    return {"deleted": key}


@app.post("/sessions/{key}/step", response_model=StepResponse)
def step_session(key: str, req: StepRequest) -> StepResponse:
    entry = registry.get(key)
    with entry.lock:
        try:
            rep = entry.sess.step(ops.samples_from_rows(req.samples))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
    d = rep.to_dict()
    d.pop("deltas")
    return StepResponse(**d)


@app.get("/sessions/{key}/regions")
def session_regions(key: str) -> list[int]:
    entry = registry.get(key)
    with entry.lock:
        return sorted(entry.sess.win0)


@app.get("/sessions/{key}/control", response_model=ControlResponse)
def session_control(key: str, x: str) -> ControlResponse:
    entry = registry.get(key)
    try:
        point = [float(v) for v in x.split(",")]
    except ValueError:
        raise HTTPException(status_code=422, detail="x must be comma-separated numbers")
    with entry.lock:
        sess = entry.sess
        if len(point) != sess.grid.dim:
            raise HTTPException(status_code=422, detail="x has the wrong dimension")
        u = controller_lookup(sess, point)
        return ControlResponse(cell=sess.grid.translate(point), input=u)


@app.post("/solve", response_model=SolveResponse)
def solve(req: SolveRequest) -> SolveResponse:
    try:
        return SolveResponse(**ops.solve_game(req.game, req.method))
    except (ValueError, KeyError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))


class Client:
    """Minimal client for the service; ``http`` may be any httpx-compatible client."""

    def __init__(self, url: str = "http://127.0.0.1:8000", http: Optional[Any] = None):
        self.http = http or httpx.Client(base_url=url, timeout=600)

    def _check(self, r) -> Any:
        if r.status_code >= 400:
            try:
                body = r.json()
            except ValueError:
                body = {"message": r.text}
            raise IncsynthError(f"service error {r.status_code}: {body}")
        return r.json()

    def health(self) -> dict:
        return self._check(self.http.get("/health"))

    def create_session(self, dataset: Dataset, cfg, grid, goal, start=(), obstacles=()) -> dict:
        body = {
            "grid": {"lo": grid.domain.lo.tolist(), "hi": grid.domain.hi.tolist(),
                     "cells": list(grid.cells_per_dim)},
            "n_inputs": dataset.n_inputs,
            "lipschitz": cfg.lipschitz,
            "noise": {"l": cfg.noise.l.tolist(), "h": cfg.noise.h.tolist()},
            "subdivisions": cfg.subdivisions,
            "clip_to_domain": cfg.clip_to_domain,
            "goal": list(goal), "start": list(start), "obstacles": list(obstacles),
            "samples": [[list(s.x), s.u, list(s.x_plus)] for s in dataset],
        }
        return self._check(self.http.post("/sessions", json=body))

    def step(self, key: str, samples) -> dict:
        rows = [[list(s.x), s.u, list(s.x_plus)] for s in samples]
        return self._check(self.http.post(f"/sessions/{key}/step", json={"samples": rows}))

    def regions(self, key: str) -> list[int]:
        return self._check(self.http.get(f"/sessions/{key}/regions"))

    def control(self, key: str, x) -> dict:
        return self._check(self.http.get(f"/sessions/{key}/control", params={"x": ",".join(map(str, x))}))

    def solve(self, game: dict, method: str = "psi") -> dict:
        return self._check(self.http.post("/solve", json={"game": game, "method": method}))
