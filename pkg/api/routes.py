# api/routes.py
from __future__ import annotations

from typing import Any, Dict, List, Optional, Union

from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field

from api.logger import get_run_logger, new_run_id, set_run_id
from core.background_worker import enqueue_experiment, get_job, get_queue_size
from core.checks import SUITES, run_suite
from core.errors import ParseError, UnsupportedError
from core.experiments import jtree_report, norm_report
from core.space_file import SpaceDefinition, space_from_dict

router = APIRouter()
logger = get_run_logger(__name__)


class NormRequest(BaseModel):
    space: Dict[str, Any]
    vector: str
    width: Optional[str] = None
    mode: str = "truncated"


class JTreeRequest(BaseModel):
    tree: Union[str, Dict[str, Any], List[Any]]


class CheckRequest(BaseModel):
    space: Dict[str, Any]
    suite: str
    count: int = Field(default=100, ge=1, le=10000)
    seed: int = 0
    n: Optional[int] = None
    j0: Optional[int] = None


class ExperimentRequest(BaseModel):
    space: Dict[str, Any]
    name: str


def _fail(exc: Exception) -> HTTPException:
    if isinstance(exc, ParseError):
        return HTTPException(status_code=422, detail=str(exc))
    return HTTPException(status_code=400, detail=str(exc))


def _definition(data: Dict[str, Any]) -> SpaceDefinition:
    try:
        return space_from_dict(data, "space")
    except ValueError as e:
        raise _fail(e) from e


@router.api_route("/health", methods=["GET", "HEAD"])
def health():
    return {"status": "ok", "queue_size": get_queue_size()}


@router.post("/norm")
def post_norm(req: NormRequest):
    set_run_id(new_run_id())
    defn = _definition(req.space)
    try:
        return norm_report(defn, req.vector, req.width, req.mode)
    except (ValueError, UnsupportedError) as e:
        logger.warning(f"[ENGINE] rejected: {e}")
        raise _fail(e) from e


@router.post("/jtree-norm")
def post_jtree_norm(req: JTreeRequest):
    try:
        return jtree_report(req.tree)
    except ValueError as e:
        raise _fail(e) from e


@router.post("/check")
def post_check(req: CheckRequest):
    set_run_id(new_run_id())
    if req.suite not in SUITES:
        raise HTTPException(status_code=400, detail=f"unknown suite {req.suite!r}, expected one of {list(SUITES)}")
    defn = _definition(req.space)
    params = {k: v for k, v in (("n", req.n), ("j0", req.j0)) if v is not None}
    try:
        cfg, space = defn.build()
        return {"space_sha256": defn.digest(), **run_suite(req.suite, cfg, space, req.count, req.seed, **params).to_dict()}
    except (ValueError, UnsupportedError) as e:
        raise _fail(e) from e


@router.post("/experiments")
def post_experiment(req: ExperimentRequest):
    defn = _definition(req.space)
    if req.name not in {e.name for e in defn.experiments}:
        raise HTTPException(status_code=404, detail=f"no experiment named {req.name!r}")
    try:
        defn.build()
    except ValueError as e:
        raise _fail(e) from e
    job_id = enqueue_experiment(defn, req.name)
    return {"job_id": job_id, "status": "queued"}


@router.get("/experiments/{job_id}")
def get_experiment(job_id: str):
    job = get_job(job_id)
    if job is None:
        raise HTTPException(status_code=404, detail="Job not found")
    return job
