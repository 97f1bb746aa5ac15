"""
Background worker for experiment jobs.
Uses threading so POST /api/experiments returns immediately with a job id.
"""
import os
import threading
import time
import traceback
import uuid
from collections import OrderedDict
from queue import Empty, Queue
from typing import Any, Dict, Optional

from api.logger import get_logger, set_run_id

logger = get_logger(__name__)

# Global job queue
job_queue: "Queue[Dict[str, Any]]" = Queue()

# Finished jobs beyond this many table entries are dropped, oldest first
MAX_JOBS = int(os.getenv("TSIRELSON_MAX_JOBS", "100"))

# job_id -> {"status": queued|running|done|error, "result"?, "error"?}, in creation order
jobs: "OrderedDict[str, Dict[str, Any]]" = OrderedDict()
jobs_lock = threading.Lock()

# Worker thread reference
worker_thread: Optional[threading.Thread] = None

FINISHED = ("done", "error")


def _evict_finished():
    """Drop the oldest finished jobs while the table holds more than MAX_JOBS. Caller holds jobs_lock."""
    excess = len(jobs) - MAX_JOBS
    if excess <= 0:
        return
    stale = [job_id for job_id, job in jobs.items() if job["status"] in FINISHED][:excess]
    for job_id in stale:
        del jobs[job_id]
    if stale:
        logger.info(f"[WORKER] Evicted {len(stale)} finished job(s), {len(jobs)} retained")


def _update(job_id: str, **fields):
    with jobs_lock:
        job = jobs.get(job_id)
        if job is None:
            return
        job.update(fields)
        if job["status"] in FINISHED:
            _evict_finished()
def process_experiment_job(job: Dict[str, Any]):
    """
    Run a single experiment job.

    Args:
        job: Dict with 'job_id', 'definition' (SpaceDefinition), 'name', 'output_dir'
    """
    from core.experiments import run_experiment

    job_id = job["job_id"]
    set_run_id(job_id)
    try:
        logger.info(f"[WORKER] Starting experiment {job['name']!r} (job_id: {job_id})")
        _update(job_id, status="running", started_at=time.time())
        result = run_experiment(job["definition"], job["name"], job.get("output_dir"))
        _update(job_id, status="done", result=result, finished_at=time.time())
        logger.info(f"[WORKER] Completed: {job['name']!r} (job_id: {job_id})")
    except Exception as e:
        logger.error(f"[WORKER] ERROR in experiment {job['name']!r}: {e}")
        traceback.print_exc()
        _update(job_id, status="error", error=str(e)[:500], finished_at=time.time())


def background_worker():
    """
    Main worker loop. Processes jobs from the queue.
    Runs in a separate thread.
    """
    logger.info("[WORKER] Background worker started")

    while True:
        try:
            job = job_queue.get(timeout=1.0)
            process_experiment_job(job)
            job_queue.task_done()
        except Empty:
            continue
        except Exception as e:
            logger.error(f"[WORKER] Unexpected error in worker loop: {e}")
            traceback.print_exc()
            time.sleep(1)  # no tight loop on persistent errors


def start_worker():
    """
    Start the background worker thread.
    Should be called once at application startup.
    """
    global worker_thread

    if worker_thread is not None and worker_thread.is_alive():
        logger.info("[WORKER] Worker already running")
        return

    worker_thread = threading.Thread(target=background_worker, daemon=True, name="ExperimentWorker")
    worker_thread.start()
    logger.info("[WORKER] Background worker thread started")


def create_job(name: str) -> str:
    """Register a queued job for experiment `name` and return its id."""
    job_id = uuid.uuid4().hex
    with jobs_lock:
        jobs[job_id] = {"status": "queued", "experiment": name, "queued_at": time.time()}
        _evict_finished()
    return job_id


def enqueue_experiment(definition, name: str, output_dir: Optional[str] = None) -> str:
    """Queue one named experiment of a space definition; returns the job id."""
    job_id = create_job(name)
    job_queue.put({"job_id": job_id, "definition": definition, "name": name, "output_dir": output_dir})
    logger.info(f"[WORKER] Queued: {name!r} (job_id: {job_id}), queue size: {job_queue.qsize()}")
    return job_id


def get_job(job_id: str) -> Optional[Dict[str, Any]]:
    with jobs_lock:
        job = jobs.get(job_id)
        return dict(job) if job is not None else None


def get_queue_size() -> int:
    """Get current number of jobs in queue."""
    return job_queue.qsize()
