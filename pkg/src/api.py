from __future__ import annotations

from typing import Dict, List, Literal, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from src.config import Config
from src.decompose import PipelineOptions, decompose_pipeline
from src.errors import (
    ConfigError,
    MergeError,
    NotECTSError,
    RegionBudgetExceeded,
    SizeCapExceeded,
    SolverBudgetExceeded,
    StateMachineError,
    TSFormatError,
    TSValidationError,
    UnsatisfiableError,
)
from src.regions import check_ects, minimal_regions
from src.sm import serialize_sm
from src.ts import parse_ts


app = FastAPI(title="TS Decomposition Service")


class RegionsRequest(BaseModel):
    ts: str


class DecomposeRequest(BaseModel):
    ts: str
    merge: Literal["sat", "none"] = "sat"
    exact: bool = False
    name: Optional[str] = None


def _errors_to_http(fn):
    """
    Run fn(), mapping our errors to HTTP status codes.
    """
    try:
        return fn()
    except NotECTSError as e:
        raise HTTPException(status_code=409, detail={"failing_events": e.failing_events})
    except (RegionBudgetExceeded, SolverBudgetExceeded, SizeCapExceeded) as e:
        raise HTTPException(status_code=413, detail=str(e))
    except (TSFormatError, TSValidationError, StateMachineError) as e:
        raise HTTPException(status_code=422, detail=str(e))
    except (MergeError, UnsatisfiableError) as e:
        raise HTTPException(status_code=422, detail=f"could not decompose: {e}")
    except ConfigError as e:
        raise HTTPException(status_code=503, detail=f"bad settings: {e}")


@app.get("/health")
def health() -> Dict[str, str]:
    """
    Simple health check endpoint.
    """
    return {"status": "ok"}


@app.post("/regions")
def regions(req: RegionsRequest) -> Dict[str, object]:
    """
    Minimal regions of the posted .ts text and its ECTS report.
    """
    def run() -> Dict[str, object]:
        ts = parse_ts(req.ts)
        found = minimal_regions(ts, Config().region_budget)
        report = check_ects(ts, found)
        return {"regions": [r.names(ts) for r in found], "ects": report.to_dict(ts)}

    return _errors_to_http(run)


@app.post("/decompose")
def decompose(req: DecomposeRequest) -> Dict[str, object]:
    """
    Full pipeline: the report.json document plus the .sm texts.
    """
    def run() -> Dict[str, object]:
        ts = parse_ts(req.ts)
        options = PipelineOptions.from_config(Config(), merge=req.merge, exact=req.exact)
        report = decompose_pipeline(ts, options)
        machines: List[str] = [serialize_sm(sm) for sm in report.final.machines]
        return {**report.to_dict(req.name or "request"), "machines": machines}

    return _errors_to_http(run)
