"""Local HTTP query service: upload statistics once, then ask for bounds.

JSON everywhere.  Candidate sets travel as arrays of original ids and are
resolved to positions server-side; every answer echoes the set both ways and
embeds the certificate (or calibration recipe) behind the number it reports.
Sessions are in-memory only: stats are immutable once uploaded, plans are
keyed by name, and closed-testing calibrations are cached per session.
"""

from __future__ import annotations

import json
import os
import threading
import uuid

from fastapi import Body, FastAPI, HTTPException

from .bounds import js_bound, kji_bound, kr_bound
from .calibration import (
    Certificate,
    VFamily,
    VKPlan,
    build_pool,
    two_step_k,
    v_family,
)
from .closed_testing import rank_spec, shortcut_bound, uniformly_improved_spec
from .errors import (
    EmptyAfterPreprocessing,
    InfeasibleK,
    PlanMismatch,
    UnknownOriginalId,
)
from .stats_core import (
    RawStats,
    fdp_hat,
    nested_sets,
    originals_of,
    prepare,
    read_w_csv,
    read_w_json,
    resolve_ids,
)

DEFAULT_NSIM = 20_000
DEFAULT_POOL_SEED = 101
DEFAULT_DELTA = 0.01

# Directory for server-side stats files (POST /stats {"file": ...}); the CLI
# `serve` command points this at --data-dir or $KNOCKFDP_DATA_DIR.
DATA_DIR = None

app = FastAPI(title="knockfdp")


class _Session:
    def __init__(self, stats):
        self.stats = stats
        self.plans = {}
        self.pools = {}
        self.ct_specs = {}
        self.audit = []
        self.lock = threading.Lock()


_SESSIONS: dict = {}
_REGISTRY_LOCK = threading.Lock()


def reset_sessions():
    """Drop all sessions (test isolation helper)."""
    with _REGISTRY_LOCK:
        _SESSIONS.clear()


def _session(session_id) -> _Session:
    try:
        return _SESSIONS[session_id]
    except KeyError:
        raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")


def _resolve_wire_ids(stats, ids):
    """Resolve JSON-transported ids, tolerating int/str representation drift."""
    return resolve_ids(stats, ids, coerce=True)


def _set_payload(stats, positions):
    ordered = sorted(positions)
    return {"ids": originals_of(stats, ordered), "positions": ordered}


def _pool_for(sess, nsim, seed):
    key = (int(nsim), int(seed))
    with sess.lock:
        if key not in sess.pools:
            sess.pools[key] = build_pool(key[0], sess.stats.p, key[1])
        return sess.pools[key]


def _v_values(sess, payload):
    if payload.get("v"):
        return tuple(int(x) for x in payload["v"])
    kind = str(payload.get("v_family", payload.get("family", "B"))).upper()
    cap = int(payload.get("cap", sess.stats.p))
    return v_family(VFamily(kind=kind, cap=min(cap, max(sess.stats.p, 2))))


def _exact_certificate(alpha):
    return Certificate(probability=1.0 - alpha, exact=True).as_dict()


def _read_stats_file(name):
    if DATA_DIR is None:
        raise HTTPException(status_code=422, detail="server has no data_dir configured")
    path = os.path.join(DATA_DIR, os.path.basename(str(name)))
    if not os.path.exists(path):
        raise HTTPException(status_code=404, detail=f"no such stats file {name!r}")
    try:
        if path.endswith(".json"):
            return read_w_json(path)
        return read_w_csv(path)
    except (ValueError, json.JSONDecodeError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))


@app.get("/health")
def health():
    return {"status": "ok", "sessions": len(_SESSIONS)}


@app.post("/stats")
def upload_stats(payload: dict = Body(...)):
    if payload.get("file"):
        raw = _read_stats_file(payload["file"])
    else:
        entries = payload.get("entries")
        if not isinstance(entries, list) or not entries:
            raise HTTPException(
                status_code=422, detail="entries must be a nonempty list"
            )
        try:
            raw = RawStats(tuple((e["id"], float(e["w"])) for e in entries))
        except (KeyError, TypeError):
            raise HTTPException(status_code=422, detail="each entry needs 'id' and 'w'")
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
    try:
        stats = prepare(
            raw,
            policy=payload.get("policy", "stable_by_input_order"),
            seed=payload.get("seed"),
        )
    except (ValueError, EmptyAfterPreprocessing) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    session_id = "sess-" + uuid.uuid4().hex[:12]
    with _REGISTRY_LOCK:
        _SESSIONS[session_id] = _Session(stats)
    return {
        "session": session_id,
        "p": stats.p,
        "positives": len(stats.positive_positions),
        "dropped_zeros": stats.dropped_zero_count,
        "dropped_ids": list(stats.dropped_ids),
    }


@app.post("/plans")
def create_plan(payload: dict = Body(...)):
    sess = _session(payload.get("session"))
    name = payload.get("name", f"plan-{len(sess.plans) + 1}")
    alpha = payload.get("alpha", 0.05)
    try:
        if payload.get("k"):
            plan = VKPlan(
                v=tuple(int(x) for x in payload["v"]),
                k=tuple(int(x) for x in payload["k"]),
                alpha=alpha,
                horizon_p=int(payload.get("p", sess.stats.p)),
                family=payload.get("family"),
            )
        else:
            v = _v_values(sess, payload)
            pool = _pool_for(
                sess,
                payload.get("nsim", DEFAULT_NSIM),
                payload.get("seed", DEFAULT_POOL_SEED),
            )
            plan = two_step_k(
                v,
                alpha,
                delta=payload.get("delta", DEFAULT_DELTA),
                p=sess.stats.p,
                pool=pool,
                family=payload.get("v_family", payload.get("family")),
            )
    except (ValueError, InfeasibleK) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    if plan.horizon_p != sess.stats.p:
        raise HTTPException(
            status_code=409,
            detail=f"plan horizon {plan.horizon_p} != session p {sess.stats.p}",
        )
    with sess.lock:
        sess.plans[name] = plan
    return {"name": name, "plan": plan.as_dict()}


def _plan_from_request(sess, payload):
    ref = payload.get("plan")
    if isinstance(ref, str):
        try:
            return sess.plans[ref]
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown plan {ref!r}")
    if isinstance(ref, dict):
        try:
            return VKPlan(
                v=tuple(int(x) for x in ref["v"]),
                k=tuple(int(x) for x in ref["k"]),
                alpha=ref.get("alpha", payload.get("alpha")),
                horizon_p=int(ref.get("p", sess.stats.p)),
                family=ref.get("family"),
            )
        except (KeyError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=f"bad inline plan: {exc}")
    raise HTTPException(status_code=422, detail="method kji needs a plan")


def _evaluate_bound(sess, method, payload, positions):
    alpha = payload.get("alpha", 0.05)
    if method == "kji":
        plan = _plan_from_request(sess, payload)
        try:
            report = kji_bound(sess.stats, plan, positions)
        except PlanMismatch as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        cert = plan.certificate.as_dict() if plan.certificate else None
        return report, cert
    if method == "kr":
        return kr_bound(sess.stats, alpha, positions), _exact_certificate(alpha)
    if method == "js":
        k = int(payload.get("k", 10))
        try:
            report = js_bound(sess.stats, k, alpha, positions)
        except InfeasibleK as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return report, _exact_certificate(alpha)
    raise HTTPException(status_code=422, detail=f"unknown method {method!r}")


@app.post("/bound")
def bound(payload: dict = Body(...)):
    sess = _session(payload.get("session"))
    method = str(payload.get("method", "")).lower()
    try:
        positions = _resolve_wire_ids(sess.stats, payload.get("set", []))
    except UnknownOriginalId as exc:  # DroppedZeroId is a subclass
        raise HTTPException(status_code=422, detail=str(exc))
    report, cert = _evaluate_bound(sess, method, payload, positions)
    response = {
        "method": method,
        "set": _set_payload(sess.stats, positions),
        "report": report.as_dict(),
        "certificate": cert,
    }
    with sess.lock:
        sess.audit.append(
            {
                "kind": "bound",
                "method": method,
                "ids": response["set"]["ids"],
                "fdp_upper": response["report"]["fdp_upper"]["float"],
            }
        )
    return response


def _ct_spec(sess, payload):
    family = str(payload.get("family", "indicator")).lower()
    alpha = payload.get("alpha", 0.05)
    v = _v_values(sess, payload)
    nsim = int(payload.get("nsim", DEFAULT_NSIM))
    seed = int(payload.get("seed", DEFAULT_POOL_SEED))
    delta = float(payload.get("delta", DEFAULT_DELTA))
    key = (family, v, alpha, nsim, seed, delta)
    with sess.lock:
        spec = sess.ct_specs.get(key)
    if spec is None:
        pool = _pool_for(sess, nsim, seed)
        if family == "indicator":
            spec = uniformly_improved_spec(v, alpha, pool, delta=delta)
        elif family == "rank":
            spec = rank_spec(v, alpha, pool)
        else:
            raise HTTPException(
                status_code=422, detail=f"unknown local-test family {family!r}"
            )
        with sess.lock:
            spec = sess.ct_specs.setdefault(key, spec)
    calibration = {
        "family": family,
        "v": list(v),
        "alpha": alpha,
        "nsim": nsim,
        "pool_seed": seed,
        "delta": delta,
    }
    return spec, calibration


@app.post("/ct-bound")
def ct_bound(payload: dict = Body(...)):
    sess = _session(payload.get("session"))
    try:
        positions = _resolve_wire_ids(sess.stats, payload.get("set", []))
    except UnknownOriginalId as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    spec, calibration = _ct_spec(sess, payload)
    outcome = shortcut_bound(positions, sess.stats, spec)
    cert = spec.certificate(sess.stats.p)
    response = {
        "set": _set_payload(sess.stats, positions),
        "report": outcome.as_dict(),
        "calibration": calibration,
        "certificate": cert.as_dict() if cert else None,
    }
    with sess.lock:
        sess.audit.append(
            {
                "kind": "ct-bound",
                "family": calibration["family"],
                "ids": response["set"]["ids"],
                "fdp_upper": response["report"]["fdp_upper"]["float"],
            }
        )
    return response


@app.post("/warmup")
def warmup(payload: dict = Body(...)):
    sess = _session(payload.get("session"))
    spec, calibration = _ct_spec(sess, payload)
    sizes = payload.get("sizes") or range(1, sess.stats.p + 1)
    warmed = 0
    for s in sizes:
        spec.budgets(int(s))
        spec.critical_values(int(s))
        warmed += 1
    return {"warmed": warmed, "calibration": calibration}


@app.get("/nested-curve")
def nested_curve(
    session: str,
    method: str,
    alpha: float = 0.05,
    plan: str | None = None,
    k: int = 10,
    v: str | None = None,
    family: str | None = None,
    nsim: int = DEFAULT_NSIM,
    seed: int = DEFAULT_POOL_SEED,
):
    sess = _session(session)
    stats = sess.stats
    method = method.lower()
    payload = {
        "session": session,
        "alpha": alpha,
        "plan": plan,
        "k": k,
        "nsim": nsim,
        "seed": seed,
    }
    if v:
        payload["v"] = [int(x) for x in v.split(",")]
    if family:
        payload["v_family"] = family
    if method in ("kji", "kr", "js"):
        def evaluate(positions):
            report, _ = _evaluate_bound(sess, method, payload, positions)
            return report
    elif method in ("kct", "rank"):
        payload["family"] = "indicator" if method == "kct" else "rank"
        spec, _ = _ct_spec(sess, payload)

        def evaluate(positions):
            return shortcut_bound(positions, stats, spec)
    else:
        raise HTTPException(status_code=422, detail=f"unknown method {method!r}")
    curve = []
    cache = {}
    for i, r_i in enumerate(nested_sets(stats), start=1):
        if r_i not in cache:
            cache[r_i] = evaluate(r_i)
        report = cache[r_i]
        curve.append(
            {
                "i": i,
                "set_size": len(r_i),
                "fdp_hat": float(fdp_hat(stats, i)),
                "bound": float(report.fdp_upper),
                "true_discoveries_lower": report.true_discoveries_lower,
            }
        )
    return {"method": method, "alpha": alpha, "points": curve}


@app.get("/audit")
def audit(session: str):
    sess = _session(session)
    with sess.lock:
        return {"session": session, "entries": list(sess.audit)}
