"""Benchmark cases: run the plane-wave example end to end and write reports."""
from __future__ import annotations

import csv
import json
import math
import os
from contextlib import nullcontext

import numpy as np

from .config import CaseConfig
from .estimator import PlaneWaveHelmholtz

SCHEMA = "pwbddc.case-report"
SCHEMA_VERSION = 1
SCALAR_FIELDS = ("iter", "converged", "lambda_min", "lambda_max", "cond", "pnum", "pnumF",
                 "pnumE", "pnumV", "coarse_dofs", "err", "residual", "n_dofs",
                 "n_interface", "seconds_assembly", "seconds_eigen", "seconds_coarse",
                 "seconds_pcg", "seconds_total")


def _thread_limit(threads: int):
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover - sklearn ships threadpoolctl
        return nullcontext()
    return threadpool_limits(limits=threads)


def make_estimator(config: CaseConfig) -> PlaneWaveHelmholtz:
    theta_f, theta_e = config.theta_values
    threads = 1 if config.deterministic else config.threads
    return PlaneWaveHelmholtz(kappa=config.kappa_value, p=config.p, n=config.n,
                              m=config.m, theta_f=theta_f, theta_e=theta_e,
                              scaling=config.scaling, economic=config.economic,
                              eta=config.eta_value, levels=config.levels,
                              rtol=config.rtol, coarse_rtol=config.coarse_rtol,
                              maxit=config.maxit, flexible=config.flexible,
                              threads=threads)


def run_case(config: CaseConfig, estimator: PlaneWaveHelmholtz | None = None) -> dict:
    """Run one case and return its report.

    Passing the estimator of an earlier case with the same discretization
    reuses its assembly and eigenproblems.
    """
    np.random.seed(config.seed)
    est = make_estimator(config) if estimator is None else estimator.set_params(
        **make_estimator(config).get_params())
    with _thread_limit(1 if config.deterministic else config.threads):
        est.fit()
    theta_f, theta_e = config.theta_values
    results = dict(est.report_)
    results["theta_f_value"] = theta_f
    results["theta_e_value"] = theta_e
    results["kappa_value"] = config.kappa_value
    return {"schema": SCHEMA, "schema_version": SCHEMA_VERSION,
            "config": config.to_dict(), "results": results, "_estimator": est}


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return _clean(value.item())
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def report_json(report: dict) -> str:
    public = {k: v for k, v in report.items() if not k.startswith("_")}
    return json.dumps(_clean(public), indent=2, sort_keys=True) + "\n"


def csv_row(report: dict) -> dict:
    row = dict(report["config"])
    for key in SCALAR_FIELDS:
        row[key] = _clean(report["results"].get(key))
    row["schema_version"] = SCHEMA_VERSION
    return row


def emit_report(report: dict, fmt: str = "json", out=None) -> str:
    """Write a report as JSON, or append it as a CSV row; returns the text written."""
    if fmt == "json":
        text = report_json(report)
        if out is None or out == "-":
            return text
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
        return text
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    row = csv_row(report)
    header = list(row)
    if out is None or out == "-":
        import io
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
        writer.writeheader()
        writer.writerow(row)
        return buf.getvalue()
    new = not os.path.exists(out) or os.path.getsize(out) == 0
    with open(out, "a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        if new:
            writer.writeheader()
        writer.writerow(row)
    return ""


def sweep(config: CaseConfig, thetas, which: str = "both") -> list[dict]:
    """Reports for a list of tolerances, reusing assembly and eigenproblems."""
    reports = []
    est = None
    for theta in thetas:
        values = config.to_dict()
        if which in ("both", "face"):
            values["theta_f"] = str(theta)
        if which in ("both", "edge"):
            values["theta_e"] = str(theta)
        rep = run_case(CaseConfig(**values), est)
        est = rep["_estimator"]
        reports.append(rep)
    return reports
