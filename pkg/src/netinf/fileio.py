"""Persistent file formats: models, structures, experiments, results.

JSON carries structured artifacts, CSV the tabular ones.  Writers are
canonical (sorted keys, repr-exact floats) so that write -> read -> write
round-trips byte-identically, which the replay guarantees rely on.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .netsim import DsfStructure, Experiment, StateSpaceModel
from .topology import InferredNetwork, trace_to_dict


def _canonical_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_json(path, payload: dict):
    Path(path).write_text(_canonical_json(payload))


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# state-space models and structures
# ---------------------------------------------------------------------------

def model_to_dict(model: StateSpaceModel) -> dict:
    return {
        "format": "netinf-model-v1",
        "n": model.n,
        "p": model.p,
        "m": model.m,
        "a": model.a.tolist(),
        "b_u": model.b_u.tolist(),
        "b_e": model.b_e.tolist(),
        "meta": model.meta,
    }


def model_from_dict(payload: dict) -> StateSpaceModel:
    if payload.get("format") != "netinf-model-v1":
        raise ParameterError("not a model file")
    return StateSpaceModel(a=np.array(payload["a"], dtype=float),
                           b_u=np.array(payload["b_u"], dtype=float),
                           b_e=np.array(payload["b_e"], dtype=float),
                           p=int(payload["p"]), meta=payload.get("meta", {}))


def write_model(path, model: StateSpaceModel):
    write_json(path, model_to_dict(model))


def read_model(path) -> StateSpaceModel:
    return model_from_dict(read_json(path))


def structure_to_dict(structure: DsfStructure) -> dict:
    return {
        "format": "netinf-structure-v1",
        "q_adj": structure.q_adj.astype(int).tolist(),
        "p_adj": structure.p_adj.astype(int).tolist(),
    }


def structure_from_dict(payload: dict) -> DsfStructure:
    if payload.get("format") != "netinf-structure-v1":
        raise ParameterError("not a structure file")
    return DsfStructure(q_adj=np.array(payload["q_adj"], dtype=bool),
                        p_adj=np.array(payload["p_adj"], dtype=bool))


def write_structure(path, structure: DsfStructure):
    write_json(path, structure_to_dict(structure))


def read_structure(path) -> DsfStructure:
    return structure_from_dict(read_json(path))


# ---------------------------------------------------------------------------
# experiments: CSV series plus JSON sidecar
# ---------------------------------------------------------------------------

def write_experiment(csv_path, experiment: Experiment, sidecar_path=None):
    """One row per time step, columns y_1..y_p then u_1..u_m."""
    csv_path = Path(csv_path)
    p, m = experiment.p, experiment.m
    header = [f"y_{k + 1}" for k in range(p)] + [f"u_{k + 1}" for k in range(m)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for t in range(experiment.n_points):
        row = [repr(float(v)) for v in experiment.y[:, t]]
        row += [repr(float(v)) for v in experiment.u[:, t]]
        writer.writerow(row)
    csv_path.write_text(buf.getvalue())
    sidecar = Path(sidecar_path) if sidecar_path else csv_path.with_suffix(".meta.json")
    write_json(sidecar, {
        "format": "netinf-experiment-v1",
        "n_points": experiment.n_points,
        "p": p,
        "m": m,
        "snr_db": experiment.snr_db,
        "seed": experiment.seed,
    })


def read_experiment(csv_path, sidecar_path=None) -> Experiment:
    csv_path = Path(csv_path)
    sidecar = Path(sidecar_path) if sidecar_path else csv_path.with_suffix(".meta.json")
    meta = read_json(sidecar)
    if meta.get("format") != "netinf-experiment-v1":
        raise ParameterError("not an experiment sidecar")
    p, m = int(meta["p"]), int(meta["m"])
    with csv_path.open() as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if len(header) != p + m:
            raise ParameterError("experiment CSV does not match its sidecar")
        rows = [[float(v) for v in row] for row in reader]
    data = np.array(rows, dtype=float).T
    return Experiment(y=data[:p], u=data[p:], snr_db=meta["snr_db"],
                      seed=meta.get("seed"))


# ---------------------------------------------------------------------------
# inferred networks and benchmark results
# ---------------------------------------------------------------------------

def network_to_dict(network: InferredNetwork, config_echo: dict | None = None,
                    conventions: dict | None = None) -> dict:
    return {
        "format": "netinf-network-v1",
        "method": network.method,
        "q_adj": network.q_adj.astype(int).tolist(),
        "p_adj": network.p_adj.astype(int).tolist(),
        "w_hat": {f"{kind}:{i}<-{j}": w.tolist()
                  for (kind, i, j), w in sorted(network.w_hat.items())},
        "traces": {str(t): trace_to_dict(tr) for t, tr in network.traces.items()},
        "unresolved": {str(k): v for k, v in network.unresolved.items()},
        "config": config_echo or {},
        "conventions": conventions or {},
    }


def write_network(path, network: InferredNetwork, config_echo=None,
                  conventions=None):
    write_json(path, network_to_dict(network, config_echo, conventions))


RESULT_COLUMNS = ["condition", "method", "trial", "seed", "tpr", "prec",
                  "mean_fitness", "n_links_true", "n_links_inferred", "runtime"]


def write_results_csv(path, trial_results):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=RESULT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in trial_results:
        row = r.to_row()
        for key in ("tpr", "prec", "runtime"):
            row[key] = repr(float(row[key]))
        if row["mean_fitness"] != "":
            row["mean_fitness"] = repr(float(row["mean_fitness"]))
        writer.writerow(row)
    Path(path).write_text(buf.getvalue())
