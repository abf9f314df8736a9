import json
import sys
from pathlib import Path

import numpy as np
import pytest

from isodiffi.forest import DataMatrix, fit, model_from_dict
from isodiffi.synth import SynthSpec, generate

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def synth_small():
    return generate(SynthSpec(n=400, anomaly_fraction=0.1, p_noise=4, seed=3))


@pytest.fixture(scope="session")
def small_model(synth_small):
    data, _ = synth_small
    return fit(data, psi=64, n_trees=20, seed=1)


def flatten_tree(root: dict, psi: int) -> dict:
    """Nested hand-written tree -> serialized node list (preorder ids)."""
    nodes = []

    def visit(node, depth):
        nid = len(nodes)
        nodes.append(None)
        if "leaf" in node:
            nodes[nid] = [nid, -1, 0.0, -1, -1, len(node["leaf"]), depth]
            return nid, len(node["leaf"])
        lid, nl = visit(node["left"], depth + 1)
        rid, nr = visit(node["right"], depth + 1)
        nodes[nid] = [nid, node["feature"], float(node["threshold"]), lid, rid, nl + nr, depth]
        return nid, nl + nr

    visit(root, 0)
    return {"bootstrap_indices": list(range(psi)), "nodes": nodes}


def model_doc_from_fixture(fx: dict) -> dict:
    psi = fx["psi"]
    return {
        "format": "isodiffi-forest",
        "version": 1,
        "hyperparameters": {"psi": psi, "n_trees": len(fx["trees"]), "rng_seed": 0,
                            "h_max": (psi - 1).bit_length()},
        "threshold": {"score_threshold": fx["score_threshold"], "mode": "fixed", "contamination": None},
        "feature_names": [f"f{j + 1}" for j in range(len(fx["data"][0]))],
        "node_fields": ["id", "feature", "threshold", "left", "right", "n_samples", "depth"],
        "trees": [flatten_tree(t, psi) for t in fx["trees"]],
    }


@pytest.fixture(scope="session")
def micro_fixture():
    return json.loads((DATA_DIR / "micro_forest.json").read_text())


@pytest.fixture(scope="session")
def micro_model(micro_fixture):
    return model_from_dict(model_doc_from_fixture(micro_fixture)), DataMatrix(np.array(micro_fixture["data"]))


def fake_glass(path, with_header=False):
    rng = np.random.default_rng(0)
    counts = {1: 69, 2: 76, 3: 17, 5: 13, 6: 9, 7: 29}
    lines = ["Id,RI,Na,Mg,Al,Si,K,Ca,Ba,Fe,Type"] if with_header else []
    rid = 1
    rows = []
    for cls, k in counts.items():
        for _ in range(k):
            rows.append([cls] + rng.random(9).round(5).tolist())
    rows.insert(40, list(rows[39]))  # one exact duplicate as in the public file
    for r in rows:
        lines.append(",".join([str(rid)] + [str(v) for v in r[1:]] + [str(r[0])]))
        rid += 1
    path.write_text("\n".join(lines) + "\n")
    return path


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
