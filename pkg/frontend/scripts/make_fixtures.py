"""Regenerate golden test fixtures by capturing real planner API responses.

Runs the planner service in-process against the bundled reference
scenario and saves the exact bytes/headers the UI would receive, plus a
grid_meta.json with expectations decoded by the Python grid reader so
the TypeScript decoder is checked against an independent implementation.

Usage: python3 scripts/make_fixtures.py (from the frontend/ directory)
"""
import json
import time
from pathlib import Path

from fastapi.testclient import TestClient

from junction_sim.planner_api import create_app
from junction_sim.scene import reference_scenario
from junction_sim.scenario_io import load_grid

OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    app = create_app(reference_scenario())
    with TestClient(app) as client:
        scenario = client.get("/api/scenario").json()
        (OUT / "scenario_response.json").write_text(
            json.dumps(scenario, indent=2, sort_keys=True) + "\n")

        pairs_resp = client.get("/api/pairs")
        (OUT / "pairs_body.txt").write_bytes(pairs_resp.content)
        (OUT / "pairs.json").write_text(
            json.dumps(pairs_resp.json(), indent=2, sort_keys=True) + "\n")

        assert client.post("/api/coverage/recompute").status_code == 202
        deadline = time.monotonic() + 60.0
        while time.monotonic() < deadline:
            job = client.get("/api/coverage/status").json()["job"]
            if job["status"] == "done":
                break
            time.sleep(0.05)
        else:
            raise RuntimeError("recompute did not finish")

        grid_resp = client.get("/api/coverage/grid")
        assert grid_resp.status_code == 200
        (OUT / "grid.cgrd").write_bytes(grid_resp.content)
        (OUT / "metrics_header.txt").write_text(
            grid_resp.headers["X-Coverage-Metrics"])
        (OUT / "grid_version.txt").write_text(
            grid_resp.headers["X-Grid-Version"])

    tmp = OUT / "grid.cgrd"
    grid = load_grid(tmp)
    mono = grid.mono_count
    stereo = grid.stereo_pairs
    samples = []
    for row, col in ((0, 0), (grid.rows // 2, grid.cols // 2),
                     (grid.rows - 1, grid.cols - 1), (10, 70), (46, 20)):
        samples.append({
            "row": row, "col": col,
            "visible_mask": int(grid.visible_mask[row, col]),
            "mono_count": int(mono[row, col]),
            "stereo_pairs": int(stereo[row, col]),
        })
    meta = {
        "origin_m": list(grid.origin_m),
        "cell_m": grid.cell_m,
        "cols": grid.cols,
        "rows": grid.rows,
        "byte_length": tmp.stat().st_size,
        "mono_total": int(mono.sum()),
        "stereo_total": int(stereo.sum()),
        "visible_cells": int((mono > 0).sum()),
        "stereo_cells": int((stereo > 0).sum()),
        "samples": samples,
    }
    (OUT / "grid_meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"fixtures written to {OUT}")


if __name__ == "__main__":
    main()
