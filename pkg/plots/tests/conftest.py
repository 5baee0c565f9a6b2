import subprocess
import sys

import pytest


@pytest.fixture(scope="session")
def example_csv_dir(tmp_path_factory):
    """CSV outputs of the simulator's worked example, generated once."""
    out = tmp_path_factory.mktemp("example")
    subprocess.run(
        [sys.executable, "-m", "delaymv.cli", "--out", str(out), "reproduce-example"],
        check=True,
        capture_output=True,
        text=True,
    )
    return out


@pytest.fixture
def small_csvs(tmp_path):
    """Hand-written CSV pair matching the documented schemas."""
    meansq = tmp_path / "meansq.csv"
    meansq.write_text(
        "t,mean_sq,std_err,n_reps\n"
        "0.0,1.0,0.0,3\n"
        "0.5,0.5,0.01,3\n"
        "1.0,0.25,0.02,3\n",
        encoding="utf-8",
    )
    paths = tmp_path / "paths.csv"
    lines = ["t,rep,particle,value"]
    for t in (0.0, 0.5, 1.0):
        for rep, particle in [(0, 0), (0, 1), (0, 2), (0, 3)]:
            lines.append(f"{t},{rep},{particle},{1.0 - 0.3 * t * (particle + 1)}")
    paths.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return paths, meansq
