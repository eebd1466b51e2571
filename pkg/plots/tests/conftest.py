import subprocess
import sys
from pathlib import Path

import pytest

_src = Path(__file__).resolve().parent.parent / "src"
if str(_src) not in sys.path:
    try:
        import tvspline_plots  # noqa: F401
    except ImportError:
        sys.path.insert(0, str(_src))


def _run_primary(args, out_dir):
    """Invoke the reconstruction CLI (the only interface this package uses)."""
    cmd = [sys.executable, "-m", "tvspline.cli", *args, "--out-dir", str(out_dir)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"primary CLI failed ({proc.returncode}): {proc.stderr}")
    return out_dir


@pytest.fixture(scope="session")
def reconstruct_artifacts(tmp_path_factory):
    """Noiseless reconstruction artifacts at the full P=512 scale."""
    out = tmp_path_factory.mktemp("reconstruct")
    return _run_primary(
        ["reconstruct", "--order", "2", "--cutoff", "3", "--grid", "512",
         "--lambda", "1e-7", "--seed", "0"],
        out,
    )


@pytest.fixture(scope="session")
def convergence_artifacts(tmp_path_factory):
    """Convergence-study artifacts (reduced trial count, same schema)."""
    out = tmp_path_factory.mktemp("convergence")
    return _run_primary(
        ["convergence", "--order", "2", "--cutoff", "3", "--grid", "16,32,64",
         "--lambda", "1e-6", "--trials", "2", "--seed", "1"],
        out,
    )


@pytest.fixture(scope="session")
def noisy_demo_artifacts(tmp_path_factory):
    """Noisy-demo artifacts at the full spec scale."""
    out = tmp_path_factory.mktemp("noisy")
    return _run_primary(
        ["noisy-demo", "--order", "1", "--cutoff", "20", "--grid", "256",
         "--lambda", "1e-2", "--sigma", "1e-3", "--knots", "7", "--seed", "1"],
        out,
    )
