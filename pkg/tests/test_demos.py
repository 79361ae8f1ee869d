import subprocess
import sys
from pathlib import Path

import pytest

DEMOS = sorted((Path(__file__).parent.parent / "demos").glob("*.py"))


@pytest.mark.parametrize("script", DEMOS, ids=[p.stem for p in DEMOS])
def test_demo_runs(script):
    proc = subprocess.run([sys.executable, str(script)], capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip()


def test_demo_outputs():
    out = subprocess.run([sys.executable, str(DEMOS[0].parent / "hybrid_and_multihome.py")],
                         capture_output=True, text=True).stdout
    assert "HY1 b'meet at noon' after drop-acked: b''" in out
    assert "HY2 b'meet at noon' after drop-acked: b'meet at noon'" in out
