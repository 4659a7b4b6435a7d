"""
Driving the command line tool from Python
=========================================
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path


def run(*args):
    proc = subprocess.run([sys.executable, "-m", "doubleforms", *args], capture_output=True, text=True)
    return proc.returncode, proc.stdout, proc.stderr


tmp = Path(tempfile.mkdtemp())

# invariants of a product manifold, from a config file
cfg = tmp / "product.json"
cfg.write_text(json.dumps({"manifold": {"model": "product", "factors": [
    {"model": "sphere", "n": 3, "radius": 0.1}, {"model": "sphere", "n": 2}]}}))
code, out, _ = run("invariants", "--config", str(cfg))
inv = json.loads(out)["results"]["model"]["invariants"]
print("exit", code, "h4 =", inv["h"]["h4"], "sigma2 =", inv["sigma"]["sigma2"])

# a verification sweep; the report is byte-identical for any job count
code, out, _ = run("verify", "--suite", "curvature-identities", "--n", "4-6", "--trials", "3")
print("exit", code, json.loads(out)["summary"]["counts"])

# a deliberately broken star is caught
code, out, _ = run("verify", "--suite", "algebra", "--n", "4", "--trials", "1", "--debug-corrupt-star")
print("corrupted star: exit", code)

# bad configs exit with 2 and say why
bad = tmp / "bad.json"
bad.write_text(json.dumps({"fields": {"f": "sin(x1"}}))
code, _, err = run("conformal", "--config", str(bad))
print("exit", code, err.strip())
