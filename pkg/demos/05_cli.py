"""Driving experiments from the command line.

Every experiment is a subcommand of ``python3 -m scatshift`` reading a JSON
config (a path or a bundled name).  This demo calls the same entry point in
process and prints the files it writes.

Run: python3 demos/05_cli.py
"""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

from scatshift.cli import bundled_configs, run

out = Path(tempfile.mkdtemp())
print("bundled configs:", bundled_configs())

# %% Certify the local scheme and the wavelet system
code = run(["verify", "-c", "univariate", "--out", str(out / "verify")])
rep = json.loads((out / "verify" / "verify.json").read_text())
print("exit", code, " C_meas =", rep["a4"]["c_meas"], " schur passed:", rep["schur"]["passed"])

# %% Density and majorant on the two-density set
run(["density", "-c", "two_density", "--out", str(out / "density")])
print(sorted(p.name for p in (out / "density").iterdir()))

# %% A rate study with an override
run(["rates", "-c", "cusp", "--mode", "nterm", "--set", "budgets=[16384,32768,65536]",
     "--out", str(out / "rates")])
print((out / "rates" / "rates.csv").read_text())
