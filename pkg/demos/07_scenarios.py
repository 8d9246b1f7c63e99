# %% [markdown]
# # Running bundled scenarios from Python
#
# Each scenario is a TOML file naming one kind of run. The command line does
# the same thing: `stochcontact flow --config reeb.toml --out out/`.

# %%
import json
import tempfile
from pathlib import Path

from stochcontact.cli import list_scenarios, run

out = Path(tempfile.mkdtemp())
for s in list_scenarios():
    rep = run(s.path, out=str(out))
    print(f"{s.name:14} {s.kind:11} exit {rep.exit_code}  {', '.join(rep.files)}")

print(json.dumps(json.loads((out / "holonomy" / "report.json").read_text())["metrics"], indent=2))
