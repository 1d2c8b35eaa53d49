# %% [markdown]
# # CLI walkthrough
#
# Everything the library does is reachable from the `gpood` command.  This
# script drives the whole pipeline through the CLI the way a shell user
# would: synthesize data, fit, inspect, batch-detect, evaluate, and run the
# bound checker.  All commands are deterministic given their flags.

# %%
import subprocess
import sys
from pathlib import Path

WORK = Path(__file__).parent / "output" / "cli"
WORK.mkdir(parents=True, exist_ok=True)


def run(*args):
    cmd = [sys.executable, "-m", "gpood.cli", *args]
    print(f"$ gpood {' '.join(args)}")
    proc = subprocess.run(cmd, capture_output=True, text=True)
    print(proc.stdout, end="")
    if proc.returncode != 0:
        print(proc.stderr, end="")
        raise SystemExit(proc.returncode)
    print()


# %% Synthesize paired InD/OOD datasets (CSV + manifest each).
run("synth", "--k", "3", "--p", "4", "--n", "150", "--seed", "7",
    "--out", str(WORK / "data"))

# %% Fit the detector at a 95% target TPR; the model is one JSON file.
run("fit", "--ind", str(WORK / "data" / "ind.csv"),
    "--out", str(WORK / "model.json"), "--alpha", "0.05", "--seed", "1")

# %% Inspect what was fit.
run("inspect", "--model", str(WORK / "model.json"))

# %% Batch verdicts for the OOD file.
run("detect", "--model", str(WORK / "model.json"),
    "--ind", str(WORK / "data" / "ood.csv"),
    "--out", str(WORK / "ood_verdicts.csv"))

# %% TPR/TNR/AUROC report plus plot-ready margin and ROC tables.
run("eval", "--model", str(WORK / "model.json"),
    "--ind", str(WORK / "data" / "ind.csv"),
    "--ood", str(WORK / "data" / "ood.csv"),
    "--out", str(WORK / "report"))

# %% Per-row detection-bound reports.
run("bound-check", "--model", str(WORK / "model.json"),
    "--ind", str(WORK / "data" / "ind.csv"),
    "--ood", str(WORK / "data" / "ood.csv"),
    "--out", str(WORK / "bounds.csv"))

print("all CLI stages completed; outputs under", WORK)
