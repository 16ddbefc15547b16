"""Recomputes eval RMSE from the raw prediction/truth files with numpy.

usage: rmse_oracle.py CLI SCRATCH_DIR
"""
import csv
import json
import pathlib
import shutil
import subprocess
import sys

import numpy as np

SMALL = """[dataset]
unlabeled_2d = 16
unlabeled_3d = 16
paired_train = 10
paired_test = 6
resolution = 8
image_width = 8
image_height = 8
view_count = 2
[model]
k_2d = 5
k_3d = 6
mlp_hidden = 8
[train]
learning_rates = 0.001
epochs = 20
batch_size = 5
"""


def read_dmat(path):
    raw = path.read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl])
    values = np.frombuffer(raw[nl + 1:], dtype="<f8")
    return values.reshape(header["rows"], header["cols"])


def main():
    cli, scratch = sys.argv[1], pathlib.Path(sys.argv[2])
    shutil.rmtree(scratch, ignore_errors=True)
    scratch.mkdir(parents=True)
    (scratch / "small.cfg").write_text(SMALL)

    def run(*args):
        subprocess.run([cli, *args], cwd=scratch, check=True, stdout=subprocess.DEVNULL)

    run("gen", "--config", "small.cfg", "--out", "data")
    run("pretrain", "--config", "small.cfg", "--data", "data", "--out", "models")
    worst = 0.0
    for method in ("lowdim", "direct", "mlp"):
        run("fit", "--config", "small.cfg", "--data", "data", "--out", "models", "--method", method)
        for split in ("train", "test"):
            run("eval", "--data", "data", "--models", "models", "--out", "reports",
                "--method", method, "--split", split)
            pred = read_dmat(scratch / "reports" / f"predictions_{method}_{split}.dmat")
            truth = read_dmat(scratch / "reports" / f"truth_{split}.dmat")
            per = np.sqrt(np.mean((pred - truth) ** 2, axis=0))
            with open(scratch / "reports" / f"eval_{method}_{split}.csv") as f:
                reported = np.array([float(r["rmse"]) for r in csv.DictReader(f)])
            if reported.shape != per.shape:
                sys.exit(f"{method}/{split}: {reported.size} rows reported, {per.size} samples")
            worst = max(worst, float(np.max(np.abs(reported - per))))
            summary = (scratch / "reports" / f"eval_{method}_{split}.txt").read_text()
            average = float(summary.split("average_rmse:")[1].split()[0])
            worst = max(worst, abs(average - float(per.mean())))

    print(f"worst gap {worst:.3g}")
    if worst > 1e-12:
        sys.exit(1)
    shutil.rmtree(scratch)


if __name__ == "__main__":
    main()
