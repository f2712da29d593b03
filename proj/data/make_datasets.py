"""Regenerate the bundled clinical CSVs from the R `survival` package tables.

Requires the `rdatasets` and `lifelines` Python packages. Output columns:
`time`, `status` (1 = death observed, 0 = censored), then numeric features.
Missing covariate values are filled with the column median.
"""
import importlib.util
import pathlib

import pandas as pd
import rdatasets

HERE = pathlib.Path(__file__).resolve().parent


def finish(df: pd.DataFrame, name: str) -> None:
    features = [c for c in df.columns if c not in ("time", "status")]
    for c in features:
        df[c] = df[c].astype(float)
        df[c] = df[c].fillna(df[c].median())
    df = df[["time", "status"] + features]
    df.to_csv(HERE / f"{name}.csv", index=False, float_format="%.10g")
    print(name, df.shape, f"censoring {1 - df.status.mean():.0%}")


def veteran() -> None:
    d = rdatasets.data("survival", "veteran").drop(columns=["rownames"])
    codes = {"squamous": 1, "smallcell": 2, "adeno": 3, "large": 4}
    d["celltype"] = d["celltype"].map(codes)
    finish(d[["time", "status", "trt", "celltype", "karno", "diagtime", "age", "prior"]], "veteran")


def lung() -> None:
    # read the CSV directly; importing lifelines pulls in its fitters
    root = pathlib.Path(importlib.util.find_spec("lifelines").submodule_search_locations[0])
    d = pd.read_csv(root / "datasets" / "lung.csv")
    d.columns = [c.replace(".", "_") for c in d.columns]
    finish(d, "lung")


def pbc() -> None:
    d = rdatasets.data("survival", "pbc")
    d = d[d["trt"].notna()].drop(columns=["rownames", "id"])
    d["status"] = (d["status"] == 2).astype(int)  # transplant counts as censored
    d["sex"] = (d["sex"] == "f").astype(int)
    d.columns = [c.replace(".", "_") for c in d.columns]
    finish(d, "pbc")


if __name__ == "__main__":
    veteran()
    lung()
    pbc()
