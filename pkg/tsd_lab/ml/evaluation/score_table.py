"""
Score table.

Long-form store of (method, dataset, seed, metric, value) rows with
pivoting and cross-dataset ranking.
"""

from collections.abc import Iterable, Mapping
from pathlib import Path

import numpy as np
import pandas as pd

from tsd_lab.shared.io import atomic_write_tsv

COLUMNS = ["method", "dataset", "seed", "metric", "value"]
BOUNDED_METRICS = {"auc_prc", "auc_roc", "accuracy", "top1_agreement"}


class ScoreTable:
    """method x dataset x seed -> metric -> value"""

    def __init__(self, frame: pd.DataFrame | None = None) -> None:
        self._rows: list[dict] = []
        if frame is not None:
            for row in frame[COLUMNS].itertuples(index=False):
                self._append(str(row.method), str(row.dataset), int(row.seed), str(row.metric), float(row.value))

    def _append(self, method: str, dataset: str, seed: int, metric: str, value: float) -> None:
        if not np.isfinite(value):
            raise ValueError(f"{metric} of {method}/{dataset}/seed {seed} is not finite: {value}")
        if metric in BOUNDED_METRICS and not 0.0 <= value <= 1.0:
            raise ValueError(f"{metric} must lie in [0, 1], got {value}")
        if metric == "predictive_kl" and value < 0:
            raise ValueError(f"predictive_kl must be >= 0, got {value}")
        self._rows.append({"method": method, "dataset": dataset, "seed": seed, "metric": metric, "value": value})

    def add(self, method: str, dataset: str, seed: int, metrics: Mapping[str, float]) -> None:
        """Record every metric of one (method, dataset, seed) run."""
        for metric, value in metrics.items():
            self._append(method, dataset, int(seed), metric, float(value))

    def extend(self, tables: Iterable["ScoreTable"]) -> None:
        for table in tables:
            self._rows.extend(table._rows)

    def __len__(self) -> int:
        return len(self._rows)

    @property
    def frame(self) -> pd.DataFrame:
        """Rows sorted by (method, dataset, seed, metric)."""
        frame = pd.DataFrame(self._rows, columns=COLUMNS)
        return frame.sort_values(COLUMNS[:4], kind="mergesort").reset_index(drop=True)

    @property
    def methods(self) -> list[str]:
        return sorted({row["method"] for row in self._rows})

    @property
    def metrics(self) -> list[str]:
        return sorted({row["metric"] for row in self._rows})

    def seed_means(self, metric: str) -> pd.DataFrame:
        """dataset x method table of seed-averaged values."""
        frame = self.frame
        frame = frame[frame["metric"] == metric]
        return frame.pivot_table(index="dataset", columns="method", values="value", aggfunc="mean").sort_index(axis=0).sort_index(axis=1)

    def pivot(self, metric: str) -> pd.DataFrame:
        """Seed mean and std per dataset and method, flattened for export."""
        frame = self.frame
        frame = frame[frame["metric"] == metric]
        grouped = frame.groupby(["dataset", "method"])["value"].agg(["mean", "std", "count"]).reset_index()
        grouped["std"] = grouped["std"].fillna(0.0)
        return grouped.sort_values(["dataset", "method"], kind="mergesort").reset_index(drop=True)

    def to_tsv(self, path: str | Path) -> Path:
        return atomic_write_tsv(path, self.frame, float_format="%.17g")

    @classmethod
    def from_tsv(cls, path: str | Path) -> "ScoreTable":
        frame = pd.read_csv(path, sep="\t", dtype={"method": str, "dataset": str, "metric": str})
        return cls(frame)


def rank_and_wins(table: ScoreTable, metric: str, methods: Iterable[str] | None = None) -> pd.DataFrame:
    """
    Average rank and wins/ties/losses per method over datasets.

    Values are seed-averaged first. Ranks are descending with average ranks
    for ties; every method sharing the best value of a dataset wins it, and
    those wins shared with another method also count as ties.

    Raises:
        ValueError: Some method lacks a value for some dataset
    """
    means = table.seed_means(metric)
    if methods is not None:
        wanted = sorted(methods)
        absent = [m for m in wanted if m not in means.columns]
        if absent:
            raise ValueError(f"No {metric} values for methods {absent}")
        means = means[wanted]
    missing = [(dataset, method) for dataset, method in zip(*np.where(means.isna().to_numpy()))]
    if missing:
        cells = [f"{means.index[d]}/{means.columns[m]}" for d, m in missing]
        raise ValueError(f"Missing {metric} cells: {', '.join(cells)}")

    ranks = means.rank(axis=1, ascending=False, method="average")
    best = means.max(axis=1)
    winners = means.eq(best, axis=0)
    shared = winners.sum(axis=1) > 1
    summary = pd.DataFrame(
        {
            "avg_rank": ranks.mean(axis=0),
            "wins": winners.sum(axis=0).astype(int),
            "ties": winners[shared].sum(axis=0).astype(int),
            "losses": (~winners).sum(axis=0).astype(int),
        }
    )
    summary.index.name = "method"
    return summary.reset_index()


def rank_table(table: ScoreTable, metric: str) -> pd.DataFrame:
    """Per-dataset ranks (dataset x method)."""
    return table.seed_means(metric).rank(axis=1, ascending=False, method="average")
