"""Persisted MCMC draws: raw little-endian arrays plus JSON metadata.

A draw store is a directory holding one ``<name>.f64`` file per parameter
group (row-major float64, little-endian), an ``arrays.json`` sidecar with
the shapes, a ``meta.json`` with config/seed/acceptance bookkeeping, and a
``summary.csv`` of posterior medians and 10/90 quantiles for the scalar
parameters.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CholeskyFailure

_ARRAY_FILES = ("phi", "sigma_u", "lam", "gamma", "theta", "log_ml")


@dataclass
class DrawStore:
    """Arrays of posterior draws with chain metadata.

    phi has shape (draws, T, k, N); sigma_u (draws, N, N); lam, gamma and
    log_ml (draws,); theta (draws, d) with d possibly zero.
    """

    phi: np.ndarray
    sigma_u: np.ndarray
    lam: np.ndarray
    gamma: np.ndarray
    theta: np.ndarray
    log_ml: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.phi.shape[0]
        for name in ("sigma_u", "lam", "gamma", "theta", "log_ml"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"{name} draw count disagrees with phi")
        for i in range(n):
            sig = self.sigma_u[i]
            try:
                np.linalg.cholesky(sig)
            except np.linalg.LinAlgError as exc:
                raise CholeskyFailure(f"stored sigma draw {i} not positive definite") from exc
        if not np.all(np.isfinite(self.phi)):
            raise ValueError("non-finite coefficient draws")

    @property
    def ndraws(self) -> int:
        return self.phi.shape[0]

    def scalar_table(self) -> list[tuple[str, float, float, float]]:
        """(name, q10, median, q90) rows for every scalar parameter."""
        theta_names = self.meta.get("theta_names") or [
            f"theta_{i}" for i in range(self.theta.shape[1])
        ]
        rows = []
        for name, series in [("lam", self.lam), ("gamma", self.gamma)] + [
            (theta_names[i], self.theta[:, i]) for i in range(self.theta.shape[1])
        ]:
            if series.size == 0:
                continue
            q10, q50, q90 = np.quantile(series, [0.1, 0.5, 0.9])
            rows.append((name, float(q10), float(q50), float(q90)))
        return rows

    def save(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        shapes = {}
        for name in _ARRAY_FILES:
            arr = np.ascontiguousarray(getattr(self, name), dtype="<f8")
            (directory / f"{name}.f64").write_bytes(arr.tobytes())
            shapes[name] = list(arr.shape)
        (directory / "arrays.json").write_text(
            json.dumps({"dtype": "<f8", "order": "C", "shapes": shapes}, indent=2)
        )
        (directory / "meta.json").write_text(json.dumps(self.meta, indent=2, default=str))
        with open(directory / "summary.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["parameter", "q10", "median", "q90"])
            for row in self.scalar_table():
                writer.writerow([row[0]] + [repr(v) for v in row[1:]])
        return directory

    @staticmethod
    def load(directory) -> "DrawStore":
        directory = Path(directory)
        spec = json.loads((directory / "arrays.json").read_text())
        arrays = {}
        for name in _ARRAY_FILES:
            raw = np.frombuffer((directory / f"{name}.f64").read_bytes(), dtype="<f8")
            arrays[name] = raw.reshape(spec["shapes"][name]).copy()
        meta = json.loads((directory / "meta.json").read_text())
        return DrawStore(meta=meta, **arrays)
