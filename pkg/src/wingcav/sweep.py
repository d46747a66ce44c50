"""Cartesian parameter sweeps over the resolved configuration.

Each sweep point is an independent task; results are collected by point index
so output ordering follows the declared axis order no matter how workers
finish.
"""
from __future__ import annotations

import copy
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product

from .config import parse_axis
from .errors import ConfigError


@dataclass(frozen=True)
class SweepPlan:
    axes: tuple[tuple[str, str, tuple], ...]  # (section, key, values)
    budget: int = 10000

    @property
    def coord_names(self) -> list[str]:
        return [key for _, key, _ in self.axes]

    def points(self) -> list[dict]:
        """Cartesian product in declared axis order; [] axes -> one empty point."""
        if not self.axes:
            return [{}]
        total = 1
        for _, _, values in self.axes:
            total *= len(values)
        if total > self.budget:
            raise ConfigError(f"sweep has {total} points, budget is {self.budget}")
        pts = []
        for combo in product(*(values for _, _, values in self.axes)):
            pts.append({(sec, key): val
                        for (sec, key, _), val in zip(self.axes, combo)})
        return pts


def plan_from_config(resolved: dict) -> SweepPlan:
    axes = tuple(
        (sec, key, tuple(values))
        for sec, key, values in (parse_axis(a) for a in resolved["sweep"]["axes"])
    )
    return SweepPlan(axes=axes, budget=resolved["sweep"]["budget"])


def apply_point(resolved: dict, point: dict) -> dict:
    cfg = copy.deepcopy(resolved)
    for (section, key), value in point.items():
        cfg[section][key] = value
    return cfg


def run_points(worker, tasks: list, jobs: int) -> list:
    """Map worker over tasks, preserving task order in the result list."""
    if jobs <= 1 or len(tasks) <= 1:
        return [worker(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks))
