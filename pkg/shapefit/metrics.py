# Copyright © 2021 by Shun Huang. All rights reserved.
# Licensed under MIT License.
# See LICENSE in the project root for license information.

"""Metrics module to instrument fitting runs."""

import threading

import numpy as np

from typing import Optional, Union


class Counter:
    """A monotonically increasing count, e.g. solver restarts or added points.

    Increments are safe from several threads.
    """

    def __init__(self) -> None:
        self._count = 0
        self._lock = threading.Lock()

    def increase(self, n: int = 1) -> None:
        """Increment the counter.

        Parameters
        ----------
        n: `int`
            The count to be added.
        """
        with self._lock:
            self._count += n

    @property
    def count(self) -> int:
        """Return the current count."""
        return self._count


class Histogram:
    """A metric which summarizes the distribution of recorded values."""

    def __init__(self) -> None:
        self._values: list[float] = list()
        self._lock = threading.Lock()

    def update(self, value: float) -> None:
        """Record a value.

        Parameters
        ----------
        value: `float`
            The value to be recorded.
        """
        with self._lock:
            self._values.append(float(value))

    @property
    def size(self) -> int:
        """Return the number of recorded values."""
        return len(self._values)

    def report(self) -> dict:
        """Return the distribution summary; empty if nothing was recorded."""
        if not self._values:
            return {}
        array = np.array(self._values)
        return {
            "min": array.min(),
            "max": array.max(),
            "median": np.median(array),
            "mean": array.mean(),
            "stdDev": array.std(),
            "percentile": {
                "75": np.percentile(array, 75),
                "95": np.percentile(array, 95),
                "99": np.percentile(array, 99),
            },
        }


MetricType = Union[Counter, Histogram]
"""Alias for the supported metric types."""


class MetricRegistry:
    """A registry for metric instances."""

    def __init__(self) -> None:
        self._registry: dict[str, MetricType] = dict()
        self._lock = threading.Lock()

    def register(self, name: str, metric: MetricType) -> MetricType:
        """Register a metric under the given name unless the name is taken.

        Several fits may share one registry, so registering an existing name
        returns the metric already registered instead of replacing it.

        Parameters
        ----------
        name: `str`
            The name of the metric

        metric: `MetricType`
            The metric instance

        Returns
        -------
        `MetricType`
            The metric registered under `name`.
        """
        with self._lock:
            return self._registry.setdefault(name, metric)

    def get_metric(self, name: str) -> MetricType:
        """Return the metric by the given name.

        Parameters
        ----------
        name: `str`
            The name of the metric

        Returns
        -------
        `MetricType`
            The metric instance by the given name.
        """
        return self._registry[name]

    def names(self) -> list[str]:
        """Return the registered metric names in sorted order."""
        return sorted(self._registry)

    def summary(self) -> dict:
        """Return counts for counters and reports for histograms by name."""
        result: dict = dict()
        for name in self.names():
            metric = self._registry[name]
            if isinstance(metric, Counter):
                result[name] = metric.count
            else:
                result[name] = metric.report()
        return result


def counter(registry: Optional["MetricRegistry"], name: str) -> Optional[Counter]:
    """Return the counter registered as `name`, creating it on first use."""
    if registry is None:
        return None
    metric = registry.register(name=name, metric=Counter())
    assert isinstance(metric, Counter)
    return metric


def histogram(registry: Optional["MetricRegistry"], name: str) -> Optional[Histogram]:
    """Return the histogram registered as `name`, creating it on first use."""
    if registry is None:
        return None
    metric = registry.register(name=name, metric=Histogram())
    assert isinstance(metric, Histogram)
    return metric
