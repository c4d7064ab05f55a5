"""Binary direction-of-change labels and chronological windowed datasets."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimators import VolSeries


@dataclass(frozen=True, eq=False)
class DirectionSeries:
    """``labels[i]`` is 1 when sigma rose from day ``i`` to day ``i + 1``.

    ``dates[i]`` is the later of the two days, i.e. the day the change is
    known.
    """

    dates: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if len(self.dates) != len(self.labels):
            raise ValueError("dates and labels lengths differ")

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def from_labels(cls, labels, start="2000-01-03") -> "DirectionSeries":
        """Build from a bare bit sequence, dating labels on consecutive business days."""
        labels = np.asarray(labels, dtype=np.int8)
        dates = np.busday_offset(np.datetime64(start, "D"), np.arange(len(labels)), roll="forward")
        return cls(dates, labels)


@dataclass(frozen=True, eq=False)
class Windows:
    """Stride-1 windows: ``inputs[j]`` are the labels preceding ``targets[j]``."""

    inputs: np.ndarray  # (M, window_len) int8
    targets: np.ndarray  # (M,) int8
    target_dates: np.ndarray
    input_dates: np.ndarray  # (M, window_len)

    def __len__(self) -> int:
        return len(self.targets)

    def features(self) -> np.ndarray:
        """Inputs shaped ``(M, window_len, 1)`` as floats, ready for the network."""
        return self.inputs[..., None].astype(float)


@dataclass(frozen=True, eq=False)
class DirectionDataset:
    train: Windows
    validation: Windows
    test: Windows
    window_len: int
    train_frac: float
    val_frac_of_train: float


def directions(vol: VolSeries) -> DirectionSeries:
    s = np.asarray(vol.sigma)
    if len(s) < 2:
        raise ValueError("need at least 2 volatility points for a direction")
    return DirectionSeries(vol.dates[1:], (s[1:] > s[:-1]).astype(np.int8))


def windows(dirs: DirectionSeries, window_len: int) -> Windows:
    if window_len < 1:
        raise ValueError("window_len must be >= 1")
    n = len(dirs)
    if n <= window_len:
        raise ValueError(f"{n} labels leave no target for window_len={window_len}")
    lab = np.asarray(dirs.labels, dtype=np.int8)
    view = np.lib.stride_tricks.sliding_window_view
    return Windows(
        inputs=view(lab[:-1], window_len).copy(),
        targets=lab[window_len:].copy(),
        target_dates=np.asarray(dirs.dates)[window_len:].copy(),
        input_dates=view(np.asarray(dirs.dates)[:-1], window_len).copy(),
    )


def split_sizes(n_targets: int, train_frac: float, val_frac_of_train: float) -> tuple[int, int, int]:
    """(train, validation, test) counts; both boundaries are floored."""
    n_fit = math.floor(train_frac * n_targets)
    n_val = math.floor(val_frac_of_train * n_fit)
    return n_fit - n_val, n_val, n_targets - n_fit


def _take(w: Windows, sl: slice) -> Windows:
    return Windows(w.inputs[sl], w.targets[sl], w.target_dates[sl], w.input_dates[sl])


def make_dataset(
    dirs: DirectionSeries,
    window_len: int = 10,
    train_frac: float = 0.70,
    val_frac_of_train: float = 0.15,
) -> DirectionDataset:
    """Chronological train / validation / test split over window targets.

    The first ``train_frac`` of targets is the fitting range; its final
    ``val_frac_of_train`` share becomes the validation set. The remaining
    targets form the test set.
    """
    if not 0 < train_frac < 1:
        raise ValueError("train_frac must lie in (0, 1)")
    if not 0 <= val_frac_of_train < 1:
        raise ValueError("val_frac_of_train must lie in [0, 1)")
    w = windows(dirs, window_len)
    n_train, n_val, n_test = split_sizes(len(w), train_frac, val_frac_of_train)
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(
            f"{len(w)} windows give an empty partition "
            f"(train={n_train}, validation={n_val}, test={n_test})"
        )
    return DirectionDataset(
        train=_take(w, slice(0, n_train)),
        validation=_take(w, slice(n_train, n_train + n_val)),
        test=_take(w, slice(n_train + n_val, None)),
        window_len=window_len,
        train_frac=train_frac,
        val_frac_of_train=val_frac_of_train,
    )
