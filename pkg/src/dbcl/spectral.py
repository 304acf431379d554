"""Windowed band-power preprocessing for oscillatory recordings.

Consecutive non-overlapping rectangular windows, one discrete-Fourier power
value per window per channel at the bin nearest the target frequency.  The
normalization |X_k|^2 / L^2 makes the power sum over all bins equal the
windowed signal energy divided by the window length.
"""

from __future__ import annotations

import numpy as np

from .model import TimeSeriesDataset


def band_power_series(data: TimeSeriesDataset, sample_rate_hz: float,
                      window_seconds: float, target_hz: float) -> TimeSeriesDataset:
    """Collapse a raw recording into one band-power value per window.

    Output sampling interval equals the window length; trajectory count and
    channel set are preserved.
    """
    if sample_rate_hz <= 0 or window_seconds <= 0:
        raise ValueError("sample rate and window length must be > 0")
    window_len_f = window_seconds * sample_rate_hz
    window_len = int(round(window_len_f))
    if abs(window_len_f - window_len) > 1e-9:
        raise ValueError(
            f"window of {window_seconds}s at {sample_rate_hz}Hz does not hold "
            "an integral number of samples"
        )
    if window_len < 2:
        raise ValueError("window must hold at least 2 samples")
    nyquist = sample_rate_hz / 2.0
    if target_hz > nyquist or target_hz < 0:
        raise ValueError(
            f"target frequency {target_hz}Hz outside [0, Nyquist={nyquist}Hz]"
        )
    bin_index = int(round(target_hz * window_seconds))

    out_trajs = []
    for traj_id, arr in data.trajectories:
        n_windows = arr.shape[0] // window_len
        if n_windows < 1:
            raise ValueError(
                f"trajectory {traj_id!r} shorter than one window "
                f"({arr.shape[0]} < {window_len} samples)"
            )
        windows = arr[: n_windows * window_len].reshape(
            n_windows, window_len, arr.shape[1]
        )
        spectrum = np.fft.rfft(windows, axis=1)[:, bin_index, :]
        power = np.abs(spectrum) ** 2 / window_len ** 2
        out_trajs.append((traj_id, power))
    return TimeSeriesDataset(data.variables, tuple(out_trajs),
                             sampling_interval=window_seconds)
