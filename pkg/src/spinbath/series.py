"""Echo time series container shared by all three engines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Values may overshoot [0, 1] by at most this much before clamping.
VALUE_TOL = 1e-9


@dataclass
class EchoSeries:
    """Loschmidt echo L(t) on an increasing time grid, with full provenance.

    ``meta`` records the bath, coupling, method tag, engine version and any
    engine-specific diagnostics (seed, truncation profile, zero-mode flags).
    Values are validated against [-tol, 1+tol] and then clamped to [0, 1];
    the worst overshoot is kept in ``meta["max_overshoot"]``.
    """

    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise ValueError("times and values must be matching 1-d arrays")
        if self.times.size >= 2 and not np.all(np.diff(self.times) > 0):
            raise ValueError("time grid must be strictly increasing")
        overshoot = max(float(np.max(self.values - 1.0, initial=0.0)),
                        float(np.max(-self.values, initial=0.0)))
        if overshoot > VALUE_TOL:
            raise ValueError(f"echo values leave [0,1] by {overshoot:.3e} (> {VALUE_TOL})")
        if self.times.size and self.times[0] == 0.0 and abs(self.values[0] - 1.0) > VALUE_TOL:
            raise ValueError("L(0) must equal 1")
        self.meta.setdefault("max_overshoot", overshoot)
        self.values = np.clip(self.values, 0.0, 1.0)

    def __len__(self):
        return self.times.size

    def window(self, t_lo: float, t_hi: float) -> "EchoSeries":
        """Closed sub-series with t_lo <= t <= t_hi (meta shared)."""
        mask = (self.times >= t_lo) & (self.times <= t_hi)
        if not np.any(mask):
            raise ValueError(f"no samples in window [{t_lo}, {t_hi}]")
        return EchoSeries(self.times[mask].copy(), self.values[mask].copy(), dict(self.meta))
