"""Central finite differences over sampled parameter entries."""

from __future__ import annotations

import numpy as np

STEP = 1e-6


def worst_relative_error(f, arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray], per_array: int = 6,
                         seed: int = 0) -> tuple[float, str]:
    """Largest |fd - analytic| / max(|fd|, |analytic|) over sampled entries.

    Entries where both values are below 1e-9 are skipped as numerically empty.
    """
    rng = np.random.default_rng(seed)
    worst, where = 0.0, ""
    for name, arr in arrays.items():
        flat = arr.reshape(-1)
        g = grads[name].reshape(-1)
        nz = np.flatnonzero(np.abs(g) > 1e-9)
        pool = nz if len(nz) else np.arange(flat.size)
        picks = rng.choice(pool, size=min(per_array, len(pool)), replace=False)
        for i in picks:
            old = flat[i]
            flat[i] = old + STEP
            up = f()
            flat[i] = old - STEP
            down = f()
            flat[i] = old
            fd = (up - down) / (2 * STEP)
            scale = max(abs(fd), abs(g[i]))
            if scale < 1e-9:
                continue
            err = abs(fd - g[i]) / scale
            if err > worst:
                worst, where = err, f"{name}[{i}]"
    return worst, where
