"""Velocity field and trajectory integration along a wave timeline.

The velocity at position q is

    v(q) = Im[(psi^dagger d_x psi)(q)] / (psi^dagger psi)(q)

with the derivative taken spectrally (multiplication by i k in Fourier
space).  Numerator and denominator are interpolated to q separately with
4-point Lagrange cubics before taking the quotient; near density nodes
the denominator is clamped to eps = 1e-12 * max rho and the speed is
capped at half the grid Nyquist speed.

Trajectories follow classical RK4 with a fixed substep, the field at
stage times being linearly interpolated between adjacent timeline
records.  All per-trajectory arithmetic is elementwise, so results are
bit-identical whether a position is integrated alone, inside a batch, or
split across worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .grids import Grid1D, SpinorField, density
from .propagation import WaveTimeline
from .sampling import ks_distance

__all__ = [
    "Trajectory",
    "EnsemblePaths",
    "velocity",
    "integrate",
    "integrate_ensemble",
    "equivariance_check",
]

NODE_EPS_FACTOR = 1e-12


@dataclass
class Trajectory:
    """One integrated path: times, positions, optional post-hoc outcome."""

    times: np.ndarray
    positions: np.ndarray
    outcome: str | None = None

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=np.float64)
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.times.shape != self.positions.shape:
            raise ValueError("times and positions must have equal length")


@dataclass(frozen=True)
class EnsemblePaths:
    """Lockstep-integrated ensemble: q0 row, final row, optional history.

    positions, when kept, has shape (len(times), len(q0)) with row i the
    ensemble at times[i].
    """

    times: np.ndarray
    q0: np.ndarray
    q_final: np.ndarray
    positions: np.ndarray | None


def _flow_tables(field_pairs, grid: Grid1D):
    """Per-record numerator Im(psi^dagger d_x psi) and denominator rho."""
    n_rec = len(field_pairs)
    num = np.empty((n_rec, grid.n))
    den = np.empty((n_rec, grid.n))
    ik = 1j * grid.wavenumbers()
    for r, f in enumerate(field_pairs):
        d1 = np.fft.ifft(ik * np.fft.fft(f.comp1))
        d2 = np.fft.ifft(ik * np.fft.fft(f.comp2))
        num[r] = (np.conj(f.comp1) * d1 + np.conj(f.comp2) * d2).imag
        den[r] = density(f)
    return num, den


def _interp_quotient(num_row, den_row, grid: Grid1D, q, vmax: float):
    """Cubic-interpolate numerator and denominator at q, regularize, divide."""
    n = grid.n
    u = (np.asarray(q, dtype=np.float64) - grid.x_min) / grid.dx
    j = np.floor(u).astype(np.int64)
    s = u - j
    w0 = -s * (s - 1.0) * (s - 2.0) / 6.0
    w1 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0
    w2 = -(s + 1.0) * s * (s - 2.0) / 2.0
    w3 = (s + 1.0) * s * (s - 1.0) / 6.0
    i0 = (j - 1) % n
    i1 = j % n
    i2 = (j + 1) % n
    i3 = (j + 2) % n
    numq = w0 * num_row[i0] + w1 * num_row[i1] + w2 * num_row[i2] + w3 * num_row[i3]
    denq = w0 * den_row[i0] + w1 * den_row[i1] + w2 * den_row[i2] + w3 * den_row[i3]
    eps = NODE_EPS_FACTOR * float(den_row.max())
    v = numq / np.maximum(denq, eps)
    return np.clip(v, -vmax, vmax)


def _nyquist_cap(grid: Grid1D) -> float:
    return 0.5 * np.pi / grid.dx


def velocity(psi: SpinorField, q):
    """Velocity of the guided particle at q (scalar or array)."""
    num, den = _flow_tables([psi], psi.grid)
    v = _interp_quotient(num[0], den[0], psi.grid, q, _nyquist_cap(psi.grid))
    if np.isscalar(q) or np.asarray(q).ndim == 0:
        return float(v)
    return v


def _resolve_substep(timeline: WaveTimeline, dt_traj: float | None) -> tuple[float, int]:
    spacing = timeline.spacing
    if dt_traj is None:
        dt_traj = spacing / 4.0
    dt_traj = float(dt_traj)
    if not dt_traj > 0:
        raise ValueError(f"dt_traj must be positive, got {dt_traj}")
    if dt_traj > spacing * (1 + 1e-9):
        raise ValueError(
            f"dt_traj = {dt_traj} exceeds the timeline record spacing {spacing}"
        )
    n_steps = int(round(timeline.duration / dt_traj))
    if n_steps < 1 or abs(n_steps * dt_traj - timeline.duration) > 1e-9 * timeline.duration:
        raise ValueError(f"dt_traj = {dt_traj} does not divide the timeline duration")
    return dt_traj, n_steps


def integrate_ensemble(
    timeline: WaveTimeline,
    q0,
    dt_traj: float | None = None,
    keep_history: bool = False,
    threads: int = 1,
) -> EnsemblePaths:
    """Integrate many trajectories in lockstep from initial positions q0.

    threads only splits the ensemble into column chunks; each element sees
    identical arithmetic, so output is independent of the thread count.
    """
    grid = timeline.grid
    starts = np.array(q0, dtype=np.float64, copy=True).reshape(-1)
    if starts.size == 0:
        raise ValueError("need at least one initial position")
    if not np.all((grid.x_min <= starts) & (starts < grid.x_max)):
        bad = starts[~((grid.x_min <= starts) & (starts < grid.x_max))][0]
        raise ValueError(f"initial position {bad} outside [{grid.x_min}, {grid.x_max})")
    dt_sub, n_steps = _resolve_substep(timeline, dt_traj)

    num, den = _flow_tables(timeline.fields, grid)
    n_rec = num.shape[0]
    spacing = timeline.spacing
    t0 = float(timeline.times[0])
    vmax = _nyquist_cap(grid)
    times = t0 + dt_sub * np.arange(n_steps + 1)

    def vel(t: float, p: np.ndarray) -> np.ndarray:
        tau = (t - t0) / spacing
        r = min(max(int(np.floor(tau)), 0), n_rec - 2)
        lam = tau - r
        num_t = (1.0 - lam) * num[r] + lam * num[r + 1]
        den_t = (1.0 - lam) * den[r] + lam * den[r + 1]
        return _interp_quotient(num_t, den_t, grid, p, vmax)

    history = np.empty((n_steps + 1, starts.size)) if keep_history else None
    q_final = np.empty(starts.size)

    def advance(lo: int, hi: int) -> None:
        p = starts[lo:hi].copy()
        if history is not None:
            history[0, lo:hi] = p
        for i in range(n_steps):
            t = float(times[i])
            k1 = vel(t, p)
            k2 = vel(t + 0.5 * dt_sub, p + (0.5 * dt_sub) * k1)
            k3 = vel(t + 0.5 * dt_sub, p + (0.5 * dt_sub) * k2)
            k4 = vel(t + dt_sub, p + dt_sub * k3)
            p = p + (dt_sub / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if history is not None:
                history[i + 1, lo:hi] = p
        q_final[lo:hi] = p

    workers = max(1, min(int(threads), starts.size))
    if workers == 1:
        advance(0, starts.size)
    else:
        bounds = np.linspace(0, starts.size, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(advance, int(bounds[w]), int(bounds[w + 1]))
                for w in range(workers)
                if bounds[w] < bounds[w + 1]
            ]
            for fut in futures:
                fut.result()

    starts.setflags(write=False)
    q_final.setflags(write=False)
    if history is not None:
        history.setflags(write=False)
    return EnsemblePaths(times=times, q0=starts, q_final=q_final, positions=history)


def integrate(timeline: WaveTimeline, q0: float, dt_traj: float | None = None) -> Trajectory:
    """Integrate a single trajectory from q0 along the timeline."""
    paths = integrate_ensemble(timeline, [q0], dt_traj=dt_traj, keep_history=True)
    return Trajectory(times=paths.times, positions=paths.positions[:, 0])


def equivariance_check(
    timeline: WaveTimeline,
    samples,
    dt_traj: float | None = None,
    threads: int = 1,
) -> float:
    """KS distance between evolved sample positions and the final density.

    Samples drawn from |psi_0|^2 and transported by the flow should be
    distributed as |psi_T|^2; the return value quantifies the mismatch.
    """
    paths = integrate_ensemble(timeline, samples, dt_traj=dt_traj, threads=threads)
    return ks_distance(paths.q_final, timeline.fields[-1])
