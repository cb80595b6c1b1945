"""Desk-scale Monte Carlo particle transport for cross-checking solver runs.

Particles move at unit speed (pseudo-time equals path length), scatter at
rate sigma_t with deflection cosines drawn from the scenario's kernel, and
are absorbed by weight multiplication (implicit capture) when sigma_0 <
sigma_t.  Domain faces are vacuum: a particle crossing any face is lost.
Energy-mode scenarios need no special handling since the continuous
slowing down transformation makes energy an affine function of pseudo-time.

Fluence-density snapshots are tallied with a track-length estimator: each
particle deposits its in-window track, discretized at a few sub-times of a
short window centred on the snapshot time, into the spatial bins of the
solver's plot grid (bin centres coincide with the interior even-grid
nodes).  Tallies are normalized to the mean-component convention
u_0^0 = (integral of psi over directions) / sqrt(4 pi), so solver snapshots
and Monte Carlo tallies are directly comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import Scenario
from .errors import NumericalError, ValidationError

FOUR_PI = 4.0 * math.pi
SQRT_FOUR_PI = math.sqrt(4.0 * math.pi)


@dataclass(frozen=True)
class TallyGrid:
    """Uniform spatial bins aligned with the solver plot grid."""

    edges: tuple[np.ndarray, ...]

    @classmethod
    def from_scenario(cls, sc: Scenario) -> "TallyGrid":
        return cls(
            tuple(np.linspace(lo, hi, c + 1) for (lo, hi), c in zip(sc.extents, sc.cells))
        )

    @property
    def centers(self) -> tuple[np.ndarray, ...]:
        return tuple(0.5 * (e[1:] + e[:-1]) for e in self.edges)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(e.size - 1 for e in self.edges)

    @property
    def bin_volume(self) -> float:
        return float(np.prod([e[1] - e[0] for e in self.edges]))

    def deposit(self, acc: np.ndarray, pos: np.ndarray, weights: np.ndarray) -> None:
        if pos.shape[0] == 0:
            return
        hist, _ = np.histogramdd(pos, bins=self.edges, weights=weights)
        acc += hist


@dataclass
class TallySnapshot:
    time: float
    energy: float | None
    u00: np.ndarray
    stderr: np.ndarray


@dataclass
class McResult:
    scenario: Scenario
    grid: TallyGrid
    snapshots: list[TallySnapshot]
    n_particles: int
    seed: int
    meta: dict

    @property
    def centers(self) -> tuple[np.ndarray, ...]:
        return self.grid.centers


# ---------------------------------------------------------------------------
# sampling helpers


def _sample_deflection(kind_dict: dict, spectrum, n: int, rng) -> np.ndarray:
    kind = kind_dict.get("kind")
    if kind == "isotropic":
        return rng.uniform(-1.0, 1.0, n)
    if kind == "henyey_greenstein":
        g = float(kind_dict["g"])
        if abs(g) < 1e-12:
            return rng.uniform(-1.0, 1.0, n)
        u = rng.random(n)
        frac = (1.0 - g * g) / (1.0 - g + 2.0 * g * u)
        return (1.0 + g * g - frac * frac) / (2.0 * g)
    if kind == "table":
        # rejection against the Legendre reconstruction
        grid = np.linspace(-1.0, 1.0, 513)
        dens = spectrum.phase_density(grid)
        if dens.min() < -1e-10 * max(dens.max(), 1.0):
            raise NumericalError("tabulated scattering kernel is not sampleable (negative density)")
        env = dens.max() * 1.05
        out = np.empty(n)
        filled = 0
        while filled < n:
            m = 2 * (n - filled) + 16
            cand = rng.uniform(-1.0, 1.0, m)
            acc = rng.random(m) * env < np.maximum(spectrum.phase_density(cand), 0.0)
            take = cand[acc][: n - filled]
            out[filled : filled + take.size] = take
            filled += take.size
        return out
    raise NumericalError(f"scattering kind {kind!r} is not sampleable")


def _rotate(dirs: np.ndarray, mu_s: np.ndarray, chi: np.ndarray) -> np.ndarray:
    """Deflect unit vectors by polar cosine mu_s and azimuth chi; renormalize."""
    w = dirs
    # helper frame: avoid near-parallel reference axis
    ref = np.zeros_like(w)
    use_z = np.abs(w[:, 2]) < 0.9
    ref[use_z, 2] = 1.0
    ref[~use_z, 0] = 1.0
    e1 = np.cross(ref, w)
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(w, e1)
    s = np.sqrt(np.maximum(0.0, 1.0 - mu_s * mu_s))
    out = (
        mu_s[:, None] * w
        + (s * np.cos(chi))[:, None] * e1
        + (s * np.sin(chi))[:, None] * e2
    )
    out /= np.linalg.norm(out, axis=1)[:, None]
    return out


def _sample_initial(sc: Scenario, n: int, rng):
    """Positions, directions, weight-per-particle for an initial-value run."""
    init = sc.initial
    if init.kind != "gaussian_bulk":
        raise ValidationError(
            f"Monte Carlo supports 'gaussian_bulk' initial data, got {init.kind!r}"
        )
    pos = np.stack(
        [rng.normal(m, s, n) for m, s in zip(init.mu, init.sigma)], axis=1
    )
    amp = init.amplitude
    mass_profile = amp
    for s in init.sigma:
        # integral of the per-axis factor
        mass_profile *= s * math.sqrt(2.0 * math.pi) if init.normalize == "peak" else 1.0
    if init.direction == "isotropic":
        mu = rng.uniform(-1.0, 1.0, n)
        total_mass = SQRT_FOUR_PI * mass_profile  # rho = sqrt(4 pi) * u00
    else:
        a, b = init.dir_a, init.dir_b
        mu = np.empty(n)
        filled = 0
        while filled < n:
            m = 2 * (n - filled) + 16
            cand = rng.uniform(-1.0, 1.0, m)
            acc = rng.random(m) * (a + abs(b)) < a + b * cand
            take = cand[acc][: n - filled]
            mu[filled : filled + take.size] = take
            filled += take.size
        total_mass = FOUR_PI * a * mass_profile
    phi = rng.uniform(0.0, 2.0 * math.pi, n)
    s_t = np.sqrt(np.maximum(0.0, 1.0 - mu * mu))
    dirs = np.stack([s_t * np.cos(phi), s_t * np.sin(phi), mu], axis=1)
    birth = np.zeros(n)
    return pos, dirs, birth, total_mass / n


def _sample_beam_source(sc: Scenario, n: int, rng):
    """Positions, directions, birth times, weight for a boundary beam run."""
    beam_faces = [
        ((d, side), spec)
        for (d, side), spec in sc.faces.items()
        if spec.inflow.kind == "beam"
    ]
    if len(beam_faces) != 1:
        raise ValidationError("Monte Carlo beam runs need exactly one beam face")
    (d, side), spec = beam_faces[0]
    inflow = spec.inflow
    axis = sc.axes[d]
    sign = 1 if side == "high" else -1
    # birth times from the energy profile (or uniform when none)
    if inflow.eps_center is not None:
        taus = np.empty(n)
        filled = 0
        while filled < n:
            eps = rng.normal(inflow.eps_center, inflow.sigma_eps, 2 * (n - filled) + 16)
            tau = (sc.eps_max - eps) / sc.s_rho
            tau = tau[(tau >= 0.0) & (tau <= sc.t_end)][: n - filled]
            taus[filled : filled + tau.size] = tau
            filled += tau.size
        # time integral of exp(-((eps(tau)-c)/(sqrt2 s))^2) over [0, t_end]
        rt2s = math.sqrt(2.0) * inflow.sigma_eps
        z0 = (sc.eps_max - inflow.eps_center) / rt2s
        z1 = (sc.eps_max - sc.s_rho * sc.t_end - inflow.eps_center) / rt2s
        time_integral = (
            rt2s / sc.s_rho * math.sqrt(math.pi) * 0.5 * (math.erf(z0) - math.erf(z1))
        )
    else:
        taus = rng.uniform(0.0, sc.t_end, n)
        time_integral = sc.t_end
    # transverse position(s)
    pos = np.empty((n, sc.ndim))
    space_integral = 1.0
    for j in range(sc.ndim):
        if j == d:
            lo, hi = sc.extents[j]
            pos[:, j] = lo if side == "low" else hi
        else:
            if inflow.sigma_x is None:
                raise ValidationError("2-d beam sources need sigma_x")
            pos[:, j] = rng.normal(0.0, inflow.sigma_x, n)
            # integral of exp(-(x/(sqrt2 s))^2) over the line
            space_integral *= inflow.sigma_x * math.sqrt(2.0 * math.pi)
    # direction: density |mu| * exp(-((mu*sign+1)/(sqrt2 s))^2) on the incoming half
    s_om = inflow.sigma_omega
    mu_in = np.empty(n)
    filled = 0
    while filled < n:
        m = 2 * (n - filled) + 16
        cand = -1.0 + np.abs(rng.normal(0.0, s_om, m))
        cand = cand[(cand < 0.0)][: m]
        acc = rng.random(cand.size) < np.abs(cand)
        take = cand[acc][: n - filled]
        mu_in[filled : filled + take.size] = take
        filled += take.size
    # mu_in is the cosine along the INWARD direction -sign*e_axis ... flip to axis component
    mu_axis = sign * mu_in
    phi = rng.uniform(0.0, 2.0 * math.pi, n)
    s_t = np.sqrt(np.maximum(0.0, 1.0 - mu_axis * mu_axis))
    comp = {1: 0, 2: 1, 3: 2}[axis]
    dirs = np.empty((n, 3))
    others = [c for c in range(3) if c != comp]
    dirs[:, comp] = mu_axis
    dirs[:, others[0]] = s_t * np.cos(phi)
    dirs[:, others[1]] = s_t * np.sin(phi)
    # total injected mass: int |mu| psi_in over incoming hemisphere, x, tau
    mu_grid = np.linspace(-1.0, 0.0, 4001)
    dens = np.abs(mu_grid) * np.exp(-(((mu_grid + 1.0) / (math.sqrt(2.0) * s_om)) ** 2))
    dir_integral = 2.0 * math.pi * np.trapezoid(dens, mu_grid)
    total_mass = inflow.amplitude * time_integral * space_integral * dir_integral
    return pos, dirs, taus, total_mass / n


# ---------------------------------------------------------------------------
# transport


def _advance_batch(sc: Scenario, grid: TallyGrid, pos, dirs, birth, weight, rng, record):
    """Advance one particle batch through all record times, depositing tallies.

    ``record`` is a list of (time, snapshot_index, scale); tallies are
    written into the caller's accumulator array (n_snapshots, *bins).
    """
    sigma_t = sc.scattering.sigma_t
    sigma_0 = float(sc.scattering.moments[0])
    kernel = sc.scattering_dict
    comp = [{1: 0, 2: 1, 3: 2}[ax] for ax in sc.axes]
    lo = np.array([e[0] for e in sc.extents])
    hi = np.array([e[1] for e in sc.extents])

    t = birth.copy()
    wgt = np.full(pos.shape[0], weight)
    alive = np.ones(pos.shape[0], dtype=bool)
    if sigma_t > 0.0:
        to_coll = rng.exponential(1.0 / sigma_t, pos.shape[0])
    else:
        to_coll = np.full(pos.shape[0], np.inf)

    acc_list = record[3]
    for t_rec, snap_idx, scale in zip(record[0], record[1], record[2]):
        active = alive & (t < t_rec)
        guard = 0
        while np.any(active):
            idx = np.nonzero(active)[0]
            p = pos[idx]
            d_act = dirs[idx][:, comp]
            tt = t[idx]
            s_target = t_rec - tt
            # distance to the nearest face along the flight direction
            with np.errstate(divide="ignore", invalid="ignore"):
                d_lo = (lo[None, :] - p) / d_act
                d_hi = (hi[None, :] - p) / d_act
            d_exit = np.where(d_act != 0.0, np.maximum(d_lo, d_hi), np.inf)
            s_exit = d_exit.min(axis=1)
            s_coll = to_coll[idx]
            s = np.minimum(np.minimum(s_target, s_coll), s_exit)
            pos[idx] = p + d_act * s[:, None]
            t[idx] = tt + s
            to_coll[idx] = s_coll - s
            exited = s_exit <= np.minimum(s_target, s_coll)
            collided = (~exited) & (s_coll < s_target)
            if np.any(exited):
                alive[idx[exited]] = False
            if np.any(collided):
                ci = idx[collided]
                n_c = ci.size
                if sigma_0 <= 0.0:
                    alive[ci] = False
                else:
                    if sigma_0 < sigma_t:
                        wgt[ci] *= sigma_0 / sigma_t
                    mu_s = _sample_deflection(kernel, sc.scattering, n_c, rng)
                    chi = rng.uniform(0.0, 2.0 * math.pi, n_c)
                    dirs[ci] = _rotate(dirs[ci], mu_s, chi)
                    to_coll[ci] = rng.exponential(1.0 / sigma_t, n_c)
            active = alive & (t < t_rec - 1e-15)
            guard += 1
            if guard > 10_000_000:
                raise NumericalError("Monte Carlo event loop did not converge")
        ready = alive & (t >= t_rec - 1e-15) & (birth <= t_rec + 1e-15)
        if np.any(ready):
            grid.deposit(acc_list[snap_idx], pos[ready], wgt[ready] * scale)


def simulate(
    scenario: Scenario,
    n_particles: int,
    seed: int,
    n_batches: int = 16,
    window_frac: float = 0.02,
    subsamples: int = 4,
) -> McResult:
    """Monte Carlo estimate of the u00 snapshots of a scenario.

    Deterministic for a fixed seed.  Particles are processed in independent
    batches with spawned random streams (mergeable by summation, hence
    embarrassingly parallel); the batch spread yields the per-bin standard
    error.  ``window_frac`` sets the track-length window as a fraction of
    the time horizon; ``subsamples`` is the number of deposit points along
    the in-window track.
    """
    if n_particles < n_batches:
        raise ValidationError("need at least one particle per batch")
    sc = scenario
    grid = TallyGrid.from_scenario(sc)
    has_beam = any(spec.inflow.kind == "beam" for spec in sc.faces.values())
    snap_times = list(sc.snapshot_times)
    if not snap_times:
        raise ValidationError("scenario defines no snapshots to tally")
    window = window_frac * sc.t_end
    rec_times, rec_snap, rec_scale = [], [], []
    for si, ts in enumerate(snap_times):
        w_eff = min(window, 2.0 * ts, 2.0 * (sc.t_end - ts))
        k_eff = subsamples if w_eff > 0.0 else 1
        for j in range(k_eff):
            rec_times.append(ts - 0.5 * w_eff + w_eff * (j + 0.5) / k_eff)
            rec_snap.append(si)
            rec_scale.append(1.0 / k_eff)
    order = np.argsort(rec_times, kind="stable")
    rec_times = [rec_times[i] for i in order]
    rec_snap = [rec_snap[i] for i in order]
    rec_scale = [rec_scale[i] for i in order]

    seq = np.random.SeedSequence(seed)
    children = seq.spawn(n_batches)
    batch_tallies = np.zeros((n_batches, len(snap_times)) + grid.shape)
    counts = [n_particles // n_batches] * n_batches
    for i in range(n_particles % n_batches):
        counts[i] += 1
    for b, (child, n_b) in enumerate(zip(children, counts)):
        rng = np.random.default_rng(child)
        if has_beam:
            pos, dirs, birth, weight = _sample_beam_source(sc, n_b, rng)
        else:
            pos, dirs, birth, weight = _sample_initial(sc, n_b, rng)
        acc_list = [batch_tallies[b, si] for si in range(len(snap_times))]
        _advance_batch(
            sc, grid, pos, dirs, birth, weight, rng, (rec_times, rec_snap, rec_scale, acc_list)
        )
    # number density -> u00 convention, per bin volume; each batch is an
    # independent estimate of the full tally (per-particle weight uses the
    # batch size), so the batch mean is the estimator
    norm = 1.0 / (grid.bin_volume * SQRT_FOUR_PI)
    batch_tallies *= norm
    mean = batch_tallies.mean(axis=0)
    stderr = batch_tallies.std(axis=0, ddof=1) / math.sqrt(n_batches)
    snapshots = [
        TallySnapshot(ts, sc.energy_of(ts), mean[i], stderr[i])
        for i, ts in enumerate(snap_times)
    ]
    return McResult(
        scenario=sc,
        grid=grid,
        snapshots=snapshots,
        n_particles=n_particles,
        seed=seed,
        meta={
            "n_batches": n_batches,
            "window": window,
            "subsamples": subsamples,
            "source": "beam" if has_beam else "initial",
        },
    )
