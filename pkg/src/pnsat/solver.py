"""Semi-discrete P_N operator with SAT boundary terms and Strang stepping.

State layout: one array per parity family (2^d families over the active
axes), shaped (family grid shape) + (number of family components,).  The
transport increment for family a is

    du^a = - sum_d A^a_d (D_d u^{c_d(a)})  +  boundary SATs,

where A^a_d is the block of A^(d) coupling family a to its axis-d
complement and the SAT at a boundary node penalizes the residual of
u^o = +/- (L Ahat) u^e + g (or the half-moment matrix for unstable faces),
scaled by the inverse boundary norm entry.

Time integration is Strang-split: exact half-step relaxation (the
scattering matrix is diagonal on the basis), a full transport step with
classical RK4, then the second relaxation half-step.  :func:`rhs` and
:func:`step_strang` are the readable reference implementations; ``run``
drives an in-place buffered stepper that produces identical results
(asserted in the test suite) at a fraction of the memory traffic.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass

import numpy as np

from . import boundary as bnd
from .config import Scenario, face_key_to_dim_side
from .errors import NumericalError, ValidationError
from .moments import MomentBasis, PnSystem, assemble_transport, scattering_diagonal
from .sbp import SatPenalty, SbpPair, StaggeredGrid1d, TensorGrid, sat_penalties


@dataclass(frozen=True)
class FaceBlock:
    """BC data restricted to one transverse-parity class of one face."""

    family_odd: tuple[str, ...]
    family_even: tuple[str, ...]
    rows: np.ndarray
    cols: np.ndarray
    m_eff: np.ndarray
    l_matrix: np.ndarray
    penalty: SatPenalty
    g_dir: np.ndarray
    g_space: np.ndarray  # transverse profile on the slab, shape = transverse grid

    @property
    def has_source(self) -> bool:
        return bool(self.g_dir.size and np.any(self.g_dir))

    def g_at(self, t: float, time_factor: float) -> np.ndarray:
        if not self.has_source:
            return np.zeros(self.g_space.shape + (self.rows.size,))
        return time_factor * np.multiply.outer(self.g_space, self.g_dir)


@dataclass(frozen=True)
class FaceData:
    dim: int
    side: str
    axis: int
    kind: str
    alpha: float
    inflow: object
    blocks: tuple[FaceBlock, ...]
    weight_tables: dict
    c_constant: float | None

    @property
    def boundary_index(self) -> int:
        return 0 if self.side == "low" else -1


@dataclass
class SolverSetup:
    scenario: Scenario
    basis: MomentBasis
    system: PnSystem
    tensor: TensorGrid
    comps: dict
    a_blocks: dict
    q_relax: np.ndarray
    faces: tuple[FaceData, ...]
    max_speed: float
    speed_sum: float

    @property
    def families(self):
        return self.tensor.families

    def dt_stable(self) -> float:
        h_min = min(g.h for g in self.tensor.grids)
        return self.scenario.cfl * h_min / self.speed_sum


def build_setup(scenario: Scenario) -> SolverSetup:
    basis = MomentBasis.build(scenario.n_max)
    system = assemble_transport(basis)
    grids = tuple(
        StaggeredGrid1d(lo, hi, c) for (lo, hi), c in zip(scenario.extents, scenario.cells)
    )
    tensor = TensorGrid.build(scenario.axes, grids)
    comps = basis.family_indices(scenario.axes)
    a_blocks = {}
    for a in tensor.families:
        for d, axis in enumerate(scenario.axes):
            c = tensor.complement(a, d)
            # transposed dense block: BLAS-friendly as (nodes, m_c) @ (m_c, m_a)
            a_blocks[(a, d)] = np.ascontiguousarray(
                system.a_full[axis - 1][np.ix_(comps[a], comps[c])].T
            )
    q_relax = scattering_diagonal(scenario.scattering, basis)

    faces = []
    for (d, side), spec in scenario.faces.items():
        axis = scenario.axes[d]
        face = bnd.Face(axis, side)
        blocks = []
        c_vals = []
        for a in tensor.families:
            if a[d] != "o":
                continue
            ae = tensor.complement(a, d)
            rows, cols = comps[a], comps[ae]
            l_blk = bnd.onsager_L(basis, face, rows=rows)
            a_blk = system.a_hat_block(axis, rows, cols)
            if spec.kind == "unstable_marshak":
                m_eff = bnd.marshak_matrix(basis, face, rows=rows, cols=cols)
            else:
                m_eff = face.sign * (l_blk @ a_blk)
            pen = sat_penalties(l_blk, a_blk, spec.alpha, side)
            if spec.inflow.kind == "none":
                g_dir = np.zeros(rows.size)
            else:
                g_dir = bnd.boundary_source(
                    face,
                    lambda om: spec.inflow.amplitude
                    * spec.inflow.direction_profile(om, axis, face.sign),
                    basis,
                    rows=rows,
                )
            transverse = [tensor.axis_nodes(j, a[j]) for j in range(tensor.ndim) if j != d]
            if transverse:
                g_space = spec.inflow.spatial_profile(transverse[0])
                for tr in transverse[1:]:
                    g_space = np.multiply.outer(g_space, spec.inflow.spatial_profile(tr))
            else:
                g_space = np.ones(())
            blocks.append(FaceBlock(a, ae, rows, cols, m_eff, l_blk, pen, g_dir, g_space))
            if spec.kind == "onsager" and rows.size:
                l_inv = np.linalg.inv(l_blk)
                c_vals.append(np.linalg.norm(pen.tau_odd, 2))
                c_vals.append(np.linalg.norm(l_inv + pen.tau_odd.T, 2))
        weight_tables = {
            a: tensor.boundary_weight(a, d) for a in tensor.families if a[d] == "o"
        }
        c_const = max(c_vals) if (spec.kind == "onsager" and c_vals) else None
        faces.append(
            FaceData(d, side, axis, spec.kind, spec.alpha, spec.inflow, tuple(blocks), weight_tables, c_const)
        )
    return SolverSetup(
        scenario=scenario,
        basis=basis,
        system=system,
        tensor=tensor,
        comps=comps,
        a_blocks=a_blocks,
        q_relax=q_relax,
        faces=tuple(faces),
        max_speed=max(system.max_speed(ax) for ax in scenario.axes),
        speed_sum=sum(system.max_speed(ax) for ax in scenario.axes),
    )


# ---------------------------------------------------------------------------
# state


def zero_state(setup: SolverSetup) -> dict:
    return {
        a: np.zeros(setup.tensor.family_shape(a) + (setup.comps[a].size,))
        for a in setup.families
    }


def initial_state(setup: SolverSetup) -> dict:
    """Populate the family arrays from the scenario's initial spec."""
    sc = setup.scenario
    state = zero_state(setup)
    amps = sc.initial.moment_amplitudes(sc.n_max)
    flat_to_family = {}
    for a in setup.families:
        for pos, flat in enumerate(setup.comps[a]):
            flat_to_family[int(flat)] = (a, pos)
    for flat, amp in amps.items():
        a, pos = flat_to_family[flat]
        profile = sc.initial.spatial_profile(setup.tensor.family_nodes(a))
        state[a][..., pos] += amp * profile
    if sc.initial.odd_from_bc is not None:
        d, side = face_key_to_dim_side(sc, sc.initial.odd_from_bc)
        face = next(f for f in setup.faces if f.dim == d and f.side == side)
        for blk in face.blocks:
            ao, ae = blk.family_odd, blk.family_even
            profile = sc.initial.spatial_profile(setup.tensor.family_nodes(ao))
            amp_e = np.zeros(blk.cols.size)
            for pos, flat in enumerate(setup.comps[ae]):
                if int(flat) in amps:
                    amp_e[pos] = amps[int(flat)]
            state[ao][...] += np.multiply.outer(profile, blk.m_eff @ amp_e)
    return state


def energy(setup: SolverSetup, state: dict) -> float:
    """Total discrete energy: sum of squared family SBP norms."""
    return sum(setup.tensor.norm_sq(a, state[a]) for a in setup.families)


def mass_u00(setup: SolverSetup, state: dict) -> float:
    """Discrete integral of the mean component (all-even family, position 0)."""
    a = ("e",) * setup.tensor.ndim
    acc = state[a][..., 0].copy()
    for d in range(setup.tensor.ndim):
        w = setup.tensor.axis_weights(d, "e")
        shape = [1] * acc.ndim
        shape[d] = w.size
        acc = acc * w.reshape(shape)
    return float(acc.sum())


def _slab(arr: np.ndarray, dim: int, idx: int) -> np.ndarray:
    return arr[(slice(None),) * dim + (idx,)]


def rhs(setup: SolverSetup, state: dict, t: float = 0.0) -> dict:
    """Transport + SAT increment (no relaxation); pure in ``state``."""
    tensor = setup.tensor
    out = {}
    for a in setup.families:
        acc = None
        for d in range(tensor.ndim):
            c = tensor.complement(a, d)
            du = tensor.deriv(a, d, state[c])
            flat = du.reshape(-1, du.shape[-1])
            term = (flat @ setup.a_blocks[(a, d)]).reshape(du.shape[:-1] + (-1,))
            acc = -term if acc is None else acc - term
        out[a] = acc
    for face in setup.faces:
        d = face.dim
        bidx = face.boundary_index
        p_odd = setup.tensor.axis_weights(d, "o")[bidx]
        p_even = setup.tensor.axis_weights(d, "e")[bidx]
        tf = face.inflow.time_factor(t, setup.scenario.energy_map) if face.inflow.kind != "none" else 1.0
        for blk in face.blocks:
            u_o = _slab(state[blk.family_odd], d, bidx)
            u_e = _slab(state[blk.family_even], d, bidx)
            res = u_o - u_e @ blk.m_eff.T
            if blk.has_source:
                res = res - blk.g_at(t, tf)
            _slab(out[blk.family_odd], d, bidx)[...] += (res @ blk.penalty.tau_odd.T) / p_odd
            if np.any(blk.penalty.tau_even):
                _slab(out[blk.family_even], d, bidx)[...] += (res @ blk.penalty.tau_even.T) / p_even
    return out


def face_source_norm_sq(setup: SolverSetup, face: FaceData, t: float) -> float:
    """Squared face norm of g at time t, transverse-weighted."""
    if face.inflow.kind == "none":
        return 0.0
    tf = face.inflow.time_factor(t, setup.scenario.energy_map)
    total = 0.0
    for blk in face.blocks:
        g = blk.g_at(t, tf)
        w = face.weight_tables[blk.family_odd]
        total += float(np.sum(w * np.sum(g * g, axis=-1)))
    return total


def _relax(setup: SolverSetup, state: dict, dt_half: float) -> None:
    if not np.any(setup.q_relax):
        return
    for a in setup.families:
        state[a] *= np.exp(setup.q_relax[setup.comps[a]] * dt_half)


def _check_cfl(setup: SolverSetup, dt: float) -> None:
    h_min = min(g.h for g in setup.tensor.grids)
    limit = setup.scenario.cfl * h_min / setup.max_speed
    if dt > limit * (1.0 + 1e-12):
        raise ValidationError(
            f"dt = {dt} violates the CFL bound cfl * h / lambda_max = {limit}"
        )


def step_strang(setup: SolverSetup, state: dict, dt: float, t: float = 0.0) -> dict:
    """One Strang-split step (reference implementation): relax, RK4, relax."""
    _check_cfl(setup, dt)
    u = {a: v.copy() for a, v in state.items()}
    _relax(setup, u, 0.5 * dt)
    k1 = rhs(setup, u, t)
    u2 = {a: u[a] + 0.5 * dt * k1[a] for a in u}
    k2 = rhs(setup, u2, t + 0.5 * dt)
    u3 = {a: u[a] + 0.5 * dt * k2[a] for a in u}
    k3 = rhs(setup, u3, t + 0.5 * dt)
    u4 = {a: u[a] + dt * k3[a] for a in u}
    k4 = rhs(setup, u4, t + dt)
    for a in u:
        u[a] += (dt / 6.0) * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a])
    _relax(setup, u, 0.5 * dt)
    return u


# ---------------------------------------------------------------------------
# buffered stepper (same arithmetic as step_strang, minimal allocations)


def _nonstandard_rows(pair: SbpPair, parity: str):
    """Rows of D^o / D^e that differ from the pure staggered central stencil."""
    op = pair.d_odd if parity == "o" else pair.d_even
    dense = op.toarray()
    inv_h = 1.0 / pair.grid.h
    rows = []
    for i in range(dense.shape[0]):
        expect = np.zeros(dense.shape[1])
        if parity == "o":
            expect[i], expect[i + 1] = -inv_h, inv_h
        elif 1 <= i <= dense.shape[0] - 2:
            expect[i - 1], expect[i] = -inv_h, inv_h
        else:
            nz = np.nonzero(dense[i])[0]
            rows.append((i, nz, pair.grid.h * dense[i][nz]))
            continue
        if not np.allclose(dense[i], expect, atol=1e-14 * inv_h):
            nz = np.nonzero(dense[i])[0]
            rows.append((i, nz, pair.grid.h * dense[i][nz]))
    return rows


class _Stepper:
    """In-place Strang/RK4 stepper with preallocated work buffers."""

    def __init__(self, setup: SolverSetup):
        self.setup = setup
        tensor = setup.tensor
        self.closures = {
            (d, p): _nonstandard_rows(tensor.pairs[d], p)
            for d in range(tensor.ndim)
            for p in ("o", "e")
        }
        # fold 1/h into the moment blocks so derivative buffers hold raw differences
        self.scaled_blocks = {
            (a, d): setup.a_blocks[(a, d)] / tensor.grids[d].h
            for a in tensor.families
            for d in range(tensor.ndim)
        }
        self.k = {a: self._empty(a) for a in tensor.families}
        self.stage = {a: self._empty(a) for a in tensor.families}
        self.acc = {a: self._empty(a) for a in tensor.families}
        self.dbuf = {}
        for a in tensor.families:
            for d in range(tensor.ndim):
                c = tensor.complement(a, d)
                shape = list(tensor.family_shape(a)) + [setup.comps[c].size]
                self.dbuf[(a, d)] = np.empty(shape)
        self.scratch = {a: self._empty(a) for a in tensor.families}
        self._relax_cache: tuple[float, dict] | None = None

    def _empty(self, a):
        return np.empty(
            self.setup.tensor.family_shape(a) + (self.setup.comps[a].size,)
        )

    def _diff_into(self, a, d, u_c, out):
        """Raw staggered differences of u_c along axis d onto family a's grid."""
        pre = (slice(None),) * d
        if a[d] == "o":
            np.subtract(u_c[pre + (slice(1, None),)], u_c[pre + (slice(None, -1),)], out=out)
        else:
            np.subtract(
                u_c[pre + (slice(1, None),)],
                u_c[pre + (slice(None, -1),)],
                out=out[pre + (slice(1, -1),)],
            )
        for i, nz, w in self.closures[(d, a[d])]:
            target = out[pre + (i,)]
            target[...] = w[0] * u_c[pre + (nz[0],)]
            for j in range(1, nz.size):
                target += w[j] * u_c[pre + (nz[j],)]

    def rhs_into(self, state: dict, t: float, out: dict) -> None:
        setup = self.setup
        tensor = setup.tensor
        for a in tensor.families:
            first = True
            for d in range(tensor.ndim):
                c = tensor.complement(a, d)
                db = self.dbuf[(a, d)]
                self._diff_into(a, d, state[c], db)
                flat = db.reshape(-1, db.shape[-1])
                if first:
                    target = out[a].reshape(-1, out[a].shape[-1])
                    np.matmul(flat, self.scaled_blocks[(a, d)], out=target)
                    first = False
                else:
                    scr = self.scratch[a].reshape(-1, out[a].shape[-1])
                    np.matmul(flat, self.scaled_blocks[(a, d)], out=scr)
                    out[a] += self.scratch[a]
            np.negative(out[a], out=out[a])
        for face in setup.faces:
            d = face.dim
            bidx = face.boundary_index
            p_odd = tensor.axis_weights(d, "o")[bidx]
            p_even = tensor.axis_weights(d, "e")[bidx]
            tf = (
                face.inflow.time_factor(t, setup.scenario.energy_map)
                if face.inflow.kind != "none"
                else 1.0
            )
            for blk in face.blocks:
                u_o = _slab(state[blk.family_odd], d, bidx)
                u_e = _slab(state[blk.family_even], d, bidx)
                res = u_o - u_e @ blk.m_eff.T
                if blk.has_source:
                    res = res - blk.g_at(t, tf)
                _slab(out[blk.family_odd], d, bidx)[...] += (res @ blk.penalty.tau_odd.T) / p_odd
                if np.any(blk.penalty.tau_even):
                    _slab(out[blk.family_even], d, bidx)[...] += (
                        res @ blk.penalty.tau_even.T
                    ) / p_even

    def _relax_factors(self, dt_half: float) -> dict | None:
        if not np.any(self.setup.q_relax):
            return None
        if self._relax_cache is None or self._relax_cache[0] != dt_half:
            factors = {
                a: np.exp(self.setup.q_relax[self.setup.comps[a]] * dt_half)
                for a in self.setup.families
            }
            self._relax_cache = (dt_half, factors)
        return self._relax_cache[1]

    def step(self, state: dict, dt: float, t: float) -> None:
        """Advance ``state`` in place by one Strang step."""
        _check_cfl(self.setup, dt)
        factors = self._relax_factors(0.5 * dt)
        if factors is not None:
            for a in state:
                state[a] *= factors[a]
        k, stage, acc = self.k, self.stage, self.acc
        self.rhs_into(state, t, k)
        for a in state:
            acc[a][...] = k[a]
        for c, weight, t_off in ((0.5 * dt, 2.0, 0.5 * dt), (0.5 * dt, 2.0, 0.5 * dt), (dt, 1.0, dt)):
            for a in state:
                np.multiply(k[a], c, out=stage[a])
                stage[a] += state[a]
            self.rhs_into(stage, t + t_off, k)
            for a in state:
                if weight == 2.0:
                    acc[a] += k[a]
                    acc[a] += k[a]
                else:
                    acc[a] += k[a]
        scale = dt / 6.0
        for a in state:
            acc[a] *= scale
            state[a] += acc[a]
        if factors is not None:
            for a in state:
                state[a] *= factors[a]


# ---------------------------------------------------------------------------
# runs


@dataclass
class Snapshot:
    time: float
    energy: float | None
    nodes: tuple[np.ndarray, ...]
    u00: np.ndarray

    @property
    def centers(self) -> tuple[np.ndarray, ...]:
        """Cell-center nodes (interior even-grid nodes), aligned with MC bins."""
        return tuple(n[1:-1] for n in self.nodes)

    @property
    def u00_centers(self) -> np.ndarray:
        sl = tuple(slice(1, -1) for _ in self.nodes)
        return self.u00[sl]


@dataclass
class EnergyLog:
    times: np.ndarray
    energies: np.ndarray
    source_integral: np.ndarray  # cumulative sum over faces of int g^T g dt
    c_constant: float | None

    @property
    def bound(self) -> np.ndarray:
        if self.c_constant is None:
            return np.full_like(self.energies, np.nan)
        return self.energies[0] + self.c_constant * self.source_integral


@dataclass
class RunResult:
    scenario: Scenario
    log: EnergyLog
    snapshots: list[Snapshot]
    metadata: dict
    final_state: dict
    setup: SolverSetup


def run(scenario: Scenario) -> RunResult:
    """Integrate a scenario to its end time, recording energy and snapshots."""
    wall0 = _time.perf_counter()
    setup = build_setup(scenario)
    state = initial_state(setup)
    stepper = _Stepper(setup)
    dt_base = setup.dt_stable()
    t = 0.0
    times = [0.0]
    energies = [energy(setup, state)]
    gsq = [0.0]
    gnorm_prev = sum(face_source_norm_sq(setup, f, 0.0) for f in setup.faces)
    snap_iter = iter(sorted(scenario.snapshot_times))
    next_snap = next(snap_iter, None)
    snapshots: list[Snapshot] = []
    e_family = ("e",) * setup.tensor.ndim

    def take_snapshot(at_t: float) -> None:
        snapshots.append(
            Snapshot(
                time=at_t,
                energy=scenario.energy_of(at_t),
                nodes=setup.tensor.family_nodes(e_family),
                u00=state[e_family][..., 0].copy(),
            )
        )

    while next_snap is not None and next_snap <= 1e-14:
        take_snapshot(t)
        next_snap = next(snap_iter, None)

    step_count = 0
    while t < scenario.t_end - 1e-12:
        dt = min(dt_base, scenario.t_end - t)
        if next_snap is not None and t + dt > next_snap - 1e-12:
            dt = next_snap - t
        stepper.step(state, dt, t)
        t += dt
        step_count += 1
        e_now = energy(setup, state)
        if not math.isfinite(e_now):
            raise NumericalError(
                f"non-finite energy at t = {t:.6g}; last good state at t = {times[-1]:.6g}"
            )
        gnorm_now = sum(face_source_norm_sq(setup, f, t) for f in setup.faces)
        gsq.append(gsq[-1] + 0.5 * dt * (gnorm_prev + gnorm_now))
        gnorm_prev = gnorm_now
        times.append(t)
        energies.append(e_now)
        if next_snap is not None and t >= next_snap - 1e-12:
            take_snapshot(t)
            next_snap = next(snap_iter, None)
        if step_count > 10_000_000:
            raise NumericalError("step budget exceeded")

    c_vals = [f.c_constant for f in setup.faces if f.c_constant is not None]
    all_onsager = all(f.kind == "onsager" for f in setup.faces)
    c_const = max(c_vals) if (c_vals and all_onsager) else (0.0 if all_onsager else None)
    log = EnergyLog(np.array(times), np.array(energies), np.array(gsq), c_const)
    meta = {
        "scenario": scenario.to_dict(),
        "dt": dt_base,
        "steps": step_count,
        "cfl": scenario.cfl,
        "max_speed": setup.max_speed,
        "matrix_norms": {
            f"ahat_axis_{ax}": float(np.linalg.norm(setup.system.a_hat[ax - 1], 2))
            for ax in scenario.axes
        },
        "c_constant": c_const,
        "length_unit": scenario.length_unit,
        "wall_seconds": _time.perf_counter() - wall0,
    }
    return RunResult(scenario, log, snapshots, meta, state, setup)


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class BoundReport:
    applicable: bool
    ok: bool
    e_final: float
    e_initial: float
    bound_final: float
    margin: float
    c_constant: float | None

    def describe(self) -> str:
        if not self.applicable:
            return "energy-bound check not applicable (non-Onsager face present)"
        verdict = "holds" if self.ok else "VIOLATED"
        return (
            f"discrete energy bound {verdict}: E(T) = {self.e_final:.6e} vs "
            f"bound {self.bound_final:.6e} (C = {self.c_constant:.4g}, margin = {self.margin:.3e})"
        )


def energy_bound_check(result: RunResult, tol_rel: float = 1e-8) -> BoundReport:
    """E(T) <= E(0) + C * sum_faces int g^T g dt + tol, C from the penalty family."""
    log = result.log
    if log.c_constant is None:
        return BoundReport(False, False, log.energies[-1], log.energies[0], math.nan, math.nan, None)
    bound = log.energies[0] + log.c_constant * log.source_integral[-1] + tol_rel * log.energies[0]
    margin = bound - log.energies[-1]
    return BoundReport(
        True, bool(log.energies[-1] <= bound), float(log.energies[-1]), float(log.energies[0]),
        float(bound), float(margin), float(log.c_constant),
    )


def detect_plateaus(
    times: np.ndarray,
    energies: np.ndarray,
    flat_tol: float = 1e-4,
    drop_tol: float = 0.01,
    min_len_frac: float = 0.015,
) -> list[tuple[float, float]]:
    """Maximal flat intervals of an energy curve, separated by visible drops.

    An interval is flat when |E(t) - E(t_start)| < flat_tol * E(0)
    throughout; plateaus shorter than ``min_len_frac`` of the horizon are
    ignored, and consecutive plateaus count separately only when the curve
    drops by more than drop_tol * E(0) between them.
    """
    t = np.asarray(times, dtype=float)
    e = np.asarray(energies, dtype=float)
    e0 = e[0]
    horizon = t[-1] - t[0]
    raw = []
    i = 0
    while i < len(t):
        j = i
        while j + 1 < len(t) and abs(e[j + 1] - e[i]) < flat_tol * e0:
            j += 1
        if t[j] - t[i] >= min_len_frac * horizon:
            raw.append((i, j))
            i = j + 1
        else:
            i += 1
    kept: list[tuple[float, float]] = []
    last_level = None
    for i, j in raw:
        level = e[i]
        if last_level is None or (last_level - level) > drop_tol * e0:
            kept.append((float(t[i]), float(t[j])))
            last_level = level
    return kept
