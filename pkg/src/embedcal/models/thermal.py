"""Transient 2-D heat conduction on a square section, bilinear finite elements.

The section ``[0, L] x [0, L]`` is held at the external temperature on its
right edge and insulated everywhere else.  Time integration is backward Euler
with a fixed step.  Two solvers share the same discretisation:

* :func:`solve_transient` assembles ``M`` (from ``rho*c_p``) and ``K`` (from
  ``k``) for an arbitrary per-element material map and factorises
  ``M + dt*K`` once;
* :class:`ModalSolver` handles uniform materials.  There the temperature
  depends on the diffusivity alone, and a generalised eigendecomposition of
  the unit-property matrices turns every step into a diagonal update that can
  be vectorised over many diffusivities at once.  This is what the
  calibration loop uses.

Heat rates are per unit depth multiplied by ``depth`` (default 1 m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

T_REF = 273.0
STEP_SECONDS = 300.0
SECTION_LENGTH = 0.4


@dataclass(frozen=True)
class Material:
    rho: float  # kg/m^3
    cp: float  # J/(kg K)
    alpha: float  # m^2/s

    def __post_init__(self):
        for name in ("rho", "cp", "alpha"):
            if not getattr(self, name) > 0:
                raise ValueError(f"material {name} must be > 0")

    @property
    def k(self) -> float:
        return self.alpha * self.rho * self.cp

    @property
    def heat_capacity(self) -> float:
        return self.rho * self.cp


CONCRETE = Material(2300.0, 900.0, 9.66e-7)
STEEL = Material(7850.0, 440.0, 1.56e-5)


@dataclass(frozen=True)
class SensorLayout:
    points: tuple = ((0.15, 0.30), (0.30, 0.30), (0.15, 0.12), (0.30, 0.12))
    labels: tuple = ("T1", "T2", "T3", "T4")

    def __post_init__(self):
        pts = tuple(tuple(float(c) for c in p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if len(self.labels) != len(pts):
            raise ValueError("one label per sensor point")

    def __len__(self) -> int:
        return len(self.points)

    def check_inside(self, length: float) -> None:
        for (x, y), lab in zip(self.points, self.labels):
            if not (0.0 <= x <= length and 0.0 <= y <= length):
                raise ValueError(f"sensor {lab} at ({x}, {y}) lies outside the domain")


# --------------------------------------------------------------------------
# mesh and assembly
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Mesh:
    """Structured ``n x n`` grid of square bilinear elements.

    Node ``(i, j)`` (``i`` along x) has index ``j*(n+1) + i``; element
    ``(i, j)`` has index ``j*n + i`` and counter-clockwise nodes starting at
    its lower-left corner.
    """

    n: int = 20
    length: float = SECTION_LENGTH

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("mesh needs at least one element per side")
        if not self.length > 0:
            raise ValueError("section length must be > 0")

    @property
    def h(self) -> float:
        return self.length / self.n

    @property
    def n_nodes(self) -> int:
        return (self.n + 1) ** 2

    @property
    def n_elements(self) -> int:
        return self.n * self.n

    def node_coords(self) -> np.ndarray:
        c = np.linspace(0.0, self.length, self.n + 1)
        xx, yy = np.meshgrid(c, c)  # row j, column i
        return np.column_stack([xx.ravel(), yy.ravel()])

    def connectivity(self) -> np.ndarray:
        n = self.n
        i, j = np.meshgrid(np.arange(n), np.arange(n))
        i, j = i.ravel(), j.ravel()
        ll = j * (n + 1) + i
        return np.column_stack([ll, ll + 1, ll + n + 2, ll + n + 1])

    def element_bounds(self) -> np.ndarray:
        """``(x0, x1, y0, y1)`` of every element."""
        n, h = self.n, self.h
        i, j = np.meshgrid(np.arange(n), np.arange(n))
        i, j = i.ravel(), j.ravel()
        return np.column_stack([i * h, (i + 1) * h, j * h, (j + 1) * h])

    def right_nodes(self) -> np.ndarray:
        n = self.n
        return np.arange(n + 1) * (n + 1) + n

    def free_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.right_nodes()] = False
        return np.flatnonzero(mask)

    def locate(self, x: float, y: float) -> tuple[int, float, float]:
        """Containing element and local coordinates in ``[0, 1]^2``."""
        tol = 1e-12 * self.length
        if not (-tol <= x <= self.length + tol and -tol <= y <= self.length + tol):
            raise ValueError(f"point ({x}, {y}) lies outside the domain")
        h = self.h
        i = min(max(int(math.floor(x / h)), 0), self.n - 1)
        j = min(max(int(math.floor(y / h)), 0), self.n - 1)
        xi = min(max((x - i * h) / h, 0.0), 1.0)
        eta = min(max((y - j * h) / h, 0.0), 1.0)
        return j * self.n + i, xi, eta

    def interpolation_row(self, x: float, y: float) -> np.ndarray:
        """Nodal weights reproducing the bilinear field value at ``(x, y)``."""
        e, xi, eta = self.locate(x, y)
        row = np.zeros(self.n_nodes)
        conn = self.connectivity()[e]
        row[conn] = [(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta]
        return row


def _reference_matrices(h: float) -> tuple[np.ndarray, np.ndarray]:
    """Unit-property mass and stiffness matrices of a square element, 2x2 Gauss."""
    g = 1.0 / math.sqrt(3.0)
    pts = [(0.5 * (1 + a), 0.5 * (1 + b)) for a in (-g, g) for b in (-g, g)]
    w = 0.25 * h * h  # each Gauss weight on the unit square times the Jacobian
    m = np.zeros((4, 4))
    kk = np.zeros((4, 4))
    for xi, eta in pts:
        n = np.array([(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta])
        dx = np.array([-(1 - eta), 1 - eta, eta, -eta]) / h
        dy = np.array([-(1 - xi), -xi, xi, 1 - xi]) / h
        m += w * np.outer(n, n)
        kk += w * (np.outer(dx, dx) + np.outer(dy, dy))
    return m, kk


def assemble(mesh: Mesh, capacity: np.ndarray, conductivity: np.ndarray) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Global mass and stiffness matrices for per-element ``rho*c_p`` and ``k``."""
    m_ref, k_ref = _reference_matrices(mesh.h)
    conn = mesh.connectivity()
    rows = np.repeat(conn, 4, axis=1).ravel()
    cols = np.tile(conn, (1, 4)).ravel()
    m_vals = (capacity[:, None] * m_ref.ravel()[None, :]).ravel()
    k_vals = (conductivity[:, None] * k_ref.ravel()[None, :]).ravel()
    shape = (mesh.n_nodes, mesh.n_nodes)
    mass = sp.coo_matrix((m_vals, (rows, cols)), shape=shape).tocsr()
    stiff = sp.coo_matrix((k_vals, (rows, cols)), shape=shape).tocsr()
    return mass, stiff


# --------------------------------------------------------------------------
# model definition
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ThermalModel:
    """Mesh, per-element material map and run settings."""

    mesh: Mesh
    rho: np.ndarray
    cp: np.ndarray
    alpha: np.ndarray
    dt: float = STEP_SECONDS
    t0: float = T_REF
    layout: SensorLayout = field(default_factory=SensorLayout)
    x_mid: float = 0.2
    depth: float = 1.0

    def __post_init__(self):
        ne = self.mesh.n_elements
        for name in ("rho", "cp", "alpha"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (ne,)).copy()
            if not np.all(arr > 0):
                raise ValueError(f"{name} must be > 0 in every element")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not 0.0 < self.x_mid < self.mesh.length:
            raise ValueError("midline must lie inside the domain")
        if not self.depth > 0:
            raise ValueError("depth must be > 0")
        self.layout.check_inside(self.mesh.length)

    @classmethod
    def isotropic(cls, material: Material = CONCRETE, n: int = 20, **kwargs) -> "ThermalModel":
        mesh = Mesh(n, kwargs.pop("length", SECTION_LENGTH))
        return cls(mesh, material.rho, material.cp, material.alpha, **kwargs)

    @classmethod
    def biphasic(
        cls,
        base: Material,
        inclusion: Material,
        band: tuple[float, float] = (0.16, 0.18),
        n: int = 20,
        **kwargs,
    ) -> "ThermalModel":
        """``base`` everywhere except a horizontal band made of ``inclusion``.

        Elements cut by the band edge get the area-weighted (Voigt) mix.
        """
        mesh = Mesh(n, kwargs.pop("length", SECTION_LENGTH))
        bounds = mesh.element_bounds()
        lo, hi = band
        overlap = np.clip(np.minimum(bounds[:, 3], hi) - np.maximum(bounds[:, 2], lo), 0.0, None)
        frac = overlap / mesh.h
        rho = frac * inclusion.rho + (1 - frac) * base.rho
        cp = frac * inclusion.cp + (1 - frac) * base.cp
        alpha = frac * inclusion.alpha + (1 - frac) * base.alpha
        return cls(mesh, rho, cp, alpha, **kwargs)

    @property
    def k(self) -> np.ndarray:
        return self.alpha * self.rho * self.cp

    @property
    def heat_capacity(self) -> np.ndarray:
        return self.rho * self.cp

    @property
    def is_uniform(self) -> bool:
        return bool(
            np.ptp(self.rho) == 0 and np.ptp(self.cp) == 0 and np.ptp(self.alpha) == 0
        )

    def step_times(self, horizon: float) -> np.ndarray:
        n_steps = _steps_for(horizon, self.dt)
        return np.arange(n_steps + 1) * self.dt


def _steps_for(horizon: float, dt: float) -> int:
    n = horizon / dt
    n_int = int(round(n))
    if n_int < 0 or abs(n - n_int) > 1e-9 * max(1.0, n):
        raise ValueError(f"horizon {horizon} s is not a multiple of the step {dt} s")
    return n_int


def ramp_boundary(t, t0: float = T_REF, target: float = 303.0, ramp_seconds: float = 29 * 60.0):
    """Linear ramp from ``t0`` to ``target`` over ``ramp_seconds``, constant afterwards."""
    t = np.asarray(t, dtype=float)
    return t0 + (target - t0) * np.clip(t / ramp_seconds, 0.0, 1.0)


def _boundary_values(boundary, times: np.ndarray) -> np.ndarray:
    if callable(boundary):
        values = np.asarray(boundary(times), dtype=float)
        values = np.broadcast_to(values, times.shape).copy()
    else:
        values = np.asarray(boundary, dtype=float).reshape(-1)
        if values.size == 1:
            values = np.full(times.shape, float(values[0]))
        elif values.size < times.size:
            raise ValueError(
                f"boundary series has {values.size} values, the run needs {times.size}"
            )
        else:
            values = values[: times.size].copy()
    if not np.all(np.isfinite(values)):
        raise ValueError("boundary temperatures must be finite")
    return values


# --------------------------------------------------------------------------
# general sparse solver
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TemperatureHistory:
    model: ThermalModel
    times: np.ndarray  # seconds, one entry per stored state
    values: np.ndarray  # (n_times, n_nodes) in K
    boundary: np.ndarray  # right-edge temperature at each time

    def step_index(self, t: float) -> int:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-6 * self.model.dt:
            raise ValueError(f"time {t} s is not on the solver grid")
        return idx

    def field(self, t: float) -> np.ndarray:
        """Nodal temperatures at time ``t`` as an ``(n+1, n+1)`` grid (row = y)."""
        n = self.model.mesh.n
        return self.values[self.step_index(t)].reshape(n + 1, n + 1)

    def to_csv(self, path, t: float) -> None:
        coords = self.model.mesh.node_coords()
        data = np.column_stack([coords, self.values[self.step_index(t)]])
        np.savetxt(Path(path), data, delimiter=",", header="x_m,y_m,temperature_K", comments="")


def solve_transient(model: ThermalModel, boundary, horizon: float) -> TemperatureHistory:
    """Backward Euler run from a uniform ``t0`` field.

    ``boundary`` is either a callable of time (seconds) or an array with one
    right-edge temperature per step time ``0, dt, 2 dt, ...``.
    """
    mesh = model.mesh
    times = model.step_times(horizon)
    g = _boundary_values(boundary, times)
    mass, stiff = assemble(mesh, model.heat_capacity, model.k)
    free = mesh.free_nodes()
    fixed = mesh.right_nodes()
    system = (mass + model.dt * stiff).tocsr()
    a_ff = system[free][:, free].tocsc()
    a_fd = system[free][:, fixed]
    m_f = mass[free]
    lu = spla.splu(a_ff)
    out = np.empty((times.size, mesh.n_nodes))
    state = np.full(mesh.n_nodes, float(model.t0))
    state[fixed] = g[0]
    out[0] = state
    ones_d = np.ones(fixed.size)
    for step in range(1, times.size):
        rhs = m_f @ state - a_fd @ (g[step] * ones_d)
        new = np.empty_like(state)
        new[free] = lu.solve(rhs)
        new[fixed] = g[step]
        state = new
        out[step] = state
    return TemperatureHistory(model, times, out, g)


def sensor_temperatures(history: TemperatureHistory, layout: SensorLayout | None = None, sample_times=None) -> np.ndarray:
    """Bilinear interpolation at the sensor points; rows are times, columns sensors."""
    layout = layout or history.model.layout
    mesh = history.model.mesh
    layout.check_inside(mesh.length)
    weights = np.vstack([mesh.interpolation_row(x, y) for x, y in layout.points])
    if sample_times is None:
        idx = np.arange(history.times.size)
    else:
        idx = np.array([history.step_index(t) for t in np.atleast_1d(sample_times)], dtype=int)
    return history.values[idx] @ weights.T


def midline_operator(model: ThermalModel, x_mid: float | None = None) -> np.ndarray:
    """Row vector ``L`` such that ``L @ T`` is the heat rate through ``x = x_mid``.

    The flux density ``-k dT/dx`` is taken from the element(s) touching the
    line; on an element boundary the two neighbours are averaged.  Along y the
    derivative is linear within an element row, so the trapezoidal rule per
    row is exact.  The normal is ``+x``.
    """
    mesh = model.mesh
    x_mid = model.x_mid if x_mid is None else float(x_mid)
    if not 0.0 < x_mid < mesh.length:
        raise ValueError("midline must lie inside the domain")
    n = mesh.n
    pos = x_mid / mesh.h
    nearest = round(pos)
    if abs(pos - nearest) < 1e-9:
        columns, share = (nearest - 1, nearest), 0.5
    else:
        columns, share = (int(math.floor(pos)),), 1.0
    conn = mesh.connectivity()
    k = model.k
    op = np.zeros(mesh.n_nodes)
    for i in columns:
        for j in range(n):
            e = j * n + i
            n1, n2, n3, n4 = conn[e]
            # within a row dT/dx = ((T2 - T1)(1 - eta) + (T3 - T4) eta) / h does not
            # depend on x; over the row height h it integrates to (T2 - T1 + T3 - T4) / 2
            c = -0.5 * share * k[e]
            op[n1] -= c
            op[n2] += c
            op[n3] += c
            op[n4] -= c
    return op * model.depth


def midline_heat_rate(history: TemperatureHistory, x_mid: float | None = None) -> np.ndarray:
    """Heat rate through the midline at every stored time, in W (signed, normal ``+x``)."""
    op = midline_operator(history.model, x_mid)
    return history.values @ op


def boundary_heat_rate(history: TemperatureHistory) -> np.ndarray:
    """Heat rate entering through the Dirichlet edge over each step (reaction forces).

    Entry ``n`` belongs to the step ending at ``times[n + 1]``.
    """
    model = history.model
    mass, stiff = assemble(model.mesh, model.heat_capacity, model.k)
    fixed = model.mesh.right_nodes()
    dT = np.diff(history.values, axis=0)
    react = (dT @ mass[fixed].T.toarray()) / model.dt + history.values[1:] @ stiff[fixed].T.toarray()
    return react.sum(axis=1) * model.depth


def stored_energy(history: TemperatureHistory) -> np.ndarray:
    """Integral of ``rho c_p (T - t0)`` over the section at every stored time, in J."""
    model = history.model
    mass, _ = assemble(model.mesh, model.heat_capacity, model.k)
    lumped = np.asarray(mass.sum(axis=0)).ravel()
    return (history.values - model.t0) @ lumped * model.depth


def cumulative_heat(rates, times) -> np.ndarray:
    """Trapezoidal running integral; the first entry is 0."""
    rates = np.asarray(rates, dtype=float)
    times = np.asarray(times, dtype=float).reshape(-1)
    if rates.shape[-1] != times.size:
        raise ValueError("one rate per time is required")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    dt = np.diff(times)
    inc = 0.5 * dt * (rates[..., 1:] + rates[..., :-1])
    out = np.zeros(rates.shape)
    out[..., 1:] = np.cumsum(inc, axis=-1)
    return out


def write_series_csv(path, times, values, name: str = "value") -> None:
    data = np.column_stack([np.asarray(times, dtype=float), np.asarray(values, dtype=float)])
    np.savetxt(Path(path), data, delimiter=",", header=f"time_s,{name}", comments="", fmt="%.10g")


# --------------------------------------------------------------------------
# modal solver for uniform materials
# --------------------------------------------------------------------------


class ModalSolver:
    """Backward Euler in the eigenbasis of the unit-property pencil.

    With uniform ``rho c_p`` and ``k = alpha rho c_p`` the capacity cancels
    from the field equation, so only ``alpha`` matters.  Writing the free
    temperatures as ``T_F = V c`` with ``V' M0 V = I`` and ``V' K0 V = diag(lam)``
    one step reads::

        c' = (c + g a - g' (a + dt alpha b)) / (1 + dt alpha lam)

    with ``a = V' M0_FD 1`` and ``b = V' K0_FD 1``.
    """

    def __init__(self, mesh: Mesh, dt: float = STEP_SECONDS, t0: float = T_REF, heat_capacity: float = CONCRETE.heat_capacity, layout: SensorLayout | None = None, x_mid: float = 0.2, depth: float = 1.0):
        self.mesh = mesh
        self.dt = float(dt)
        self.t0 = float(t0)
        self.heat_capacity = float(heat_capacity)
        self.layout = layout or SensorLayout()
        self.layout.check_inside(mesh.length)
        self.x_mid = float(x_mid)
        self.depth = float(depth)
        ne = mesh.n_elements
        m0, k0 = assemble(mesh, np.ones(ne), np.ones(ne))
        free, fixed = mesh.free_nodes(), mesh.right_nodes()
        m0 = m0.toarray()
        k0 = k0.toarray()
        lam, vec = scipy.linalg.eigh(k0[np.ix_(free, free)], m0[np.ix_(free, free)])
        self.lam = np.clip(lam, 0.0, None)
        self.vec = vec
        ones_d = np.ones(fixed.size)
        self.a = vec.T @ (m0[np.ix_(free, fixed)] @ ones_d)
        self.b = vec.T @ (k0[np.ix_(free, fixed)] @ ones_d)
        self.c0 = vec.T @ (m0[np.ix_(free, free)] @ np.full(free.size, self.t0))
        # linear read-outs: value = row_F @ T_F + row_D_sum * g
        sensors = np.vstack([mesh.interpolation_row(x, y) for x, y in self.layout.points])
        self.sensor_modal = sensors[:, free] @ vec
        self.sensor_fixed = sensors[:, fixed].sum(axis=1)
        unit = ThermalModel(mesh, 1.0, 1.0, 1.0, dt=dt, t0=t0, layout=self.layout, x_mid=x_mid, depth=1.0)
        mid = midline_operator(unit, x_mid)  # for k = 1
        self.mid_modal = mid[free] @ vec
        self.mid_fixed = float(mid[fixed].sum())

    @classmethod
    def for_model(cls, model: ThermalModel) -> "ModalSolver":
        if not model.is_uniform:
            raise ValueError("the modal solver needs a uniform material")
        return cls(model.mesh, model.dt, model.t0, float(model.heat_capacity[0]), model.layout, model.x_mid, model.depth)

    def run(self, alphas, boundary, n_steps: int, sensor_steps=None, heat: bool = False):
        """Advance every diffusivity in ``alphas`` for ``n_steps`` steps.

        Returns ``(sensors, heat_rates)``: sensor readings with shape
        ``(n_alpha, len(sensor_steps), n_sensors)`` (or ``None``) and midline
        heat rates with shape ``(n_alpha, n_steps + 1)`` (or ``None``).
        """
        alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
        if np.any(~(alphas > 0)) or not np.all(np.isfinite(alphas)):
            raise ValueError(f"diffusivity must be finite and > 0, got {alphas}")
        times = np.arange(n_steps + 1) * self.dt
        g = _boundary_values(boundary, times)
        steps = [] if sensor_steps is None else [int(s) for s in sensor_steps]
        if any(s < 0 or s > n_steps for s in steps):
            raise ValueError("sensor steps outside the run")
        want = {s: i for i, s in enumerate(steps)}
        n_a = alphas.size
        sensors = np.empty((n_a, len(steps), len(self.layout))) if steps else None
        rates = np.empty((n_a, n_steps + 1)) if heat else None
        da = self.dt * alphas[:, None]
        denom = 1.0 + da * self.lam[None, :]
        drive = self.a[None, :] + da * self.b[None, :]
        c = np.broadcast_to(self.c0, (n_a, self.c0.size)).copy()
        k = alphas * self.heat_capacity * self.depth

        def record(step, c):
            if step in want:
                sensors[:, want[step], :] = c @ self.sensor_modal.T + g[step] * self.sensor_fixed
            if heat:
                rates[:, step] = k * (c @ self.mid_modal + g[step] * self.mid_fixed)

        record(0, c)
        for step in range(1, n_steps + 1):
            c = (c + g[step - 1] * self.a - g[step] * drive) / denom
            record(step, c)
        return sensors, rates


# --------------------------------------------------------------------------
# calibration forward model
# --------------------------------------------------------------------------


TRAINING_MINUTES = tuple(range(20, 221, 5))


class ThermalForward:
    """Isotropic forward model mapping a diffusivity to a model output.

    ``output="sensors"`` returns the sensor readings at ``sample_minutes``
    flattened time-major (all sensors at the first time, then the next time);
    ``output="heat"`` returns the cumulative heat that has crossed the midline
    towards ``-x`` (into the left half) at ``sample_minutes``, in J.
    """

    def __init__(
        self,
        sample_minutes=TRAINING_MINUTES,
        n: int = 20,
        material: Material = CONCRETE,
        boundary: Callable | np.ndarray | None = None,
        output: str = "sensors",
        dt: float = STEP_SECONDS,
        t0: float = T_REF,
        layout: SensorLayout | None = None,
        x_mid: float = 0.2,
        depth: float = 1.0,
    ):
        if output not in ("sensors", "heat"):
            raise ValueError("output must be 'sensors' or 'heat'")
        self.output = output
        self.sample_minutes = np.asarray(sample_minutes, dtype=float).reshape(-1)
        if self.sample_minutes.size == 0:
            raise ValueError("at least one sample time is required")
        steps = self.sample_minutes * 60.0 / dt
        self.sample_steps = np.rint(steps).astype(int)
        if np.any(np.abs(steps - self.sample_steps) > 1e-9) or np.any(self.sample_steps < 0):
            raise ValueError("sample times must lie on the time-step grid")
        self.n_steps = int(self.sample_steps.max())
        self.solver = ModalSolver(Mesh(n), dt, t0, material.heat_capacity, layout, x_mid, depth)
        times = np.arange(self.n_steps + 1) * dt
        self.boundary = _boundary_values(
            boundary if boundary is not None else (lambda t: ramp_boundary(t, t0)), times
        )

    @property
    def n_outputs(self) -> int:
        if self.output == "heat":
            return int(self.sample_steps.size)
        return int(self.sample_steps.size * len(self.solver.layout))

    def evaluate_batch(self, thetas) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        alphas = thetas[:, 0]
        if self.output == "sensors":
            sensors, _ = self.solver.run(alphas, self.boundary, self.n_steps, self.sample_steps)
            return sensors.reshape(alphas.size, -1)
        _, rates = self.solver.run(alphas, self.boundary, self.n_steps, heat=True)
        times = np.arange(self.n_steps + 1) * self.solver.dt
        q = cumulative_heat(-rates, times)
        return q[:, self.sample_steps]

    def __call__(self, theta) -> np.ndarray:
        return self.evaluate_batch(np.asarray(theta, dtype=float).reshape(1, -1))[0]


def thermal_forward(alpha_sample: float, sample_minutes=TRAINING_MINUTES, n: int = 20) -> np.ndarray:
    """Flattened sensor readings of the isotropic model for one diffusivity."""
    if not alpha_sample > 0:
        raise ValueError("diffusivity must be > 0")
    return ThermalForward(sample_minutes, n=n)([alpha_sample])
