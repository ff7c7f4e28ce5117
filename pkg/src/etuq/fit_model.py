"""Model definition for the desk-scale coupled electrothermal problem.

A model is a Cartesian primal/dual node grid with per-cell material
regions, a set of lumped bondwires between node pairs, Dirichlet contact
pads for the electric problem, and the transient configuration.  Models
round-trip through a versioned JSON schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

__all__ = [
    "CartesianGrid",
    "Material",
    "Bondwire",
    "PadGroup",
    "ETConfig",
    "ETModel",
    "desk_model",
    "symmetric_test_model",
    "save_model",
    "load_model",
    "write_trace_csv",
]

STEFAN_BOLTZMANN = 5.670374419e-8  # W/(m^2 K^4)
MODEL_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class CartesianGrid:
    """Node counts and uniform spacings of the primal grid."""

    nx: int
    ny: int
    nz: int
    dx: float
    dy: float
    dz: float

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny * self.nz

    def node(self, ix: int, iy: int, iz: int) -> int:
        return ix + self.nx * (iy + self.ny * iz)

    @property
    def cell_shape(self) -> tuple[int, int, int]:
        return (max(self.nx - 1, 1), max(self.ny - 1, 1), max(self.nz - 1, 1))


@dataclass(frozen=True)
class Material:
    """Temperature-dependent conductivities: x(T) = x_ref / (1 + a (T - T_ref))."""

    name: str
    sigma_ref: float  # S/m
    alpha_sigma: float  # 1/K
    lambda_ref: float  # W/(m K)
    alpha_lambda: float  # 1/K
    rho_c: float  # J/(m^3 K)
    T_ref: float = 293.0

    def sigma(self, T):
        return self.sigma_ref / (1.0 + self.alpha_sigma * (np.asarray(T) - self.T_ref))

    def lam(self, T):
        return self.lambda_ref / (1.0 + self.alpha_lambda * (np.asarray(T) - self.T_ref))


@dataclass(frozen=True)
class Bondwire:
    """Lumped two-node wire with uncertain relative elongation."""

    node_a: int
    node_b: int
    area: float  # m^2
    l_min: float  # m
    material: Material

    def __post_init__(self):
        if self.node_a == self.node_b:
            raise ValueError("bondwire endpoints must differ")
        if self.area <= 0 or self.l_min <= 0:
            raise ValueError("bondwire area and minimal length must be positive")


@dataclass(frozen=True)
class PadGroup:
    """A Dirichlet contact pad: node set held at a fixed potential."""

    name: str
    nodes: tuple[int, ...]
    voltage: float


@dataclass(frozen=True)
class ETConfig:
    ambient: float = 293.0  # K
    h_conv: float = 25.0  # W/(m^2 K)
    emissivity: float = 0.5
    sigma_sb: float = STEFAN_BOLTZMANN
    t_end: float = 3.5  # s
    n_steps: int = 51
    nonlinear_tol: float = 1e-9
    max_nonlinear_iters: int = 30
    coupling_tol: float = 1e-8  # K, on max wire-temperature change
    max_coupling_iters: int = 50

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("need at least one time step")
        if self.nonlinear_tol <= 0:
            raise ValueError("nonlinear tolerance must be positive")
        if not 0.0 <= self.emissivity <= 1.0:
            raise ValueError("emissivity must lie in [0, 1]")


@dataclass
class ETModel:
    grid: CartesianGrid
    materials: dict[str, Material]
    region_tags: np.ndarray  # cell-shaped array of material names
    wires: list[Bondwire]
    pads: list[PadGroup]
    config: ETConfig = field(default_factory=ETConfig)

    def __post_init__(self):
        self.region_tags = np.asarray(self.region_tags, dtype=object)
        if self.region_tags.shape != self.grid.cell_shape:
            raise ValueError(
                f"region tags shape {self.region_tags.shape} does not match "
                f"cell shape {self.grid.cell_shape}"
            )
        for tag in np.unique(self.region_tags):
            if tag not in self.materials:
                raise ValueError(f"region tag {tag!r} has no material")

    @property
    def n_wires(self) -> int:
        return len(self.wires)


# ---------------------------------------------------------------------------
# Shipped models

GOLD = Material(
    name="gold",
    sigma_ref=4.1e7,
    alpha_sigma=3.7e-3,
    lambda_ref=315.0,
    alpha_lambda=3.7e-3,
    rho_c=2.49e6,
)
SILICON = Material(
    name="silicon",
    sigma_ref=1.0e4,
    alpha_sigma=2.0e-3,
    lambda_ref=150.0,
    alpha_lambda=2.0e-3,
    rho_c=1.63e6,
)
EPOXY = Material(
    name="epoxy",
    sigma_ref=1.0e-6,
    alpha_sigma=0.0,
    lambda_ref=0.3,
    alpha_lambda=0.0,
    rho_c=1.7e6,
)

WIRE_AREA = 7.85e-11  # m^2, 5 um radius-equivalent circular cross-section
WIRE_LMIN = 1.0e-3  # m

# Pad voltage tuned once so the nominal maximum wire temperature of the
# desk model lands in the 450-600 K regime with the wires carrying a
# significant share of the path resistance; see demos/desk_model_tour.py.
DESK_PAD_VOLTAGE = 0.40


def desk_model(pad_voltage: float = DESK_PAD_VOLTAGE) -> ETModel:
    """Desk-scale 12-wire package: silicon chip on an epoxy board.

    7 x 7 x 5 nodes at 0.5 mm spacing.  The chip is the central 2 x 2 x 1
    block of cells in the top cell layer.  Twelve gold wires (three per
    side, four-fold rotational symmetry) connect chip-edge nodes on the
    top surface to peripheral pad nodes; the chip center node is the
    ground contact.  The center north wire is strung shorter than the
    rest, so it carries more current, runs hottest over the whole
    elongation box, and makes the maximum temperature a smooth function
    of the inputs.
    """
    grid = CartesianGrid(7, 7, 5, 0.5e-3, 0.5e-3, 0.5e-3)
    tags = np.full(grid.cell_shape, "epoxy", dtype=object)
    tags[2:4, 2:4, 3] = "silicon"

    top = grid.nz - 1
    wires = []
    # Chip-edge attach points (on the 3x3 node patch over the chip) and the
    # matching peripheral pad nodes, three wires per side.
    side_offsets = (2, 3, 4)
    for off in side_offsets:
        lmin = 0.7e-3 if off == 3 else WIRE_LMIN
        wires.append(_wire(grid, (off, 4, top), (off, 6, top), lmin))  # north
        wires.append(_wire(grid, (off, 2, top), (off, 0, top)))  # south
        wires.append(_wire(grid, (4, off, top), (6, off, top)))  # east
        wires.append(_wire(grid, (2, off, top), (0, off, top)))  # west

    pad_nodes = tuple(w.node_b for w in wires)
    pads = [
        PadGroup("ground", (grid.node(3, 3, top),), 0.0),
        PadGroup("supply", pad_nodes, pad_voltage),
    ]
    return ETModel(
        grid=grid,
        materials={"gold": GOLD, "silicon": SILICON, "epoxy": EPOXY},
        region_tags=tags,
        wires=wires,
        pads=pads,
        config=ETConfig(),
    )


def symmetric_test_model(pad_voltage: float = DESK_PAD_VOLTAGE) -> ETModel:
    """Four-wire variant in which every wire is equivalent by rotation.

    Used for symmetry checks: with equal elongations all four wire
    temperature traces must coincide.
    """
    grid = CartesianGrid(7, 7, 5, 0.5e-3, 0.5e-3, 0.5e-3)
    tags = np.full(grid.cell_shape, "epoxy", dtype=object)
    tags[2:4, 2:4, 3] = "silicon"
    top = grid.nz - 1
    wires = [
        _wire(grid, (3, 4, top), (3, 6, top)),
        _wire(grid, (3, 2, top), (3, 0, top)),
        _wire(grid, (4, 3, top), (6, 3, top)),
        _wire(grid, (2, 3, top), (0, 3, top)),
    ]
    pads = [
        PadGroup("ground", (grid.node(3, 3, top),), 0.0),
        PadGroup("supply", tuple(w.node_b for w in wires), pad_voltage),
    ]
    return ETModel(
        grid=grid,
        materials={"gold": GOLD, "silicon": SILICON, "epoxy": EPOXY},
        region_tags=tags,
        wires=wires,
        pads=pads,
        config=ETConfig(),
    )


def _wire(
    grid: CartesianGrid,
    a: tuple[int, int, int],
    b: tuple[int, int, int],
    l_min: float = WIRE_LMIN,
) -> Bondwire:
    return Bondwire(grid.node(*a), grid.node(*b), WIRE_AREA, l_min, GOLD)


# ---------------------------------------------------------------------------
# JSON schema


def save_model(model: ETModel, path: str) -> None:
    payload = {
        "schema": "etuq-model",
        "version": MODEL_SCHEMA_VERSION,
        "grid": asdict(model.grid),
        "materials": {k: asdict(m) for k, m in model.materials.items()},
        "region_tags": model.region_tags.ravel(order="C").tolist(),
        "wires": [
            {
                "node_a": w.node_a,
                "node_b": w.node_b,
                "area": w.area,
                "l_min": w.l_min,
                "material": w.material.name,
            }
            for w in model.wires
        ],
        "pads": [asdict(p) for p in model.pads],
        "config": asdict(model.config),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)


def load_model(path: str) -> ETModel:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("schema") != "etuq-model":
        raise ValueError("not an etuq model file")
    if payload.get("version") != MODEL_SCHEMA_VERSION:
        raise ValueError(f"unsupported model schema version {payload.get('version')}")
    grid = CartesianGrid(**payload["grid"])
    materials = {k: Material(**m) for k, m in payload["materials"].items()}
    tags = np.array(payload["region_tags"], dtype=object).reshape(
        grid.cell_shape, order="C"
    )
    wires = [
        Bondwire(w["node_a"], w["node_b"], w["area"], w["l_min"], materials[w["material"]])
        for w in payload["wires"]
    ]
    pads = [PadGroup(p["name"], tuple(p["nodes"]), p["voltage"]) for p in payload["pads"]]
    return ETModel(grid, materials, tags, wires, pads, ETConfig(**payload["config"]))


def write_trace_csv(trace: np.ndarray, times: np.ndarray, path: str) -> None:
    """Trace export: one row per (step, wire) with the averaged temperature."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "time_s", "wire", "T_bw_K"])
        for step, t in enumerate(times):
            for j in range(trace.shape[1]):
                writer.writerow([step, repr(float(t)), j, repr(float(trace[step, j]))])
