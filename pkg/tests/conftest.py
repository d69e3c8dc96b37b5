import logging

import pytest

from voltacell import geometry as geo
from voltacell import materials as mat
from voltacell import units
from voltacell.config import preset
from voltacell.mesh import MeshSpec, generate_layered_mesh
from voltacell.physics import CellProblem
from voltacell.state import Guard, GuardPolicy

logging.getLogger("voltacell").setLevel(logging.WARNING)

DESK_KW = dict(mesh=MeshSpec.coarse(), dt=6.0, t_end=600.0,
               snapshot_every=300.0)


@pytest.fixture(scope="session")
def scales():
    return units.ScaleSet()


@pytest.fixture(scope="session")
def mats_si():
    return mat.default_materials()


@pytest.fixture(scope="session")
def mats_scaled(mats_si, scales):
    return mats_si.scaled(scales)


@pytest.fixture(scope="session")
def geom_scaled(scales):
    dims = geo.scaled_dimensions(geo.CellDimensions(), scales.length)
    return geo.build_interdigitated_domain(dims)


@pytest.fixture(scope="session")
def coarse_mesh(geom_scaled):
    return generate_layered_mesh(geom_scaled, MeshSpec.coarse())


def make_problem(coarse_mesh, mats_scaled, **kw):
    guard = Guard(GuardPolicy.defaults(mats_scaled))
    return CellProblem(coarse_mesh, mats_scaled, guard, **kw)


@pytest.fixture()
def coarse_problem(coarse_mesh, mats_scaled):
    return make_problem(coarse_mesh, mats_scaled)


@pytest.fixture(scope="session")
def desk_runs():
    """Desk-scale runs of every preset in both model modes, shared across
    the acceptance tests (10 simulated minutes, coarse mesh)."""
    from voltacell.driver import run_scenario
    out = {}
    for name in ("low_discharge", "high_discharge", "low_charge",
                 "high_charge"):
        for mode in ("full", "electrochemical"):
            cfg = preset(name).replace(model=mode, **DESK_KW)
            out[(name, mode)] = run_scenario(cfg)
    return out
