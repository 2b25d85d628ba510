import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))
sys.path.insert(0, str(ROOT / "fem"))
sys.path.insert(0, str(ROOT / "inversion"))
sys.path.insert(0, str(ROOT / "sensor"))
sys.path.insert(0, str(ROOT / "noise"))

import pytest

from assembly import Material, assemble
from mesh import generate_disk_mesh
from wavesim import cfl_time_step


@pytest.fixture(scope="session")
def coarse_mesh():
    """Unit disk, h = 0.1."""
    return generate_disk_mesh(1.0, 0.1)


@pytest.fixture(scope="session")
def coarse_system(coarse_mesh):
    """Nondimensional reference material on the coarse disk."""
    return assemble(coarse_mesh, Material())


@pytest.fixture(scope="session")
def coarse_dt(coarse_system):
    return cfl_time_step(coarse_system.mesh, coarse_system.material)
