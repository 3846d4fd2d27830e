import numpy as np
import pytest

from app.config import get_settings
from app.services.pde_solver import ProblemSpec


@pytest.fixture
def settings(monkeypatch, tmp_path):
    current = get_settings()
    monkeypatch.setattr(current, "output_dir", str(tmp_path / "results"))
    monkeypatch.setattr(current, "threads", 2)
    monkeypatch.setattr(current, "use_celery", False)
    return current


@pytest.fixture
def zero_problem():
    def factory(alpha=1.5):
        return ProblemSpec(
            source=lambda x, t: np.zeros_like(x),
            initial_value=np.zeros_like,
            initial_velocity=np.zeros_like,
            alpha=alpha,
            name="zero",
        )

    return factory
