from app.celery_app import celery_app
from app.exceptions import DomainError
from app.services.experiments import ExperimentConfig, run_cell
from app.tasks.sweep_tasks import run_cell_task


def _payload():
    config = ExperimentConfig.build(example="ex51", scheme="h3n3-direct", alphas=[1.5], n_list=[8], m_list=[8])
    return config.model_dump(mode="json")


def test_sweep_tasks_are_routed_to_sweep_queue():
    assert celery_app.conf.task_routes["fracwave.tasks.*"] == {"queue": "sweep_queue"}
    assert run_cell_task.name == "fracwave.tasks.run_cell"


def test_run_cell_task_eager():
    result = run_cell_task.apply(args=(_payload(), 1.5, 8, 8))
    assert result.successful()
    row = result.get()
    assert row == {**run_cell(_payload(), 1.5, 8, 8), "seconds": row["seconds"]}


def test_run_cell_task_reports_domain_errors():
    result = run_cell_task.apply(args=(_payload(), 2.5, 8, 8))
    assert result.failed()
    assert isinstance(result.result, DomainError)
