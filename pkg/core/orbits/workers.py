from core.orbits import fileio
from core.orbits.minimize import first_variation_report, minimize_free
from core.utils.types import MinimizeConfig


def run_minimize_worker(q, cfg_dict: dict, progress: dict, out: str | None = None):
    try:
        progress.update({"status": "running"})
        result = minimize_free(MinimizeConfig(**cfg_dict), progress=progress.update)
        summary = result.summary()
        summary["first_variation"] = [row._asdict() for row in first_variation_report(result)]
        if out:
            summary["out"] = fileio.write_trajectory(
                fileio.from_path(result.path, {"summary": summary}), out
            )
        progress.update({"status": "done", "iteration": result.iterations, "action": result.action.total})
        q.put(summary)
    except Exception as e:
        return q.put(e)
