import json
from multiprocessing import Manager, Process, Queue
import sys
import traceback
from typing import Any
import uuid

import numpy as np

from core import settings
from core.helpers import as_float_list, clear_logs, read_logs, requires
from core.orbits import bounds, fileio
from core.orbits.dynamics import (
    ShootingProblem,
    collision_quarter,
    integrate,
    named_state,
    shoot_henon,
    trajectory_action,
)
from core.orbits.minimize import first_variation_report, minimize_free
from core.orbits.symmetry import Quarter, extend, verify_d2
from core.orbits.workers import run_minimize_worker
from core.utils.exceptions import (
    EXIT_OK,
    LineSearchError,
    PreconditionError,
    ToleranceError,
    exit_code_for,
)
from core.utils.response import Request, Response
from core.utils.types import MinimizeConfig

LOG_NAMES = ["runner", "minimize", "dynamics", "symmetry", "fileio"]

# published values the computed ones are compared against
REFERENCE_BOUNDS = [
    ("Kepler bound, collinear total collision", 7.4672, bounds.collinear_collision_bound),
    ("Kepler bound, triangle total collision", 6.6927, bounds.triangle_collision_bound),
    ("Total collision lower bound", 6.6927, bounds.total_collision_bound),
    ("Lagrange quarter action", 4.21617, bounds.lagrange_quarter_action),
    ("Lagrange period action", 16.8647, bounds.lagrange_period_action),
    ("Test path A1 (upper)", 1.5100, lambda: bounds.test_path_action().a1),
    ("Test path A2", 2.0281, lambda: bounds.test_path_action().a2),
    ("Test path total (upper)", 3.5383, lambda: bounds.test_path_action().total),
]


class Runner:
    def __init__(self):
        self.log = settings.get_logger("runner")

    def listen(self):
        for line in sys.stdin:
            line = line.strip()
            if not line:
                continue
            elif line == "exit":
                res = json.dumps(Response(status="ok", payload="exiting...").to_dict())
                print(res, flush=True)
                break

            _id = None
            try:
                req = json.loads(line)
                req = Request(**req)
                _id = req.id
                res_obj = self.handle_command(req)

                res_obj["id"] = _id
                res = json.dumps(res_obj)
            except Exception as e:
                tb = traceback.format_exc()
                res_obj = Response(
                    status="error", error=str(e), traceback=tb, code=exit_code_for(e)
                ).to_dict()

                res_obj["id"] = _id
                res = json.dumps(res_obj)
            finally:
                print(res, flush=True)

    def handle_command(self, command: Request) -> dict:
        try:
            handler = getattr(self, f"_handle_{command.kind}", None)
            if not handler:
                return self._err(f"Unknown command: {command.kind}")
            return handler(command.body)
        except Exception as e:
            self.log.error(f"{command.kind} failed: {e}")
            return Response(
                status="error",
                error=str(e),
                traceback=traceback.format_exc(),
                code=exit_code_for(e),
            ).to_dict()

    def _ok(self, payload: Any) -> dict:
        return Response(status="ok", payload=as_float_list(payload), code=EXIT_OK).to_dict()

    def _err(self, error: str, code: int = 2) -> dict:
        return Response(status="error", error=error, code=code).to_dict()

    @requires()
    def _handle_ping(self, _=None) -> dict:
        return self._ok("pong")

    @requires()
    def _handle_bounds(self, _=None) -> dict:
        rows = []
        for name, reference, compute in REFERENCE_BOUNDS:
            value = compute()
            rows.append(
                {"name": name, "reference": reference, "computed": value, "delta": value - reference}
            )
        test_total = bounds.test_path_action().total
        flags = {
            "total_collision_bound_below_test_path": bool(bounds.total_collision_bound() < test_total),
            "test_path_below_3.5383": bool(test_total < 3.5383),
        }
        return self._ok({"rows": rows, "flags": flags})

    @requires()
    def _handle_minimize(self, body: dict | None) -> dict:
        body = dict(body or {})
        out = body.pop("out", None)
        result = minimize_free(MinimizeConfig(**body))
        summary = result.summary()
        summary["first_variation"] = [row._asdict() for row in first_variation_report(result)]
        if out:
            summary["out"] = fileio.write_trajectory(
                fileio.from_path(result.path, {"summary": as_float_list(summary)}), out
            )
        if result.termination == "line_search_failure":
            raise LineSearchError(
                f"Line search failed after {result.iterations} iterations; "
                f"best action {result.action.total:.10f} (written to {out or 'nowhere'})."
            )
        return self._ok(summary)

    # region dynamics
    def _initial_state(self, body: dict):
        if body.get("path"):
            return fileio.to_state(fileio.read_trajectory(body["path"]), body.get("index", 0))
        return named_state(body.get("state", "broucke-henon"))

    @requires()
    def _handle_integrate(self, body: dict | None) -> dict:
        body = body or {}
        tol = float(body.get("tol", settings.INTEGRATOR_TOL))
        r_event = float(body.get("r_event", settings.R_EVENT))
        samples = int(body.get("samples", 1001))

        recipe = None if body.get("path") else collision_quarter(str(body.get("state", "")))
        if recipe is not None:
            sq = recipe(r_event=r_event, tol=tol, samples=samples)
            tr = sq.trajectory
            payload = {
                "status": tr.status,
                "event_pair": tr.event_pair,
                "event_time": tr.t_end,
                "covered_action": sq.covered_action,
                "tail_action": sq.tail_action,
                "action": sq.action,
                "collision_time": sq.collision_time,
                "direction": sq.direction,
                "gamma0": sq.gamma0,
                "energy_drift": tr.energy_drift(),
            }
        else:
            s0 = self._initial_state(body)
            t_end = float(body.get("t", s0.time + 4.0))
            tr = integrate(s0, t_end, tol, samples=samples, r_event=r_event)
            lo, hi = tr.times[0], tr.times[-1]
            payload = {
                "status": tr.status,
                "event_pair": tr.event_pair,
                "t_start": tr.t_start,
                "t_end": tr.t_end,
                "action": trajectory_action(tr, lo, hi),
                "return_deviation": float(
                    np.abs(tr.end_state.as_vector() - tr.start_state.as_vector()).max()
                ),
                "energy_drift": tr.energy_drift(),
                "angular_momentum_drift": tr.angular_momentum_drift(),
            }

        if body.get("out"):
            payload["out"] = fileio.write_trajectory(
                fileio.from_trajectory(tr, {"summary": as_float_list(payload)}), body["out"]
            )
        return self._ok(payload)

    @requires()
    def _handle_shoot(self, body: dict | None) -> dict:
        body = body or {}
        seed = self._initial_state(body)
        guess = ShootingProblem.from_state(seed)
        if body.get("decimals") is not None:
            guess = guess.rounded(int(body["decimals"]))
        refined = shoot_henon(guess, tol=float(body.get("tol", 1e-9)))

        tr = integrate(refined, 1.0, samples=int(body.get("samples", 1001)))
        payload = {
            "guess": guess.as_array(),
            "refined": ShootingProblem.from_state(refined).as_array(),
            "positions": refined.positions,
            "velocities": refined.velocities,
            "residuals": ShootingProblem.residuals(tr.end_state),
            "seed_deviation": float(np.abs(refined.as_vector() - seed.as_vector()).max()),
            "action": trajectory_action(tr, 0.0, 1.0),
        }
        if body.get("out"):
            payload["out"] = fileio.write_trajectory(
                fileio.from_trajectory(tr, {"summary": as_float_list(payload)}), body["out"]
            )
        return self._ok(payload)

    # endregion

    # region symmetry
    @requires("mode")
    def _handle_extend(self, body: dict) -> dict:
        if body.get("path"):
            data = fileio.read_trajectory(body["path"])
            if data.velocities is not None and data.times[-1] > 1.0:
                source = fileio.to_orbit(data)
            elif data.velocities is not None:
                source = Quarter(
                    np.asarray(data.times, dtype=float),
                    np.asarray(data.positions, dtype=float),
                    np.asarray(data.velocities, dtype=float),
                )
            else:
                source = fileio.to_path(data)
        else:
            s0 = self._initial_state(body)
            if s0.time != 0.0:
                raise PreconditionError(f"A quarter starts at t=0; the state is given at t={s0.time}.")
            source = integrate(s0, 1.0, samples=int(body.get("samples", 1001)))

        orbit = extend(source, body["mode"], body.get("tol"), bool(body.get("strict", True)))
        payload = {
            "provenance": orbit.provenance.value,
            "samples": orbit.times.size,
            "junctions": [row._asdict() for row in orbit.junctions],
            "d2": verify_d2(orbit, orbit.tolerance).to_dict(),
        }
        if body.get("out"):
            payload["out"] = fileio.write_trajectory(fileio.from_orbit(orbit), body["out"])
        return self._ok(payload)

    @requires("path")
    def _handle_verify(self, body: dict) -> dict:
        tol = float(body.get("tol", 1e-5))
        orbit = fileio.to_orbit(fileio.read_trajectory(body["path"]))
        report = verify_d2(orbit, tol)
        energy = orbit.energy()
        energy = energy[np.isfinite(energy)]
        payload = {
            **report.to_dict(),
            "periodicity": float(np.abs(orbit.positions[-1] - orbit.positions[0]).max()),
            "energy_spread": float(energy.max() - energy.min()) if energy.size else 0.0,
        }
        failures = []
        if not report.passed:
            failures.append(
                f"{report.worst_relation} deviates by {report.max_deviation:.3e} at t={report.worst_time:.4f}"
            )
        if payload["periodicity"] > tol:
            failures.append(f"q(4) - q(0) = {payload['periodicity']:.3e}")
        energy_tol = float(body.get("energy_tol", settings.ENERGY_TOL))
        if payload["energy_spread"] > energy_tol:
            failures.append(f"energy spread {payload['energy_spread']:.3e} > {energy_tol:.1e}")
        if failures:
            raise ToleranceError(f"Orbit check failed (tol={tol:.1e}): " + "; ".join(failures))
        return self._ok(payload)

    @requires("path", "out")
    def _handle_export(self, body: dict) -> dict:
        data = fileio.read_trajectory(body["path"])
        if body.get("jacobi"):
            rows = fileio.export_jacobi_csv(data, body["out"])
        else:
            rows = fileio.export_csv(data, body["out"], bool(body.get("velocities", True)))
        return self._ok({"rows": rows, "out": body["out"]})

    # endregion

    # region jobs
    @requires(MinimizeConfig)
    def _handle_start_minimize(self, body: dict | None) -> dict:
        if hasattr(self, "_active_process") and self._active_process.is_alive():
            return self._err("A minimization is already running.")

        body = dict(body or {})
        out = body.pop("out", None)
        cfg = MinimizeConfig(**body)

        self._job_id = str(uuid.uuid4())
        self._result_queue = Queue()
        self._progress = Manager().dict()
        self._progress.update(
            {"status": "starting", "iteration": 0, "action": None, "gradient": None}
        )
        self._active_process = Process(
            target=run_minimize_worker,
            args=(self._result_queue, cfg.model_dump(mode="json"), self._progress, out),
        )
        self._active_process.start()

        return self._ok(
            {
                "status": "pending",
                "message": "Minimization started.",
                "job_id": self._job_id,
                "data": None,
                "progress": dict(self._progress),
            }
        )

    @requires("job_id")
    def _handle_poll_minimize(self, body: dict) -> dict:
        if (
            not hasattr(self, "_job_id")
            or body.get("job_id") != self._job_id
            or not hasattr(self, "_result_queue")
        ):
            return self._err("Invalid job.")

        response = {
            "status": "pending",
            "message": "Minimization is still in progress.",
            "job_id": self._job_id,
            "data": None,
        }
        if hasattr(self, "_progress"):
            response["progress"] = dict(self._progress)

        if self._result_queue.empty():
            if hasattr(self, "_active_process") and self._active_process.is_alive():
                return self._ok(response)
            return self._err("No result. Process may not have started or crashed.")

        res = self._result_queue.get()
        if isinstance(res, Exception):
            return self._err(f"Error during minimization: {str(res)}", exit_code_for(res))

        response.update(
            {
                "status": "done",
                "message": "Minimization completed successfully.",
                "data": res,
            }
        )
        return self._ok(response)

    @requires()
    def _handle_clear_minimize(self, _=None) -> dict:
        if hasattr(self, "_active_process") and self._active_process.is_alive():
            self._active_process.terminate()
            self._active_process.join()
        return self._ok("Minimization process cleared.")

    # endregion

    @requires()
    def _handle_get_logs_read(self, body: dict | None) -> dict:
        body = body or {}
        names = [body["name"]] if body.get("name") else LOG_NAMES
        try:
            return self._ok(read_logs(names, lines=body.get("lines", 200)))
        except Exception as e:
            return self._err(f"Failed to retrieve logs: {str(e)}", 4)

    @requires()
    def _handle_set_logs_clear(self, _=None) -> dict:
        try:
            return self._ok(clear_logs(LOG_NAMES))
        except Exception as e:
            return self._err(f"Failed to clear logs: {str(e)}", 4)
