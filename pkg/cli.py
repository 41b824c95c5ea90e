import argparse
from multiprocessing import freeze_support
import sys

from tabulate import tabulate

from core import settings
from core.runner import Runner
from core.utils.response import Request


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orbitsmith")
    sub = parser.add_subparsers(dest="kind", required=True)

    sub.add_parser("bounds", help="Compare the analytic lower bounds with the test path action.")

    p = sub.add_parser("minimize", help="Free-boundary action minimization.")
    # defaults reproduce the collinear Schubart run on a graded grid
    p.add_argument("--grid", type=int, default=2048)
    p.add_argument("--grading", type=float, default=settings.GRADING)
    p.add_argument("--graded", dest="grading", action="store_const", const=settings.GRADING)
    p.add_argument("--uniform", dest="grading", action="store_const", const=1.0)
    p.add_argument("--family", default="qs1_qe1")
    p.add_argument("--seed", default="collinear_testpath")
    p.add_argument("--seed-path")
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--gradient-tol", type=float)
    p.add_argument("--out")

    p = sub.add_parser("integrate", help="Integrate a named state or a state from a file.")
    p.add_argument("--state", default="broucke-henon")
    p.add_argument("--path")
    p.add_argument("--t", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--r-event", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--out")

    p = sub.add_parser("shoot", help="Refine a collinear t=0 state into a symmetric quarter.")
    p.add_argument("--state", default="broucke-henon")
    p.add_argument("--path")
    p.add_argument("--decimals", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--out")

    p = sub.add_parser("extend", help="Extend a quarter to a period-4 orbit.")
    p.add_argument("--mode", choices=["henon", "antisymmetric"], default="henon")
    p.add_argument("--state")
    p.add_argument("--path")
    p.add_argument("--tol", type=float)
    p.add_argument("--no-strict", dest="strict", action="store_false")
    p.add_argument("--out")

    p = sub.add_parser("verify", help="Check the reflection symmetries of an orbit file.")
    p.add_argument("path")
    p.add_argument("--tol", type=float)
    p.add_argument("--energy-tol", type=float)

    p = sub.add_parser("export", help="Write a trajectory file as CSV.")
    p.add_argument("path")
    p.add_argument("out")
    p.add_argument("--jacobi", action="store_true")
    p.add_argument("--no-velocities", dest="velocities", action="store_false")

    p = sub.add_parser("listen", help="Answer JSON requests on stdin.")
    p.add_argument("--debug", action="store_true")
    return parser


def _body(args: argparse.Namespace) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("kind", "debug") and v is not None}


def _print(kind: str, payload) -> None:
    if kind == "bounds":
        print(tabulate(payload["rows"], headers="keys", floatfmt=".6f"))
        print(tabulate(payload["flags"].items(), headers=["check", "holds"]))
        return
    if not isinstance(payload, dict):
        print(payload)
        return

    tables = {k: payload.pop(k) for k in ("first_variation", "junctions") if k in payload}
    scalars = [(k, v) for k, v in payload.items()]
    print(tabulate(scalars, headers=["field", "value"], floatfmt=".12g"))
    for name, rows in tables.items():
        print()
        print(tabulate(rows, headers="keys", floatfmt=".3e"))


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.kind == "listen":
        if args.debug:
            print("Debug mode. Type JSON and press Enter:")
        Runner().listen()
        return 0

    res = Runner().handle_command(Request(kind=args.kind, body=_body(args)))
    if res["status"] == "ok":
        _print(args.kind, res["payload"])
    else:
        print(f"error: {res['error']}", file=sys.stderr)
    return res["code"]


if __name__ == "__main__":
    freeze_support()
    sys.exit(main())
