"""Command-line front end: ``chronos-cv [SUBCOMMAND] --config run.json``.

Exit codes: 0 success, 2 invalid configuration, 3 refusal by a numerical
guard (for example a field that has not decayed at the grid boundary).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
THREAD_ENV = "CHRONOS_CV_THREADS"
# kept in sync with config.SUBCOMMANDS; importing config here would load numpy too early
SUBCOMMANDS = ("gaussian", "wigner-grid", "pdm", "properties", "trajectory", "tomo")
_BLAS_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")


def _limit_threads(deterministic: bool) -> str | None:
    """Cap BLAS threads from the environment; deterministic runs use one thread.

    Only effective before numpy is first imported, which is the case for the
    console entry point.
    """
    n = "1" if deterministic else os.environ.get(THREAD_ENV)
    if n:
        for var in _BLAS_VARS:
            os.environ[var] = n
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chronos-cv", description="Spacetime states in continuous variables.")
    p.add_argument("subcommand", nargs="?", choices=SUBCOMMANDS, help="defaults to the config's subcommand")
    p.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    p.add_argument("--out", type=Path, help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    p.add_argument("--deterministic", action="store_true", help="single-threaded, bit-stable outputs")
    return p


def _format_validation(err) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "invalid configuration:\n  " + "\n  ".join(lines)


def _tolerances(obj, prefix="") -> dict:
    out = {}
    for k, v in obj.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_tolerances(v, key + "."))
        elif "tol" in k or k in ("rim_tol", "max_step", "max_slice_deviation"):
            out[key] = v
    return out


def _jsonable(x):
    import numpy as np

    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x) if np.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def _field_rows(field):
    import numpy as np

    al = field.grid.alphas
    n = field.n_events
    idx = np.indices((al.size,) * n).reshape(n, -1)
    cols = []
    for k in range(n):
        cols += [al[idx[k]].real, al[idx[k]].imag]
    cols.append(field.values.reshape(-1))
    header = [f"{part}_alpha{k + 1}" for k in range(n) for part in ("re", "im")] + ["W"]
    return header, np.column_stack(cols)


def _write_outputs(cfg, out_dir: Path, result: dict, table: dict | None) -> list[str]:
    import numpy as np

    from .serialization import matrix_to_json, write_csv, write_json

    written = []

    def put(name, writer, *args):
        writer(out_dir / name, *args)
        written.append(name)

    sub = cfg.subcommand
    if table is not None:
        put("properties.json", write_json, _jsonable(table))
    if sub == "gaussian" and "estimate" in result:
        st, exact = result["estimate"], result["analytic"]
        put(
            "spacetime_gaussian.json",
            write_json,
            {
                "mean": matrix_to_json(st.mean.reshape(1, -1)),
                "cov": matrix_to_json(st.cov),
                "analytic_cov": matrix_to_json(exact.cov),
                "residuals": matrix_to_json(st.residuals),
                "eps_ladder": list(st.eps_ladder),
            },
        )
    if "field" in result:
        header, rows = _field_rows(result["field"])
        put("field.csv", write_csv, header, rows)
    if "R" in result:
        put("R.json", write_json, result["R"].to_json())
    if "probes" in result:
        put(
            "cross_check.csv",
            write_csv,
            ["re_alpha", "im_alpha", "re_beta", "im_beta", "sequential", "via_R"],
            result["probes"],
        )
    if "density" in result:
        d = result["density"]
        n = d.density.ndim
        grids = np.meshgrid(*([d.axis] * n), indexing="ij")
        rows = np.column_stack([g.reshape(-1) for g in grids] + [d.density.reshape(-1)])
        put("density.csv", write_csv, [f"x{k + 1}" for k in range(n)] + ["p"], rows)
    if "weak" in result:
        ax, wd = result["weak"]
        n = wd.ndim
        probes = np.array([(q, p) for q in ax for p in ax])
        idx = np.indices(wd.shape).reshape(n, -1)
        cols = []
        for k in range(n):
            cols += [probes[idx[k], 0], probes[idx[k], 1]]
        header = [f"{c}{k + 1}" for k in range(n) for c in ("q", "p")] + ["density"]
        put("weak_density.csv", write_csv, header, np.column_stack(cols + [wd.reshape(-1)]))
    if "records" in result:
        if cfg.tomo.write_records:
            for k, rec in enumerate(result["records"]):
                put(f"records/record_{k:02d}_{rec.kind}.csv", write_csv, rec.header(), rec.samples)
        put("estimate.json", write_json, _jsonable(result["estimate"].to_json()))
    return written


def execute(cfg, out_dir: Path, threads: str | None = None) -> int:
    """Run a validated config and write its artifacts; returns the exit code."""
    from . import pipeline, report
    from .errors import ChronosError, NumericalGuardError, SingularCovarianceError

    sub = cfg.subcommand
    table = None
    try:
        if sub == "properties":
            table, result = report.report_properties(cfg)
        elif sub == "gaussian":
            result = pipeline.run_gaussian(cfg.block)
        elif sub == "wigner-grid":
            result = pipeline.run_field(cfg.block, assemble=True)
        elif sub == "pdm":
            result = pipeline.run_pdm(cfg.block, cfg.seed)
        elif sub == "trajectory":
            result = pipeline.run_trajectory(cfg.block)
        else:
            result = pipeline.run_tomo(cfg.block, cfg.seed)
    except (NumericalGuardError, SingularCovarianceError) as err:
        print(f"numerical guard refused the run: {type(err).__name__}: {err}", file=sys.stderr)
        _write_meta(out_dir, cfg, threads, {"refused": f"{type(err).__name__}: {err}"}, [], "refused")
        return EXIT_NUMERIC
    except (ChronosError, ValueError) as err:
        print(f"invalid input: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_CONFIG
    written = _write_outputs(cfg, out_dir, result, table)
    _write_meta(out_dir, cfg, threads, result.get("summary", {}), written, "ok", table)
    print(json.dumps(_jsonable(result.get("summary", {})), sort_keys=True))
    if table is not None:
        print(json.dumps(report.summarize(table), sort_keys=True))
    return EXIT_OK


def _write_meta(out_dir, cfg, threads, residuals, written, status, table=None):
    from . import report
    from .serialization import canonical_hash, environment_versions, write_json

    dumped = cfg.model_dump(mode="json")
    meta = {
        "subcommand": cfg.subcommand,
        "status": status,
        "config_hash": canonical_hash(dumped),
        "config": dumped,
        "seed": cfg.seed,
        "deterministic": cfg.deterministic,
        "threads": threads,
        "versions": environment_versions(),
        "tolerances": _tolerances(dumped),
        "residuals": _jsonable(residuals),
        "outputs": written,
    }
    if table is not None:
        meta["criteria"] = report.summarize(table)
    write_json(Path(out_dir) / "metadata.json", meta)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = _limit_threads(args.deterministic)

    from pydantic import ValidationError

    from .config import RunConfig

    try:
        raw = json.loads(args.config.read_text())
    except OSError as err:
        print(f"cannot read config: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as err:
        print(f"config is not valid JSON: {err}", file=sys.stderr)
        return EXIT_CONFIG
    if not isinstance(raw, dict):
        print("config must be a JSON object", file=sys.stderr)
        return EXIT_CONFIG
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output"] = str(args.out)
    if args.deterministic:
        overrides["deterministic"] = True
    try:
        cfg = RunConfig.model_validate({**raw, **overrides})
    except ValidationError as err:
        print(_format_validation(err), file=sys.stderr)
        return EXIT_CONFIG
    if args.subcommand and args.subcommand != cfg.subcommand:
        if args.subcommand != "properties":
            print(f"subcommand: config is for {cfg.subcommand!r}, not {args.subcommand!r}", file=sys.stderr)
            return EXIT_CONFIG
        return _report_only(cfg, Path(cfg.output), threads)
    return execute(cfg, Path(cfg.output), threads)


def _report_only(cfg, out_dir: Path, threads) -> int:
    """Property table for a config written for another subcommand."""
    from . import report
    from .errors import ChronosError, NumericalGuardError, SingularCovarianceError
    from .serialization import write_json

    try:
        table, result = report.report_properties(cfg)
    except (NumericalGuardError, SingularCovarianceError) as err:
        print(f"numerical guard refused the run: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ChronosError, ValueError) as err:
        print(f"invalid input: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_CONFIG
    write_json(out_dir / "properties.json", _jsonable(table))
    _write_meta(out_dir, cfg, threads, result.get("summary", {}), ["properties.json"], "ok", table)
    print(json.dumps(report.summarize(table), sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
