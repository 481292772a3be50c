"""Command-line surface: edit, sweep, compare, check-backend.

Exit codes: 0 success, 1 config or usage problem, 2 backend failure,
3 numerical abort.  Failures print exactly one machine-parsable line to
stderr of the form: cds-error kind=<kind> detail="...".
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import BACKEND_URL_ENV, ConfigError, RunSetup, build_backend, \
    load_config, write_effective_config
from .core import CodecError, ShapeMismatchError, read_latent, write_latent
from .distill import NumericalAbort
from .editor import (
    SWEEP_AXES,
    BackendStepFailure,
    compare_objectives,
    run_edit,
    run_sweep,
    target_distance,
    write_trace,
)
from .predictor import BackendError
from .remote import DuplicateConditionError, RemoteBackend


def _fail(kind: str, detail: str) -> None:
    clean = str(detail).replace('"', "'").replace("\n", " ")
    print(f'cds-error kind={kind} detail="{clean}"', file=sys.stderr)


def _warn(message: str) -> None:
    print(f"cds-warn {message}", file=sys.stderr)


def _json_safe(x: float):
    return x if math.isfinite(x) else None


def _load_source(path: str, backend, setup: RunSetup):
    """CDST file, or a PNG routed through the remote backend's encoder."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"source file not found: {p}")
    if p.suffix.lower() == ".png":
        if setup.backend_kind != "remote":
            raise ConfigError("PNG sources require the remote backend")
        return backend.encode_image(p.read_bytes()), True
    return read_latent(p), False


def _prepare(args):
    setup = load_config(args.config, getattr(args, "backend_url", None),
                        getattr(args, "out", None),
                        getattr(args, "dump_gradients", False))
    backend = build_backend(setup, on_warn=_warn)
    setup.output_dir.mkdir(parents=True, exist_ok=True)
    write_effective_config(setup, setup.output_dir / "effective_config.json")
    return setup, backend


def cmd_edit(args) -> int:
    setup, backend = _prepare(args)
    x0, from_png = _load_source(args.source, backend, setup)
    dump_dir = setup.output_dir / "gradients" if setup.dump_gradients else None
    x_final, trace = run_edit(setup.cfg, backend, x0, dump_dir=dump_dir)
    out = setup.output_dir
    write_latent(out / "edited.cdst", x_final)
    write_trace(trace, out / "trace.jsonl")
    if from_png:
        (out / "edited.png").write_bytes(backend.decode_latent(x_final))
    summary = {
        "command": "edit",
        "steps": setup.cfg.steps,
        "final_dist_to_source": _json_safe(trace.final_dist_to_source),
        "final_dist_to_target": _json_safe(
            target_distance(backend, setup.cfg, x_final)),
        "mean_weight_entropy": _json_safe(trace.mean_weight_entropy),
        "outputs": sorted(p.name for p in out.iterdir() if p.is_file()),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n",
                                      encoding="utf-8")
    print(f"edit complete: {out / 'edited.cdst'} "
          f"(dist to source {trace.final_dist_to_source:.6g})")
    return 0


def _parse_values(raw: str, axis: str) -> list:
    items = [v.strip() for v in raw.split(",") if v.strip()]
    if not items:
        raise ConfigError("--values is empty")
    if axis != "patch":
        return [float(v) for v in items]
    values = []
    for v in items:
        if "x" in v:
            h, w = v.split("x", 1)
            values.append((int(h), int(w)))
        else:
            values.append(int(v))
    return values


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return f"{value[0]}x{value[1]}"
    return f"{value:g}" if isinstance(value, float) else str(value)


def cmd_sweep(args) -> int:
    values = _parse_values(args.values, args.axis)
    setup, backend = _prepare(args)
    x0, _ = _load_source(args.source, backend, setup)
    if args.parallel and len(values) > 1:
        with ThreadPoolExecutor(max_workers=min(8, len(values))) as pool:
            cells = list(pool.map(
                lambda v: run_sweep(setup.cfg, args.axis, [v], backend, x0)[0],
                values))
    else:
        cells = run_sweep(setup.cfg, args.axis, values, backend, x0)
    out = setup.output_dir
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["axis_value", "dist_to_source", "dist_to_target",
                         "weight_entropy"])
        for row in cells:
            if row.error is not None:
                _warn(f"sweep cell {args.axis}={_format_value(row.value)} "
                      f"failed: {row.error}")
            writer.writerow([_format_value(row.value),
                             repr(row.dist_to_source),
                             repr(row.dist_to_target),
                             repr(row.weight_entropy)])
    failed = sum(1 for r in cells if r.error is not None)
    print(f"sweep complete: {len(cells)} cells ({failed} failed) -> "
          f"{out / 'sweep.csv'}")
    return 0


def cmd_compare(args) -> int:
    setup, backend = _prepare(args)
    x0, _ = _load_source(args.source, backend, setup)
    out = setup.output_dir
    dump_dir = out / "gradients" if setup.dump_gradients else None
    results = compare_objectives(setup.cfg, backend, x0, dump_dir=dump_dir)
    summary = {"command": "compare", "objectives": {}}
    for name, (latent, trace) in results.items():
        write_trace(trace, out / f"{name}.jsonl")
        write_latent(out / f"edited_{name}.cdst", latent)
        summary["objectives"][name] = {
            "final_dist_to_source": _json_safe(trace.final_dist_to_source),
            "final_dist_to_target": _json_safe(
                target_distance(backend, setup.cfg, latent)),
        }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n",
                                      encoding="utf-8")
    print(f"compare complete: traces in {out}")
    return 0


def cmd_check_backend(args) -> int:
    import os
    url = args.backend_url or os.environ.get(BACKEND_URL_ENV)
    if not url:
        raise ConfigError(f"no backend url (--backend-url or ${BACKEND_URL_ENV})")
    rb = RemoteBackend(url, timeout=15.0)
    stage = "health"
    try:
        info = rb.connect()
        shape = "x".join(str(d) for d in rb.shape)
        print(f"health: ok protocol_version={info['protocol_version']} "
              f"latent_shape={shape} model_spec={info.get('model_spec')}")
        stage = "register"
        probe = f"cds-probe-{uuid.uuid4().hex[:8]}"
        try:
            rb.register_condition(probe, "conformance probe condition")
        except DuplicateConditionError:
            pass
        print(f"register: ok name={probe}")
        stage = "predict"
        eps = rb.predict(np.zeros(rb.shape, dtype=np.float32), 500, probe)
        stage = "shape"
        if eps.shape != rb.shape:
            raise ShapeMismatchError(
                f"prediction shape {eps.shape} != declared {rb.shape}")
        print(f"predict: ok shape={shape}")
    except (BackendError, ShapeMismatchError, CodecError) as exc:
        _fail("backend", f"stage={stage}: {exc}")
        return 2
    print("backend ok")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cds",
        description="Training-free latent editing with concept adapters")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, source=True):
        p.add_argument("--config", required=True, help="run config JSON")
        if source:
            p.add_argument("--source", required=True,
                           help="source latent (.cdst) or image (.png, remote only)")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--backend-url", help="remote backend URL")

    p_edit = sub.add_parser("edit", help="run one edit")
    common(p_edit)
    p_edit.add_argument("--dump-gradients", action="store_true",
                        help="write per-step gradient tensors")
    p_edit.set_defaults(func=cmd_edit)

    p_sweep = sub.add_parser("sweep", help="sensitivity sweep over one axis")
    common(p_sweep)
    p_sweep.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values, e.g. 0.01,0.05,1,5,10")
    p_sweep.add_argument("--parallel", action="store_true",
                         help="run sweep cells concurrently")
    p_sweep.set_defaults(func=cmd_sweep)

    p_cmp = sub.add_parser("compare", help="run sds/dds/cds from one seed")
    common(p_cmp)
    p_cmp.add_argument("--dump-gradients", action="store_true")
    p_cmp.set_defaults(func=cmd_compare)

    p_chk = sub.add_parser("check-backend", help="probe a remote backend")
    p_chk.add_argument("--backend-url", help=f"defaults to ${BACKEND_URL_ENV}")
    p_chk.set_defaults(func=cmd_check_backend)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _fail("config", str(exc))
        return 1
    except CodecError as exc:
        _fail("config", f"bad tensor file: {exc}")
        return 1
    except FileNotFoundError as exc:
        _fail("config", str(exc))
        return 1
    except NumericalAbort as exc:
        _fail("numeric", str(exc))
        return 3
    except BackendStepFailure as exc:
        _fail("backend", str(exc))
        return 2
    except (BackendError, ShapeMismatchError) as exc:
        _fail("backend", str(exc))
        return 2
