"""Command-line entry point: ``aaqst {plan,optimize,simulate,tomo,fidelity,fit-peaks}``.

Every command reads text inputs and writes text outputs into ``--out``.
Options may come from a JSON ``--config`` file; command-line flags win.
Relative paths inside a config file are resolved against its directory.

Exit codes: 0 success, 2 input error, 3 state not identifiable,
4 optimisation failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, fileio
from .constraint import build_probe
from .densmat import StateError, fidelity
from .ingest import default_grid, fit_amplitudes, synthesize_trace
from .measure import add_noise, prepare, simulate_spectrum
from .model import transitions
from .optimize import OptimizationFailed, OptimizerConfig, optimize_delays
from .pulseseq import TEMPLATES, experiment_sequences, get_template, state_prep_sequences
from .reconstruct import IdentifiabilityError, counting_bound, plan, tomo

log = logging.getLogger("aaqst")

EXIT_INPUT, EXIT_IDENTIFIABILITY, EXIT_OPTIMIZATION = 2, 3, 4

PATH_KEYS = {"system", "state", "sequences", "reference", "peaks", "traces", "trace", "prep", "a", "b"}


class Settings(dict):
    """Merged config-file and command-line options."""

    def __init__(self, args: argparse.Namespace):
        super().__init__()
        self.inputs: dict[str, str] = {}
        cfg_path = getattr(args, "config", None)
        if cfg_path:
            cfg = fileio._load_json(cfg_path)
            if not isinstance(cfg, dict):
                raise fileio.FileFormatError(f"{cfg_path}: config must be a JSON object")
            base = Path(cfg_path).parent
            for k, v in cfg.items():
                self[k] = _resolve_paths(k, v, base)
            self.inputs["config"] = fileio.digest(cfg_path)
        for k, v in vars(args).items():
            if v is not None and k not in ("func", "config"):
                self[k] = v
        self.setdefault("seed", 0)
        self.setdefault("out", ".")

    def need(self, key: str):
        if self.get(key) is None:
            raise fileio.FileFormatError(f"missing required option '{key}'")
        return self[key]

    def track(self, key: str, path) -> None:
        self.inputs[key] = fileio.digest(path)

    def meta(self) -> dict:
        d = {"tool": "aaqst", "version": __version__, "seed": int(self["seed"])}
        d.update({f"sha256_{k}": v for k, v in self.inputs.items()})
        return d

    @property
    def out(self) -> Path:
        p = Path(self["out"])
        p.mkdir(parents=True, exist_ok=True)
        return p


def _resolve_paths(key, value, base: Path):
    if key not in PATH_KEYS or value is None:
        return value
    if isinstance(value, list):
        return [str(base / v) for v in value]
    if key == "prep" and value in state_prep_sequences():
        return value
    return str(base / value) if isinstance(value, str) else value


def _system(s: Settings):
    path = s.need("system")
    s.track("system", path)
    return fileio.read_system(path)


def _sequences(s: Settings):
    if s.get("sequences"):
        s.track("sequences", s["sequences"])
        return fileio.read_sequences(s["sequences"])
    if s.get("template"):
        params = s.need("params")
        tpl = get_template(s["template"])
        K = len(params) // tpl.n_params
        return experiment_sequences(s["template"], [float(p) for p in params], K)
    raise fileio.FileFormatError("give either 'sequences' or 'template' with 'params'")


def _optimizer_config(s: Settings) -> OptimizerConfig:
    d = dict(s.get("optimizer") or {})
    d.setdefault("seed", int(s["seed"]))
    if s.get("bounds_ms"):
        d["bounds"] = tuple(float(b) * 1e-3 for b in s["bounds_ms"])
    for key in ("population", "generations"):
        if s.get(key) is not None:
            d[key] = int(s[key])
    return OptimizerConfig.from_dict(d)


def _parse_range(text: str) -> range:
    lo, _, hi = text.partition("..")
    return range(int(lo), int(hi or lo) + 1)


# -- commands ----------------------------------------------------------------

def cmd_plan(s: Settings) -> int:
    if s.get("sweep"):
        sizes = _parse_range(s["sweep"])
        pairs = [(n, a) for n in sizes for a in range(0, sizes.stop)]
    else:
        pairs = [(int(s.need("input")), int(s.get("ancilla") or 0))]
    system = _system(s) if s.get("system") else None
    rows = []
    for n, a in pairs:
        if system is not None:
            sys_, layout = system
            if (layout.n_input, layout.n_ancilla) != (n, a):
                raise fileio.FileFormatError(f"system file describes a ({layout.n_input}, {layout.n_ancilla}) register")
            p = plan(n, a, sys_, s.get("template") or "two_delay_xy", _optimizer_config(s))
        else:
            p = plan(n, a)
        rows.append(p)
    lines = ["n_input,n_ancilla,K_min,counting_bound,rank_verified,condition"]
    for p in rows:
        cond = "" if p.condition is None else f"{p.condition:.6g}"
        lines.append(f"{p.n_input},{p.n_ancilla},{p.K_min},{p.bound},{str(p.rank_verified).lower()},{cond}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if s.get("out") not in (None, "."):
        (s.out / "plan.csv").write_text(text)
    return 0


def cmd_optimize(s: Settings) -> int:
    sys_, layout = _system(s)
    template = s.get("template") or "two_delay_xy"
    K = int(s.get("K") or counting_bound(layout.n_input, layout.n_ancilla))
    cfg = _optimizer_config(s)
    res = optimize_delays(sys_, layout, template, K, cfg)
    seqs = experiment_sequences(template, res.params, K)
    meta = s.meta()
    fileio.write_sequences(seqs, s.out / "sequence.json", template=template, K=K,
                           params_s=[float(p) for p in res.params], condition=float(res.condition), **meta)
    report = dict(res.report.as_dict(), template=template, K=K, params_s=[float(p) for p in res.params], **meta)
    (s.out / "conditioning.json").write_text(json.dumps(report, indent=2) + "\n")
    fileio.write_log(res.history, s.out / "convergence.csv", **meta)
    print(f"C(M) = {res.condition:.6g} at delays {', '.join(f'{p * 1e3:.6g} ms' for p in res.params)}")
    return 0


def cmd_simulate(s: Settings) -> int:
    sys_, layout = _system(s)
    s.track("state", s.need("state"))
    rho = fileio.read_state(s["state"])
    prep = s.get("prep")
    if prep:
        if prep in state_prep_sequences():
            prep_seq = state_prep_sequences()[prep]
        else:
            s.track("prep", prep)
            prep_seq = fileio.read_sequences(prep)[0]
        rho = prepare(rho, prep_seq, sys_, layout)
    seqs = _sequences(s)
    noise = float(s.get("noise") or 0.0)
    lw = float(s.get("linewidth") or 5.0)
    seed = int(s["seed"])
    meta = s.meta()
    fileio.write_state(rho, s.out / "prepared_state.json", **meta)
    for k, seq in enumerate(seqs):
        peaks = simulate_spectrum(rho, seq, sys_, layout)
        if noise > 0:
            peaks = add_noise(peaks, noise, [seed, k])
        fileio.write_peaks(peaks, s.out / f"peaks_k{k}.csv", layout, experiment=k, noise=noise, **meta)
        trace = synthesize_trace(peaks, lw, default_grid(peaks, lw))
        fileio.write_trace(trace, s.out / f"trace_k{k}.csv", experiment=k, **meta)
    print(f"wrote {len(seqs)} peak list(s) to {s.out}")
    return 0


def cmd_tomo(s: Settings) -> int:
    sys_, layout = _system(s)
    seqs = _sequences(s)
    if s.get("peaks"):
        files = s["peaks"]
        for i, f in enumerate(files):
            s.track(f"peaks{i}", f)
        peak_lists = [fileio.read_peaks(f, layout) for f in files]
    elif s.get("traces"):
        trans = transitions(sys_, layout)
        peak_lists = []
        for i, f in enumerate(s["traces"]):
            s.track(f"trace{i}", f)
            peak_lists.append(fit_amplitudes(fileio.read_trace(f), trans, s.get("linewidth")))
    else:
        raise fileio.FileFormatError("give 'peaks' or 'traces'")
    merge = s.get("merge_linewidth")
    res = tomo(sys_, layout, seqs, peak_lists, float(merge) if merge else None)
    report = {
        "residual_norm": res.residual_norm,
        "condition": res.condition.as_dict()["condition"],
        "rank": res.condition.rank,
        "n_unknowns": res.condition.n_unknowns,
    }
    if s.get("reference"):
        s.track("reference", s["reference"])
        report["fidelity"] = fidelity(res.rho, fileio.read_state(s["reference"]))
    if s.get("dump_matrix"):
        fileio.write_matrix(build_probe(sys_, layout, seqs), s.out / "constraint_matrix.csv", **s.meta())
    fileio.write_state(res.rho, s.out / "result.json", report=report, **s.meta())
    print(json.dumps(report, indent=2))
    return 0


def cmd_fidelity(s: Settings) -> int:
    a = fileio.read_state(s.need("a"))
    b = fileio.read_state(s.need("b"))
    print(f"{fidelity(a, b):.12g}")
    return 0


def cmd_fit_peaks(s: Settings) -> int:
    sys_, layout = _system(s)
    s.track("trace", s.need("trace"))
    trace = fileio.read_trace(s["trace"])
    peaks = fit_amplitudes(trace, transitions(sys_, layout), s.get("linewidth"))
    fileio.write_peaks(peaks, s.out / "peaks.csv", layout, **s.meta())
    print(f"fitted {len(peaks)} lines")
    return 0


def _optimizer_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bounds-ms", dest="bounds_ms", type=float, nargs=2)
    p.add_argument("--population", type=int)
    p.add_argument("--generations", type=int)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON file with command options")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="aaqst", parents=[common], description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"aaqst {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", parents=[common], help="minimum number of experiments")
    p.add_argument("--input", type=int)
    p.add_argument("--ancilla", type=int)
    p.add_argument("--sweep", help="input sizes as LO..HI; ancilla runs 0..HI")
    p.add_argument("--system", help="verify rank with this spin system")
    p.add_argument("--template", choices=sorted(TEMPLATES))
    _optimizer_flags(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("optimize", parents=[common], help="optimise tomography delays")
    p.add_argument("--system")
    p.add_argument("--template", choices=sorted(TEMPLATES))
    p.add_argument("--K", type=int)
    _optimizer_flags(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("simulate", parents=[common], help="simulate tomography spectra")
    p.add_argument("--system")
    p.add_argument("--state")
    p.add_argument("--prep", help="named preparation or sequence file")
    p.add_argument("--sequences")
    p.add_argument("--template")
    p.add_argument("--params", type=float, nargs="+", help="delays in seconds")
    p.add_argument("--noise", type=float)
    p.add_argument("--linewidth", type=float)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tomo", parents=[common], help="reconstruct a state from spectra")
    p.add_argument("--system")
    p.add_argument("--sequences")
    p.add_argument("--template")
    p.add_argument("--params", type=float, nargs="+")
    p.add_argument("--peaks", nargs="+")
    p.add_argument("--traces", nargs="+")
    p.add_argument("--linewidth", type=float)
    p.add_argument("--merge-linewidth", dest="merge_linewidth", type=float)
    p.add_argument("--reference")
    p.add_argument("--dump-matrix", dest="dump_matrix", action="store_true", default=None)
    p.set_defaults(func=cmd_tomo)

    p = sub.add_parser("fidelity", parents=[common], help="overlap of two state files")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("fit-peaks", parents=[common], help="fit line amplitudes in a trace")
    p.add_argument("--system")
    p.add_argument("--trace")
    p.add_argument("--linewidth", type=float)
    p.set_defaults(func=cmd_fit_peaks)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(Settings(args))
    except IdentifiabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IDENTIFIABILITY
    except OptimizationFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OPTIMIZATION
    except (fileio.FileFormatError, StateError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
