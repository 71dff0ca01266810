"""Command-line entry point: ``ftbp <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import multiprocessing as mp
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger("ftbp")

FAMILIES = ("toric", "color", "xzzx")


@dataclass
class RunConfig:
    """Validated options shared by the simulation subcommands."""

    family: str
    d: int
    eps: list
    r: list
    mode: str = "C16"
    policy: str = "adaptive"
    schedule: str = "cross"
    t_max: int = 150
    alpha_min: float = 0.4
    alpha_step: float = 0.01
    trials: int = 100
    deaths: int | None = None
    max_rounds: int = 10**6
    seed: int = 0
    closure: str = "transitive"
    extra: dict = field(default_factory=dict)

    def validate(self):
        from .consolidation import MODES
        from .memory import POLICIES

        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown window policy {self.policy!r}")
        if not self.eps or any(not 0 <= e < 0.75 for e in self.eps):
            raise ValueError("eps values must lie in [0, 0.75)")
        if not self.r or any(r < 2 for r in self.r):
            raise ValueError("window sizes must be at least 2")
        if self.t_max < 1 or self.trials < 1 or self.max_rounds < 1:
            raise ValueError("t_max, trials and max_rounds must be positive")
        if not 0 < self.alpha_min <= 1 or self.alpha_step <= 0:
            raise ValueError("alpha sweep must satisfy 0 < alpha_min <= 1 and step > 0")
        return self

    @property
    def alphas(self) -> tuple:
        return alpha_sweep(self.alpha_min, self.alpha_step)


def alpha_sweep(alpha_min: float = 0.4, step: float = 0.01) -> tuple:
    """1, 1 - step, ... down to alpha_min."""
    n = int(round((1.0 - alpha_min) / step)) + 1
    return tuple(round(1.0 - i * step, 10) for i in range(n))


def _code(family, d, schedule="cross", toy=False):
    from .codes import build_code, build_toy_code

    return build_toy_code() if toy else build_code(family, d, schedule)


# ---------------------------------------------------------------------------
# dump-matrix
# ---------------------------------------------------------------------------

def cmd_dump_matrix(args) -> int:
    from .check_matrix import build_check_matrix, sparsify
    from .circuit import build_circuit
    from .consolidation import merged_matrix

    if not args.toy and (args.family is None or args.d is None):
        raise ValueError("give --toy or both --family and --d")
    code = _code(args.family, args.d, args.schedule, args.toy)
    h = build_check_matrix(build_circuit(code, args.rounds, perfect_tail=not args.no_tail))
    if args.stage in ("sparse", "consolidated"):
        h, _ = sparsify(h)
    if args.stage == "consolidated":
        h = merged_matrix(h)
    text = h.to_text()
    if args.labels:
        text = "# " + " ".join(h.labels) + "\n" + text
    _emit(text, args.output)
    return 0


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# decode
# ---------------------------------------------------------------------------

def cmd_decode(args) -> int:
    from .circuit import build_circuit, evaluate, sample_values
    from .decoder import FTBPDecoder

    code = _code(args.family, args.d, args.schedule, args.toy)
    circ = build_circuit(code, args.rounds, perfect_tail=args.tail)
    alphas = alpha_sweep(args.alpha_min, args.alpha_step)
    dec = FTBPDecoder(mode=args.mode, eps=args.eps, t_max=args.t_max, alphas=alphas).fit(circ)
    truth = None
    if args.syndrome:
        bits = Path(args.syndrome).read_text().split()
        s = np.array([int(b) for b in "".join(bits)], dtype=np.uint8)
    else:
        rng = np.random.Generator(np.random.Philox(args.seed))
        truth = sample_values(circ.kinds, args.eps, args.eps, rng)
        s = evaluate(circ, truth).syndrome
    if len(s) != circ.M:
        raise ValueError(f"syndrome has {len(s)} bits, circuit has {circ.M} checks")
    out = dec.decode(s)
    labels = []
    for j in np.flatnonzero(out.estimate):
        loc = circ.locations[dec.priors_.locations[j]]
        labels.append({"location": loc.label(), "components": list(map(int, dec.priors_.positions[j])),
                       "value": int(out.estimate[j])})
    rec = {"status": out.status, "alpha": out.alpha, "iterations": out.iterations, "estimate": labels}
    if truth is not None:
        rec["sampled_faults"] = [circ.locations[j].label() for j in np.flatnonzero(truth)]
    print(json.dumps(rec))
    return 0 if out.converged else 3


# ---------------------------------------------------------------------------
# lifetime / sweep
# ---------------------------------------------------------------------------

def _trial_seed(seed: int, r: int, eps: float, index: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(r, int(round(eps * 1e12)), index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _run_one(job):
    from .memory import DecoderConfig, run_lifetime

    cfg, eps, r, index = job
    code = _code(cfg["family"], cfg["d"], cfg["schedule"])
    seed = _trial_seed(cfg["seed"], r, eps, index)
    res = run_lifetime(code, eps, r, mode=cfg["mode"], policy=cfg["policy"],
                       decoder=DecoderConfig(cfg["t_max"], tuple(cfg["alphas"])),
                       max_rounds=cfg["max_rounds"], seed=seed, closure=cfg["closure"])
    rec = {"type": "trial", "family": cfg["family"], "d": cfg["d"], "eps": eps, "r": r,
           "mode": cfg["mode"], "policy": cfg["policy"], "index": index}
    rec.update(res.to_record())
    return rec


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("FTBP_WORKERS", "1")))
    except ValueError:
        return 1


def run_campaign(cfg: RunConfig, output, resume: bool = False) -> list[dict]:
    """Run trials for every (eps, r) and append one JSON line per finished trial."""
    from .threshold import read_records

    base = asdict(cfg)
    base["alphas"] = list(cfg.alphas)
    done: dict = {}
    if resume and output not in (None, "-") and Path(output).exists():
        _, old = read_records(output)
        for rec in old:
            if (rec["family"], rec["d"], rec["mode"], rec["policy"]) == (cfg.family, cfg.d, cfg.mode, cfg.policy):
                done[(rec["eps"], rec["r"], rec["index"])] = rec
    fh = sys.stdout if output in (None, "-") else open(output, "a" if resume else "w", encoding="utf-8")
    if resume and fh is not sys.stdout and fh.tell() > 0:
        with open(output, "rb") as raw:
            raw.seek(-1, os.SEEK_END)
            if raw.read(1) != b"\n":
                fh.write("\n")  # terminate a line cut off by an interrupted run
    header = {"type": "header", "config": base, "seed": cfg.seed}
    fh.write(json.dumps(header) + "\n")
    fh.flush()
    results = list(done.values())
    pool = mp.Pool(_workers()) if _workers() > 1 else None
    try:
        for r in cfg.r:
            for eps in cfg.eps:
                deaths = sum(1 for rec in done.values() if rec["eps"] == eps and rec["r"] == r and not rec["censored"])
                index = 0
                target = cfg.trials
                while index < target and (cfg.deaths is None or deaths < cfg.deaths):
                    batch = []
                    while len(batch) < max(1, _workers()) and index < target:
                        if (eps, r, index) not in done:
                            batch.append((base, eps, r, index))
                        index += 1
                    recs = pool.map(_run_one, batch) if pool else [_run_one(j) for j in batch]
                    for rec in recs:
                        fh.write(json.dumps(rec) + "\n")
                        fh.flush()
                        results.append(rec)
                        deaths += not rec["censored"]
    finally:
        if pool:
            pool.close()
        if fh is not sys.stdout:
            fh.close()
    return results


def _load_config(path) -> list[dict]:
    """A campaign file holds one option dict or {"runs": [...]} with shared defaults."""
    path = Path(path)
    if not path.exists():
        bundled = Path(__file__).parent / "campaigns" / path.name
        if bundled.exists():
            path = bundled
    data = json.loads(path.read_text(encoding="utf-8"))
    runs = data.pop("runs", None)
    if runs is None:
        return [data]
    return [{**data, **run} for run in runs]


def _configs_from_args(args) -> list[RunConfig]:
    bases = _load_config(args.config) if getattr(args, "config", None) else [{}]
    out = []
    for opts in bases:
        opts = dict(opts)
        for key in ("family", "d", "mode", "policy", "schedule", "t_max", "alpha_min", "alpha_step",
                    "trials", "deaths", "max_rounds", "seed", "closure"):
            val = getattr(args, key, None)
            if val is not None:
                opts[key] = val
        if getattr(args, "eps", None):
            opts["eps"] = args.eps
        if getattr(args, "r", None):
            opts["r"] = args.r
        if "r" not in opts and "d" in opts:
            opts["r"] = [opts["d"]]
        if isinstance(opts.get("r"), int):
            opts["r"] = [opts["r"]]
        if isinstance(opts.get("eps"), (int, float)):
            opts["eps"] = [opts["eps"]]
        missing = [k for k in ("family", "d", "eps") if k not in opts]
        if missing:
            raise ValueError(f"missing options: {', '.join(missing)}")
        known = RunConfig.__dataclass_fields__
        extra = {k: v for k, v in opts.items() if k not in known}
        cfg = RunConfig(**{k: v for k, v in opts.items() if k in known})
        cfg.extra = extra
        out.append(cfg.validate())
    return out


def cmd_lifetime(args) -> int:
    for i, cfg in enumerate(_configs_from_args(args)):
        run_campaign(cfg, args.output, resume=args.resume or i > 0)
    return 0


def cmd_sweep(args) -> int:
    from .threshold import curves_from_records, pointwise_min, write_curves_csv

    cfg = _configs_from_args(args)[0]
    hi = args.r_max or (cfg.d if cfg.family == "toric" else 2 * cfg.d)
    cfg.r = list(range(args.r_min, hi + 1))
    cfg.validate()
    recs = run_campaign(cfg, args.output, resume=args.resume)
    curves = curves_from_records(recs)
    best = pointwise_min(list(curves.values()))
    if args.csv:
        write_curves_csv([best], args.csv)
    for p in best.points:
        print(f"{p.eps:.6g} {p.rate:.6g} [{p.lo:.6g}, {p.hi:.6g}]")
    return 0


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def cmd_fit(args) -> int:
    from .threshold import (RatePoint, RateCurve, curves_from_records, fit_scaling_ansatz, pointwise_min,
                            read_records, write_curves_csv)

    curves = []
    if args.csv_input:
        import csv

        by_d: dict = {}
        with open(args.csv_input, encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                p = RatePoint(float(row["eps"]), float(row["rate"]), int(float(row.get("trials") or 1)),
                              float(row["lo"]), float(row["hi"]))
                by_d.setdefault(int(row["d"]), []).append(p)
        curves = [RateCurve(args.family or "", d, pts) for d, pts in sorted(by_d.items())]
    else:
        trials = []
        for path in args.records:
            trials += read_records(path)[1]
        if args.family:
            trials = [t for t in trials if t["family"] == args.family]
        grouped: dict = {}
        for key, c in curves_from_records(trials).items():
            grouped.setdefault(key[1], []).append(c)
        curves = [pointwise_min(cs) for d, cs in sorted(grouped.items())]
    if not curves:
        raise ValueError("no data to fit")
    if args.csv:
        write_curves_csv(curves, args.csv)
    fit = fit_scaling_ansatz(curves, exclude_d=args.exclude_d or (), weighting=args.weighting)
    print(json.dumps(fit.report()))
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ftbp", description="Circuit-level belief-propagation decoding tools")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def code_opts(q, rounds=True):
        q.add_argument("--toy", action="store_true", help="two-qubit ZZ/XX example code")
        q.add_argument("--family", choices=FAMILIES)
        q.add_argument("--d", type=int)
        q.add_argument("--schedule", default="cross")
        if rounds:
            q.add_argument("--rounds", type=int, default=3)

    q = sub.add_parser("dump-matrix", help="print a check matrix in text form")
    code_opts(q)
    q.add_argument("--stage", choices=("raw", "sparse", "consolidated"), default="raw")
    q.add_argument("--no-tail", action="store_true", help="omit the noiseless final round")
    q.add_argument("--labels", action="store_true", help="prefix a comment line with column labels")
    q.add_argument("-o", "--output")
    q.set_defaults(func=cmd_dump_matrix)

    q = sub.add_parser("decode", help="decode one syndrome (from a file or sampled)")
    code_opts(q)
    q.add_argument("--tail", action="store_true")
    q.add_argument("--mode", default="C16")
    q.add_argument("--eps", type=float, default=1e-3)
    q.add_argument("--syndrome", help="file of 0/1 characters")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--t-max", type=int, default=150)
    q.add_argument("--alpha-min", type=float, default=0.4)
    q.add_argument("--alpha-step", type=float, default=0.01)
    q.set_defaults(func=cmd_decode)

    def sim_opts(q):
        q.add_argument("--config", help="JSON file with any of the options below")
        q.add_argument("--family", choices=FAMILIES)
        q.add_argument("--d", type=int)
        q.add_argument("--schedule")
        q.add_argument("--eps", type=float, nargs="+")
        q.add_argument("--mode")
        q.add_argument("--policy")
        q.add_argument("--closure")
        q.add_argument("--t-max", dest="t_max", type=int)
        q.add_argument("--alpha-min", dest="alpha_min", type=float)
        q.add_argument("--alpha-step", dest="alpha_step", type=float)
        q.add_argument("--trials", type=int)
        q.add_argument("--deaths", type=int, help="stop a point early once this many trials died")
        q.add_argument("--max-rounds", dest="max_rounds", type=int)
        q.add_argument("--seed", type=int)
        q.add_argument("--resume", action="store_true", help="skip trials already in the output file")
        q.add_argument("-o", "--output", default="-")

    q = sub.add_parser("lifetime", help="Monte Carlo memory lifetime campaign")
    sim_opts(q)
    q.add_argument("--r", type=int, nargs="+")
    q.set_defaults(func=cmd_lifetime)

    q = sub.add_parser("sweep", help="window-size sweep with pointwise-minimum curve")
    sim_opts(q)
    q.add_argument("--r-min", type=int, default=3)
    q.add_argument("--r-max", type=int)
    q.add_argument("--csv")
    q.set_defaults(func=cmd_sweep)

    q = sub.add_parser("fit", help="finite-size scaling fit")
    q.add_argument("records", nargs="*", help="campaign record files")
    q.add_argument("--csv-input", help="curve CSV instead of records")
    q.add_argument("--family", choices=FAMILIES)
    q.add_argument("--exclude-d", type=int, nargs="*")
    q.add_argument("--weighting", choices=("ci", "none"), default="ci")
    q.add_argument("--csv", help="write the fitted curves as CSV")
    q.set_defaults(func=cmd_fit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"ftbp: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
