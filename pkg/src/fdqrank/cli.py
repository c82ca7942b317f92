"""Command-line front end: ``fdqrank <subcommand> --presentation FILE ...``.

Exit codes: 0 success, 1 usage/parse, 2 resource cap, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ComputationError, FdqError, UsageError
from .grouprel import build_jacobian, build_relation_system, load_presentation
from .ncalg import format_monomial
from .repkit import UNITARY_TOL, from_descriptor, relator_defects
from .spectral import (
    CONFIG,
    betti_estimate,
    jacobian_singular_values,
    perturbation_probe,
    spectral_report,
)

log = logging.getLogger("fdqrank")

SCHEMA = "fdqrank.report/1"
EXACT_DEFECT_TOL = 1e-12
SIZED_FAMILIES = ("cyclic", "torus", "regular-cyclic", "randperm")
DEFAULT_BOUND_EPS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


@dataclass
class RunConfig:
    presentation: str
    reps: list
    sizes: list = field(default_factory=list)
    threshold: str = "plateau"
    eps: list = field(default_factory=list)
    seed: int = 0
    method: str = "auto"
    bins: int = 40
    out: str | None = None

    def jobs(self) -> list:
        """Expand descriptors and size sweeps into concrete descriptors."""
        if not self.reps:
            raise UsageError("no representation given (use --rep)")
        if self.sizes and list(self.sizes) != sorted(set(self.sizes)):
            raise UsageError("--sizes must be strictly ascending")
        out = []
        for spec in self.reps:
            family, _, arg = spec.partition(":")
            if family in SIZED_FAMILIES and not arg:
                if not self.sizes:
                    raise UsageError(f"empty sweep: {spec!r} needs --sizes or an explicit size")
                for s in self.sizes:
                    out.append(f"{family}:{s}:{self.seed}" if family == "randperm" else f"{family}:{s}")
            elif family == "randperm" and ":" not in arg:
                out.append(f"randperm:{arg}:{self.seed}")
            else:
                out.append(spec)
        return out

    def digest(self) -> str:
        blob = json.dumps({k: v for k, v in asdict(self).items() if k != "out"}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()


def _num(x):
    """Round to 12 significant digits so reports are stable across BLAS builds."""
    if x is None:
        return None
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return repr(x)
    return float(f"{x:.12g}")


def _nums(xs):
    return [_num(x) for x in xs]


def render_relations(rs) -> str:
    p = rs.presentation
    lines = [f"group {p.name}", f"n = {rs.n}", f"k = {rs.k}"]
    for i, (f, label) in enumerate(zip(rs.F, rs.labels), start=1):
        lines.append(f"F{i} [{label}] = {f}")
    return "\n".join(lines) + "\n"


def render_jacobian(rs, jac) -> str:
    lines = [f"group {rs.presentation.name}", f"k = {jac.k}", f"n = {jac.n}"]
    for i, j, tp in jac.nonzero():
        lines.append(f"d{format_monomial((j + 1,))} F{i + 1} = {tp}")
    return "\n".join(lines) + "\n"


def _job_family(desc: str) -> str:
    return desc.partition(":")[0]


def run_job(desc, presentation, rs, jac, config: RunConfig, want_spectrum=False) -> dict:
    rep = from_descriptor(desc, m=presentation.m, presentation=presentation)
    if rep.m != presentation.m:
        raise UsageError(
            f"{desc}: representation has {rep.m} generators, presentation has {presentation.m}"
        )
    defects = relator_defects(rep, presentation)
    if rep.exact and _job_family(desc) != "file" and any(d > EXACT_DEFECT_TOL for d in defects):
        bad = [i + 1 for i, d in enumerate(defects) if d > EXACT_DEFECT_TOL]
        raise UsageError(
            f"{desc}: exact family mismatch, relator(s) {bad} have defect "
            f"{max(defects):.3g} > {EXACT_DEFECT_TOL:g}"
        )
    svals = jacobian_singular_values(jac, rep, config.method)
    if not np.all(np.isfinite(svals)):
        raise ComputationError(f"{desc}: non-finite singular values")
    rep_ = spectral_report(svals, rs.n, rs.k, rep.D, config.threshold, defects, config.bins)
    betti = betti_estimate(min(max(rep_.rank_est, 0.0), rs.n), rs.n, presentation.beta0,
                           presentation.is_finite)
    out = {
        "descriptor": desc,
        "family": _job_family(desc),
        "D": rep.D,
        "exact": rep.exact,
        "provenance": {k: v for k, v in rep.provenance.items() if k != "exact"},
        "relator_defects": _nums(defects),
        "rank_est": _num(rep_.rank_est),
        "rank_count": rep_.rank.count,
        "threshold": {"policy": rep_.rank.policy, "lambda_cut": _num(rep_.rank.threshold),
                      "plateau": list(rep_.rank.plateau)},
        "rank_curve": [[_num(lam), _num(v)] for lam, v in rep_.rank.curve],
        "fk_logdet": _num(rep_.fk_logdet),
        "fk_discarded": rep_.fk_discarded,
        "tail": [[_num(a), _num(b), _num(c)] for a, b, c in rep_.tail],
        "mu_hist": {"edges": _nums(rep_.mu_edges), "mass": _nums(rep_.mu_mass),
                    "total_mass": _num(float(np.sum(rep_.mu_mass)))},
        "sigma_max": _num(svals[0]) if len(svals) else 0.0,
        "betti": _betti_dict(betti),
    }
    if want_spectrum:
        out["svals"] = _nums(svals)
        out["q_spectrum"] = _nums(rep_.q_spectrum)
    return out


def _betti_dict(b) -> dict:
    return {
        "rank_est": _num(b.rank_est),
        "beta0": _num(b.beta0),
        "beta1_est": _num(b.beta1_est),
        "delta_upper": _num(b.delta_upper),
        "r_bound": _num(b.r_bound),
        "verdict": b.verdict,
    }


def run(config: RunConfig, want_spectrum: bool = False) -> dict:
    """Execute every job of the sweep and assemble the report document."""
    presentation = load_presentation(config.presentation)
    rs = build_relation_system(presentation)
    jac = build_jacobian(rs)
    jobs = []
    failures = []
    for index, desc in enumerate(config.jobs()):
        try:
            result = run_job(desc, presentation, rs, jac, config, want_spectrum)
            result.update(index=index, status="ok")
        except FdqError as exc:
            log.warning("job %d (%s) failed: %s", index, desc, exc)
            failures.append(exc)
            result = {"index": index, "descriptor": desc, "status": "error",
                      "error": str(exc), "exit_code": exc.exit_code}
        jobs.append(result)
    if failures and len(failures) == len(jobs):
        first = failures[0]
        raise type(first)(f"all jobs failed; first error: {first}")
    ok = [j for j in jobs if j["status"] == "ok"]
    exact = [j for j in ok if j["exact"]]
    chosen = max(exact or ok, key=lambda j: (j["D"], -j["index"]))
    aggregate = dict(chosen["betti"])
    aggregate["source"] = chosen["descriptor"]
    aggregate["basis"] = "exact" if exact else "sofic-proxy"
    bound_eps = config.eps or list(DEFAULT_BOUND_EPS)
    rank = chosen["rank_est"]
    report = {
        "schema": SCHEMA,
        "tool_version": __version__,
        "config": {k: v for k, v in asdict(config).items() if k != "out"},
        "config_hash": config.digest(),
        "seeds": {"representation": config.seed, "probe": config.seed},
        "group": presentation.name,
        "order": presentation.order if presentation.is_finite else "infinite",
        "n": rs.n,
        "k": rs.k,
        "tolerances": {
            "unitary": UNITARY_TOL,
            "exact_relator_defect": EXACT_DEFECT_TOL,
            "lambda_grid": f"sigma_max^2 * 10^-g, g = 1..{CONFIG['grid_decades']}",
            "beta": CONFIG["beta_tol"],
            "report_precision": "12 significant digits",
        },
        "jobs": jobs,
        "aggregate": aggregate,
        "bound_line": {
            "description": "reference line rank_est * log(sqrt(eps)); entropy itself is not computed",
            "slope_rank": rank,
            "samples": [[_num(e), _num(rank * math.log(math.sqrt(e)))] for e in bound_eps],
        },
    }
    if config.eps:
        report["perturbation"] = _perturb_jobs(config, presentation, rs, jac)
    return report


def _perturb_jobs(config, presentation, rs, jac) -> list:
    out = []
    for desc in config.jobs():
        rep = from_descriptor(desc, m=presentation.m, presentation=presentation)
        rows = perturbation_probe(rs, rep, config.eps, config.seed, jac)
        out.append({
            "descriptor": desc,
            "columns": ["eps", "defect", "defect_over_eps"],
            "table": [[_num(r["eps"]), _num(r["defect"]), _num(r["defect_over_eps"])] for r in rows],
            "linear_ratio": [[_num(r["eps"]), _num(r["linear_ratio"])] for r in rows],
        })
    return out


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fdqrank", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fdqrank {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("relations", "print the relation system F"),
        ("jacobian", "print the symbolic Jacobian dF"),
        ("spectrum", "singular values, Q spectrum and spectral measure"),
        ("rank", "rank and Betti estimates per representation"),
        ("report", "full report: spectra, Betti estimates, bound line"),
        ("perturb", "first-order remainder table for F(X + sqrt(eps) S)"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--presentation", required=True, metavar="FILE")
        p.add_argument("--rep", action="append", default=[], metavar="SPEC",
                       help="cyclic:N, torus:N, regular-cyclic:k, randperm:N:seed, file:PATH")
        p.add_argument("--sizes", type=_int_list, default=[], metavar="LIST")
        p.add_argument("--threshold", default="plateau", metavar="POLICY",
                       help="'plateau' (default) or 'fixed:REL'")
        p.add_argument("--eps", type=_float_list, default=[], metavar="LIST")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--method", choices=("auto", "structured", "dense"), default="auto")
        p.add_argument("--bins", type=int, default=40)
        p.add_argument("--out", metavar="FILE")
    return parser


def _emit(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 1
    logging.basicConfig(level=logging.WARNING, format="fdqrank: %(message)s")
    config = RunConfig(
        presentation=args.presentation,
        reps=args.rep,
        sizes=args.sizes,
        threshold=args.threshold,
        eps=args.eps,
        seed=args.seed,
        method=args.method,
        bins=args.bins,
        out=args.out,
    )
    try:
        if args.command in ("relations", "jacobian"):
            rs = build_relation_system(load_presentation(config.presentation))
            text = render_relations(rs) if args.command == "relations" else render_jacobian(
                rs, build_jacobian(rs))
            _emit(text, config.out)
            return 0
        if args.command == "perturb":
            if not config.eps:
                raise UsageError("perturb needs --eps")
            presentation = load_presentation(config.presentation)
            rs = build_relation_system(presentation)
            doc = {
                "schema": SCHEMA,
                "tool_version": __version__,
                "config_hash": config.digest(),
                "seeds": {"probe": config.seed},
                "group": presentation.name,
                "perturbation": _perturb_jobs(config, presentation, rs, build_jacobian(rs)),
            }
            _emit(dumps(doc), config.out)
            return 0
        doc = run(config, want_spectrum=args.command == "spectrum")
        if args.command == "rank":
            doc["jobs"] = [
                {k: j[k] for k in ("index", "descriptor", "status", "D", "exact", "rank_est",
                                   "relator_defects", "threshold", "betti", "error") if k in j}
                for j in doc["jobs"]
            ]
        _emit(dumps(doc), config.out)
        return 0
    except FdqError as exc:
        print(f"fdqrank: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except np.linalg.LinAlgError as exc:
        print(f"fdqrank: numerical failure: {exc}", file=sys.stderr)
        return 3
    except MemoryError:
        print("fdqrank: out of memory; lower D or use the structured method", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
