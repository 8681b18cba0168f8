"""
orbitcert - Main Entry Point
Certification pipeline state machine, the controller that runs each stage,
and the command-line interface.

    python main.py validate  <file|->
    python main.py decompose <file|->
    python main.py minimize  <file|->
    python main.py verify    <file|->
    python main.py catalog   [name]
"""
import argparse
import logging
import logging.handlers
import signal
import sys
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
from statemachine import State, StateMachine

from config import (
    CROSS_PATH_DISTANCE_TOL,
    DEFAULT_MAX_ITER,
    DEFAULT_SEED,
    F_AT_FOOT_TOL,
    F_DOT_FLOOR,
    LOG_BACKUP_COUNT,
    LOG_DIR,
    LOG_FILE,
    LOG_FORMAT,
    LOG_LEVEL,
    LOG_MAX_BYTES,
    LOG_TO_FILE,
    MEAN_CURVATURE_TOL,
    NULLSPACE_REL_TOL,
    PROPORTIONALITY_TOL,
    TG_RESIDUAL_TOL,
    VARIATIONAL_GEODESICS,
    VARIATIONAL_IDENTITY_TOL,
    VARIATIONAL_SAMPLES,
    VERIFY_PARALLEL,
)
from modules.cartan import (
    CartanSplit,
    CompatibilityCertificate,
    ambient_split,
    compatible_metric,
    normal_triple_system,
    totally_geodesic_slice,
    validate_cartan_split,
)
from modules.catalog import catalog, get_entry
from modules.documents import PresentationDocument, canonical_json, emit_document, parse_presentation
from modules.errors import InputError, NotNormalError, OrbitCertError
from modules.liealg import (
    is_semisimple,
    killing_matrix,
    structure_constants,
    validate_presentation,
)
from modules.orbitmin import (
    MinimizationResult,
    certify_minimal,
    fixed_set,
    lambda_value,
    minimize_volume,
    random_fixed_point,
)
from modules.report import RunReport, input_digest, render_pretty, use_color
from modules.spdspace import distance, orbit_report, random_normal_geodesic, variational_f


# ── Logging ───────────────────────────────────────────────────
RUN_ID = uuid.uuid4().hex[:8]


class _RunFilter(logging.Filter):
    """Inject run_id into every log record."""
    def filter(self, record):
        record.run_id = RUN_ID
        return True


def _setup_logging(verbosity: int = 0):
    """Console logging on stderr plus an optional rotating file, tagged with the run ID."""
    root = logging.getLogger()
    if verbosity >= 2:
        level = logging.DEBUG
    elif verbosity == 1:
        level = logging.INFO
    else:
        level = getattr(logging, LOG_LEVEL.upper(), logging.WARNING)
    root.setLevel(level)

    run_filter = _RunFilter()
    console = logging.StreamHandler(sys.stderr)
    console.addFilter(run_filter)
    console.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(console)

    if LOG_TO_FILE:
        LOG_DIR.mkdir(parents=True, exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            str(LOG_FILE), maxBytes=LOG_MAX_BYTES, backupCount=LOG_BACKUP_COUNT,
        )
        file_handler.addFilter(run_filter)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(file_handler)


logger = logging.getLogger("main")


# ══════════════════════════════════════════════════════════════
#  State Machine Definition
# ══════════════════════════════════════════════════════════════

class CertificationPipeline(StateMachine):
    """
    Stages of one certification run.
    States: idle -> validating -> certifying -> verifying -> done | failed
    """

    idle = State(initial=True)
    validating = State()
    certifying = State()
    verifying = State()
    done = State(final=True)
    failed = State(final=True)

    begin = idle.to(validating)
    certify = validating.to(certifying)
    cross_check = certifying.to(verifying)
    finish = validating.to(done) | certifying.to(done) | verifying.to(done)
    abort = (
        validating.to(failed)
        | certifying.to(failed)
        | verifying.to(failed)
    )

    def __init__(self, certifier: "OrbitCertifier"):
        self.certifier = certifier
        super().__init__()

    def on_enter_validating(self):
        logger.info("STAGE: validating")
        self.certifier._enter_stage("validate")

    def on_enter_certifying(self):
        logger.info("STAGE: certifying")
        self.certifier._enter_stage("certify")

    def on_enter_verifying(self):
        logger.info("STAGE: verifying")
        self.certifier._enter_stage("verify")

    def on_enter_done(self):
        logger.info("STAGE: done")
        self.certifier._close_stage()

    def on_enter_failed(self):
        logger.info("STAGE: failed")
        self.certifier._close_stage()


# ══════════════════════════════════════════════════════════════
#  Certification Controller
# ══════════════════════════════════════════════════════════════

class OrbitCertifier:
    """
    Runs the stages for one presentation: validation, the compatibility
    solver (kernel path), the volume descent (descent path) and the
    cross-checks between them.
    """

    def __init__(
        self,
        doc: PresentationDocument,
        seed: int = DEFAULT_SEED,
        tol: float = NULLSPACE_REL_TOL,
        max_iter: int = DEFAULT_MAX_ITER,
        parallel: bool = VERIFY_PARALLEL,
    ):
        self.doc = doc
        self.seed = seed
        self.tol = tol
        self.max_iter = max_iter
        self.parallel = parallel
        self.split: Optional[CartanSplit] = None
        compat_seq, descent_seq, geodesic_seq = np.random.SeedSequence(seed).spawn(3)
        self._compat_rng = np.random.default_rng(compat_seq)
        self._descent_rng = np.random.default_rng(descent_seq)
        self._geodesic_rng = np.random.default_rng(geodesic_seq)
        self.timings: dict[str, float] = {}
        self._stage: Optional[str] = None
        self._stage_started = 0.0
        self._state_lock = threading.RLock()
        self.state_machine = CertificationPipeline(self)

    # ── Stage bookkeeping ──────────────────────────────────────

    def _enter_stage(self, name: str):
        self._close_stage()
        self._stage = name
        self._stage_started = time.perf_counter()

    def _close_stage(self):
        if self._stage is not None:
            self.timings[self._stage] = time.perf_counter() - self._stage_started
            self._stage = None

    def _safe_transition(self, transition_name: str) -> bool:
        """Execute a state machine transition under lock. Returns True on success."""
        with self._state_lock:
            try:
                getattr(self.state_machine, transition_name)()
                return True
            except Exception as e:
                logger.warning(f"State transition '{transition_name}' failed: {e}")
                return False

    # ── Entry point ────────────────────────────────────────────

    def execute(self, command: str, report: RunReport) -> RunReport:
        """Run `command` and fill `report`; exceptions become report errors."""
        self._safe_transition("begin")
        try:
            if not self.validate(report):
                self._safe_transition("abort")
                return report
            if command == "validate":
                self._safe_transition("finish")
                return report

            self._safe_transition("certify")
            if command == "decompose":
                self.decompose(report)
            elif command == "minimize":
                self.minimize(report)
            elif command == "verify":
                self.verify(report)
            else:
                raise InputError(f"unknown command '{command}'")
        except OrbitCertError as e:
            logger.warning("%s failed: %s", command, e)
            report.record_error(e, e.exit_code)
        except Exception as e:
            logger.exception("Unexpected error during %s", command)
            report.record_error(e, 2)
        self._safe_transition("finish" if report.exit_code == 0 else "abort")
        return report

    # ── Stages ─────────────────────────────────────────────────

    def validate(self, report: RunReport) -> bool:
        split = self.doc.to_split()
        g = split.g
        presentation = validate_presentation(g)
        section = {"presentation": presentation.to_dict()}
        report.sections["validation"] = section
        if not presentation.ok:
            report.fail("presentation: " + ", ".join(presentation.failures))
            return False

        sc = structure_constants(g)
        b = killing_matrix(sc)
        semisimple, witness = is_semisimple(b)
        split_report = validate_cartan_split(split)
        section.update({
            "jacobi_residual": sc.jacobi_residual(),
            "killing_matrix": b.matrix.ravel().tolist(),
            "is_semisimple": semisimple,
            "semisimple_witness": witness,
            "split": split_report.to_dict(),
        })
        if not semisimple:
            report.fail("not semisimple")
        if not split_report.ok:
            report.fail("Cartan split: " + ", ".join(split_report.failures))
        self.split = split
        return report.exit_code == 0

    def decompose(self, report: RunReport) -> CompatibilityCertificate:
        split = self.split
        cert = compatible_metric(split, rel_tol=self.tol, rng=self._compat_rng)
        amb = ambient_split(cert.S)
        k_in_a, p_in_s = amb.containment_residuals(split)
        triple = normal_triple_system(split, amb)
        orbit = orbit_report(split, cert.base_point)
        slice_samples = totally_geodesic_slice(split, cert.base_point, triple)

        report.sections["decomposition"] = {
            "certificate": cert.to_dict(),
            "ambient": {
                "dim_A": int(amb.A_basis.shape[0]),
                "dim_S": int(amb.S_basis.shape[0]),
                "k_in_A_residual": k_in_a,
                "p_in_S_residual": p_in_s,
                **amb.residuals(),
            },
            "triple_system": triple.to_dict(),
            "orbit": orbit.to_dict(),
            "slice": [s.to_dict() for s in slice_samples],
        }
        if not cert.ok:
            report.fail("compatibility certificate residuals above threshold")
        if orbit.max_sff_norm > TG_RESIDUAL_TOL:
            report.fail(f"orbit at S^-1 is not totally geodesic (|II| = {orbit.max_sff_norm:.3e})")
        if orbit.mean_curvature_norm > MEAN_CURVATURE_TOL:
            report.fail(f"orbit at S^-1 is not minimal (|H| = {orbit.mean_curvature_norm:.3e})")
        if not triple.ok:
            report.fail("normal triple system is not closed")
        worst_slice = max((max(s.mean_curvature_norm, s.max_sff_norm) for s in slice_samples), default=0.0)
        if worst_slice > TG_RESIDUAL_TOL:
            report.fail(f"slice orbit is not totally geodesic ({worst_slice:.3e})")
        return cert

    def minimize(self, report: RunReport) -> MinimizationResult:
        split = self.split
        chart = fixed_set(split, rng=self._descent_rng, rel_tol=self.tol)
        start = random_fixed_point(chart, self._descent_rng)
        result = minimize_volume(split, chart, max_iter=self.max_iter, start=start)
        cert = certify_minimal(split, result.point)
        lam = lambda_value(split, chart, result.point, chart.P0)

        report.sections["minimization"] = {
            "fixed_set_dim": chart.dimension,
            "P0": chart.P0.P.ravel().tolist(),
            "start": start.P.ravel().tolist(),
            "result": result.to_dict(include_history=False),
            "certificate": cert.to_dict(),
            "lambda": {"value": lam.lam, "proportionality_residual": lam.proportionality_residual},
        }
        if result.diverged:
            report.non_certified("descent diverged: the minimizer left the search radius")
        elif not result.converged:
            report.non_certified(f"descent did not reach |H| <= {MEAN_CURVATURE_TOL:g} in {self.max_iter} iterations")
        elif not cert.passed:
            report.fail("minimality certificate failed")
        if lam.proportionality_residual > PROPORTIONALITY_TOL:
            report.fail(f"induced metric on the fixed set is not a multiple of the reference "
                        f"({lam.proportionality_residual:.3e})")
        return result

    def verify(self, report: RunReport):
        # Each path fills its own report; merged in a fixed order afterwards.
        kernel_part = RunReport(report.command, report.seed, report.tol)
        descent_part = RunReport(report.command, report.seed, report.tol)
        if self.parallel:
            with ThreadPoolExecutor(max_workers=2, thread_name_prefix="orbitcert") as pool:
                kernel_future = pool.submit(self.decompose, kernel_part)
                descent_future = pool.submit(self.minimize, descent_part)
                cert = kernel_future.result()
                result = descent_future.result()
        else:
            cert = self.decompose(kernel_part)
            result = self.minimize(descent_part)
        report.merge(kernel_part)
        report.merge(descent_part)

        self._safe_transition("cross_check")
        cross = {"kernel_dim": cert.kernel_dim}
        if cert.kernel_dim == 1:
            gap = distance(cert.base_point, result.point)
            cross["distance"] = gap
            if gap > CROSS_PATH_DISTANCE_TOL:
                report.fail(f"kernel and descent base points differ (distance {gap:.3e})")
        report.sections["cross_check"] = cross
        report.sections["variational"] = self._variational_suite(report, cert)

    def _variational_suite(self, report: RunReport, cert: CompatibilityCertificate) -> dict:
        split = self.split
        foot = cert.base_point
        table = []
        for index in range(VARIATIONAL_GEODESICS):
            gamma = random_normal_geodesic(split, foot, self._geodesic_rng)
            if gamma is None:
                break
            try:
                entries = [
                    {"geodesic": index, "generator": i,
                     "samples": [s.to_dict() for s in variational_f(split, x, gamma, VARIATIONAL_SAMPLES)]}
                    for i, x in enumerate(split.g.basis)
                ]
            except NotNormalError as e:
                logger.warning("Normal geodesic %d left the normal bundle: %s", index, e)
                report.non_certified(f"normal geodesic {index}: {e}")
                break
            table.extend(entries)
        rows = [s for entry in table for s in entry["samples"]]
        summary = {
            "geodesics": len({entry["geodesic"] for entry in table}),
            "max_identity_residual": max((s["identity_residual"] for s in rows), default=0.0),
            "max_abs_f_at_foot": max((abs(s["f"]) for s in rows if s["t"] == 0.0), default=0.0),
            "min_f_dot": min((s["f_dot_fd"] for s in rows), default=0.0),
            "table": table,
        }
        if summary["max_identity_residual"] > VARIATIONAL_IDENTITY_TOL:
            report.fail(f"variational identity violated ({summary['max_identity_residual']:.3e})")
        if summary["max_abs_f_at_foot"] > F_AT_FOOT_TOL:
            report.fail(f"f(0) does not vanish at the foot ({summary['max_abs_f_at_foot']:.3e})")
        if summary["min_f_dot"] < F_DOT_FLOOR:
            report.fail(f"f is decreasing along a normal geodesic ({summary['min_f_dot']:.3e})")
        return summary


# ══════════════════════════════════════════════════════════════
#  Command Line
# ══════════════════════════════════════════════════════════════

class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors are input errors (exit 3), not argparse's exit 2."""
    def error(self, message):
        raise InputError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="orbitcert",
        description="Certified compatible Cartan decompositions and totally geodesic orbits.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    common = _ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=NULLSPACE_REL_TOL,
                        help="relative singular value cutoff for kernels")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="generator seed")
    common.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER, help="descent iteration limit")
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument("--pretty", action="store_true", help="human-readable output")
    fmt.add_argument("--json", action="store_true", help="canonical JSON output (default)")
    common.add_argument("--timings", action="store_true", help="add per-stage wall time")
    common.add_argument("--sequential", action="store_true", help="verify: run paths one after the other")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug logging")

    for name, help_text in (
        ("validate", "check presentation, semisimplicity and the Cartan split"),
        ("decompose", "kernel path: compatible inner product and orbit at S^-1"),
        ("minimize", "descent path: minimal orbit on the fixed set"),
        ("verify", "both paths, cross-check and the f(t) suite"),
    ):
        cmd = sub.add_parser(name, parents=[common], help=help_text)
        cmd.add_argument("input", help="PresentationDocument JSON file, or - for stdin")

    cat = sub.add_parser("catalog", help="list or emit built-in presentations")
    cat.add_argument("name", nargs="?", help="catalog entry to emit")
    cat.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _read_input(path: str) -> bytes:
    if path == "-":
        stream = getattr(sys.stdin, "buffer", sys.stdin)
        data = stream.read()
        return data.encode("utf-8") if isinstance(data, str) else data
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from e


def _run_catalog(name: Optional[str]) -> int:
    if name is None:
        sys.stdout.write(canonical_json({"entries": list(catalog())}))
    else:
        sys.stdout.write(emit_document(get_entry(name)))
    return 0


def run(argv: Optional[list[str]] = None, configure_logging: bool = False) -> int:
    """Parse arguments, run one command and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
    except OrbitCertError as e:
        print(f"orbitcert: {e}", file=sys.stderr)
        return e.exit_code
    if configure_logging:
        _setup_logging(args.verbose)

    try:
        if args.command == "catalog":
            return _run_catalog(args.name)
        raw = _read_input(args.input)
        doc = parse_presentation(raw)
    except OrbitCertError as e:
        print(f"orbitcert: {e}", file=sys.stderr)
        return e.exit_code

    report = RunReport(
        command=args.command,
        seed=args.seed,
        tol=args.tol,
        input_sha256=input_digest(raw),
        input_name=doc.name,
    )
    certifier = OrbitCertifier(doc, seed=args.seed, tol=args.tol,
                               max_iter=args.max_iter, parallel=not args.sequential)
    certifier.execute(args.command, report)
    if args.timings:
        report.timings = dict(certifier.timings)

    if report.error:
        print(f"orbitcert: {report.error['type']}: {report.error['message']}", file=sys.stderr)
    for reason in report.failures:
        print(f"orbitcert: {reason}", file=sys.stderr)

    if args.pretty:
        sys.stdout.write(render_pretty(report, color=use_color(sys.stdout)))
    else:
        sys.stdout.write(report.to_json())
    return report.exit_code


# ══════════════════════════════════════════════════════════════
#  Entry Point
# ══════════════════════════════════════════════════════════════

def main():
    # Restore default SIGPIPE so `... | head` ends quietly
    try:
        signal.signal(signal.SIGPIPE, signal.SIG_DFL)
    except AttributeError:
        pass  # SIGPIPE not available on Windows

    sys.exit(run(sys.argv[1:], configure_logging=True))


if __name__ == "__main__":
    main()
