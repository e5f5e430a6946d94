"""Configuration parsing, checkpointing, CSV emission and run orchestration.

Config files are flat ``key = value`` text with one dotted section level
(``drift.kind = sqg``); see ``CONFIG_KEYS`` for the full schema.  Binary
checkpoints use the little-endian "ASCL1" format: a fixed header followed
by (re, im) float64 pairs of the retained independent modes in
lexicographic wavevector order.  All files are written atomically
(temp file + rename) and every run directory carries a manifest recording
the configuration echo and content hashes of the inputs.

Exit codes: 0 success, 1 configuration error, 2 numerical blow-up,
3 property-violation flags raised by an audit.
"""

from __future__ import annotations

import argparse
import json
import os
import struct
import sys
import tempfile
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .diagnostics import DiagnosticRecord, analyticity_radius_estimate, record
from .errors import BlowUpError, CheckpointError, ConfigError, SweepAbortedError
from .experiments import (
    SweepPlan,
    attractor_sample,
    field_digest,
    gevrey_radius_track,
    kappa_sweep,
    nu_sweep_attractor,
)
from .grid import (
    GridSpec,
    SpectralField,
    analytic_decay_field,
    random_band_field,
    single_mode_field,
)
from .multipliers import MultiplierSpec, load_custom_symbol_file, verify_assumptions
from .stepping import SimulationState, SolverConfig, run
from .tangent import lyapunov_run

__all__ = [
    "parse_config",
    "ParsedRun",
    "save_checkpoint",
    "load_checkpoint",
    "write_csv",
    "main",
]

MAGIC = b"ASCL1"
_DRIFT_CODES = {"mg": 0, "sqg": 1, "custom": 2}
_DRIFT_NAMES = {v: k for k, v in _DRIFT_CODES.items()}

# ---------------------------------------------------------------------------
# Config schema

_GENERATORS = ("single_mode", "random_band", "analytic_decay", "modes", "from_checkpoint", "none")

CONFIG_KEYS = {
    "grid.dimension": "grid dimension (2 or 3); default set by drift kind",
    "grid.modes": "even modes per axis, >= 8",
    "drift.kind": "mg | sqg | custom",
    "drift.nu": "mg viscosity parameter, >= 0 (default 0)",
    "drift.table": "path to a custom symbol table file",
    "drift.strict": "reject (true) or warn (false) on custom-symbol audit failures",
    "solver.kappa": "thermal diffusivity, >= 0",
    "solver.gamma": "fractional dissipation power in (0, 2]",
    "solver.dt": "time step, or 'auto'",
    "solver.t_end": "horizon, >= 0",
    "solver.cfl_safety": "CFL safety factor in (0, 1]",
    "solver.integrator": "etdrk2 | ifrk4",
    "solver.dealias": "2/3 | none",
    "init.kind": "single_mode | random_band | analytic_decay | modes | from_checkpoint",
    "init.k": "wavevector for single_mode, e.g. '1 0'",
    "init.amplitude": "generator amplitude",
    "init.kmin": "random_band lower shell",
    "init.kmax": "random_band upper shell",
    "init.seed": "generator seed",
    "init.tau0": "analytic_decay radius",
    "init.modes": "inline modes 'k.. re im; ...'",
    "init.path": "checkpoint path for from_checkpoint",
    "forcing.kind": "none | single_mode | random_band | analytic_decay | modes | from_checkpoint",
    "forcing.k": "see init.k",
    "forcing.amplitude": "see init.amplitude",
    "forcing.kmin": "see init.kmin",
    "forcing.kmax": "see init.kmax",
    "forcing.seed": "see init.seed",
    "forcing.tau0": "see init.tau0",
    "forcing.modes": "see init.modes",
    "forcing.path": "see init.path",
    "diag.hs": "Sobolev exponents to record, e.g. '1 2'",
    "diag.observe_every": "record every n-th step",
    "sweep.kappas": "descending kappa list for sweep-kappa",
    "sweep.nus": "descending nu list for sweep-nu",
    "sweep.norms": "norm labels: l2 h1 (default l2)",
    "sweep.transient": "attractor transient time",
    "sweep.cadence": "attractor sampling cadence",
    "sweep.count": "snapshots per cloud",
    "lyapunov.n": "number of tangent directions",
    "lyapunov.renorm_interval": "time between re-orthonormalizations",
    "lyapunov.total_time": "averaging horizon",
    "lyapunov.inner": "h1 | l2",
    "gevrey.r": "Gevrey derivative index",
    "gevrey.s": "Gevrey class index, >= 1",
    "gevrey.tau_fraction": "prescribed tau as a fraction of tau_hat(0)",
}


def _parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _get_float(kv: dict, key: str, default=None) -> float | None:
    if key not in kv:
        return default
    try:
        return float(kv[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: not a number: {kv[key]!r}") from exc


def _get_int(kv: dict, key: str, default=None) -> int | None:
    if key not in kv:
        return default
    try:
        return int(kv[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: not an integer: {kv[key]!r}") from exc


def _get_bool(kv: dict, key: str, default: bool) -> bool:
    if key not in kv:
        return default
    val = kv[key].lower()
    if val in ("true", "1", "yes"):
        return True
    if val in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {kv[key]!r}")


def _parse_mode_list(spec: str, dimension: int) -> dict[tuple[int, ...], complex]:
    modes: dict[tuple[int, ...], complex] = {}
    for chunk in spec.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split()
        if len(parts) != dimension + 2:
            raise ConfigError(
                f"mode entry {chunk!r}: expected {dimension} integers + re + im"
            )
        k = tuple(int(p) for p in parts[:dimension])
        if all(v == 0 for v in k):
            raise ConfigError("forcing/init modes must have zero mean: k = 0 listed")
        modes[k] = complex(float(parts[-2]), float(parts[-1]))
    if not modes:
        raise ConfigError("empty mode list")
    return modes


_ANALYTIC_GENERATORS = {"single_mode", "analytic_decay", "modes"}


def _build_generated_field(
    kv: dict, prefix: str, grid: GridSpec, zero_k3: bool, default_seed: int
) -> SpectralField | None:
    kind = kv.get(f"{prefix}.kind", "none" if prefix == "forcing" else "random_band")
    if kind not in _GENERATORS:
        raise ConfigError(f"{prefix}.kind: unknown generator {kind!r}")
    if kind == "none":
        return None
    if kind == "single_mode":
        kstr = kv.get(f"{prefix}.k")
        if kstr is None:
            raise ConfigError(f"{prefix}.k is required for single_mode")
        k = tuple(int(p) for p in kstr.split())
        if len(k) != grid.dimension:
            raise ConfigError(f"{prefix}.k: expected {grid.dimension} integers")
        amp = _get_float(kv, f"{prefix}.amplitude", 1.0)
        f = single_mode_field(grid, k, amp)
    elif kind == "random_band":
        kmin = _get_float(kv, f"{prefix}.kmin", 1.0)
        kmax = _get_float(kv, f"{prefix}.kmax", max(2.0, grid.modes_per_axis / 6.0))
        amp = _get_float(kv, f"{prefix}.amplitude", 1.0)
        seed = _get_int(kv, f"{prefix}.seed", default_seed)
        f = random_band_field(grid, kmin, kmax, amp, seed, zero_k3_plane=zero_k3)
    elif kind == "analytic_decay":
        tau0 = _get_float(kv, f"{prefix}.tau0", 0.8)
        amp = _get_float(kv, f"{prefix}.amplitude", 1.0)
        seed = _get_int(kv, f"{prefix}.seed", default_seed)
        f = analytic_decay_field(grid, tau0, amp, seed, zero_k3_plane=zero_k3)
    elif kind == "modes":
        spec = kv.get(f"{prefix}.modes")
        if spec is None:
            raise ConfigError(f"{prefix}.modes is required for the modes generator")
        f = SpectralField.from_modes(grid, _parse_mode_list(spec, grid.dimension))
    else:  # from_checkpoint
        path = kv.get(f"{prefix}.path")
        if path is None:
            raise ConfigError(f"{prefix}.path is required for from_checkpoint")
        state, meta = load_checkpoint(path)
        if state.theta.grid != grid:
            raise ConfigError(
                f"{prefix}.path: checkpoint grid {state.theta.grid} does not match {grid}"
            )
        f = state.theta
    if zero_k3:
        k3 = grid.wavenumbers[-1]
        plane = np.broadcast_to(k3 == 0, grid.shape)
        if float(np.max(np.abs(f.coeffs[plane]), initial=0.0)) > 0.0:
            raise ConfigError(
                f"{prefix}: mg runs require zero vertical mean (no energy on k3=0)"
            )
    return f


@dataclass
class ParsedRun:
    """Everything needed to execute a configured run."""

    grid: GridSpec
    config: SolverConfig
    theta0: SpectralField
    forcing: SpectralField
    raw: dict[str, str]
    init_kind: str

    def extras_float_list(self, key: str) -> list[float]:
        if key not in self.raw:
            raise ConfigError(f"missing required key {key}")
        return [float(p) for p in self.raw[key].split()]


def parse_config(text: str, default_seed: int = 0) -> ParsedRun:
    """Parse and validate a run configuration document.

    Rejects unknown keys, out-of-range values, mean-violating forcing, and
    the ill-posed regime (singular mg drift with kappa = 0 and
    non-analytic initial data), each with a distinct message.
    """
    kv = _parse_kv(text)

    kind = kv.get("drift.kind")
    if kind is None:
        raise ConfigError("drift.kind is required")
    kind = kind.lower()
    if kind not in _DRIFT_CODES:
        raise ConfigError(f"drift.kind: unknown law {kind!r}")
    nu = _get_float(kv, "drift.nu", 0.0)
    if nu < 0:
        raise ConfigError(f"drift.nu must be >= 0, got {nu}")

    default_dim = {"mg": 3, "sqg": 2}.get(kind)
    dimension = _get_int(kv, "grid.dimension", default_dim)
    if dimension is None:
        raise ConfigError("grid.dimension is required for custom drifts")
    modes = _get_int(kv, "grid.modes", 64 if dimension == 2 else 24)
    try:
        grid = GridSpec(dimension=dimension, modes_per_axis=modes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    if kind == "custom":
        path = kv.get("drift.table")
        if path is None:
            raise ConfigError("drift.table is required for custom drifts")
        strict = _get_bool(kv, "drift.strict", True)
        table = load_custom_symbol_file(path, dimension, grid, strict=strict)
        drift = table.spec
    else:
        drift = MultiplierSpec(kind=kind, nu=nu)
        if drift.dimension != dimension:
            raise ConfigError(
                f"{kind} drift is {drift.dimension}-d but grid.dimension = {dimension}"
            )

    kappa = _get_float(kv, "solver.kappa")
    if kappa is None:
        raise ConfigError("solver.kappa is required")
    gamma = _get_float(kv, "solver.gamma", 1.0 if kind == "sqg" else 2.0)
    t_end = _get_float(kv, "solver.t_end")
    if t_end is None:
        raise ConfigError("solver.t_end is required")
    dt_raw = kv.get("solver.dt", "auto")
    dt = None if dt_raw.lower() == "auto" else float(dt_raw)
    cfl = _get_float(kv, "solver.cfl_safety", 0.5)
    integrator = kv.get("solver.integrator", "etdrk2").lower().replace("-", "")
    dealias = kv.get("solver.dealias", "2/3")
    try:
        config = SolverConfig(
            kappa=kappa,
            gamma=gamma,
            drift=drift,
            t_end=t_end,
            dt=dt,
            cfl_safety=cfl,
            integrator=integrator,
            dealias=dealias,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    zero_k3 = kind == "mg"
    init_kind = kv.get("init.kind", "random_band")
    if (
        kind == "mg"
        and nu == 0.0
        and kappa == 0.0
        and init_kind not in _ANALYTIC_GENERATORS
    ):
        raise ConfigError(
            "ill-posed regime rejected: singular mg drift (nu=0) with kappa=0 "
            "requires analytic initial data (single_mode, analytic_decay or modes)"
        )

    theta0 = _build_generated_field(kv, "init", grid, zero_k3, default_seed)
    if theta0 is None:
        raise ConfigError("init.kind: 'none' is not a valid initial condition")
    forcing = _build_generated_field(kv, "forcing", grid, zero_k3, default_seed + 1)
    if forcing is None:
        forcing = SpectralField.zeros(grid)

    return ParsedRun(
        grid=grid,
        config=config,
        theta0=theta0,
        forcing=forcing,
        raw=kv,
        init_kind=init_kind,
    )


# ---------------------------------------------------------------------------
# Checkpoints


def _independent_modes(grid: GridSpec) -> list[tuple[int, ...]]:
    """Retained independent wavevectors in lexicographic order.

    One representative per conjugate pair: the lexicographically positive
    member (first nonzero component positive) of each k with components in
    [-(N/2-1), N/2-1], excluding 0.
    """
    half = grid.modes_per_axis // 2
    rng = range(-(half - 1), half)
    out = []
    for k in _lex_product(rng, grid.dimension):
        for v in k:
            if v > 0:
                out.append(k)
                break
            if v < 0:
                break
    return out


def _lex_product(rng: range, d: int) -> Iterable[tuple[int, ...]]:
    import itertools

    return itertools.product(rng, repeat=d)


def expected_coefficient_count(grid: GridSpec) -> int:
    m = grid.modes_per_axis - 1
    return (m**grid.dimension - 1) // 2


_HEADER = struct.Struct("<5sII d d d I d Q")  # magic d N t kappa gamma kind nu count


def save_checkpoint(state: SimulationState, config: SolverConfig, path) -> None:
    """Write the bit-exact "ASCL1" snapshot of a simulation state."""
    grid = state.theta.grid
    modes = _independent_modes(grid)
    kind_code = _DRIFT_CODES[config.drift.kind]
    header = _HEADER.pack(
        MAGIC,
        grid.dimension,
        grid.modes_per_axis,
        state.t,
        config.kappa,
        config.gamma,
        kind_code,
        getattr(config.drift, "nu", 0.0),
        len(modes),
    )
    c = state.theta.coeffs
    payload = np.empty(2 * len(modes), dtype="<f8")
    for i, k in enumerate(modes):
        v = c[grid.index_of(k)]
        payload[2 * i] = v.real
        payload[2 * i + 1] = v.imag
    _atomic_write_bytes(path, header + payload.tobytes())


@dataclass(frozen=True)
class CheckpointMeta:
    t: float
    kappa: float
    gamma: float
    drift_kind: str
    nu: float


def load_checkpoint(path) -> tuple[SimulationState, CheckpointMeta]:
    """Read an "ASCL1" snapshot back into a simulation state."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise CheckpointError(
            f"truncated checkpoint: {len(data)} bytes, header needs {_HEADER.size}"
        )
    magic, d, n, t, kappa, gamma, kind_code, nu, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        if magic[:4] == MAGIC[:4]:
            raise CheckpointError(f"checkpoint version mismatch: {magic!r}")
        raise CheckpointError(f"bad magic {magic!r}")
    try:
        grid = GridSpec(dimension=d, modes_per_axis=n)
    except ValueError as exc:
        raise CheckpointError(f"invalid header geometry: {exc}") from exc
    expected = expected_coefficient_count(grid)
    if count == 0:
        raise CheckpointError("degenerate checkpoint: zero retained modes declared")
    if count != expected:
        raise CheckpointError(
            f"coefficient count {count} does not match the {expected} retained "
            f"independent modes of a {d}-d N={n} grid"
        )
    body = data[_HEADER.size:]
    need = 16 * count
    if len(body) != need:
        raise CheckpointError(
            f"truncated checkpoint payload: expected {need} bytes, found {len(body)}"
        )
    flat = np.frombuffer(body, dtype="<f8")
    coeffs = np.zeros(grid.shape, dtype=np.complex128)
    for i, k in enumerate(_independent_modes(grid)):
        v = complex(flat[2 * i], flat[2 * i + 1])
        coeffs[grid.index_of(k)] = v
        coeffs[grid.index_of(tuple(-x for x in k))] = np.conj(v)
    state = SimulationState(t=t, theta=SpectralField._wrap(grid, coeffs), step_count=0)
    kind = _DRIFT_NAMES.get(kind_code)
    if kind is None:
        raise CheckpointError(f"unknown drift code {kind_code}")
    return state, CheckpointMeta(t=t, kappa=kappa, gamma=gamma, drift_kind=kind, nu=nu)


# ---------------------------------------------------------------------------
# CSV + manifests


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """CSV with a header line and floats at 17 significant digits."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def write_manifest(path, parsed: ParsedRun, extra: dict | None = None) -> None:
    manifest = {
        "version": __version__,
        "config": dict(sorted(parsed.raw.items())),
        "inputs": {
            "theta0_sha256": field_digest(parsed.theta0),
            "forcing_sha256": field_digest(parsed.forcing),
        },
        "wall_clock": {
            "written_at_unix": time.time(),
        },
    }
    if extra:
        manifest["extra"] = extra
    _atomic_write_bytes(path, json.dumps(manifest, indent=2).encode("utf-8"))


# ---------------------------------------------------------------------------
# Subcommands


def _diag_rows(records: list[DiagnosticRecord], hs: Sequence[float]):
    header = ["t", "l2"] + [f"h{s:g}" for s in hs] + ["linf", "dissipation_rate"]
    rows = []
    for rec in records:
        row = [rec.t, rec.l2] + [rec.hs[s] for s in hs] + [rec.linf, rec.dissipation_rate]
        rows.append(row)
    return header, rows


def _cmd_run(parsed: ParsedRun, out: Path, args) -> int:
    hs = [float(p) for p in parsed.raw.get("diag.hs", "1").split()]
    every = int(parsed.raw.get("diag.observe_every", "1"))
    records: list[DiagnosticRecord] = []

    def observer(state: SimulationState) -> None:
        records.append(record(state, parsed.config, hs=hs))
        if args.checkpoint_every and state.step_count > 0 and (
            state.step_count % args.checkpoint_every == 0
        ):
            save_checkpoint(state, parsed.config, out / f"checkpoint_{state.step_count:08d}.ckpt")

    final = run(
        parsed.config,
        parsed.theta0,
        parsed.forcing,
        observers=(observer,),
        observe_every=every,
    )
    header, rows = _diag_rows(records, hs)
    write_csv(out / "diagnostics.csv", header, rows)
    save_checkpoint(final, parsed.config, out / "final.ckpt")
    write_manifest(out / "manifest.json", parsed, extra={"final_t": final.t})
    return 0


def _cmd_audit(parsed: ParsedRun, out: Path, args) -> int:
    spec = parsed.config.drift
    probes = [float(p) for p in parsed.raw.get("sweep.nus", "").split()] or [
        getattr(spec, "nu", 0.0)
    ]
    report = verify_assumptions(spec, parsed.grid, probes if spec.kind == "mg" else None)
    rows = [
        ("div_max", report.div_max),
        ("c0_hat", report.c0_hat),
        ("lipschitz_hat", report.lipschitz_hat),
        ("kmax_used", float(report.kmax_used)),
    ]
    rows += [(f"c2_hat[nu={nu:g}]", val) for nu, val in sorted(report.c2_hat.items())]
    write_csv(out / "assumption_report.csv", ["quantity", "value"], rows)
    write_manifest(out / "manifest.json", parsed, extra={"flags": report.flags})
    if report.flags:
        print("audit flags:", "; ".join(report.flags), file=sys.stderr)
        return 3
    return 0


def _cmd_sweep_kappa(parsed: ParsedRun, out: Path, args) -> int:
    kappas = parsed.extras_float_list("sweep.kappas")
    base = parsed.config
    if base.dt is None:
        base = replace(base, dt=DEFAULT_SWEEP_DT)
    norm_labels = parsed.raw.get("sweep.norms", "l2").split()
    norms = []
    for label in norm_labels:
        if label == "l2":
            norms.append(("l2",))
        elif label == "h1":
            norms.append(("hs", 1.0))
        else:
            raise ConfigError(f"sweep.norms: unknown norm {label!r}")
    try:
        plan = SweepPlan(
            base=base,
            parameter="kappa",
            values=tuple(kappas),
            theta0=parsed.theta0,
            forcing=parsed.forcing,
            norms=tuple(norms),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = kappa_sweep(plan, max_workers=args.threads)
    write_csv(
        out / "sweep_kappa.csv",
        ["param", "t", "norm_name", "value"],
        result.rows(),
    )
    write_manifest(
        out / "manifest.json",
        parsed,
        extra={"fitted_order": result.fitted_order, "monotone": result.monotone},
    )
    return 0


def _cmd_sweep_nu(parsed: ParsedRun, out: Path, args) -> int:
    nus = parsed.extras_float_list("sweep.nus")
    transient = float(parsed.raw.get("sweep.transient", "10"))
    cadence = float(parsed.raw.get("sweep.cadence", "0.5"))
    count = int(parsed.raw.get("sweep.count", "20"))
    base = parsed.config
    if base.drift.kind != "mg":
        raise ConfigError("sweep-nu requires the mg drift family")
    try:
        plan = SweepPlan(
            base=base if base.dt is not None else replace(base, dt=DEFAULT_SWEEP_DT),
            parameter="nu",
            values=tuple(nus),
            theta0=parsed.theta0,
            forcing=parsed.forcing,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    reference = attractor_sample(
        plan.member_config(0.0), [parsed.theta0], parsed.forcing, transient, cadence, count
    )
    result = nu_sweep_attractor(
        plan, reference, transient, cadence, count, max_workers=args.threads
    )
    write_csv(
        out / "sweep_nu.csv",
        ["param", "t", "norm_name", "value"],
        [(nu, transient + cadence * count, f"semidistance_{result.norm}", val)
         for nu, val in result.rows],
    )
    write_manifest(out / "manifest.json", parsed, extra={"spearman": result.spearman})
    return 0


def _cmd_lyapunov(parsed: ParsedRun, out: Path, args) -> int:
    n = int(parsed.raw.get("lyapunov.n", "4"))
    interval = float(parsed.raw.get("lyapunov.renorm_interval", "0.5"))
    total = float(parsed.raw.get("lyapunov.total_time", "50"))
    inner = parsed.raw.get("lyapunov.inner", "h1")
    result = lyapunov_run(
        parsed.config,
        parsed.theta0,
        parsed.forcing,
        n=n,
        renorm_interval=interval,
        total_time=total,
        seed=args.seed,
        inner_product=inner,
    )
    sums = result.cumulative_sums
    write_csv(
        out / "lyapunov.csv",
        ["index", "exponent", "cumulative_sum"],
        [(i + 1, result.exponents[i], sums[i]) for i in range(n)],
    )
    write_manifest(
        out / "manifest.json",
        parsed,
        extra={
            "n_star": result.n_star,
            "ky_dimension": result.ky_dimension,
            "total_time": result.total_time,
        },
    )
    return 0


def _cmd_gevrey_track(parsed: ParsedRun, out: Path, args) -> int:
    r = float(parsed.raw.get("gevrey.r", "0"))
    s = float(parsed.raw.get("gevrey.s", "1"))
    frac = float(parsed.raw.get("gevrey.tau_fraction", "0.5"))
    tau0 = analyticity_radius_estimate(parsed.theta0).tau_hat
    rows = gevrey_radius_track(
        parsed.config,
        parsed.theta0,
        parsed.forcing,
        r=r,
        s=s,
        tau_schedule=lambda t: frac * tau0,
    )
    write_csv(out / "gevrey_track.csv", ["t", "tau_hat", "gevrey_norm"], rows)
    write_manifest(out / "manifest.json", parsed, extra={"tau0_hat": tau0})
    return 0


DEFAULT_SWEEP_DT = 0.02

_COMMANDS = {
    "run": _cmd_run,
    "audit-symbols": _cmd_audit,
    "sweep-kappa": _cmd_sweep_kappa,
    "sweep-nu": _cmd_sweep_nu,
    "lyapunov": _cmd_lyapunov,
    "gevrey-track": _cmd_gevrey_track,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ascl",
        description="Pseudospectral active scalar simulation laboratory",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("config", help="path to a key=value configuration file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    parser.add_argument("--seed", type=int, default=0, help="default generator seed")
    parser.add_argument(
        "--checkpoint-every", type=int, default=0, metavar="STEPS",
        help="write a checkpoint every STEPS accepted steps",
    )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        parsed = parse_config(text, default_seed=args.seed)
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](parsed, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return 2
    except SweepAbortedError as exc:
        if isinstance(exc.cause, BlowUpError):
            print(f"blow-up during sweep: {exc.cause}", file=sys.stderr)
            return 2
        raise


if __name__ == "__main__":
    sys.exit(main())
