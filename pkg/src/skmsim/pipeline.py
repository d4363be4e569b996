"""Monte Carlo orchestration, sample persistence, and report emission.

One realization is: derive the random streams for (level, symbol, trial),
generate one phase screen per path step, march the beam to the receiver,
cut out the aperture, measure the polarization, and integrate the masked
topological charge. The store keeps one number per (level, symbol, mask,
trial); every mask candidate in the built-in sweeps is evaluated on the
same realization at marginal cost, so later mask tuning never has to
propagate anything again.

Persistence is plain text sorted on write, with no timestamps, so a rerun
of the same configuration reproduces the store byte for byte. Random
streams are derived per (level, symbol, trial, purpose) from a hashed tag,
which makes results independent of chunking and of which levels run.
"""

from __future__ import annotations

import hashlib
import struct
import time
import json
from dataclasses import dataclass, field as dc_field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .config import RunConfig
from .constellation import optimize_constellation
from .detection import fit_symbol_stats
from .fields import (
    LgIndex,
    SamplingGrid,
    StokesField,
    VectorField,
    beam_width,
    predicted_nsk,
    rayleigh_range,
    stokes,
    synthesize_skm_beam,
    synthesize_vector_beam,
)
from .propagation import _propagate_stack, aperture_mask, apply_aperture, measure_stokes
from .topology import (
    FOUR_PI,
    NONZERO_FLOOR,
    SCALED_MEAN_ALPHAS,
    SUPER_GAUSSIAN_QS,
    TOP_FRACTION_EPSILONS,
    MaskSpec,
    build_mask,
    masked_skyrmion_number,
    normalize_stokes,
    optimize_mask_parameter,
    plaquette_solid_angles,
    scaled_mean_reference,
    threshold_sweep,
    top_fraction_threshold,
)
from .turbulence import (
    classify_regime,
    empirical_structure_function,
    generate_phase_screen,
    phase_structure_function,
    rytov_variance,
)

__all__ = [
    "STORE_FORMAT",
    "derive_stream",
    "SampleStore",
    "run_simulation",
    "optimize_mask",
    "characterize",
    "ReportRow",
    "CharacterizationReport",
    "BoxplotRow",
    "emit_boxplot_data",
    "save_boxplot_rows",
    "CheckRow",
    "PhysicsChecklist",
    "validate_physics",
    "save_receiver_field",
    "load_receiver_field",
]

STORE_FORMAT = "skmsim-store-v1"

_SAMPLE_HEADER = "cn2\tsymbol\tmask\ttrial\tn_tilde"
_VACUUM_HEADER = "symbol\tmask\tn_tilde"

# rough cap on transient screen-stack memory during chunked propagation
_CHUNK_BYTES = 256e6


def derive_stream(
    base_seed: int, cn2: float, symbol: int, trial: int, kind: str
) -> np.random.Generator:
    """Independent, reproducible random stream for one unit of work.

    The tag hash fixes the stream regardless of execution order, chunk
    size, or which other levels are simulated; the base seed is folded in
    by XOR so changing it re-keys every stream at once. ``kind`` separates
    the screen draws from the measurement-noise draws of the same trial.
    """
    tag = f"skmsim:v1|cn2={cn2!r}|sym={symbol}|trial={trial}|kind={kind}"
    digest = hashlib.sha256(tag.encode("ascii")).digest()
    k0, k1 = struct.unpack("<QQ", digest[:16])
    k0 ^= base_seed & 0xFFFFFFFFFFFFFFFF
    return np.random.Generator(np.random.Philox(key=[k0, k1]))


# ---------------------------------------------------------------------------
# sample store


@dataclass
class SampleStore:
    """Charge samples keyed by (level, symbol, mask label, trial).

    Append-only; the vacuum table keeps the per-symbol reference under every
    mask. ``level_seconds`` records wall-clock per level for the current
    process only and is never persisted.
    """

    config: RunConfig
    samples: dict = dc_field(default_factory=dict)
    vacuum: dict = dc_field(default_factory=dict)
    level_seconds: dict = dc_field(default_factory=dict)

    @property
    def fingerprint(self) -> str:
        return self.config.fingerprint

    def add_sample(self, cn2: float, symbol: int, mask: str, trial: int, value: float):
        key = (float(cn2), int(symbol), mask, int(trial))
        if key in self.samples:
            raise ValueError(f"duplicate sample for {key}")
        self.samples[key] = float(value)

    def add_vacuum(self, symbol: int, mask: str, value: float):
        key = (int(symbol), mask)
        if key in self.vacuum:
            raise ValueError(f"duplicate vacuum reference for {key}")
        self.vacuum[key] = float(value)

    def levels(self) -> tuple[float, ...]:
        return tuple(sorted({k[0] for k in self.samples}))

    def symbols(self) -> tuple[int, ...]:
        return tuple(sorted({k[1] for k in self.samples}))

    def mask_labels(self) -> tuple[str, ...]:
        return tuple(sorted({mask for _, mask in self.vacuum}))

    def samples_for(self, cn2: float, symbol: int, mask: str) -> np.ndarray:
        picked = [
            (trial, v)
            for (level, sym, label, trial), v in self.samples.items()
            if level == cn2 and sym == symbol and label == mask
        ]
        picked.sort()
        return np.array([v for _, v in picked])

    def symbol_samples(self, cn2: float, mask: str) -> dict[int, np.ndarray]:
        by_symbol: dict[int, list[tuple[int, float]]] = {}
        for (level, sym, label, trial), v in self.samples.items():
            if level == cn2 and label == mask:
                by_symbol.setdefault(sym, []).append((trial, v))
        return {
            sym: np.array([v for _, v in sorted(rows)])
            for sym, rows in by_symbol.items()
        }

    def vacuum_for(self, symbol: int, mask: str) -> float:
        return self.vacuum[(int(symbol), mask)]

    def vacuum_references(self, mask: str) -> dict[int, float]:
        return {
            sym: v for (sym, label), v in self.vacuum.items() if label == mask
        }

    def save(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(self.config.to_json())
        meta = {
            "format": STORE_FORMAT,
            "fingerprint": self.fingerprint,
            "n_samples": len(self.samples),
            "n_vacuum": len(self.vacuum),
        }
        (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        lines = [_SAMPLE_HEADER]
        for (cn2, sym, mask, trial) in sorted(self.samples):
            v = self.samples[(cn2, sym, mask, trial)]
            lines.append(f"{cn2!r}\t{sym}\t{mask}\t{trial}\t{v!r}")
        (out / "samples.tsv").write_text("\n".join(lines) + "\n")
        lines = [_VACUUM_HEADER]
        for (sym, mask) in sorted(self.vacuum):
            lines.append(f"{sym}\t{mask}\t{self.vacuum[(sym, mask)]!r}")
        (out / "vacuum.tsv").write_text("\n".join(lines) + "\n")
        return out

    @classmethod
    def load(cls, out_dir) -> "SampleStore":
        out = Path(out_dir)
        config = RunConfig.from_dict(json.loads((out / "config.json").read_text()))
        meta = json.loads((out / "meta.json").read_text())
        if meta.get("format") != STORE_FORMAT:
            raise ValueError(f"unrecognized store format {meta.get('format')!r}")
        if meta.get("fingerprint") != config.fingerprint:
            raise ValueError(
                "store fingerprint does not match its configuration; "
                "the directory was mixed or edited and cannot be reused"
            )
        store = cls(config)
        body = (out / "samples.tsv").read_text().splitlines()
        if body and body[0] != _SAMPLE_HEADER:
            raise ValueError(f"unexpected sample table header {body[0]!r}")
        for line in body[1:]:
            cn2, sym, mask, trial, v = line.split("\t")
            store.samples[(float(cn2), int(sym), mask, int(trial))] = float(v)
        body = (out / "vacuum.tsv").read_text().splitlines()
        if body and body[0] != _VACUUM_HEADER:
            raise ValueError(f"unexpected vacuum table header {body[0]!r}")
        for line in body[1:]:
            sym, mask, v = line.split("\t")
            store.vacuum[(int(sym), mask)] = float(v)
        return store


# ---------------------------------------------------------------------------
# realization engine


@dataclass(frozen=True)
class _MaskPlan:
    """Mask columns evaluated on every realization."""

    scaled: tuple[tuple[str, float], ...]
    top: tuple[tuple[str, float], ...]
    soft: tuple[tuple[str, MaskSpec], ...]
    extra: tuple[MaskSpec, ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return (
            ("none",)
            + tuple(lbl for lbl, _ in self.scaled)
            + tuple(lbl for lbl, _ in self.top)
            + tuple(lbl for lbl, _ in self.soft)
            + tuple(m.label for m in self.extra)
        )


def _mask_plan(config: RunConfig) -> _MaskPlan:
    scaled = tuple(
        (MaskSpec("scaled-mean", alpha=a).label, a) for a in SCALED_MEAN_ALPHAS
    )
    top = tuple(
        (MaskSpec("top-fraction", epsilon=e).label, e) for e in TOP_FRACTION_EPSILONS
    )
    # the soft family tunes the steepness q around a mean-level threshold;
    # its q -> inf limit is the scaled-mean mask at alpha = 1
    soft = tuple(
        (spec.label, spec)
        for spec in (
            MaskSpec("super-gaussian", alpha=1.0, q=q) for q in SUPER_GAUSSIAN_QS
        )
    )
    covered = (
        {"none"}
        | {lbl for lbl, _ in scaled}
        | {lbl for lbl, _ in top}
        | {lbl for lbl, _ in soft}
    )
    extra = ()
    if config.mask is not None and config.mask.label not in covered:
        extra = (config.mask,)
    return _MaskPlan(scaled=scaled, top=top, soft=soft, extra=extra)


def _charge_rows(
    measured: StokesField, aperture: np.ndarray, plan: _MaskPlan
) -> dict[str, float]:
    """Masked charge under every planned mask, shared solid-angle field."""
    norm = normalize_stokes(measured, floor=NONZERO_FLOOR)
    omega, ok = plaquette_solid_angles(norm, aperture)
    rows = {"none": float(omega[ok].sum() / FOUR_PI)}
    intensity = np.where(aperture, measured.s0, 0.0)
    thresholds = []
    if plan.scaled:
        i_avg = scaled_mean_reference(intensity)
        thresholds.extend(a * i_avg for _, a in plan.scaled)
    thresholds.extend(top_fraction_threshold(intensity, e) for _, e in plan.top)
    if thresholds:
        values = threshold_sweep(omega, ok, intensity, np.array(thresholds))
        for (label, _), v in zip(plan.scaled + plan.top, values):
            rows[label] = float(v)
    for label, spec in plan.soft:
        w = build_mask(intensity, spec)
        rows[label] = masked_skyrmion_number(norm, w, aperture)
    for spec in plan.extra:
        w = build_mask(intensity, spec)
        rows[spec.label] = masked_skyrmion_number(norm, w, aperture)
    return rows


def _chunk_size(config: RunConfig) -> int:
    per_trial = config.link.n_steps * config.grid.n_points**2 * 8
    return max(1, int(_CHUNK_BYTES // per_trial))


def _screen_stack(config: RunConfig, cn2: float, symbol: int, trials) -> np.ndarray:
    """Phase screens for a chunk of trials, shape (T, n_steps, n, n)."""
    profile = config.profile(cn2)
    grid = config.grid
    k = config.beam.spec().k
    out = np.empty(
        (len(trials), config.link.n_steps, grid.n_points, grid.n_points)
    )
    for i, trial in enumerate(trials):
        rng = derive_stream(config.base_seed, cn2, symbol, trial, "screen")
        for m in range(config.link.n_steps):
            out[i, m] = generate_phase_screen(profile, grid, k, rng).phase
    return out


def run_simulation(
    config: RunConfig,
    out_dir=None,
    progress: Callable[[str], None] | None = None,
) -> SampleStore:
    """Run the full Monte Carlo and return (optionally persist) the store.

    Per turbulence level and symbol, ``config.trials`` realizations are
    propagated in seed-stable chunks; each realization contributes one
    charge value per planned mask. The vacuum reference per (symbol, mask)
    is computed once up front. With ``out_dir`` set the store is also
    written there; a rerun with the same configuration reproduces the
    files byte for byte.
    """
    grid = config.grid
    spec = config.beam.spec()
    k = spec.k
    plan = _mask_plan(config)
    aperture = aperture_mask(grid, config.link.aperture_diameter)
    store = SampleStore(config)

    def note(msg: str):
        if progress is not None:
            progress(msg)

    beams = {n: synthesize_skm_beam(n, spec, grid) for n in config.symbols}

    note(f"vacuum references for {len(beams)} symbols")
    for symbol, beam in beams.items():
        stack = _propagate_stack(
            np.stack([beam.e_r, beam.e_l]),
            grid,
            config.link.n_steps,
            config.link.step,
            k,
            None,
        )
        received = apply_aperture(VectorField(grid, stack[0], stack[1]), config.link.aperture_diameter)
        rows = _charge_rows(stokes(received), aperture, plan)
        for label, value in rows.items():
            store.add_vacuum(symbol, label, value)

    chunk = _chunk_size(config)
    for cn2 in config.levels:
        t0 = time.perf_counter()
        for symbol, beam in beams.items():
            base = np.stack([beam.e_r, beam.e_l])
            for start in range(0, config.trials, chunk):
                trials = range(start, min(start + chunk, config.trials))
                screens = _screen_stack(config, cn2, symbol, trials)
                stack = np.broadcast_to(
                    base, (len(trials),) + base.shape
                )
                out = _propagate_stack(
                    stack,
                    grid,
                    config.link.n_steps,
                    config.link.step,
                    k,
                    lambda m: screens[:, m][:, None],
                )
                for i, trial in enumerate(trials):
                    received = apply_aperture(
                        VectorField(grid, out[i, 0], out[i, 1]),
                        config.link.aperture_diameter,
                    )
                    rng = (
                        derive_stream(config.base_seed, cn2, symbol, trial, "noise")
                        if config.noise.enabled and config.noise.sigma_eta > 0
                        else None
                    )
                    measured = measure_stokes(received, config.noise, rng)
                    for label, value in _charge_rows(measured, aperture, plan).items():
                        store.add_sample(cn2, symbol, label, trial, value)
            note(f"cn2={cn2!r}: symbol {symbol:+d} done ({config.trials} trials)")
        store.level_seconds[cn2] = time.perf_counter() - t0
        note(f"cn2={cn2!r}: level finished in {store.level_seconds[cn2]:.1f} s")

    if out_dir is not None:
        store.save(out_dir)
    return store


# ---------------------------------------------------------------------------
# mask tuning and characterization


def _sweep_params(store: SampleStore, kind: str) -> dict:
    """Candidate parameter -> mask label, from what the store actually holds."""
    params = {}
    for label in store.mask_labels():
        if label == "none" or not label.startswith(kind + ":"):
            continue
        spec = MaskSpec.from_label(label)
        if kind == "scaled-mean":
            params[spec.alpha] = label
        elif kind == "top-fraction":
            params[spec.epsilon] = label
        else:
            params[(spec.alpha, spec.q)] = label
    return params


def optimize_mask(store: SampleStore, cn2: float, kind: str = "scaled-mean") -> MaskSpec:
    """Pick the stored mask of one kind closest to the vacuum references.

    Minimizes the mean squared deviation of the masked turbulent samples
    from the unmasked vacuum value of each symbol, over every candidate the
    store holds for that kind. Scoring against the unmasked reference
    charges each candidate for its threshold-induced bias as well as its
    residual scatter; scoring against the same-mask vacuum value instead
    lets the bias cancel, which at strong turbulence rewards masks so
    aggressive that they crush the whole constellation toward zero and
    destroy the ordering the detector needs. Requires the simulation to
    have swept the kind.
    """
    params = _sweep_params(store, kind)
    if not params:
        raise ValueError(
            f"store holds no {kind!r} mask columns; rerun the simulation "
            "with that mask configured"
        )
    unmasked = store.vacuum_references("none")
    best = optimize_mask_parameter(
        lambda theta: store.symbol_samples(cn2, params[theta]),
        lambda theta: unmasked,
        params,
    )
    return MaskSpec.from_label(params[best])


def _choose_mask(store: SampleStore, cn2: float) -> str:
    # an explicit mask (including an explicit "none") wins; an absent one
    # means "tune the scaled-mean threshold for this level"
    cfg_mask = store.config.mask
    if cfg_mask is not None:
        return cfg_mask.label
    return optimize_mask(store, cn2, "scaled-mean").label


@dataclass(frozen=True)
class ReportRow:
    """One (turbulence level, constellation size) characterization result."""

    cn2: float
    regime: str
    m: int
    mask: str
    capacity: float
    constellation: tuple[int, ...]
    ser: float
    ber: float
    ser_uniform: float
    ber_uniform: float
    boundaries: tuple[float, ...]
    p_star: tuple[float, ...]
    deactivated: tuple[int, ...]
    runners_up: tuple[tuple[tuple[int, ...], float], ...]


@dataclass(frozen=True)
class CharacterizationReport:
    rows: tuple[ReportRow, ...]
    mask_choice: tuple[tuple[float, str], ...]

    def to_dict(self) -> dict:
        return {
            "mask_choice": [
                {"cn2": cn2, "mask": label} for cn2, label in self.mask_choice
            ],
            "rows": [
                {
                    "cn2": r.cn2,
                    "regime": r.regime,
                    "m": r.m,
                    "mask": r.mask,
                    "capacity": r.capacity,
                    "constellation": list(r.constellation),
                    "ser": r.ser,
                    "ber": r.ber,
                    "ser_uniform": r.ser_uniform,
                    "ber_uniform": r.ber_uniform,
                    "boundaries": list(r.boundaries),
                    "p_star": list(r.p_star),
                    "deactivated": list(r.deactivated),
                    "runners_up": [
                        {"constellation": list(c), "capacity": cap}
                        for c, cap in r.runners_up
                    ],
                }
                for r in self.rows
            ],
        }

    def to_tsv(self) -> str:
        header = (
            "cn2\tregime\tm\tmask\tcapacity\tconstellation\tser\tber"
            "\tser_uniform\tber_uniform\tboundaries"
        )
        lines = [header]
        for r in self.rows:
            lines.append(
                "\t".join(
                    [
                        repr(r.cn2),
                        r.regime,
                        str(r.m),
                        r.mask,
                        repr(r.capacity),
                        ",".join(str(s) for s in r.constellation),
                        repr(r.ser),
                        repr(r.ber),
                        repr(r.ser_uniform),
                        repr(r.ber_uniform),
                        ",".join(repr(b) for b in r.boundaries),
                    ]
                )
            )
        return "\n".join(lines) + "\n"

    def save(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.tsv").write_text(self.to_tsv())
        (out / "report.json").write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        )
        return out


def characterize(
    store: SampleStore,
    m_list: tuple[int, ...] = (4, 8, 16),
    top_n: int = 10,
) -> CharacterizationReport:
    """Mask tuning, statistics fit, and constellation search per level.

    For each turbulence level in the store: pick the mask (the configured
    one, else the tuned scaled-mean candidate), fit per-symbol Gaussians,
    and for each requested size run the exhaustive constellation search.
    """
    cfg = store.config
    rows = []
    mask_choice = []
    for cn2 in store.levels():
        label = _choose_mask(store, cn2)
        mask_choice.append((cn2, label))
        samples = store.symbol_samples(cn2, label)
        stats = fit_symbol_stats(samples)
        sigma_r2 = rytov_variance(cn2, cfg.beam.wavelength, cfg.link.distance)
        regime = classify_regime(sigma_r2)
        for m in m_list:
            search = optimize_constellation(stats, m, top_n=top_n)
            best = search.best
            rows.append(
                ReportRow(
                    cn2=cn2,
                    regime=regime,
                    m=m,
                    mask=label,
                    capacity=best.capacity,
                    constellation=best.constellation.symbols,
                    ser=best.ser,
                    ber=best.ber,
                    ser_uniform=best.ser_uniform,
                    ber_uniform=best.ber_uniform,
                    boundaries=best.scheme.boundaries,
                    p_star=tuple(float(p) for p in best.p_star),
                    deactivated=best.deactivated,
                    runners_up=tuple(
                        (r.symbols, r.capacity) for r in search.ranked
                    ),
                )
            )
    return CharacterizationReport(rows=tuple(rows), mask_choice=tuple(mask_choice))


# ---------------------------------------------------------------------------
# boxplot data


@dataclass(frozen=True)
class BoxplotRow:
    """Five-number summary of one (level, mask, symbol) sample set."""

    cn2: float
    mask: str
    symbol: int
    whisker_low: float
    q1: float
    median: float
    q3: float
    whisker_high: float
    n_outliers: int
    n_samples: int


def _box_row(cn2: float, mask: str, symbol: int, values: np.ndarray) -> BoxplotRow:
    q1, med, q3 = np.percentile(values, [25.0, 50.0, 75.0])
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = values[(values >= lo) & (values <= hi)]
    return BoxplotRow(
        cn2=cn2,
        mask=mask,
        symbol=symbol,
        whisker_low=float(inside.min()),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        whisker_high=float(inside.max()),
        n_outliers=int(values.size - inside.size),
        n_samples=int(values.size),
    )


def emit_boxplot_data(
    store: SampleStore, mask_labels: tuple[str, ...] | None = None
) -> tuple[BoxplotRow, ...]:
    """Whisker/quartile records per (level, mask, symbol), 1.5 IQR fences.

    By default each level contributes the unmasked column plus the tuned
    mask of each swept kind, which is what a side-by-side box plot of the
    mask benefit needs.
    """
    rows = []
    for cn2 in store.levels():
        if mask_labels is None:
            labels = ["none"]
            for kind in ("scaled-mean", "top-fraction", "super-gaussian"):
                if _sweep_params(store, kind):
                    labels.append(optimize_mask(store, cn2, kind).label)
        else:
            labels = list(mask_labels)
        for label in labels:
            for symbol, values in sorted(store.symbol_samples(cn2, label).items()):
                rows.append(_box_row(cn2, label, symbol, values))
    return tuple(rows)


def save_boxplot_rows(rows, path) -> Path:
    header = (
        "cn2\tmask\tsymbol\twhisker_low\tq1\tmedian\tq3\twhisker_high"
        "\tn_outliers\tn_samples"
    )
    lines = [header]
    for r in rows:
        lines.append(
            f"{r.cn2!r}\t{r.mask}\t{r.symbol}\t{r.whisker_low!r}\t{r.q1!r}"
            f"\t{r.median!r}\t{r.q3!r}\t{r.whisker_high!r}"
            f"\t{r.n_outliers}\t{r.n_samples}"
        )
    p = Path(path)
    p.write_text("\n".join(lines) + "\n")
    return p


# ---------------------------------------------------------------------------
# physics checklist


@dataclass(frozen=True)
class CheckRow:
    name: str
    measured: float
    expected: float
    tolerance: float
    passed: bool
    note: str = ""


@dataclass(frozen=True)
class PhysicsChecklist:
    rows: tuple[CheckRow, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_text(self) -> str:
        lines = [f"{'check':38s} {'measured':>14s} {'expected':>14s} {'tol':>9s}  ok"]
        for r in self.rows:
            lines.append(
                f"{r.name:38s} {r.measured:14.6g} {r.expected:14.6g} "
                f"{r.tolerance:9.3g}  {'pass' if r.passed else 'FAIL'}"
                + (f"  ({r.note})" if r.note else "")
            )
        return "\n".join(lines)


# canonical scintillation strengths for the three standard levels
_CANONICAL_RYTOV = {1e-15: 0.04, 2.5e-14: 1.0, 1e-13: 4.0}

# dedicated fine grid for the flat-phase charge identities: the waist-plane
# texture spans only a few centimeters, far below the link grids' spacing
_IDENTITY_GRID = SamplingGrid(n_points=512, spacing=0.30 / 512)
_IDENTITY_PAIRS = ((0, 1), (0, -1), (0, 4), (0, -4), (0, 8), (1, 3), (3, 1))


def _relative_check(name, measured, expected, tol, note="") -> CheckRow:
    ok = abs(measured - expected) <= tol * abs(expected)
    return CheckRow(name, float(measured), float(expected), tol, ok, note)


def _absolute_check(name, measured, expected, tol, note="") -> CheckRow:
    ok = abs(measured - expected) <= tol
    return CheckRow(name, float(measured), float(expected), tol, ok, note)


def validate_physics(config: RunConfig, full: bool = False) -> PhysicsChecklist:
    """Health checklist of the physical building blocks for this config.

    Fast rows: geometry consistency, scintillation strengths, waist-plane
    charge identities on a dedicated fine grid, and vacuum charge
    conservation through the configured link for every symbol. ``full``
    adds the slow screen-statistics comparison (hundreds of screens).
    Failures are rows, not exceptions.
    """
    rows = []
    beam = config.beam
    spec = beam.spec()

    z_r = rayleigh_range(beam.w0, beam.wavelength)
    w_l = beam_width(beam.w0, config.link.distance, beam.wavelength)
    rows.append(
        _relative_check(
            "rayleigh-range",
            z_r,
            np.pi * beam.w0**2 / beam.wavelength,
            1e-12,
            "closed form",
        )
    )
    d_rx_needed = 2.0 * w_l * np.sqrt(beam.ell_max + 1.0)
    rows.append(
        _relative_check(
            "aperture-covers-largest-mode",
            config.link.aperture_diameter,
            d_rx_needed,
            0.005,
            f"2 w(L) sqrt(ell_max+1), w(L)={w_l:.4g} m",
        )
    )

    for cn2 in config.levels:
        sigma = rytov_variance(cn2, beam.wavelength, config.link.distance)
        expected = _CANONICAL_RYTOV.get(cn2)
        if expected is None:
            rows.append(
                CheckRow(
                    f"rytov-variance[{cn2!r}]",
                    sigma,
                    sigma,
                    0.0,
                    True,
                    classify_regime(sigma),
                )
            )
        else:
            rows.append(
                _relative_check(
                    f"rytov-variance[{cn2!r}]", sigma, expected, 0.02,
                    classify_regime(sigma),
                )
            )

    for ell0, ell1 in _IDENTITY_PAIRS:
        b = replace(spec, component0=LgIndex(0, ell0), component1=LgIndex(0, ell1))
        fld = synthesize_vector_beam(b, _IDENTITY_GRID)
        norm = normalize_stokes(stokes(fld))
        measured = masked_skyrmion_number(norm)
        rows.append(
            _absolute_check(
                f"charge-identity[{ell0},{ell1}]",
                measured,
                predicted_nsk(ell0, ell1),
                0.01,
            )
        )

    grid = config.grid
    k = spec.k
    for symbol in config.symbols:
        beam_field = synthesize_skm_beam(symbol, spec, grid)
        stack = _propagate_stack(
            np.stack([beam_field.e_r, beam_field.e_l]),
            grid,
            config.link.n_steps,
            config.link.step,
            k,
            None,
        )
        received = VectorField(grid, stack[0], stack[1])
        norm = normalize_stokes(stokes(received), floor=NONZERO_FLOOR)
        measured = masked_skyrmion_number(norm)
        rows.append(
            _absolute_check(
                f"vacuum-conservation[{symbol:+d}]", measured, symbol, 0.05
            )
        )

    if full and max(config.levels) > 0:
        profile = config.profile(max(config.levels))
        # coarse wide window: lags must reach L0/4 with room to spare
        sf_grid = SamplingGrid(n_points=256, spacing=0.08)
        rng = derive_stream(config.base_seed, max(config.levels), 0, 0, "screen")
        phases = np.stack(
            [
                generate_phase_screen(profile, sf_grid, k, rng).phase
                for _ in range(200)
            ]
        )
        max_lag = int(config.L0 / 4.0 / sf_grid.spacing)
        lags = np.unique(np.linspace(4, max_lag, 12).astype(int))
        r_vals, measured_d = empirical_structure_function(phases, sf_grid, lags)
        theory = phase_structure_function(r_vals, profile, k)
        worst = float(np.max(np.abs(measured_d / theory - 1.0)))
        rows.append(
            CheckRow(
                "screen-structure-function",
                worst,
                0.0,
                0.15,
                worst <= 0.15,
                "max relative deviation over 200 screens",
            )
        )

    return PhysicsChecklist(rows=tuple(rows))


# ---------------------------------------------------------------------------
# receiver-plane field dumps


def save_receiver_field(path, field: VectorField) -> Path:
    """Dump both complex components plus the grid parameters to one .npz."""
    p = Path(path)
    np.savez(
        p,
        e_r=field.e_r,
        e_l=field.e_l,
        n_points=field.grid.n_points,
        spacing=field.grid.spacing,
    )
    # numpy appends .npz when absent; report the file actually written
    return p if p.suffix == ".npz" else Path(str(p) + ".npz")


def load_receiver_field(path) -> VectorField:
    with np.load(path) as data:
        grid = SamplingGrid(int(data["n_points"]), float(data["spacing"]))
        return VectorField(grid, data["e_r"], data["e_l"])
