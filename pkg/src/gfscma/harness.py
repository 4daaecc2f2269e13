"""Seeded Monte Carlo driver: frames -> receiver -> scored, aggregated metrics."""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .codebook import Codebook, load_codebook, make_codebook
from .config import ConfigError, SystemConfig, ebn0_to_noise_var
from .frame import Frame, generate_frame
from .pattern import FactorGraphPattern, build_pattern
from .pilots import PilotBook, generate_zc_pilots
from .receivers.baselines import bp_mf_receiver, genie_input, mpa_genie
from .receivers.ep import ReceiverOutput, run_receiver

CSV_COLUMNS = (
    "receiver",
    "snr_db",
    "frames",
    "nmse",
    "ber",
    "ber_stderr",
    "miss_rate",
    "false_alarm_rate",
    "exact_set_rate",
    "mean_iters",
)

#: Iterations of the genie MPA.
GENIE_ITERS = 10


def _run_bpgaep(frame: Frame, callback=None) -> ReceiverOutput:
    return run_receiver(frame.Y, frame.pilots, frame.codebook, frame.pattern, frame.config, callback=callback)


def _run_bpmf(frame: Frame, callback=None) -> ReceiverOutput:
    return bp_mf_receiver(frame.Y, frame.pilots, frame.codebook, frame.pattern, frame.config, callback=callback)


def _run_genie(frame: Frame, callback=None) -> ReceiverOutput:
    return mpa_genie(genie_input(frame), iters=GENIE_ITERS, H=frame.H)


RECEIVERS: dict[str, Callable[..., ReceiverOutput]] = {
    "bpgaep": _run_bpgaep,
    "bpmf": _run_bpmf,
    "genie": _run_genie,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo experiment: a system, an SNR sweep and a receiver."""

    system: SystemConfig = field(default_factory=SystemConfig)
    snr_list_db: tuple[float, ...] = (10.0,)
    trials: int = 100
    receiver: str = "bpgaep"
    seed: int = 0
    out: str | None = None
    diagnostics: bool = False
    codebook: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "snr_list_db", tuple(float(s) for s in self.snr_list_db))
        if not self.snr_list_db:
            raise ConfigError("snr_list_db must not be empty")
        if not all(math.isfinite(s) for s in self.snr_list_db):
            raise ConfigError("SNR values must be finite")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials must be an integer >= 1")
        if self.receiver not in RECEIVERS:
            raise ConfigError(f"unknown receiver {self.receiver!r}; choose from {sorted(RECEIVERS)}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")

    @classmethod
    def from_mapping(cls, doc: dict) -> "ExperimentConfig":
        """Build from a parsed config file.

        System parameters may sit at the top level or under ``system``;
        any other key must be an :class:`ExperimentConfig` field.
        """
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a mapping")
        doc = dict(doc)
        sys_fields = {f.name for f in dataclasses.fields(SystemConfig)}
        exp_fields = {f.name for f in dataclasses.fields(cls)} - {"system"}
        system = dict(doc.pop("system", None) or {})
        exp = {}
        for key, value in doc.items():
            if key in sys_fields:
                system[key] = value
            elif key in exp_fields:
                exp[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        unknown = set(system) - sys_fields
        if unknown:
            raise ConfigError(f"unknown system keys {sorted(unknown)}")
        if "pdp" in system and system["pdp"] is not None:
            system["pdp"] = tuple(system["pdp"])
        if "snr_list_db" in exp:
            snr = exp["snr_list_db"]
            exp["snr_list_db"] = tuple(snr) if isinstance(snr, (list, tuple)) else (snr,)
        try:
            return cls(system=SystemConfig(**system), **exp)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class FrameScore:
    """Scores of one frame; ``nmse_num``/``nmse_den`` are energies over active users."""

    bit_errors: int
    bits: int
    nmse_num: float
    nmse_den: float
    miss: int
    false_alarm: int
    exact: bool
    n_active: int
    iterations: int


@dataclass(frozen=True)
class MetricsRecord:
    """Aggregated metrics of one (receiver, SNR) point."""

    receiver: str
    snr_db: float
    frames: int
    nmse: float
    ber: float
    ber_stderr: float
    activity_miss: int
    activity_false_alarm: int
    exact_set_recovery: float
    mean_iterations: float
    bit_errors: int = 0
    bits: int = 0
    active_users: int = 0
    inactive_users: int = 0

    @property
    def miss_rate(self) -> float:
        return self.activity_miss / self.active_users if self.active_users else 0.0

    @property
    def false_alarm_rate(self) -> float:
        return self.activity_false_alarm / self.inactive_users if self.inactive_users else 0.0

    def row(self) -> list:
        return [
            self.receiver,
            self.snr_db,
            self.frames,
            self.nmse,
            self.ber,
            self.ber_stderr,
            self.miss_rate,
            self.false_alarm_rate,
            self.exact_set_recovery,
            self.mean_iterations,
        ]


def score_activity(detected, truth) -> tuple[int, int, bool]:
    """``(misses, false alarms, exact recovery)`` of a detected active set."""
    detected = np.asarray(detected, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if detected.shape != truth.shape:
        raise ValueError("detected and truth flags differ in length")
    miss = int(np.sum(truth & ~detected))
    fa = int(np.sum(detected & ~truth))
    return miss, fa, miss == 0 and fa == 0


def score_frame(frame: Frame, out: ReceiverOutput, genie: bool = False) -> FrameScore:
    """Score one receiver output against the frame's ground truth.

    Bits of missed users all count as errors; false alarms add no bits.
    The genie's NMSE is 0 by construction.
    """
    truth = frame.active
    miss, fa, exact = score_activity(out.active, truth)
    a = truth
    if a.any():
        sent = frame.bits[:, :, a]
        est = np.where(out.active[a][None, None, :, None], out.bits[:, :, a], 1 - sent)
        errors = int(np.sum(est != sent))
        nbits = int(sent.size)
        den = float(np.sum(np.abs(frame.H[a]) ** 2))
        num = 0.0 if genie else float(np.sum(np.abs(out.h_hat[a] - frame.H[a]) ** 2))
    else:
        errors = nbits = 0
        num = den = 0.0
    return FrameScore(errors, nbits, num, den, miss, fa, exact, int(a.sum()), int(out.iterations))


def aggregate(receiver: str, snr_db: float, scores: list[FrameScore], K: int) -> MetricsRecord:
    """Exact reduction of frame scores (frames without active users skip BER and NMSE)."""
    n = len(scores)
    errors = sum(s.bit_errors for s in scores)
    bits = sum(s.bits for s in scores)
    ber = errors / bits if bits else 0.0
    stderr = math.sqrt(ber * (1.0 - ber) / bits) if bits else 0.0
    den = sum(s.nmse_den for s in scores)
    nmse = sum(s.nmse_num for s in scores) / den if den > 0 else 0.0
    n_act = sum(s.n_active for s in scores)
    return MetricsRecord(
        receiver=receiver,
        snr_db=float(snr_db),
        frames=n,
        nmse=nmse,
        ber=ber,
        ber_stderr=stderr,
        activity_miss=sum(s.miss for s in scores),
        activity_false_alarm=sum(s.false_alarm for s in scores),
        exact_set_recovery=sum(s.exact for s in scores) / n if n else 0.0,
        mean_iterations=sum(s.iterations for s in scores) / n if n else 0.0,
        bit_errors=errors,
        bits=bits,
        active_users=n_act,
        inactive_users=n * K - n_act,
    )


@dataclass
class Setup:
    """Pattern, codebook and pilots shared by every frame of an experiment."""

    pattern: FactorGraphPattern
    codebook: Codebook
    pilots: PilotBook

    @classmethod
    def build(cls, system: SystemConfig, codebook: str | None = None) -> "Setup":
        pattern = build_pattern(system)
        if codebook is not None:
            cb = load_codebook(codebook, pattern)
        elif (system.K, system.N, system.M) == (48, 24, 4):
            cb = load_codebook(None, pattern)
        else:
            cb = make_codebook(pattern, system.M)
        return cls(pattern, cb, generate_zc_pilots(system, pattern))


def frame_rng(seed: int, frame: int) -> np.random.Generator:
    """Independent stream of frame ``frame``: PCG64 seeded by ``SeedSequence(seed, spawn_key=(frame,))``.

    The stream does not depend on the SNR or the receiver, so every sweep
    point sees the same activity, channels, data and unit-scale noise.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(frame,)))


def simulate_frames(cfg: ExperimentConfig, snr_db: float, setup: Setup | None = None) -> Iterable[Frame]:
    system = cfg.system.replace(noise_var=ebn0_to_noise_var(snr_db, cfg.system.M))
    setup = setup or Setup.build(system, cfg.codebook)
    for f in range(cfg.trials):
        yield generate_frame(system, setup.pattern, setup.codebook, setup.pilots, frame_rng(cfg.seed, f))


def run_experiment(cfg: ExperimentConfig, diagnostics: list | None = None) -> list[MetricsRecord]:
    """Run every SNR point of ``cfg``; returns one record per point in sweep order.

    When ``diagnostics`` is a list, per-iteration rows
    ``(receiver, snr_db, frame, iteration, nmse, powers)`` are appended to it.
    """
    setup = Setup.build(cfg.system, cfg.codebook)
    runner = RECEIVERS[cfg.receiver]
    genie = cfg.receiver == "genie"
    records = []
    for snr in cfg.snr_list_db:
        scores = []
        for f, frame in enumerate(simulate_frames(cfg, snr, setup)):
            cb = None
            if diagnostics is not None and not genie:
                cb = _diagnostic_hook(diagnostics, cfg.receiver, snr, f, frame)
            out = runner(frame, callback=cb)
            scores.append(score_frame(frame, out, genie=genie))
        records.append(aggregate(cfg.receiver, snr, scores, cfg.system.K))
    return records


def _diagnostic_hook(rows: list, receiver: str, snr: float, f: int, frame: Frame):
    a = frame.active
    den = float(np.sum(np.abs(frame.H[a]) ** 2))

    def hook(state, problem):
        num = float(np.sum(np.abs(state.h_belief.mean[a] - frame.H[a]) ** 2))
        power = np.sum(1.0 / state.tau_lambda, axis=-1)
        rows.append((receiver, snr, f, state.iteration, num / den if den > 0 else 0.0, power))

    return hook


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def emit_csv(records: Iterable[MetricsRecord], path) -> None:
    """Write the header and one row per record; floats at 10 significant digits.

    ``path`` may also be an open text stream.
    """
    if hasattr(path, "write"):
        _write_rows(path, records)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(fh, records)


def _write_rows(fh, records) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([_fmt(v) for v in r.row()])


def emit_diagnostics(rows: list, path, K: int) -> None:
    """Per-iteration NMSE and per-user estimated channel power."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["receiver", "snr_db", "frame", "iteration", "nmse"] + [f"power_{k}" for k in range(K)])
        for receiver, snr, f, it, nmse, power in rows:
            w.writerow([receiver, _fmt(float(snr)), f, it, _fmt(nmse)] + [_fmt(float(p)) for p in power])


def read_csv(path) -> list[dict]:
    """Parse an emitted metrics file back into typed rows."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            typed = {}
            for k, v in row.items():
                if k == "receiver":
                    typed[k] = v
                elif k == "frames":
                    typed[k] = int(v)
                else:
                    typed[k] = float(v)
            out.append(typed)
    return out
