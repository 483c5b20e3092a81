"""Run configs, single fits with manifests, and parameter sweeps.

A run config is a JSON object::

    {"version": 1,
     "signal": {"builtin": "checker_gradient", "size": 64},
     "activation": {"kind": "hosc", "beta": 14, "omega0": 30},
     "net": {"hidden_layers": 3, "width": 128},
     "train": {"epochs": 1500}}

Unknown keys are rejected. Every artifact of a run lives in a directory
named after the hash of the resolved config, under the output root.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from . import __version__
from .activations import Activation, Kind
from .codecs import read_image, read_wav, write_image, write_wav
from .network import FourierEncoder, NetConfig, init_net, save_checkpoint
from .optimize import DivergenceError, TrainConfig, default_lr, train
from .signals import (
    SignalDataset,
    audio_to_dataset,
    checker_gradient,
    checkerboard,
    format_psnr,
    image_to_dataset,
    multitone,
    reconstruct,
)

SCHEMA_VERSION = 1
OUTPUT_ENV = "HOSC_OUTPUT_ROOT"
DEFAULT_OUTPUT = "hosc-runs"
MANIFEST_FORMAT = "hosc-manifest"

EXIT_OK, EXIT_ERROR, EXIT_DIVERGED = 0, 1, 2


class ConfigError(ValueError):
    pass


def output_root(override=None) -> Path:
    if override is not None:
        return Path(override)
    return Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT))


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode()).hexdigest()


# -- strict config resolution -------------------------------------------------


def _check_keys(section: str, d, allowed, required=()):
    if not isinstance(d, dict):
        raise ConfigError(f"{section}: expected an object, got {type(d).__name__}")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"{section}: unknown key(s) {', '.join(unknown)}")
    missing = [k for k in required if k not in d]
    if missing:
        raise ConfigError(f"{section}: missing key(s) {', '.join(missing)}")


def _number(section, key, v, positive=True):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{section}.{key}: expected a finite number, got {v!r}")
    if positive and v <= 0:
        raise ConfigError(f"{section}.{key}: must be positive, got {v!r}")
    return float(v)


def _integer(section, key, v, minimum=0):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{section}.{key}: expected an integer, got {v!r}")
    if v < minimum:
        raise ConfigError(f"{section}.{key}: must be >= {minimum}, got {v}")
    return v


_BUILTINS = {
    "checkerboard": {"size": 64, "squares": 8},
    "checker_gradient": {"size": 64},
    "multitone": {"sample_rate": 16000, "duration": 1.0, "freqs": [200.0, 900.0, 3700.0]},
}
_IMAGE_SUFFIXES = {".ppm", ".pgm", ".pnm"}


def _resolve_signal(d, base_dir: Path) -> dict:
    if not isinstance(d, dict) or ("builtin" in d) == ("path" in d):
        raise ConfigError("signal: give exactly one of 'builtin' or 'path'")
    if "path" in d:
        _check_keys("signal", d, ["path"])
        if not isinstance(d["path"], str) or not d["path"]:
            raise ConfigError("signal.path: expected a non-empty string")
        p = Path(d["path"])
        if not p.is_absolute():
            p = base_dir / p
        if p.suffix.lower() not in _IMAGE_SUFFIXES | {".wav"}:
            raise ConfigError(f"signal.path: unsupported file type {p.suffix!r} (use .ppm, .pgm or .wav)")
        return {"path": str(p.resolve())}
    name = d["builtin"]
    if name not in _BUILTINS:
        raise ConfigError(f"signal.builtin: unknown signal {name!r}; choose from {', '.join(_BUILTINS)}")
    defaults = _BUILTINS[name]
    _check_keys("signal", d, ["builtin", *defaults])
    out = {"builtin": name}
    for key, dv in defaults.items():
        v = d.get(key, dv)
        if key == "freqs":
            if not isinstance(v, list) or not v:
                raise ConfigError("signal.freqs: expected a non-empty list")
            out[key] = [_number("signal", "freqs", f) for f in v]
        elif key == "duration":
            out[key] = _number("signal", key, v)
        else:
            out[key] = _integer("signal", key, v, minimum=2 if key == "size" else 1)
    return out


def _resolve_activation(d) -> dict:
    names = [f.name for f in fields(Activation)]
    _check_keys("activation", d, names, required=["kind"])
    try:
        kind = Kind(d["kind"])
    except ValueError:
        raise ConfigError(f"activation.kind: unknown kind {d['kind']!r}") from None
    kw = {k: _number("activation", k, v, positive=k != "finer_bias_range") for k, v in d.items() if k != "kind"}
    try:
        return Activation(kind, **kw).to_dict()
    except ValueError as exc:
        raise ConfigError(f"activation: {exc}") from None


_NET_DEFAULTS = {"hidden_layers": 3, "width": 256, "output_linear": True, "fourier_frequencies": 0, "init_seed": 0}
_TRAIN_DEFAULTS = {"epochs": 1000, "lr": None, "log_every": 10, "seed": 0}


def _resolve_net(d) -> dict:
    _check_keys("net", d, _NET_DEFAULTS)
    out = dict(_NET_DEFAULTS, **d)
    if not isinstance(out["output_linear"], bool):
        raise ConfigError("net.output_linear: expected true or false")
    for k in ("hidden_layers", "width"):
        _integer("net", k, out[k], minimum=1)
    _integer("net", "fourier_frequencies", out["fourier_frequencies"])
    _integer("net", "init_seed", out["init_seed"])
    return out


def _resolve_train(d, act: Activation, encoded: bool) -> dict:
    _check_keys("train", d, _TRAIN_DEFAULTS)
    out = dict(_TRAIN_DEFAULTS, **d)
    _integer("train", "epochs", out["epochs"], minimum=1)
    _integer("train", "log_every", out["log_every"], minimum=1)
    _integer("train", "seed", out["seed"])
    out["lr"] = default_lr(act, encoded) if out["lr"] is None else _number("train", "lr", out["lr"])
    return out


def resolve_config(raw, base_dir=".") -> dict:
    """Validate a run config and fill in every default, giving the canonical
    form that is hashed and stored in the manifest."""
    _check_keys("config", raw, ["version", "signal", "activation", "net", "train"], required=["version", "signal", "activation"])
    if raw["version"] != SCHEMA_VERSION:
        raise ConfigError(f"config.version: unsupported schema version {raw['version']!r}, expected {SCHEMA_VERSION}")
    act = _resolve_activation(raw["activation"])
    net = _resolve_net(raw.get("net", {}))
    tr = _resolve_train(raw.get("train", {}), Activation.from_dict(act), net["fourier_frequencies"] > 0)
    return {
        "version": SCHEMA_VERSION,
        "signal": _resolve_signal(raw["signal"], Path(base_dir)),
        "activation": act,
        "net": net,
        "train": tr,
    }


def load_run_input(path) -> dict:
    """Read a run config, or the config snapshot of a manifest, from JSON."""
    path = Path(path)
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if isinstance(raw, dict) and raw.get("format") == MANIFEST_FORMAT:
        return resolve_config(raw["config"], path.parent)
    return resolve_config(raw, path.parent)


# -- signals -----------------------------------------------------------------


def load_signal(sig: dict) -> SignalDataset:
    if "path" in sig:
        p = Path(sig["path"])
        if p.suffix.lower() == ".wav":
            return audio_to_dataset(read_wav(p))
        return image_to_dataset(read_image(p))
    name = sig["builtin"]
    if name == "checkerboard":
        return image_to_dataset(checkerboard(sig["size"], sig["squares"]))
    if name == "checker_gradient":
        return image_to_dataset(checker_gradient(sig["size"]))
    return audio_to_dataset(multitone(sig["sample_rate"], sig["duration"], tuple(sig["freqs"])))


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# -- single fit --------------------------------------------------------------


@dataclass
class FitResult:
    manifest: dict
    run_dir: Path

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.manifest["outcome"]["status"] == "completed" else EXIT_DIVERGED


def run_dir_for(cfg: dict, root=None) -> Path:
    return output_root(root) / f"run-{config_hash(cfg)[:16]}"


def _write_trace(path: Path, trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["epoch", "mse", "psnr_db"])
        w.writeheader()
        for rec in trace:
            w.writerow(rec.as_row())


def read_trace(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{"epoch": int(r["epoch"]), "mse": float(r["mse"]), "psnr_db": float(r["psnr_db"])} for r in csv.DictReader(fh)]


def _metric_json(rec) -> dict:
    return {"epoch": rec.epoch, "mse": rec.mse, "psnr_db": format_psnr(rec.psnr_db)}


def run_fit(cfg: dict, root=None, verbose=None) -> FitResult:
    """Train one resolved config and write its artifacts. Divergence is a
    recorded outcome, not an exception."""
    data = load_signal(cfg["signal"])
    net_cfg = dict(cfg["net"])
    nf = net_cfg.pop("fourier_frequencies")
    net = init_net(
        NetConfig(
            data.coords.shape[1],
            data.targets.shape[1],
            Activation.from_dict(cfg["activation"]),
            encoder=FourierEncoder(nf) if nf else None,
            **net_cfg,
        )
    )
    tc = cfg["train"]
    run_dir = run_dir_for(cfg, root)
    run_dir.mkdir(parents=True, exist_ok=True)

    outcome = {"status": "completed", "epoch": None}
    final = best = None
    try:
        run = train(net, data, TrainConfig(tc["epochs"], tc["lr"], log_every=tc["log_every"], seed=tc["seed"]), on_log=verbose)
        trace = run.trace
        final = _metric_json(run.final)
        best = run.best_loss / 4.0
    except DivergenceError as exc:
        outcome = {"status": "diverged", "epoch": exc.epoch}
        trace = exc.trace

    _write_trace(run_dir / "trace.csv", trace)
    artifacts = {"trace": "trace.csv"}
    if final is not None:
        out = reconstruct(net, data)
        if hasattr(out, "sample_rate"):
            artifacts["reconstruction"] = "reconstruction.wav"
            write_wav(run_dir / artifacts["reconstruction"], out)
        else:
            artifacts["reconstruction"] = "reconstruction.ppm" if out.channels == 3 else "reconstruction.pgm"
            write_image(run_dir / artifacts["reconstruction"], out)
        artifacts["checkpoint"] = "checkpoint.npz"
        save_checkpoint(net, run_dir / artifacts["checkpoint"])

    manifest = {
        "format": MANIFEST_FORMAT,
        "version": SCHEMA_VERSION,
        "code_version": __version__,
        "config_hash": config_hash(cfg),
        "config": cfg,
        "input_sha256": _file_digest(cfg["signal"]["path"]) if "path" in cfg["signal"] else None,
        "outcome": outcome,
        "final": final,
        "best_mse": best,
        "artifacts": artifacts,
    }
    with open(run_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return FitResult(manifest, run_dir)


# -- sweeps ------------------------------------------------------------------

AXES = ("activation", "omega0", "beta")


class SweepAborted(RuntimeError):
    def __init__(self, partial: Path, cause: BaseException):
        super().__init__(f"sweep aborted ({cause}); partial results in {partial}")
        self.partial = partial
        self.cause = cause


@dataclass
class SweepPoint:
    activation: str
    omega0: float
    beta: float
    seed: int
    config: dict


@dataclass(frozen=True)
class SweepRow:
    row: str  # "run" or "aggregate"
    activation: str
    omega0: float
    beta: float
    seed: int | None
    runs: int
    mse: float | None
    mse_std: float | None
    psnr_db: float | None
    psnr_std: float | None
    outcome: str
    diverged_epoch: int | None = None
    run_id: str | None = None


SWEEP_COLUMNS = [f.name for f in fields(SweepRow)]
_INT_COLS = {"seed", "runs", "diverged_epoch"}
_FLOAT_COLS = {"omega0", "beta", "mse", "mse_std", "psnr_db", "psnr_std"}


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format_psnr(v)
    return str(v)


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([_cell(getattr(r, c)) for c in SWEEP_COLUMNS])


def read_sweep_csv(path) -> list[SweepRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            kw = {}
            for c in SWEEP_COLUMNS:
                s = rec[c]
                if s == "":
                    kw[c] = None
                elif c in _INT_COLS:
                    kw[c] = int(s)
                elif c in _FLOAT_COLS:
                    kw[c] = float(s)
                else:
                    kw[c] = s
            rows.append(SweepRow(**kw))
    return rows


def resolve_sweep(raw, base_dir=".") -> dict:
    _check_keys("sweep", raw, ["version", "base", "axis", "seeds", "workers"], required=["version", "base", "axis"])
    if raw["version"] != SCHEMA_VERSION:
        raise ConfigError(f"sweep.version: unsupported schema version {raw['version']!r}")
    axis = raw["axis"]
    _check_keys("sweep.axis", axis, AXES)
    if not axis:
        raise ConfigError("sweep.axis: at least one axis is required")
    for name, values in axis.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep.axis.{name}: expected a non-empty list")
    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("sweep.seeds: expected a non-empty list")
    seeds = [_integer("sweep", "seeds", s) for s in seeds]
    workers = _integer("sweep", "workers", raw.get("workers", 1), minimum=1)
    base = resolve_config(raw["base"], base_dir)
    return {"version": SCHEMA_VERSION, "base": base, "axis": {k: list(axis[k]) for k in AXES if k in axis}, "seeds": seeds, "workers": workers}


def enumerate_sweep(spec: dict, base_dir=".") -> list[SweepPoint]:
    """Cross product in axis order activation, omega0, beta, with seeds
    varying fastest."""
    base = spec["base"]
    axis = spec["axis"]
    points = []
    for kind in axis.get("activation", [base["activation"]["kind"]]):
        for om in axis.get("omega0", [base["activation"]["omega0"]]):
            for beta in axis.get("beta", [base["activation"]["beta"]]):
                for seed in spec["seeds"]:
                    raw = json.loads(json.dumps(base))
                    raw["activation"].update(kind=kind, omega0=om, beta=beta)
                    raw["net"]["init_seed"] = seed
                    raw["train"]["seed"] = seed
                    cfg = resolve_config(raw, base_dir)
                    a = cfg["activation"]
                    points.append(SweepPoint(a["kind"], a["omega0"], a["beta"], seed, cfg))
    return points


def _row_for(point: SweepPoint, manifest: dict) -> SweepRow:
    fin = manifest["final"]
    out = manifest["outcome"]
    return SweepRow(
        "run", point.activation, point.omega0, point.beta, point.seed, 1,
        fin["mse"] if fin else None, None,
        float(fin["psnr_db"]) if fin else None, None,
        out["status"], out["epoch"], manifest["config_hash"][:16],
    )


def _std(v):
    return statistics.stdev(v) if len(v) >= 2 else None


def aggregate_rows(rows: list[SweepRow]) -> list[SweepRow]:
    """Mean and sample std (ddof=1) over the completed seeds of each config."""
    groups: dict[tuple, list[SweepRow]] = {}
    for r in rows:
        groups.setdefault((r.activation, r.omega0, r.beta), []).append(r)
    out = []
    for (kind, om, beta), rs in groups.items():
        done = [r for r in rs if r.outcome == "completed"]
        mses = [r.mse for r in done]
        psnrs = [r.psnr_db for r in done]
        if len(done) == len(rs):
            status = "completed"
        else:
            status = "diverged" if not done else "partial"
        finite = all(math.isfinite(p) for p in psnrs)
        out.append(
            SweepRow(
                "aggregate", kind, om, beta, None, len(done),
                statistics.fmean(mses) if mses else None, _std(mses),
                (statistics.fmean(psnrs) if finite else math.inf) if psnrs else None,
                _std(psnrs) if finite else None,
                status,
            )
        )
    return out


def _child(args):
    cfg, root = args
    return run_fit(cfg, root).manifest


def run_sweep(spec: dict, root=None, base_dir=".", on_row=None) -> tuple[Path, list[SweepRow]]:
    """Run every sweep point and write ``results.csv``. Rows appear in sweep
    order whatever the completion order; aggregates follow the run rows."""
    points = enumerate_sweep(spec, base_dir)
    out_dir = output_root(root) / f"sweep-{config_hash(spec)[:16]}"
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "results.csv"
    with open(out_dir / "spec.json", "w") as fh:
        json.dump(spec, fh, indent=2, sort_keys=True)
        fh.write("\n")

    rows: list[SweepRow] = []
    jobs = [(p.config, root) for p in points]
    try:
        if spec["workers"] > 1:
            with ProcessPoolExecutor(spec["workers"]) as pool:
                for p, m in zip(points, pool.map(_child, jobs)):
                    rows.append(_row_for(p, m))
                    if on_row:
                        on_row(rows[-1])
        else:
            for p, job in zip(points, jobs):
                rows.append(_row_for(p, _child(job)))
                if on_row:
                    on_row(rows[-1])
    except Exception as exc:
        write_sweep_csv(csv_path, rows + aggregate_rows(rows))
        raise SweepAborted(csv_path, exc) from exc
    rows = rows + aggregate_rows(rows)
    write_sweep_csv(csv_path, rows)
    return csv_path, rows


def load_sweep_input(path) -> dict:
    path = Path(path)
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return resolve_sweep(raw, path.parent)
