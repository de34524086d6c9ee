"""Run configuration: turns a resolved manifest into typed objects.

A manifest is YAML with one section per concern::

    seed: 0
    model: ladder.yaml          # or an inline mapping
    excitation: excitation.yaml
    noise: {snr_db: 60}
    protocol: staircase.yaml     # type: staircase | joint
    train: {max_epochs: 300}     # overrides of the protocol's recipe
    sweep: {f_min: 1k, f_max: 1M, points: 61}
    identify: {tol: null}
    lsq: {param: auto, stride: 1}  # rc | strain | none; auto = rc when noiseless

Sections given as file names are resolved relative to the manifest. The
top-level ``seed`` feeds the noise, protocol and training seeds unless a
section sets its own.
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .harness import JointScenarioSpec, StaircaseSpec
from .io import ConfigError, load_manifest
from .ladder import LadderModel, garment_ladder, paper_ladder
from .reconstruction.mlp import JOINT_ARCH, JOINT_TRAIN, STRAIN_ARCH, STRAIN_TRAIN, Architecture, TrainConfig
from .signal_chain import ExcitationConfig, NoiseConfig, paper_excitation
from .units import parse_eng

PRESETS = {"paper": paper_ladder, "garment": garment_ladder}


def build_model(d):
    if d is None:
        return paper_ladder()
    if "preset" in d:
        kw = {k: v for k, v in d.items() if k != "preset"}
        try:
            factory = PRESETS[d["preset"]]
        except KeyError:
            raise ConfigError(f"unknown model preset {d['preset']!r}") from None
        if "lengths" in kw:
            kw["lengths"] = tuple(parse_eng(x) for x in kw["lengths"])
        for k in ("gf_c", "gf_r", "sensitive_gf", "insensitive_gf"):
            if k in kw:
                kw[k] = parse_eng(kw[k])
        return factory(**kw)
    if "segments" not in d:
        raise ConfigError("model needs either 'preset' or 'segments'")
    return LadderModel.from_dict(d)


def build_protocol(d, seed):
    if d is None:
        return None
    kind = d.get("type", "staircase")
    body = {k: v for k, v in d.items() if k != "type"}
    for k in ("step", "ramp_rate", "max_strain", "prestrain", "peak_strain", "crosstalk"):
        if k in body:
            body[k] = parse_eng(body[k])
    if kind == "staircase":
        return StaircaseSpec.from_dict(body)
    if kind == "joint":
        body.setdefault("seed", seed)
        return JointScenarioSpec.from_dict(body)
    raise ConfigError(f"unknown protocol type {kind!r}")


@dataclass
class SweepSettings:
    f_min: float = 1e3
    f_max: float = 1e6
    points: int = 61
    levels: tuple = (0.1, 0.2, 0.3, 0.4)
    cases: list = field(default_factory=list)  # [{"name": str, "strains": [...]}, ...]

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        out = cls(
            f_min=parse_eng(d.get("f_min", 1e3)),
            f_max=parse_eng(d.get("f_max", 1e6)),
            points=int(d.get("points", 61)),
            levels=tuple(parse_eng(x) for x in d.get("levels", (0.1, 0.2, 0.3, 0.4))),
            cases=[{"name": str(c["name"]), "strains": [parse_eng(x) for x in c["strains"]]}
                   for c in d.get("cases", [])],
        )
        if not 0 < out.f_min < out.f_max or out.points < 2:
            raise ConfigError("sweep needs 0 < f_min < f_max and at least 2 points")
        return out

    def grid(self):
        return np.geomspace(self.f_min, self.f_max, self.points)

    def resolved_cases(self, model):
        """Configured cases, or rest plus every segment alone at every level."""
        if self.cases:
            for c in self.cases:
                if len(c["strains"]) != model.n:
                    raise ConfigError(f"case {c['name']!r} needs {model.n} strains")
            return self.cases
        cases = [{"name": "rest", "strains": [0.0] * model.n}]
        for i, label in enumerate(model.labels):
            for lv in self.levels:
                eps = [0.0] * model.n
                eps[i] = lv
                cases.append({"name": f"{label}_{round(lv * 100):02d}", "strains": eps})
        return cases

    def to_dict(self):
        return {"f_min": self.f_min, "f_max": self.f_max, "points": self.points,
                "levels": list(self.levels), "cases": self.cases}


@dataclass
class RunConfig:
    seed: int
    model: LadderModel
    excitation: ExcitationConfig
    noise: NoiseConfig
    protocol: object  # StaircaseSpec, JointScenarioSpec or None
    train: TrainConfig
    arch: Architecture
    method: str = "waveform"
    sweep: SweepSettings = field(default_factory=SweepSettings)
    tol: float = None
    name: str = ""
    lsq: dict = field(default_factory=lambda: {"param": "auto", "stride": 1})

    @property
    def kind(self):
        if isinstance(self.protocol, JointScenarioSpec):
            return "joint"
        if isinstance(self.protocol, StaircaseSpec):
            return "strain"
        return None

    def to_manifest(self):
        """Fully inlined manifest that rebuilds this exact configuration."""
        return {
            "name": self.name,
            "seed": self.seed,
            "method": self.method,
            "model": self.model.to_dict(),
            "excitation": self.excitation.to_dict(),
            "noise": self.noise.to_dict(),
            "protocol": None if self.protocol is None else self.protocol.to_dict(),
            "train": {**self.train.to_dict(), "arch": self.arch.to_dict()},
            "sweep": self.sweep.to_dict(),
            "identify": {"tol": self.tol},
            "lsq": dict(self.lsq),
        }


def build_run_config(raw, seed=None):
    """``raw`` is a resolved manifest mapping; ``seed`` overrides every seed."""
    if not isinstance(raw, dict):
        raise ConfigError("manifest must be a mapping")
    try:
        base = int(raw.get("seed", 0) if seed is None else seed)
        model = build_model(raw.get("model"))
        exc = paper_excitation() if raw.get("excitation") is None else ExcitationConfig.from_dict(raw["excitation"])
        noise_d = dict(raw.get("noise") or {})
        if seed is not None or "seed" not in noise_d:
            noise_d["seed"] = base
        noise = NoiseConfig.from_dict(noise_d)
        proto_d = raw.get("protocol")
        if proto_d is not None and seed is not None:
            proto_d = {**proto_d, "seed": base} if proto_d.get("type") == "joint" else proto_d
        protocol = build_protocol(proto_d, base)
        joint = isinstance(protocol, JointScenarioSpec)
        train_d = dict(raw.get("train") or {})
        arch_d = train_d.pop("arch", None)
        recipe = JOINT_TRAIN if joint else STRAIN_TRAIN
        if seed is not None or "seed" not in train_d:
            train_d["seed"] = base
        if "lr" in train_d:
            train_d["lr"] = parse_eng(train_d["lr"])
        if "output_weights" in train_d:
            train_d["output_weights"] = tuple(float(x) for x in train_d["output_weights"])
        train = dataclasses.replace(recipe, **train_d)
        arch = Architecture.from_dict(arch_d) if arch_d else (JOINT_ARCH if joint else STRAIN_ARCH)
        method = str(raw.get("method", "waveform"))
        if method not in ("waveform", "analytic"):
            raise ConfigError(f"unknown synthesis method {method!r}")
        tol = (raw.get("identify") or {}).get("tol")
        lsq = {"param": "auto", "stride": 1, **(raw.get("lsq") or {})}
        if lsq["param"] not in ("auto", "rc", "strain", "none") or int(lsq["stride"]) < 1:
            raise ConfigError(f"invalid lsq section {lsq!r}")
        lsq = {"param": str(lsq["param"]), "stride": int(lsq["stride"])}
        return RunConfig(
            seed=base, model=model, excitation=exc, noise=noise, protocol=protocol,
            train=train, arch=arch, method=method,
            sweep=SweepSettings.from_dict(raw.get("sweep")),
            tol=None if tol is None else parse_eng(tol), name=str(raw.get("name", "")),
            lsq=lsq,
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def load_run_config(path, seed=None):
    return build_run_config(load_manifest(path), seed)
