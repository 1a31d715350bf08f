"""
Configuration for vcrx
Process settings come from the environment (optionally a .env file); run
settings come from a JSON document layered over a named preset.
"""

import copy
import hashlib
import json
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Tuple

from dotenv import load_dotenv

from .errors import ConfigError
from .galois_field import field_for_order
from .sources import EveMode, FadingConfig, RaConfig, RaSourceConfig
from .vpq import VpqConfig

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
SEED_LIMIT = 2 ** 64
SOURCE_KINDS = ("fading", "ramap")

_FADING_DEFAULTS = {
    "p_dbm": 0.0, "n1_dbm": -20.0, "n2_dbm": -20.0, "n3_dbm": 0.0, "dim": 8,
    "eve_mode": "absent", "batch": 262144,
}
_RAMAP_DEFAULTS = {
    "delta_f": 120e3, "n_sc": 3300, "n_ifft": 4096, "n_beams": 64, "sector": [-45.0, 45.0],
    "array_elems": 16, "n_range_bins": 256, "snr_db": 10.0, "rcs_dbsm_range": [-10.0, 10.0],
    "range_m": [5.0, 75.0], "n_clutter": 2, "clutter_gain_db": [-20.0, -6.0],
    "eve_delta_d": 10.0, "eve_delta_theta": 15.0, "eve_mode": "absent", "batch": 1024,
}
_EVAL_DEFAULTS = {"test_size": 81920, "trials": 10000, "rs_m": [1, 3, 5, 7, 9, 11, 13], "chunk": 8192}

PRESETS: Dict[str, Dict[str, Any]] = {
    "desk": {
        "vpq": {
            "q": 16, "lambda1": None, "lambda2": "adaptive", "delta": 1e-7, "alpha": 0.6,
            "steps_max": 20000, "steps_predictor_only": 2000, "batch_size": 512, "shared_encoder": True,
            "lr": 1e-4, "weight_decay": 0.0, "optimizer": "adam", "encoder_hidden": [256, 256, 256],
            "predictor_hidden": [512, 512, 512, 512], "use_batchnorm": True, "log_every": 500,
        },
        "eval": dict(_EVAL_DEFAULTS),
    },
    "paper": {
        "vpq": {
            "q": 16, "lambda1": None, "lambda2": "adaptive", "delta": 1e-7, "alpha": 0.6,
            "steps_max": 60000, "steps_predictor_only": 10000, "batch_size": 2048, "shared_encoder": True,
            "lr": 3e-5, "weight_decay": 0.0, "optimizer": "adam", "encoder_hidden": [1024] * 4,
            "predictor_hidden": [2048] * 8, "use_batchnorm": True, "log_every": 500,
        },
        "eval": dict(_EVAL_DEFAULTS),
    },
}


################### process settings ###################

@dataclass(frozen=True)
class Settings:
    threads: int = 1
    log_level: str = "INFO"
    progress: bool = False


def get_settings() -> Settings:
    """Read VCRX_* variables, loading a .env file first when present."""
    load_dotenv()
    try:
        threads = int(os.getenv('VCRX_THREADS', '1'))
    except ValueError as e:
        raise ConfigError(f"must be an integer: {e}", key="VCRX_THREADS") from e
    if threads < 1:
        raise ConfigError("must be at least 1", key="VCRX_THREADS")
    return Settings(
        threads=threads,
        log_level=os.getenv('VCRX_LOG_LEVEL', 'INFO').upper(),
        progress=os.getenv('VCRX_PROGRESS', 'false').lower() in ('1', 'true', 'yes'),
    )


def setup_logging(level: Optional[str] = None) -> None:
    """Configure the root logger once for command-line use."""
    level_name = (level or get_settings().log_level).upper()
    logging.basicConfig(level=getattr(logging, level_name, logging.INFO), format=LOG_FORMAT, force=True)


################### run configuration ###################

def _merge_strict(defaults: Mapping[str, Any], given: Mapping[str, Any], path: str) -> Dict[str, Any]:
    if not isinstance(given, Mapping):
        raise ConfigError("expected an object", key=path)
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError("unknown key", key=f"{path}.{unknown[0]}" if path else unknown[0])
    merged = copy.deepcopy(dict(defaults))
    merged.update(copy.deepcopy(dict(given)))
    return merged


def _default_lambda1(vpq: Mapping[str, Any], eve_mode: str) -> float:
    """4.0 for the 128-symbol alphabet against a correlated eavesdropper, else 1.0."""
    return 4.0 if vpq["q"] == 128 and eve_mode == EveMode.CORRELATED.value else 1.0


@dataclass(frozen=True)
class RunConfig:
    preset: str
    seed: int
    source_kind: str
    source: Dict[str, Any]
    vpq: Dict[str, Any]
    eval: Dict[str, Any]

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "RunConfig":
        """Resolve a config document against its preset.

        Raises:
            ConfigError: On unknown keys, a missing seed or an invalid value
        """
        if not isinstance(doc, Mapping):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(doc) - {"preset", "seed", "source", "vpq", "eval"})
        if unknown:
            raise ConfigError("unknown key", key=unknown[0])
        preset = doc.get("preset", "desk")
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}, expected one of {sorted(PRESETS)}", key="preset")
        if "seed" not in doc:
            raise ConfigError("seed is required", key="seed")
        seed = doc["seed"]
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < SEED_LIMIT:
            raise ConfigError("must be an integer in [0, 2^64)", key="seed")

        source_doc = doc.get("source")
        if not isinstance(source_doc, Mapping) or len(source_doc) != 1:
            raise ConfigError("exactly one of 'fading' or 'ramap' is required", key="source")
        kind = next(iter(source_doc))
        if kind not in SOURCE_KINDS:
            raise ConfigError("unknown key", key=f"source.{kind}")
        source = _merge_strict(_FADING_DEFAULTS if kind == "fading" else _RAMAP_DEFAULTS,
                               source_doc[kind], f"source.{kind}")

        base = PRESETS[preset]
        vpq = _merge_strict(base["vpq"], doc.get("vpq", {}), "vpq")
        if vpq["lambda1"] is None:
            vpq["lambda1"] = _default_lambda1(vpq, source["eve_mode"])
        evaluation = _merge_strict(base["eval"], doc.get("eval", {}), "eval")

        cfg = cls(preset=preset, seed=seed, source_kind=kind, source=source, vpq=vpq, eval=evaluation)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}", key=path) from e
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}", key=path) from e
        return cls.from_dict(doc)

    def with_seed(self, seed: Optional[int]) -> "RunConfig":
        if seed is None:
            return self
        doc = self.to_dict()
        doc["seed"] = seed
        return RunConfig.from_dict(doc)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "preset": self.preset,
            "seed": self.seed,
            "source": {self.source_kind: copy.deepcopy(self.source)},
            "vpq": copy.deepcopy(self.vpq),
            "eval": copy.deepcopy(self.eval),
        }

    def digest(self) -> str:
        """SHA-256 of the canonical JSON of the resolved configuration."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    ################### typed views ###################

    def validate(self) -> None:
        for name, build in (("source", self.source_config), ("vpq", self.vpq_config)):
            try:
                build()
            except (TypeError, ValueError) as e:
                raise ConfigError(str(e), key=f"{name}.{self.source_kind}" if name == "source" else name) from e
        try:
            field_for_order(int(self.vpq["q"]))
        except ValueError as e:
            raise ConfigError(str(e), key="vpq.q") from e
        ev = self.eval
        for key in ("test_size", "trials", "chunk"):
            if isinstance(ev[key], bool) or not isinstance(ev[key], int) or ev[key] < 1:
                raise ConfigError("must be a positive integer", key=f"eval.{key}")
        if not isinstance(ev["rs_m"], list) or not ev["rs_m"]:
            raise ConfigError("must be a non-empty list", key="eval.rs_m")
        n = self.vpq["q"] - 1
        for m in ev["rs_m"]:
            if isinstance(m, bool) or not isinstance(m, int) or not 1 <= m <= n:
                raise ConfigError(f"message length {m} outside [1, {n}]", key="eval.rs_m")
        batch = self.source["batch"]
        if isinstance(batch, bool) or not isinstance(batch, int) or batch < 1:
            raise ConfigError("must be a positive integer", key=f"source.{self.source_kind}.batch")

    @property
    def eve_mode(self) -> EveMode:
        return EveMode(self.source["eve_mode"])

    def source_config(self):
        """FadingConfig or RaSourceConfig for the configured source."""
        s = self.source
        if self.source_kind == "fading":
            return FadingConfig(p_dbm=float(s["p_dbm"]), n1_dbm=float(s["n1_dbm"]), n2_dbm=float(s["n2_dbm"]),
                                n3_dbm=float(s["n3_dbm"]), dim=int(s["dim"]), eve_mode=s["eve_mode"])
        ra = RaConfig(delta_f=float(s["delta_f"]), n_sc=int(s["n_sc"]), n_ifft=int(s["n_ifft"]),
                      n_beams=int(s["n_beams"]), sector=_pair(s["sector"]), array_elems=int(s["array_elems"]),
                      n_range_bins=int(s["n_range_bins"]))
        return RaSourceConfig(ra=ra, snr_db=float(s["snr_db"]), rcs_dbsm_range=_pair(s["rcs_dbsm_range"]),
                              range_m=_pair(s["range_m"]), n_clutter=int(s["n_clutter"]),
                              clutter_gain_db=_pair(s["clutter_gain_db"]), eve_mode=s["eve_mode"],
                              eve_delta_d=float(s["eve_delta_d"]), eve_delta_theta=float(s["eve_delta_theta"]))

    def vpq_config(self) -> VpqConfig:
        v = self.vpq
        lambda2 = v["lambda2"] if v["lambda2"] == "adaptive" else float(v["lambda2"])
        return VpqConfig(q=int(v["q"]), lambda1=float(v["lambda1"]), lambda2=lambda2, delta=float(v["delta"]),
                         alpha=float(v["alpha"]), steps_max=int(v["steps_max"]),
                         steps_predictor_only=int(v["steps_predictor_only"]), batch_size=int(v["batch_size"]),
                         shared_encoder=bool(v["shared_encoder"]), lr=float(v["lr"]),
                         weight_decay=float(v["weight_decay"]), optimizer=str(v["optimizer"]),
                         encoder_hidden=tuple(v["encoder_hidden"]), predictor_hidden=tuple(v["predictor_hidden"]),
                         use_batchnorm=bool(v["use_batchnorm"]), log_every=int(v["log_every"]))


def _pair(value: List[float]) -> Tuple[float, float]:
    if len(value) != 2:
        raise ValueError(f"expected a [low, high] pair, got {value}")
    return float(value[0]), float(value[1])
