"""
vcrx command line
gen -> train -> eval -> keys, each output stamped with the config digest and seed
"""

import logging
import sys
from typing import List, Optional, Sequence, Tuple

import click
import numpy as np

from .config import RunConfig, get_settings, setup_logging
from .errors import FileFormatError, MissingModelError, TrainingAborted, VcrxError
from .evaluation import KEY_CSV_COLUMNS, SKETCH_CSV_COLUMNS, compute_metrics, empirical_entropy_bits, \
    key_experiment, mi_bounds_on_test, sketch_rows
from .netcore import Mlp, load_model, save_model
from .sources import DatasetSource, EveMode, FadingSource, RaMapSource, SampleBatch, Standardizer, batch_rng, \
    gaussian_mi_bits, gen_fading, gen_ramap_batch
from .storage import ensure_parent, model_paths, read_dataset, write_csv, write_dataset, write_metrics
from .vpq import HISTORY_COLUMNS, InputScalers, train_vpq

logger = logging.getLogger(__name__)

# Seed streams keep datasets, training and key trials independent
STREAM_TRAIN_DATA = 0
STREAM_TEST_DATA = 1
STREAM_TRAIN = 2
STREAM_KEYS = 3


def _load_config(config_path: str, seed: Optional[int]) -> RunConfig:
    cfg = RunConfig.from_file(config_path).with_seed(seed)
    logger.info({"message": "Loaded config", "path": config_path, "digest": cfg.digest(), "seed": cfg.seed})
    return cfg


def expected_dims(cfg: RunConfig) -> Tuple[int, int, int]:
    src = cfg.source_config()
    eve = cfg.eve_mode is not EveMode.ABSENT
    if cfg.source_kind == "fading":
        return src.dim, src.dim, src.dim if eve else 0
    width = src.ra.n_range_bins * src.ra.n_beams
    return width, width, 2 if eve else 0


def generate_dataset(cfg: RunConfig, split: str) -> SampleBatch:
    rows = cfg.source["batch"] if split == "train" else cfg.eval["test_size"]
    rng = batch_rng(cfg.seed, STREAM_TRAIN_DATA if split == "train" else STREAM_TEST_DATA)
    if cfg.source_kind == "fading":
        return gen_fading(cfg.source_config(), rows, rng)
    return gen_ramap_batch(cfg.source_config(), rows, rng)


def simulator_source(cfg: RunConfig):
    """Fresh draws from the configured source, for key trials that must not share rows."""
    if cfg.source_kind == "fading":
        return FadingSource(cfg.source_config())
    return RaMapSource(cfg.source_config())


def _read_checked(data_path: str, cfg: RunConfig) -> SampleBatch:
    data, meta = read_dataset(data_path)
    dims = expected_dims(cfg)
    if data.dims != dims:
        raise FileFormatError(f"{data_path}: dataset dims {data.dims} do not match config dims {dims}")
    if meta.get("digest") != cfg.digest():
        logger.warning(f"{data_path} was generated with config digest {meta.get('digest')}, running {cfg.digest()}")
    return data


def _scalers_from_arrays(arrays: Sequence[np.ndarray]) -> InputScalers:
    if len(arrays) not in (4, 6):
        raise FileFormatError(f"model file carries {len(arrays)} normalization arrays, expected 4 or 6")
    x = Standardizer(arrays[0], arrays[1])
    y = Standardizer(arrays[2], arrays[3])
    z = Standardizer(arrays[4], arrays[5]) if len(arrays) == 6 else None
    return InputScalers(x=x, y=y, z=z)


def _load_encoders(model_files: Sequence[str], q: int) -> Tuple[Mlp, Mlp, InputScalers]:
    if len(model_files) not in (1, 2):
        raise click.UsageError("pass --model once for a shared encoder or twice for (Alice, Bob)")
    loaded = [load_model(path) for path in model_files]
    for path, (model, _, _) in zip(model_files, loaded):
        if model.spec.out_dim != q:
            raise FileFormatError(f"{path}: encoder alphabet {model.spec.out_dim} != configured q={q}")
    enc_x, _, extras = loaded[0]
    enc_y = loaded[1][0] if len(loaded) == 2 else enc_x
    return enc_x, enc_y, _scalers_from_arrays(extras)


def _load_predictor(path: Optional[str]) -> Optional[Mlp]:
    if path is None:
        return None
    model, _, _ = load_model(path)
    return model


def _run(fn, *args) -> None:
    """Run a command body; map domain failures to exit codes."""
    try:
        fn(*args)
    except TrainingAborted as e:
        logger.error(f"Training aborted at step {e.step}: {e}")
        sys.exit(2)
    except VcrxError as e:
        logger.error(f"{type(e).__name__}: {e}")
        sys.exit(1)


@click.group()
@click.option("--verbose", is_flag=True, help="Log at DEBUG level.")
def main(verbose: bool) -> None:
    """Secret common randomness from correlated observations."""
    setup_logging("DEBUG" if verbose else None)


@main.command("gen")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--split", type=click.Choice(["train", "test"]), default="train", show_default=True)
def cmd_gen(config_path: str, seed: Optional[int], out_path: str, split: str) -> None:
    """Write a seeded dataset file."""
    def body():
        cfg = _load_config(config_path, seed)
        data = generate_dataset(cfg, split)
        write_dataset(out_path, data, {"digest": cfg.digest(), "seed": cfg.seed, "source": cfg.source_kind,
                                       "split": split})
        click.echo(f"{out_path}: rows={len(data)} dims={data.dims}")
    _run(body)


@main.command("train")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None)
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "model_prefix", required=True, help="Prefix for model files.")
@click.option("--log", "log_path", default=None, help="History CSV path (default <prefix>.history.csv).")
def cmd_train(config_path: str, seed: Optional[int], data_path: str, model_prefix: str,
              log_path: Optional[str]) -> None:
    """Train encoders (and the eavesdropper predictor when Eve is modeled)."""
    def body():
        cfg = _load_config(config_path, seed)
        settings = get_settings()
        data = _read_checked(data_path, cfg)
        scalers = InputScalers.fit(data)
        vpq_cfg = cfg.vpq_config()
        trained = train_vpq(vpq_cfg, DatasetSource(data), batch_rng(cfg.seed, STREAM_TRAIN), scalers=scalers,
                            progress=settings.progress, workers=settings.threads)

        digest = cfg.digest()
        meta = {"digest": digest, "seed": str(cfg.seed)}
        paths = model_paths(model_prefix, trained.shared_encoder, trained.predictor is not None)
        ensure_parent(paths["encoder_x"])
        extras = scalers.arrays()
        save_model(paths["encoder_x"], trained.encoder_x, {**meta, "role": "encoder_x"}, extras)
        if paths["encoder_y"]:
            save_model(paths["encoder_y"], trained.encoder_y, {**meta, "role": "encoder_y"}, extras)
        if paths["predictor"]:
            save_model(paths["predictor"], trained.predictor, {**meta, "role": "predictor"}, extras)
        write_csv(log_path or f"{model_prefix}.history.csv", HISTORY_COLUMNS, trained.history.rows(),
                  digest, cfg.seed)
        for path in paths.values():
            if path:
                click.echo(path)
    _run(body)


@main.command("eval")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None)
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_files", required=True, multiple=True, type=click.Path(exists=True, dir_okay=False),
              help="Encoder model file; twice for separate Alice/Bob encoders.")
@click.option("--predictor", "predictor_file", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--mi", is_flag=True, help="Also report I_VLB and I_VUB (needs --predictor).")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def cmd_eval(config_path: str, seed: Optional[int], data_path: str, model_files: List[str],
             predictor_file: Optional[str], mi: bool, out_path: str) -> None:
    """Held-out entropy, agreement, uniformity and MI bounds."""
    def body():
        cfg = _load_config(config_path, seed)
        q = cfg.vpq["q"]
        if mi and predictor_file is None:
            raise MissingModelError("--mi needs a --predictor model file")
        enc_x, enc_y, scalers = _load_encoders(model_files, q)
        data = scalers.apply(_read_checked(data_path, cfg))
        record = compute_metrics(enc_x, enc_y, data, q, predictor=_load_predictor(predictor_file), with_mi=mi,
                                 chunk=cfg.eval["chunk"])
        metrics = record.to_dict()
        if cfg.source_kind == "fading":
            metrics.update(gaussian_mi_bits(cfg.source_config()))
        write_metrics(out_path, metrics, cfg.digest(), cfg.seed)
        click.echo(out_path)
    _run(body)


def _parse_m_list(text: Optional[str]) -> Optional[List[int]]:
    if text is None:
        return None
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated integers: {e}", param_hint="--rs-m")


@main.command("keys")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None)
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_files", required=True, multiple=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--predictor", "predictor_file", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Eavesdropper predictor; its I_VUB enters the leakage bound.")
@click.option("--rs-m", "rs_m", default=None, help="Comma-separated message lengths (default from config).")
@click.option("--trials", type=int, default=None)
@click.option("--sketches", "sketch_path", default=None, type=click.Path(dir_okay=False),
              help="Also write every published sketch (m, trial, hex offset) to this CSV.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def cmd_keys(config_path: str, seed: Optional[int], data_path: str, model_files: List[str],
             predictor_file: Optional[str], rs_m: Optional[str], trials: Optional[int], sketch_path: Optional[str],
             out_path: str) -> None:
    """Key mismatch rate, key rate and leakage bound per RS message length."""
    def body():
        cfg = _load_config(config_path, seed)
        q = cfg.vpq["q"]
        enc_x, enc_y, scalers = _load_encoders(model_files, q)
        data = scalers.apply(_read_checked(data_path, cfg))
        chunk = cfg.eval["chunk"]
        h_w = empirical_entropy_bits(enc_x, data.x, chunk=chunk)
        i_vub = None
        predictor = _load_predictor(predictor_file)
        if predictor is not None:
            _, i_vub = mi_bounds_on_test(enc_x, predictor, data, chunk=chunk)
        # Trials draw fresh pairs; the test split only feeds the H(W) and I_VUB estimates
        rows = key_experiment(enc_x, enc_y, simulator_source(cfg), _parse_m_list(rs_m) or cfg.eval["rs_m"],
                              trials or cfg.eval["trials"], q, cfg.seed, h_w, i_vub, stream=STREAM_KEYS,
                              workers=get_settings().threads, chunk=chunk, scalers=scalers)
        write_csv(out_path, KEY_CSV_COLUMNS, (row.as_tuple() for row in rows), cfg.digest(), cfg.seed)
        if sketch_path:
            write_csv(sketch_path, SKETCH_CSV_COLUMNS, sketch_rows(rows), cfg.digest(), cfg.seed)
            click.echo(sketch_path)
        click.echo(out_path)
    _run(body)


if __name__ == "__main__":
    main()
