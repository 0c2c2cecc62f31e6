"""Command-line entry point.

Subcommands: generate-data, train, evaluate, extrapolate, catalog, infer.
Exit codes: 0 success, 1 runtime failure, 2 argument errors. Errors print
one machine-parsable line ``error: <kind>: <message>`` on stderr.
``MOLFORGE_SEED`` overrides any configured seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import MolforgeError


def _seed_override(seed: int) -> int:
    env = os.environ.get("MOLFORGE_SEED")
    return int(env) if env else seed


def _require_out_dir(path: str, force: bool) -> Path:
    out = Path(path)
    if out.exists() and any(out.iterdir()) and not force:
        raise MolforgeError(f"output directory {out} is not empty "
                            "(use --force to overwrite)")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_generate_data(args) -> int:
    from .dataset import BuildConfig, build_dataset, plan_manifest
    overrides = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            overrides.update(json.load(fh))
    overrides["out_dir"] = args.out
    overrides["scale"] = args.scale
    overrides["master_seed"] = _seed_override(
        args.seed if args.seed is not None
        else overrides.get("master_seed", 0))
    if args.families:
        overrides["families"] = tuple(int(f) for f in args.families.split(","))
    cfg = BuildConfig(**overrides)
    if args.scale == "paper" or args.plan_only:
        # paper scale is a manifest plan: counts and split layout, no solving
        manifest = plan_manifest(cfg)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                      sort_keys=True))
        print(f"planned {manifest['total_parameterized_equations']} "
              "parameterized equations")
        return 0
    _require_out_dir(args.out, args.force)
    manifest = build_dataset(cfg)
    n = sum(f["n_records"] for f in manifest["families"].values())
    print(f"built {n} records across {len(manifest['families'])} families "
          f"-> {args.out}")
    return 0


def _load_vocab(data_dir: str):
    from .tokenizer import Vocab
    return Vocab.from_json((Path(data_dir) / "vocab.json")
                           .read_text(encoding="utf-8"))


def _cmd_train(args) -> int:
    from .dataset import load_samples
    from .model import build_model
    from .training import TrainingConfig, train
    cfg = (TrainingConfig.from_json(args.config) if args.config
           else TrainingConfig())
    cfg = dataclasses.replace(cfg, seed=_seed_override(
        args.seed if args.seed is not None else cfg.seed))
    if args.steps:
        cfg = dataclasses.replace(cfg, steps=args.steps)
    vocab = _load_vocab(args.data)
    samples = list(load_samples(args.data, "train"))
    heldout = list(load_samples(args.data, "id"))
    model = build_model(vocab, seed=cfg.seed)
    result = train(samples, model, vocab, cfg, args.out, eval_samples=heldout)
    print(f"trained {result.steps} steps; final L_n={result.final_numeric_loss:.4f} "
          f"L_t={result.final_text_loss:.4f}; checkpoint at "
          f"{result.checkpoint_path}")
    return 0


def _load_model(data_dir: str, ckpt: str):
    from .model import build_model
    from .nn import load_checkpoint
    vocab = _load_vocab(data_dir)
    model = build_model(vocab)
    extra = load_checkpoint(model, ckpt)
    want = model.config.config_hash()
    got = extra.get("config_hash", want)
    if got != want:
        raise MolforgeError(f"checkpoint config hash {got} != model {want}")
    return model, vocab


def _cmd_evaluate(args) -> int:
    from .evaluation import ModelPredictor, evaluate_extrapolation, \
        evaluate_split
    model, vocab = _load_model(args.data, args.ckpt)
    predictor = ModelPredictor(model, vocab)
    if args.protocol == "extrap":
        report = evaluate_extrapolation(predictor, args.data)
    else:
        split = {"id": "id", "ood20": "ood20", "ood30": "ood30"}[args.protocol]
        report = evaluate_split(predictor, args.data, split,
                                embedder=predictor.embedder(),
                                with_text=not args.no_text)
    csv_text = report.to_csv()
    if args.report:
        Path(args.report).write_text(csv_text, encoding="utf-8")
    print(csv_text, end="")
    if args.plots:
        from .dataset import load_samples
        from .plots import triptych
        split = "id" if args.protocol == "extrap" else args.protocol
        plot_dir = Path(args.plots)
        seen = set()
        for sample in load_samples(args.data, split):
            if sample.family_index in seen:
                continue
            seen.add(sample.family_index)
            pred = predictor.predict_numeric(sample)
            triptych(sample, pred,
                     plot_dir / f"family_{sample.family_index:02d}.png")
        print(f"wrote {len(seen)} figures to {plot_dir}")
    return 0


def _cmd_extrapolate(args) -> int:
    args.protocol = "extrap"
    args.plots = None
    args.no_text = True
    return _cmd_evaluate(args)


def _cmd_catalog(args) -> int:
    from .catalog import catalog_json
    entries = catalog_json()
    if args.json:
        print(json.dumps(entries, indent=2))
    else:
        for e in entries:
            print(f"{e['index']:2d}  {e['class']:<15s} {e['name']}")
    return 0


def _cmd_infer(args) -> int:
    from .catalog import (InitialCondition, get_equation, N_FRAMES,
                          sample_initial_condition)
    from .dataset import MultimodalSample, _sample_to_queries
    from .evaluation import ModelPredictor, _params_from_sample
    from .numerics import solve
    spec = get_equation(args.family)
    model, vocab = _load_model(args.data, args.ckpt)
    values = np.loadtxt(args.ic, delimiter=",", dtype=np.float64, ndmin=1)
    ic = InitialCondition(kind=spec.ic_family, values=values,
                          descriptor_params=())
    params = np.asarray([float(v) for v in args.params.split(",")],
                        dtype=np.float32)
    if params.size != len(spec.nominal_params):
        raise MolforgeError(f"family {args.family} takes "
                            f"{len(spec.nominal_params)} parameters")
    times = np.linspace(0.0, spec.time_horizon, N_FRAMES)
    from .catalog import render_input_sentence, ParameterSet
    names = [s for s, _ in spec.nominal_params]
    pset = ParameterSet(values=tuple(zip(names, map(float, params))),
                        relative_range=0.0, seed_path="infer")
    sentence = render_input_sentence(spec, pset, ic)
    queries, _, mask = _sample_to_queries(
        spec, times, np.zeros((N_FRAMES, values.size if not spec.is_ode
                               else spec.state_dim)))
    sample = MultimodalSample(
        family_index=spec.index, cls=spec.cls, sentence_text=sentence.text,
        params=params, ic_values=values.astype(np.float32),
        times=times.astype(np.float32),
        values=np.zeros((N_FRAMES, values.size if not spec.is_ode
                         else spec.state_dim), dtype=np.float32),
        queries=queries, targets=np.zeros((queries.shape[0], 3)),
        channel_mask=mask, description="", description_index=0, split="infer")
    predictor = ModelPredictor(model, vocab)
    pred = predictor.predict_numeric(sample)
    n_ch = spec.state_dim if spec.is_ode else 1
    traj = pred[:, :n_ch].reshape(N_FRAMES, -1)
    print("t," + ",".join(f"u{j}" for j in range(traj.shape[1])))
    for t, row in zip(times, traj):
        print(f"{t:.6f}," + ",".join(f"{v:.6e}" for v in row))
    print()
    print(predictor.generate_description(sample))
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="molforge",
                                description="multimodal operator learning on "
                                "a synthetic differential-equation corpus")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-data", help="build (or plan) a dataset")
    g.add_argument("--config", help="JSON config overriding build defaults")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--seed", type=int, default=None, help="master seed")
    g.add_argument("--scale", choices=("paper", "desk"), default="desk")
    g.add_argument("--families", help="comma-separated family subset")
    g.add_argument("--plan-only", action="store_true",
                   help="write the manifest plan without solving")
    g.add_argument("--force", action="store_true",
                   help="allow writing into a non-empty directory")
    g.set_defaults(func=_cmd_generate_data)

    t = sub.add_parser("train", help="train the operator model")
    t.add_argument("--data", required=True, help="dataset directory")
    t.add_argument("--config", help="JSON TrainingConfig")
    t.add_argument("--out", required=True, help="run directory")
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--steps", type=int, default=None,
                   help="override configured step count")
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("evaluate", help="evaluate a checkpoint on a split")
    e.add_argument("--data", required=True)
    e.add_argument("--ckpt", required=True, help="checkpoint path (no suffix)")
    e.add_argument("--protocol", choices=("id", "ood20", "ood30", "extrap"),
                   default="id")
    e.add_argument("--report", help="write the CSV report here")
    e.add_argument("--plots", help="directory for PNG triptychs "
                   "(truth / prediction / difference)")
    e.add_argument("--no-text", action="store_true",
                   help="skip text generation and scoring")
    e.set_defaults(func=_cmd_evaluate)

    x = sub.add_parser("extrapolate", help="two-stage time extrapolation")
    x.add_argument("--data", required=True)
    x.add_argument("--ckpt", required=True)
    x.add_argument("--report", help="write the CSV report here")
    x.set_defaults(func=_cmd_extrapolate)

    c = sub.add_parser("catalog", help="list the 52 equation families")
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=_cmd_catalog)

    i = sub.add_parser("infer", help="predict one trajectory + description")
    i.add_argument("--data", required=True, help="dataset dir (for the vocab)")
    i.add_argument("--ckpt", required=True)
    i.add_argument("--family", type=int, required=True)
    i.add_argument("--params", required=True,
                   help="comma-separated parameter values")
    i.add_argument("--ic", required=True, help="CSV file with the IC values")
    i.set_defaults(func=_cmd_infer)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except MolforgeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
