"""Dataset orchestration: sampling, solving, templating, splitting, storage.

Build layout (one directory per dataset):

    family_01.bin ... family_52.bin   binary record files (serialization.py)
    manifest.json                     counts, splits, offsets, rejections
    vocab.json                        closed-world vocabulary for the corpus

Splits: ``train`` and ``id`` share parameter range r=0.10 and are a seeded
partition of the same (params, IC) pairs; ``ood20`` and ``ood30`` are fresh
draws at r=0.20 / 0.30. No (family, params, IC) triple appears twice.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..catalog import (N_FRAMES, N_GRID, EqClass, EquationSpec,
                       InitialCondition, ParameterSet, get_equation,
                       render_input_sentence, sample_initial_condition,
                       sample_parameters, space_grid)
from ..descriptions import generate_descriptions
from ..errors import NonFinite, RejectionRateExceeded, StiffnessFailure
from ..numerics import (integrate_ode, solve_conservation_fv_batch,
                        solve_pde_spectral_batch)
from ..tokenizer import build_vocab
from .serialization import RawRecord, pack_record, read_records

D_MAX = 3
SPLITS = ("train", "id", "ood20", "ood30")
SPLIT_RANGES = {"train": 0.10, "id": 0.10, "ood20": 0.20, "ood30": 0.30}
MAX_REJECTION_RATE = 0.05
MANIFEST_VERSION = 1

# paper-scale counts (Appendix A): 100 parameter draws per family,
# 50 ICs per ODE family and 100 per PDE/conservation family.
PAPER_N_PARAMS = 100
PAPER_N_ICS_ODE = 50
PAPER_N_ICS_PDE = 100


@dataclass(frozen=True)
class BuildConfig:
    out_dir: str
    master_seed: int = 0
    scale: str = "desk"                # {"desk", "paper"}
    n_params: int = 8                  # per family, train/id pool
    n_ics: int = 8
    id_fraction: float = 0.125         # held-out share of train-pool pairs
    n_ood_params: int = 2              # per OOD split
    n_ood_ics: int = 4
    families: tuple[int, ...] = tuple(range(1, 53))

    @classmethod
    def from_json(cls, path: str) -> "BuildConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(**json.load(fh))


@dataclass
class MultimodalSample:
    family_index: int
    cls: EqClass
    sentence_text: str
    params: np.ndarray                 # float32 [n_params]
    ic_values: np.ndarray              # float32 state vector or grid
    times: np.ndarray                  # float32 [T]
    values: np.ndarray                 # float32 [T, dim] / [T, 128]
    queries: np.ndarray                # float64 [n_q, 2] of (t, x)
    targets: np.ndarray                # float64 [n_q, D_MAX]
    channel_mask: np.ndarray           # bool [D_MAX]
    description: str
    description_index: int
    split: str


def _sample_to_queries(spec: EquationSpec, times: np.ndarray,
                       values: np.ndarray):
    """Flatten a trajectory into (query, target, channel-mask) form."""
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if spec.is_ode:
        queries = np.stack([times, np.zeros_like(times)], axis=1)
        targets = np.zeros((times.shape[0], D_MAX))
        targets[:, : spec.state_dim] = values
        mask = np.arange(D_MAX) < spec.state_dim
    else:
        x = space_grid(spec)
        tt, xx = np.meshgrid(times, x, indexing="ij")
        queries = np.stack([tt.ravel(), xx.ravel()], axis=1)
        targets = np.zeros((queries.shape[0], D_MAX))
        targets[:, 0] = values.ravel()
        mask = np.arange(D_MAX) < 1
    return queries, targets, mask


def _family_rng(master_seed: int, family: int, stream: str) -> np.random.Generator:
    tag = sum(ord(c) * 131 ** i for i, c in enumerate(stream)) % (2 ** 31)
    return np.random.default_rng(np.random.SeedSequence([master_seed, family, tag]))


def _draw_pool(spec: EquationSpec, rng, n_params: int, n_ics: int, rel: float):
    params = [sample_parameters(spec, rel, rng, variant=j) for j in range(n_params)]
    ics = [sample_initial_condition(spec, rng) for _ in range(n_ics)]
    return [(p, ic) for p in params for ic in ics]


def _solve_pairs(spec: EquationSpec, pairs, times):
    """Solve every (params, IC) pair; returns (values list, rejected indices).

    PDE and conservation families are solved in one batched call; if the
    batch aborts on a non-finite state the pairs are re-solved one by one so
    only the offending samples are rejected.
    """
    if spec.is_ode:
        out, rejected = [], []
        for i, (p, ic) in enumerate(pairs):
            try:
                out.append(integrate_ode(spec, p, ic, times).values)
            except (NonFinite, StiffnessFailure) as exc:
                out.append(None)
                rejected.append((i, str(exc)))
        return out, rejected

    solver = (solve_pde_spectral_batch if spec.cls is EqClass.PDE
              else solve_conservation_fv_batch)
    keys = [sym for sym, _ in spec.nominal_params]
    params = {k: np.array([p.as_dict()[k] for p, _ in pairs]) for k in keys}
    ic_grid = np.stack([ic.values for _, ic in pairs])
    try:
        values, _ = solver(spec, params, ic_grid, times)
        bad = ~np.all(np.isfinite(values), axis=(1, 2))
    except NonFinite:
        values, bad = None, None

    out, rejected = [], []
    for i, (p, ic) in enumerate(pairs):
        if values is not None and not bad[i]:
            out.append(values[i])
            continue
        try:
            single = {k: np.array(p.as_dict()[k]) for k in keys}
            vi, _ = solver(spec, single, ic.values, times)
            out.append(vi)
        except NonFinite as exc:
            out.append(None)
            rejected.append((i, str(exc)))
    return out, rejected


def corpus_sentences(families=tuple(range(1, 53))) -> list[str]:
    """Every template sentence and description in the closed corpus."""
    corpus = []
    for idx in families:
        spec = get_equation(idx)
        params = ParameterSet(values=tuple(spec.nominal_params),
                              relative_range=0.0, seed_path="corpus")
        rng = np.random.default_rng(0)
        ic = sample_initial_condition(spec, rng)
        corpus.append(render_input_sentence(spec, params, ic).text)
        corpus.extend(generate_descriptions(spec).descriptions)
    return corpus


def plan_manifest(config: BuildConfig) -> dict:
    """Paper-scale (or any-scale) counts without solving anything."""
    families = {}
    total_params = 0
    for idx in config.families:
        spec = get_equation(idx)
        if config.scale == "paper":
            n_params = PAPER_N_PARAMS
            n_ics = PAPER_N_ICS_ODE if spec.is_ode else PAPER_N_ICS_PDE
        else:
            n_params, n_ics = config.n_params, config.n_ics
        families[str(idx)] = {"n_params": n_params, "n_ics": n_ics}
        total_params += n_params
    return {
        "format_version": MANIFEST_VERSION,
        "plan_only": True,
        "scale": config.scale,
        "master_seed": config.master_seed,
        "splits": {s: {"relative_range": SPLIT_RANGES[s]} for s in SPLITS},
        "families": families,
        "total_parameterized_equations": total_params,
    }


def build_dataset(config: BuildConfig) -> dict:
    """Sample, solve, and serialize the dataset; returns the manifest."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": MANIFEST_VERSION,
        "plan_only": False,
        "scale": config.scale,
        "master_seed": config.master_seed,
        "splits": {s: {"relative_range": SPLIT_RANGES[s]} for s in SPLITS},
        "families": {},
        "rejected": {},
    }
    total_params = 0
    for idx in config.families:
        spec = get_equation(idx)
        desc_set = generate_descriptions(spec)
        n_desc = len(desc_set.descriptions)
        times = np.linspace(0.0, spec.time_horizon, N_FRAMES)

        # --- draw all pools up front from independent streams
        rng_pool = _family_rng(config.master_seed, idx, "train_pool")
        pool = _draw_pool(spec, rng_pool, config.n_params, config.n_ics,
                          SPLIT_RANGES["train"])
        rng_split = _family_rng(config.master_seed, idx, "id_split")
        n_id = max(1, round(config.id_fraction * len(pool)))
        id_idx = set(rng_split.choice(len(pool), size=n_id, replace=False).tolist())
        jobs = [("id" if i in id_idx else "train", p, ic)
                for i, (p, ic) in enumerate(pool)]
        for split in ("ood20", "ood30"):
            rng_ood = _family_rng(config.master_seed, idx, split)
            ood_pool = _draw_pool(spec, rng_ood, config.n_ood_params,
                                  config.n_ood_ics, SPLIT_RANGES[split])
            jobs.extend((split, p, ic) for p, ic in ood_pool)

        rng_desc = _family_rng(config.master_seed, idx, "descriptions")
        desc_idx = rng_desc.integers(0, n_desc, size=len(jobs))

        values_list, rejected = _solve_pairs(
            spec, [(p, ic) for _, p, ic in jobs], times)
        if len(rejected) > MAX_REJECTION_RATE * len(jobs):
            raise RejectionRateExceeded(
                f"family {idx}: {len(rejected)}/{len(jobs)} solves rejected")

        offsets = {s: [] for s in SPLITS}
        path = out_dir / f"family_{idx:02d}.bin"
        with open(path, "wb") as fh:
            pos = 0
            for j, (split, p, ic) in enumerate(jobs):
                if values_list[j] is None:
                    continue
                sentence = render_input_sentence(spec, p, ic)
                rec = RawRecord(
                    family_index=idx, ic_kind=ic.kind,
                    params=p.as_array().astype(np.float32),
                    ic=np.asarray(ic.values, dtype=np.float32),
                    times=times.astype(np.float32),
                    values=np.asarray(values_list[j], dtype=np.float32),
                    sentence=sentence.text,
                    description=desc_set.descriptions[int(desc_idx[j])],
                    description_index=int(desc_idx[j]),
                )
                blob = pack_record(rec)
                fh.write(blob)
                offsets[split].append(pos)
                pos += len(blob)

        manifest["families"][str(idx)] = {
            "n_params": config.n_params, "n_ics": config.n_ics,
            "file": path.name,
            "offsets": offsets,
            "n_records": sum(len(v) for v in offsets.values()),
        }
        if spec.cls is EqClass.CONSERVATION:
            # finite-volume mass drift diagnostic, computed from the float64
            # solver output before the float32 storage cast (record order)
            dx = spec.domain_length / N_GRID
            drifts = []
            for vals in values_list:
                if vals is None:
                    continue
                mass = np.asarray(vals, dtype=np.float64).sum(axis=1) * dx
                drifts.append(float(np.max(np.abs(mass - mass[0]))
                                    / max(abs(mass[0]), 1.0)))
            manifest["families"][str(idx)]["mass_drift"] = drifts
        manifest["rejected"][str(idx)] = [
            {"job": i, "reason": why} for i, why in rejected]
        total_params += config.n_params

    manifest["total_parameterized_equations"] = total_params

    vocab = build_vocab(corpus_sentences(config.families))
    (out_dir / "vocab.json").write_text(vocab.to_json(), encoding="utf-8")

    tmp = out_dir / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True),
                   encoding="utf-8")
    os.replace(tmp, out_dir / "manifest.json")
    return manifest


def load_manifest(data_dir: str) -> dict:
    with open(Path(data_dir) / "manifest.json", "r", encoding="utf-8") as fh:
        return json.load(fh)


def load_samples(data_dir: str, split: str,
                 families: tuple[int, ...] | None = None):
    """Yield tokenizer-ready samples of one split, in manifest order."""
    manifest = load_manifest(data_dir)
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    for key in sorted(manifest["families"], key=int):
        idx = int(key)
        if families is not None and idx not in families:
            continue
        spec = get_equation(idx)
        entry = manifest["families"][key]
        by_offset = dict(read_records(Path(data_dir) / entry["file"]))
        for off in entry["offsets"][split]:
            rec = by_offset[off]
            queries, targets, mask = _sample_to_queries(spec, rec.times,
                                                        rec.values)
            yield MultimodalSample(
                family_index=idx, cls=spec.cls, sentence_text=rec.sentence,
                params=rec.params, ic_values=rec.ic, times=rec.times,
                values=rec.values, queries=queries, targets=targets,
                channel_mask=mask, description=rec.description,
                description_index=rec.description_index, split=split)
