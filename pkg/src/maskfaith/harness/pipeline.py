"""End-to-end experiment pipeline.

Stages run in a fixed order; each draws randomness from
``derive_seed(cfg.seed, stage)``. All artifacts go to ``cfg.output_dir``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from pathlib import Path

import numpy as np

from .. import adversary
from ..attribution import attribute, write_attributions_csv
from ..corpus import Vocab, generate_dataset, load_jsonl
from ..drift import (curve_from_sets, masked_embedding_sets, pca_projection, write_drift_csv,
                     write_projection_csv)
from ..masking import (FidelityReport, aopc_from_curves, iterative_mask, perturbation_curves,
                       random_baseline_fidelity, write_curves_csv, write_report, write_traces_jsonl)
from ..model import TinyTextClassifier, predicted_class, train
from .config import ExperimentConfig
from .plots import render_plots
from .scoring import macro_f1
from .seeds import derive_seed

log = logging.getLogger(__name__)

STAGES = ("data", "train", "evaluate", "attribute", "fidelity", "aopc", "random_baseline",
          "drift", "attack", "advtrain", "report")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


def _stage(name):
    def wrap(fn):
        def run(*args, **kwargs):
            log.info("stage %s", name)
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as exc:
                raise StageError(name, exc) from exc
        return run
    return wrap


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


class Experiment:
    """Holds intermediate state so CLI subcommands can run pipeline prefixes."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.summary: dict = {"seed": cfg.seed, "artifacts": {}}
        self.fixed_attr: dict[int, object] = {}

    def artifact(self, metric, filename):
        self.summary["artifacts"][metric] = filename
        return self.out / filename

    @_stage("data")
    def data(self):
        cfg = self.cfg
        self.out.mkdir(parents=True, exist_ok=True)
        if cfg.dataset.path is not None:
            vocab = Vocab.load(cfg.dataset.vocab) if cfg.dataset.vocab else None
            self.dataset, self.vocab = load_jsonl(cfg.dataset.path, vocab)
        else:
            spec = cfg.dataset.generator_spec(derive_seed(cfg.seed, "data"))
            self.dataset, self.vocab = generate_dataset(spec)
        self.dataset.to_jsonl(self.artifact("dataset", "dataset.jsonl"))
        self.vocab.save(self.out / "vocab.txt")
        rng = np.random.default_rng(derive_seed(cfg.seed, "split"))
        perm = rng.permutation(len(self.dataset))
        n_test = max(1, int(round(len(perm) * cfg.holdout_fraction)))
        self.test_idx = sorted(perm[:n_test].tolist())
        self.train_idx = sorted(perm[n_test:].tolist())
        self.train_set = self.dataset.subset(self.train_idx, f"{self.dataset.name}-train")
        self.test_set = self.dataset.subset(self.test_idx, f"{self.dataset.name}-test")
        # metric stages work on the first max_samples held-out samples
        self.eval_ids = self.test_idx[:cfg.max_samples]
        self.eval_samples = [self.dataset[i] for i in self.eval_ids]
        self.summary["dataset"] = {"name": self.dataset.name, "class_counts": self.dataset.class_counts,
                                   "num_train": len(self.train_idx), "num_test": len(self.test_idx),
                                   "num_eval": len(self.eval_ids)}

    @_stage("train")
    def train(self):
        m = self.cfg.model
        init = TinyTextClassifier(self.vocab.size, self.dataset.num_classes, m.embed_dim, m.hidden_dim,
                                  seed=derive_seed(self.cfg.seed, "init"))
        self.model, history = train(init, self.train_set, m.train_config(derive_seed(self.cfg.seed, "train")))
        self.model.save(self.artifact("model", "model.json"))
        with open(self.out / "train_history.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "loss"])
            for i, loss in enumerate(history):
                w.writerow([i + 1, repr(loss)])

    @_stage("evaluate")
    def evaluate(self):
        preds = [predicted_class(self.model.predict(s)) for s in self.test_set]
        labels = [s.label for s in self.test_set]
        with open(self.artifact("macro_f1", "predictions.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample_id", "label", "prediction"])
            for sid, y, p in zip(self.test_idx, labels, preds):
                w.writerow([sid, y, p])
        f1 = macro_f1(preds, labels, self.dataset.num_classes)
        self.summary["macro_f1"] = f1.macro_f1
        self.summary["accuracy"] = sum(p == y for p, y in zip(preds, labels)) / len(labels)

    @_stage("attribute")
    def attribute(self):
        a = self.cfg.attribution
        rows = []
        for sid, s in zip(self.eval_ids, self.eval_samples):
            attr = attribute(self.model, s, a.method, steps=a.steps)
            self.fixed_attr[sid] = attr
            rows.append((sid, s, attr))
        write_attributions_csv(self.artifact("attributions", "attributions.csv"), rows)

    def _fidelity(self, samples, ids, tag, sources=None):
        a = self.cfg.attribution
        sources = sources or [a.method] * len(samples)
        traces = [iterative_mask(self.model, s, src, steps=a.steps, sample_id=sid)
                  for sid, s, src in zip(ids, samples, sources)]
        report = FidelityReport.from_traces(traces)
        write_traces_jsonl(self.out / f"traces_{tag}.jsonl", report.traces)
        write_report(report, self.out / f"fidelity_{tag}.json", self.artifact(f"fidelity_{tag}", f"fidelity_{tag}.csv"))
        return report

    @_stage("fidelity")
    def fidelity(self):
        sources = [self.fixed_attr[i] for i in self.eval_ids]
        report = self._fidelity(self.eval_samples, self.eval_ids, "clean", sources)
        mt = self.cfg.metrics
        if mt.fidelity:
            self.summary["fidelity_clean"] = report.fidelity
            self.summary["mean_masked_fraction"] = report.mean_masked_fraction
        if mt.non_pert:
            self.summary["non_perturbation_frequency"] = report.non_perturbation_frequency
            by_class = {}
            for c in range(self.dataset.num_classes):
                flags = [not t.flipped for t, s in zip(report.traces, self.eval_samples) if s.label == c]
                by_class[str(c)] = sum(flags) / len(flags) if flags else None
            self.summary["non_perturbation_frequency_by_class"] = by_class

    @_stage("aopc")
    def aopc(self):
        sources = [self.fixed_attr[i] for i in self.eval_ids]
        curves = []
        for sid, s, src in zip(self.eval_ids, self.eval_samples, sources):
            curves += perturbation_curves(self.model, [s], src, self.cfg.metrics.aopc, sample_ids=[sid])
        write_curves_csv(self.artifact("aopc", "perturbation_curves.csv"), curves)
        self.summary["aopc"] = aopc_from_curves(curves)
        self.summary["aopc_L"] = self.cfg.metrics.aopc
        self.summary["aopc_clamped_samples"] = sum(c.clamped for c in curves)

    @_stage("random_baseline")
    def random_baseline(self):
        report = random_baseline_fidelity(self.model, self.eval_samples, derive_seed(self.cfg.seed, "random"),
                                          sample_ids=self.eval_ids)
        write_traces_jsonl(self.out / "traces_random.jsonl", report.traces)
        write_report(report, self.out / "fidelity_random.json",
                     self.artifact("fidelity_random", "fidelity_random.csv"))
        self.summary["fidelity_random"] = report.fidelity

    @_stage("drift")
    def drift(self):
        sets = masked_embedding_sets(self.model, self.eval_samples, fractions=self.cfg.metrics.drift,
                                     attributions=[self.fixed_attr[i] for i in self.eval_ids],
                                     source=self.dataset.name)
        curve = curve_from_sets(sets)
        write_drift_csv(self.artifact("drift", "drift.csv"), curve)
        ends = [sets[0], sets[-1]] if len(sets) > 1 else sets
        proj = pca_projection(ends)
        write_projection_csv(self.out / "projection.csv", ends, proj,
                             [f"{self.dataset.name}@{s.mask_fraction:g}" for s in ends])
        self.summary["drift"] = {
            "fractions": curve.mask_fractions, "delta_mu": curve.delta_mu, "delta_sigma": curve.delta_sigma,
            "mean_cos": curve.mean_cos_to_clean_centroid, "centroid_cos": curve.centroid_cos,
        }

    def _table(self):
        ac = self.cfg.attack
        if ac.table is not None:
            return adversary.SubstitutionTable.load(ac.table, self.vocab)
        if self.cfg.dataset.path is None and self.cfg.dataset.kind == "balanced_sentiment":
            return adversary.sentiment_substitution_table(self.vocab)
        return adversary.full_substitution_table(self.vocab)

    def _attack(self, samples, sources, seed_tag):
        ac = self.cfg.attack
        rng = np.random.default_rng(derive_seed(self.cfg.seed, seed_tag))
        table = self._table() if ac.kind == "greedy_substitute" else None
        results = []
        for s, src in zip(samples, sources):
            if ac.kind == "saliency_mask":
                r = adversary.saliency_mask_attack(self.model, s, src, ac.budget)
            elif ac.kind == "greedy_substitute":
                r = adversary.greedy_substitute_attack(self.model, s, src, table, ac.budget, vocab=self.vocab)
            else:
                r = adversary.char_noise_attack(self.model, s, self.vocab, src, ac.budget,
                                                int(rng.integers(2**63)))
            # never trust the cached flag
            r.success = r.success and adversary.verify_success(self.model, r)
            results.append(r)
        return results

    @_stage("attack")
    def attack(self):
        a = self.cfg.attribution
        sources = [self.fixed_attr.get(i, a.method) for i in self.eval_ids]
        results = self._attack(self.eval_samples, sources, "attack")
        adversary.write_attacks_jsonl(self.artifact("attack_success_rate", "attacks.jsonl"), results)
        self.attacks = results
        self.summary["attack_kind"] = self.cfg.attack.kind
        self.summary["attack_success_rate"] = sum(r.success for r in results) / len(results)
        ok = [(sid, r) for sid, r in zip(self.eval_ids, results) if r.success]
        self.attacked_ids = [sid for sid, _ in ok]
        self.attacked = [r.perturbed for _, r in ok]
        self.attacked_clean = [r.original for _, r in ok]
        if ok:
            adv_rep = self._fidelity(self.attacked, self.attacked_ids, "attacked")
            clean_rep = self._fidelity(self.attacked_clean, self.attacked_ids, "attacked_clean",
                                       [self.fixed_attr.get(i, a.method) for i in self.attacked_ids])
            self.summary["fidelity_attacked"] = adv_rep.fidelity
            self.summary["fidelity_attacked_clean"] = clean_rep.fidelity
        else:
            self.summary["fidelity_attacked"] = None
            self.summary["fidelity_attacked_clean"] = None

    @_stage("advtrain")
    def advtrain(self):
        a = self.cfg.attribution
        train_samples = list(self.train_set)[: self.cfg.max_samples]
        train_attacks = self._attack(train_samples, [a.method] * len(train_samples), "advtrain-attack")
        adversary.write_attacks_jsonl(self.out / "attacks_train.jsonl", train_attacks)
        tc = self.cfg.model.train_config(derive_seed(self.cfg.seed, "advtrain"), epochs=self.cfg.adv_epochs)
        result = adversary.adversarial_train(self.model, self.train_set, train_attacks, tc)
        result.model.save(self.out / "model_adv.json")
        self.summary["adv_validation_accuracy"] = result.validation_accuracy
        base_model = self.model
        self.model = result.model
        try:
            rep = self._fidelity(self.eval_samples, self.eval_ids, "post_adv_clean")
            self.summary["fidelity_post_adv_clean"] = rep.fidelity
            if self.attacked:
                rep = self._fidelity(self.attacked, self.attacked_ids, "post_adv_attacked")
                self.summary["fidelity_post_adv_attacked"] = rep.fidelity
        finally:
            self.model = base_model

    @_stage("report")
    def report(self):
        _write_json(self.out / "summary.json", self.summary)
        self.summary["plots"] = render_plots(self.out)
        _write_json(self.out / "summary.json", self.summary)

    def run(self, stages=STAGES):
        cfg = self.cfg
        mt = cfg.metrics
        enabled = {
            "data": True, "train": True, "evaluate": True,
            # an explicit stage list (CLI subcommand) always wants attributions
            "attribute": stages is not STAGES or any([mt.fidelity, mt.non_pert, mt.aopc, mt.drift, cfg.attack]),
            "fidelity": mt.fidelity or mt.non_pert,
            "aopc": mt.aopc is not None,
            "random_baseline": mt.random_baseline,
            "drift": mt.drift is not None,
            "attack": cfg.attack is not None,
            "advtrain": cfg.adv_training and cfg.attack is not None,
            "report": True,
        }
        for name in STAGES:
            if name in stages and enabled[name]:
                getattr(self, name)()
        return self.summary


def run_experiment(cfg: ExperimentConfig, stages=STAGES) -> dict:
    """Run the pipeline and return the summary dictionary (also written to summary.json)."""
    cfg.validate()
    return Experiment(cfg).run(stages)
