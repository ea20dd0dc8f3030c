import numpy as np
import pytest

from dauc import classifier, synth
from dauc.categorize import build_index, categorize, score, set_thresholds
from dauc.data import LabeledFeatures, LatentDataset, NormalizationStats
from dauc.kde import KernelKind

TRAIN_RECIPE = dict(learning_rate=0.5, epochs=2000, seed=0)


def run_pipeline(bundle, tcfg=None, kernel=None):
    """Train the linear model and produce latent datasets plus a categorization."""
    tcfg = tcfg or classifier.TrainConfig(**TRAIN_RECIPE)
    kernel = kernel or KernelKind("gaussian", 1.0)
    train = bundle.train
    stats = NormalizationStats.fit(train.x)
    z_train = LabeledFeatures(train.ids, stats.transform(train.x), train.y,
                              train.num_classes)
    model = classifier.train_linear(z_train, tcfg)

    raw = {}
    for name in ("train", "val", "test"):
        feats = bundle.split(name)
        raw[name] = (classifier.predict(model, stats.transform(feats.x)), feats)
    latent_stats = NormalizationStats.fit(raw["train"][0].latents)
    datasets = {}
    for name, (pred, feats) in raw.items():
        datasets[name] = LatentDataset(
            ids=feats.ids,
            latents=latent_stats.transform(pred.latents),
            y_true=feats.y,
            y_pred=pred.y_pred,
            num_classes=feats.num_classes,
            u=classifier.entropy_uncertainty(pred.probs),
        )
    val_acc = float(np.mean(datasets["val"].y_pred == datasets["val"].y_true))
    index = build_index(datasets["train"], datasets["val"], kernel)
    table = set_thresholds(score(index, datasets["test"]), val_acc, val_acc)
    report = categorize(table)
    return {
        "bundle": bundle,
        "model": model,
        "input_stats": stats,
        "latent_stats": latent_stats,
        "datasets": datasets,
        "val_acc": val_acc,
        "kernel": kernel,
        "index": index,
        "table": table,
        "report": report,
        "tcfg": tcfg,
    }


@pytest.fixture(scope="session")
def two_smiles_pipeline():
    return run_pipeline(synth.make_two_smiles(synth.TwoSmilesConfig(seed=0)))


@pytest.fixture(scope="session")
def idm_pipeline():
    return run_pipeline(synth.make_idm_clusters(synth.IdmClustersConfig(seed=0)))


@pytest.fixture(scope="session")
def small_smiles_pipeline():
    cfg = synth.TwoSmilesConfig(n_moons=400, cluster_n=25, ood_n=40, seed=3)
    tcfg = classifier.TrainConfig(learning_rate=0.5, epochs=400, seed=3)
    return run_pipeline(synth.make_two_smiles(cfg), tcfg=tcfg)


def random_latent_dataset(rng, n, d, num_classes, prefix="r", with_u=False,
                          allow_ood=False):
    latents = rng.standard_normal((n, d))
    lo = -1 if allow_ood else 0
    y_true = rng.integers(lo, num_classes, size=n)
    y_pred = rng.integers(0, num_classes, size=n)
    u = rng.uniform(0, 1, size=n) if with_u else None
    return LatentDataset(
        ids=tuple(f"{prefix}{i}" for i in range(n)),
        latents=latents,
        y_true=y_true,
        y_pred=y_pred,
        num_classes=num_classes,
        u=u,
    )
