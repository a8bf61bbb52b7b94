"""Named experiment setups.

Two flavors. The toy presets run on the shipped synthetic problems and are
what the tests and the quickstart use. The cifar presets record reference
hyperparameter settings for image-classification training at a scale this
package does not ship data or models for; they exist so the settings live
somewhere executable-adjacent, and asking to run one raises a clear error.
"""

from __future__ import annotations

import copy

from .core import ConfigurationError

PRESETS: dict = {
    "toy-spirals": {
        "runnable": True,
        "description": "two-spirals MLP benchmark, sgd vs samar",
        "config": {
            "problem": {
                "kind": "mlp-spirals",
                "hidden": [128],
                "train_per_class": 1000,
                "test_per_class": 250,
                "noise": 0.3,
                "data_seed": 7,
            },
            "optimizers": {
                "sgd": {},
                "samar": {
                    "rho": 0.125,
                    "lambda0": 1.0,
                    "chi": 1.0,
                    "gamma": 1.5,
                    "delta": 0.01,
                },
            },
            "schedule": {"kind": "cosine-anneal", "eta0": 0.5},
            "run": {
                "epochs": 100,
                "batch_size": 32,
                "seeds": list(range(1, 11)),
                "weight_decay": 0.0,
            },
        },
    },
    "toy-spirals-all": {
        "runnable": True,
        "description": "two-spirals MLP with all four optimizers, fewer seeds",
        "config": {
            "problem": {
                "kind": "mlp-spirals",
                "hidden": [128],
                "train_per_class": 1000,
                "test_per_class": 250,
                "noise": 0.3,
                "data_seed": 7,
            },
            "optimizers": {
                "sgd": {},
                "sam": {"rho": 0.125},
                "vasso": {"rho": 0.125, "theta": 0.9},
                "samar": {
                    "rho": 0.125,
                    "lambda0": 1.0,
                    "chi": 1.0,
                    "gamma": 1.5,
                    "delta": 0.01,
                },
            },
            "schedule": {"kind": "cosine-anneal", "eta0": 0.5},
            "run": {
                "epochs": 100,
                "batch_size": 32,
                "seeds": [1, 2, 3],
                "weight_decay": 0.0,
            },
        },
    },
    "toy-blobs-logistic": {
        "runnable": True,
        "description": "logistic regression on gaussian blobs, quick smoke run",
        "config": {
            "problem": {"kind": "logistic-blobs", "l2_coeff": 0.001, "data_seed": 7},
            "optimizers": {"sgd": {}, "samar": {"rho": 0.05}},
            "schedule": {"kind": "cosine-anneal", "eta0": 0.5},
            "run": {"epochs": 20, "batch_size": 64, "seeds": [1, 2, 3]},
        },
    },
}

# Reference settings for full-scale image classification (100 epochs, batch
# 256, decoupled weight decay 5e-4, lambda0 = 1, delta = 0.01, vasso theta
# 0.9). Not runnable here: no image datasets or conv nets ship with this
# package.
REFERENCE_PRESETS: dict = {
    "cifar10-resnet34-samar": {
        "lr": 0.3, "rho": 0.10, "gamma": 1.550, "chi": 1.100,
        "lambda0": 1.0, "delta": 0.01, "weight_decay": 0.0005,
        "batch_size": 256, "epochs": 100,
    },
    "cifar10-wrn2810-samar": {
        "lr": 0.1, "rho": 0.10, "gamma": 1.400, "chi": 1.050,
        "lambda0": 1.0, "delta": 0.01, "weight_decay": 0.0005,
        "batch_size": 256, "epochs": 100,
    },
    "cifar100-resnet34-samar": {
        "lr": 0.3, "rho": 0.10, "gamma": 1.400, "chi": 1.075,
        "lambda0": 1.0, "delta": 0.01, "weight_decay": 0.0005,
        "batch_size": 256, "epochs": 100,
    },
    "cifar100-wrn2810-samar": {
        "lr": 0.3, "rho": 0.15, "gamma": 1.500, "chi": 1.000,
        "lambda0": 1.0, "delta": 0.01, "weight_decay": 0.0005,
        "batch_size": 256, "epochs": 100,
    },
}


def resolve_preset(name: str) -> dict:
    """Return a copy of the named preset's config dict."""
    if name in PRESETS:
        return copy.deepcopy(PRESETS[name]["config"])
    if name in REFERENCE_PRESETS:
        raise ConfigurationError(
            f"preset {name!r} is a reference setting for CIFAR-scale training and"
            " cannot run here; use a toy-* preset or a config file"
        )
    known = sorted(PRESETS) + sorted(REFERENCE_PRESETS)
    raise ConfigurationError(f"unknown preset {name!r}; known presets: {known}")


def list_presets() -> "list[tuple[str, str]]":
    rows = [(name, meta["description"]) for name, meta in sorted(PRESETS.items())]
    rows += [
        (name, "reference hyperparameters (not runnable)")
        for name in sorted(REFERENCE_PRESETS)
    ]
    return rows
