"""Shared fixtures: small seeded datasets and fitted models."""

from __future__ import annotations

import numpy as np
import pytest

from comet import fit, generate, preset, train_eval_split

import helpers
from helpers import correlated_pair, make_dataset


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the per-criterion acceptance verdicts collected during the run."""
    if helpers.ACCEPTANCE_LOG:
        terminalreporter.section("acceptance criteria")
        for line in helpers.ACCEPTANCE_LOG:
            terminalreporter.line(line)


@pytest.fixture(scope="session")
def small_fit():
    """A 40x6 correlated dataset and its fitted model."""
    rng = np.random.default_rng(101)
    text, audio = correlated_pair(rng, 40, 6)
    dataset = make_dataset(text, audio)
    return dataset, fit(dataset)


@pytest.fixture(scope="session")
def aligned_bundle():
    """Generated `aligned` preset: dataset, truth, split, fitted model."""
    dataset, truth = generate(preset("aligned"))
    train, eval_set = train_eval_split(dataset)
    return {
        "dataset": dataset,
        "truth": truth,
        "train": train,
        "eval": eval_set,
        "model": fit(train),
    }
