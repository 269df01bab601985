"""Textual membership-query synthesis."""

import json
import os
from pathlib import Path

from ._tmq import (
    Oracle,
    Service,
    SynthesisStarvation,
    TmqError,
    Workspace,
    load_dataset,
)

METHODS = ("S-MQ", "US-HC-MQ", "US-BS-MQ", "S-HC-MQ")
POOL_METHODS = METHODS + ("IDEAL", "WNA")


def data_dir():
    """Bundled data: $TMQ_DATA_DIR, the installed copy, or the source tree's data/."""
    env = os.environ.get("TMQ_DATA_DIR")
    if env:
        return Path(env)
    here = Path(__file__).resolve().parent
    for candidate in (here / "data", here.parent.parent / "data"):
        if (candidate / "embeddings.txt").exists():
            return candidate
    return here / "data"


def default_workspace():
    d = data_dir()
    return Workspace(
        d / "embeddings.txt",
        d / "pos_lexicon.tsv",
        suffix_rules=d / "suffix_rules.tsv",
        synonyms=d / "synonyms.tsv",
    )


def synthesize(workspace, core, method="US-HC-MQ", count=20, **options):
    """Membership queries as dicts; `core` is a list of (text, label)."""
    lines = workspace.synthesize_jsonl(core, method, count, **options)
    return [json.loads(line) for line in lines.splitlines() if line]


__all__ = [
    "METHODS",
    "POOL_METHODS",
    "Oracle",
    "Service",
    "SynthesisStarvation",
    "TmqError",
    "Workspace",
    "data_dir",
    "default_workspace",
    "load_dataset",
    "synthesize",
]
