"""Persistence for runs: schema-versioned JSON artifacts, run manifests,
and per-output-directory locking.

Artifacts are written with sorted keys and no timestamps, so identical
seeds reproduce byte-identical files; wall-clock bookkeeping lives only in
the run manifest. Loading validates the schema id and rejects unknown
fields loudly rather than guessing at forward compatibility.
"""

from __future__ import annotations

import json
import os
import time
from pathlib import Path

from .errors import ArtifactError

__all__ = [
    "SCHEMAS",
    "dump_artifact",
    "load_artifact",
    "write_manifest",
    "finish_manifest",
    "OutputLock",
]

SCHEMAS: dict[str, set[str]] = {
    "tvn.zoo/1": {
        "seed", "closed", "open", "reference", "score",
    },
    "tvn.prompt/1": {
        "target", "substitutes", "reference", "seed", "base_id", "base",
        "suffix", "alphabet", "suffix_len", "f1", "f2", "f3",
        "attacked_score", "no_attack_score", "target_drop", "unevolved",
        "per_prompt", "zoo_seed",
    },
    "tvn.band/1": {
        "target", "mu", "sigma", "low", "high", "samples", "seed",
        "prompt_artifact", "base", "suffix", "alphabet", "zoo_seed",
    },
    "tvn.decision/1": {
        "claimed", "actual", "shot", "scores", "mean_score", "verdict",
        "band", "seed",
    },
    "tvn.metrics/1": {
        "setting", "shots", "trials", "per_target", "average", "seed",
        "zoo_seed",
    },
    "tvn.manifest/1": {
        "command", "argv", "config", "seed", "timestamps", "artifacts",
        "zoo", "out_dir",
    },
}


def _encode(schema: str, payload: dict) -> str:
    body = {"schema": schema, **payload}
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


def dump_artifact(path, schema: str, payload: dict) -> Path:
    if schema not in SCHEMAS:
        raise ArtifactError(f"unknown artifact schema {schema!r}")
    unknown = set(payload) - SCHEMAS[schema]
    if unknown:
        raise ArtifactError(
            f"fields {sorted(unknown)} not allowed by {schema}"
        )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_encode(schema, payload), encoding="utf-8")
    return path


def load_artifact(path, expected_schema: str | None = None) -> dict:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"artifact {path} does not exist")
    try:
        body = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"artifact {path} is not valid JSON: {exc}")
    if not isinstance(body, dict) or "schema" not in body:
        raise ArtifactError(f"artifact {path} carries no schema id")
    schema = body.pop("schema")
    if expected_schema is not None and schema != expected_schema:
        raise ArtifactError(
            f"artifact {path} has schema {schema!r}, expected {expected_schema!r}"
        )
    if schema not in SCHEMAS:
        raise ArtifactError(f"artifact {path} has unknown schema {schema!r}")
    unknown = set(body) - SCHEMAS[schema]
    if unknown:
        raise ArtifactError(
            f"artifact {path} carries unknown fields {sorted(unknown)}"
        )
    return body


def write_manifest(out_dir, command: str, argv: list[str], config: dict,
                   seed: int, zoo: dict | None) -> Path:
    """Record the run before any work happens; replaying the manifest's
    config reproduces the primary outputs byte for byte."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"manifest-{command}.json"
    payload = {
        "command": command,
        "argv": argv,
        "config": config,
        "seed": seed,
        "zoo": zoo,
        "out_dir": str(out_dir),
        "timestamps": {"started": time.strftime("%Y-%m-%dT%H:%M:%S%z")},
        "artifacts": [],
    }
    path.write_text(_encode("tvn.manifest/1", payload), encoding="utf-8")
    return path


def finish_manifest(path, artifacts: list[str]) -> None:
    body = load_artifact(path, "tvn.manifest/1")
    body["artifacts"] = sorted(str(a) for a in artifacts)
    body["timestamps"]["finished"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    Path(path).write_text(_encode("tvn.manifest/1", body), encoding="utf-8")


class OutputLock:
    """Exclusive advisory lock on an output directory."""

    def __init__(self, out_dir):
        self.path = Path(out_dir) / ".tvn.lock"

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ArtifactError(
                f"output directory is locked by another run ({self.path}); "
                "remove the lock file if that run is dead"
            )
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))
        return self

    def __exit__(self, *exc):
        try:
            self.path.unlink()
        except FileNotFoundError:
            pass
        return False
