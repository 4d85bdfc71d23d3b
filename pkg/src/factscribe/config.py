"""Configuration: window/refinement defaults, backend bindings, service options.

Loaded from a JSON file and overridable through FACTSCRIBE_* environment
variables, so the same build runs hermetically on mocks or against a remote
inference service without code changes.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .backends.base import Backends, ModelRole
from .refine import RefinementConfig
from .windowing import WindowConfig

ENV_CONFIG_FILE = "FACTSCRIBE_CONFIG"
ENV_WINDOW = "FACTSCRIBE_W"
ENV_UPDATE = "FACTSCRIBE_X"
ENV_N_MAX = "FACTSCRIBE_N_MAX"
ENV_TEMPLATE = "FACTSCRIBE_TEMPLATE"
ENV_PERSIST_DIR = "FACTSCRIBE_PERSIST_DIR"
ENV_AUTH_TOKEN = "FACTSCRIBE_AUTH_TOKEN"
ENV_REMOTE_URL = "FACTSCRIBE_REMOTE_URL"


@dataclass(frozen=True)
class BackendSpec:
    """How one model role is served."""

    kind: str = "mock"  # mock | remote
    url: str = ""
    timeout: float = 10.0
    retries: int = 1
    max_concurrency: int = 4
    auth_token: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "remote"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "remote" and not self.url:
            raise ValueError("remote backend requires a url")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "url": self.url,
            "timeout": self.timeout,
            "retries": self.retries,
            "max_concurrency": self.max_concurrency,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BackendSpec":
        return cls(
            kind=data.get("kind", "mock"),
            url=data.get("url", ""),
            timeout=float(data.get("timeout", 10.0)),
            retries=int(data.get("retries", 1)),
            max_concurrency=int(data.get("max_concurrency", 4)),
            auth_token=data.get("auth_token", ""),
        )


def _default_backend_specs() -> dict[str, BackendSpec]:
    return {role.value: BackendSpec() for role in ModelRole}


@dataclass(frozen=True)
class AppConfig:
    window: WindowConfig = field(default_factory=WindowConfig)
    refine: RefinementConfig = field(default_factory=RefinementConfig)
    backends: dict = field(default_factory=_default_backend_specs)
    template: str = "general"
    persist_dir: str = ""
    auth_token: str = ""
    snapshot_every: int = 50

    def to_dict(self) -> dict:
        return {
            "window": self.window.to_dict(),
            "refine": self.refine.to_dict(),
            "backends": {role: spec.to_dict() for role, spec in self.backends.items()},
            "template": self.template,
            "persist_dir": self.persist_dir,
            "snapshot_every": self.snapshot_every,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AppConfig":
        backends = _default_backend_specs()
        for role, spec in data.get("backends", {}).items():
            ModelRole(role)  # reject unknown roles early
            backends[role] = BackendSpec.from_dict(spec)
        return cls(
            window=WindowConfig.from_dict(data.get("window", {})),
            refine=RefinementConfig.from_dict(data.get("refine", {})),
            backends=backends,
            template=data.get("template", "general"),
            persist_dir=data.get("persist_dir", ""),
            auth_token=data.get("auth_token", ""),
            snapshot_every=int(data.get("snapshot_every", 50)),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "AppConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def from_env(cls, env: Mapping[str, str] | None = None) -> "AppConfig":
        """Config file named by FACTSCRIBE_CONFIG (if any) plus env overrides."""
        env = os.environ if env is None else env
        if env.get(ENV_CONFIG_FILE):
            config = cls.from_file(env[ENV_CONFIG_FILE])
        else:
            config = cls()

        data = config.to_dict()
        if env.get(ENV_WINDOW):
            data["window"]["w"] = int(env[ENV_WINDOW])
        if env.get(ENV_UPDATE):
            data["window"]["x"] = int(env[ENV_UPDATE])
        if env.get(ENV_N_MAX):
            data["refine"]["n_max"] = int(env[ENV_N_MAX])
        if env.get(ENV_TEMPLATE):
            data["template"] = env[ENV_TEMPLATE]
        if env.get(ENV_PERSIST_DIR):
            data["persist_dir"] = env[ENV_PERSIST_DIR]
        if env.get(ENV_REMOTE_URL):
            for role in data["backends"]:
                data["backends"][role] = {"kind": "remote", "url": env[ENV_REMOTE_URL]}
        merged = cls.from_dict(data)
        if env.get(ENV_AUTH_TOKEN):
            merged = cls.from_dict({**data, "auth_token": env[ENV_AUTH_TOKEN]})
        return merged


def build_backends(config: AppConfig, transport=None) -> Backends:
    """Instantiate the per-role backends declared in the config.

    Mock roles share one MockModel instance; remote roles each get a client
    for their endpoint. ``transport`` is for tests that stub HTTP.
    """
    from .backends.mock import MockModel
    from .remote import RemoteBackend

    mock = MockModel()
    built = {}
    for role in ModelRole:
        spec = config.backends.get(role.value, BackendSpec())
        if spec.kind == "mock":
            built[role.value] = mock
        else:
            built[role.value] = RemoteBackend(role, spec, transport=transport)
    return Backends(
        draft=built[ModelRole.DRAFT.value],
        evaluator=built[ModelRole.EVALUATOR.value],
        refiner=built[ModelRole.REFINER.value],
        note_generator=built[ModelRole.NOTE_GENERATOR.value],
        aligner=built[ModelRole.ALIGNMENT.value],
    )
