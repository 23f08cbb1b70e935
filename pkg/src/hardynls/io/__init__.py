"""Configuration, persistence and run orchestration."""

from .cache import read_groundstate, read_groundstate_text, write_groundstate, write_groundstate_from
from .config import TASKS, RunConfig, load_document, parse_config, validate
from .persist import dumps, fmt, read_csv, sha256, write_csv, write_json

__all__ = [
    "TASKS",
    "RunConfig",
    "dumps",
    "fmt",
    "load_document",
    "parse_config",
    "read_csv",
    "read_groundstate",
    "read_groundstate_text",
    "sha256",
    "validate",
    "write_csv",
    "write_groundstate",
    "write_groundstate_from",
    "write_json",
]
