"""Scorer server speaking the claim-correction wire protocol."""

from .backends import CopyProposer, HashContextLM, ModelError, OverlapVerifier
from .server import ScorerService, SidecarConfig, serve_stdio, serve_tcp

__version__ = "0.1.0"

__all__ = [
    "CopyProposer",
    "HashContextLM",
    "ModelError",
    "OverlapVerifier",
    "ScorerService",
    "SidecarConfig",
    "serve_stdio",
    "serve_tcp",
]
