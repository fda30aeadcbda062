"""Aggregation server.  Imports only public-key crypto."""
from .store import AshStore, Outcome

__all__ = ["AshStore", "Outcome"]
