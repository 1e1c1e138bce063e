"""Logging and configuration helpers for the Lua semantics engine."""
