"""Runnable applications: benchmark CLI, file readers, and demo problems."""
