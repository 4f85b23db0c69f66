"""Bundled scene and PDDL fixtures."""
