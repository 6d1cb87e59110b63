"""Trajectory generators, oracles and serializations for the experiment tasks."""
