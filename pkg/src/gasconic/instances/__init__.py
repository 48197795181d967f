"""Bundled example instances and the default demand profile."""

from importlib import resources


def instance_path(name):
    return resources.files(__name__) / name


def read_instance(name) -> bytes:
    return (resources.files(__name__) / name).read_bytes()
