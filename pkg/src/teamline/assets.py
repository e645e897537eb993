"""Bundled prompt and golden-file assets, addressable as `asset:<name>` in configs."""

from importlib import resources

ASSET_PREFIX = "asset:"

_SUFFIXES = ("", ".txt", ".md", ".json")


class UnknownAsset(KeyError):
    pass


def _package_files():
    return resources.files("teamline") / "assets"


def list_assets() -> list:
    names = []
    for entry in _package_files().iterdir():
        if entry.is_file():
            names.append(entry.name)
    return sorted(names)


def load_asset(name: str) -> str:
    """Load a bundled asset by bare name or filename."""
    root = _package_files()
    for suffix in _SUFFIXES:
        candidate = root / (name + suffix)
        if candidate.is_file():
            return candidate.read_text(encoding="utf-8")
    raise UnknownAsset(name)


def resolve(value: str) -> str:
    """Expand an `asset:<name>` reference, or return the value unchanged."""
    if isinstance(value, str) and value.startswith(ASSET_PREFIX):
        return load_asset(value[len(ASSET_PREFIX):])
    return value
