"""The three bundled example product lines."""
from __future__ import annotations

from importlib import resources

from ..bundle import SpecBundle, loads_bundle

FIXTURES = {
    "eshop": "eshop.json",
    "ticketmach": "ticketmach.json",
    "alarmsys": "alarmsys.json",
}


def fixture_text(name: str) -> str:
    try:
        filename = FIXTURES[name.lower()]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}") from None
    return resources.files(__name__).joinpath(filename).read_text()


def load_fixture(name: str) -> SpecBundle:
    return loads_bundle(fixture_text(name))


def load_all() -> dict[str, SpecBundle]:
    return {name: load_fixture(name) for name in FIXTURES}
