"""Shared fixtures: the built-in case study and small hand-made specs."""

import pytest

from adaptive_placement.config import application_from_dict, infrastructure_from_dict
from adaptive_placement.model import (
    ApplicationSpec,
    Component,
    Dependency,
    Deployment,
    Flavour,
    InfrastructureSpec,
    Link,
    Node,
)
from adaptive_placement.presets import APPLICATION, INFRASTRUCTURE, SCENARIOS
from adaptive_placement.simulator import library_from_dict

ROUND_ZERO = {
    "api": ("large", "private1"),
    "database": ("large", "private5"),
    "etcd": ("large", "private1"),
    "frontend": ("large", "public1"),
    "identity_provider": ("large", "private3"),
    "load_balancer": ("large", "public1"),
    "redis": ("large", "private3"),
}


@pytest.fixture
def case_app():
    return application_from_dict(APPLICATION)


@pytest.fixture
def case_infra():
    return infrastructure_from_dict(INFRASTRUCTURE)


@pytest.fixture
def round_zero():
    """Optimal first deployment of the case study."""
    return Deployment.from_mapping(ROUND_ZERO)


@pytest.fixture
def scenario_library():
    return library_from_dict(SCENARIOS)


@pytest.fixture
def tiny_app():
    """Two components: web (large/tiny) calling a mandatory db."""
    web = Component(
        "web",
        (
            Flavour("large", 2, {"cpu": 4}, {}, (Dependency("db"),), 20.0),
            Flavour("tiny", 1, {"cpu": 2}, {}, (Dependency("db"),), 10.0),
        ),
    )
    db = Component("db", (Flavour("std", 1, {"cpu": 2}, {"disk": ("ssd",)}, (), 30.0),))
    return ApplicationSpec("tiny", (web, db), 1000.0, 1000.0, 10.0)


@pytest.fixture
def tiny_infra():
    """Two linked nodes; only n2 has an ssd."""
    return InfrastructureSpec(
        (
            Node("n1", {"cpu": 4}, {"disk": "hdd"}, {"cpu": 1.0}, 100.0),
            Node("n2", {"cpu": 6}, {"disk": "ssd"}, {"cpu": 1.0}, 200.0),
        ),
        (Link(("n1", "n2"), latency=5.0, availability=0.99),),
    )


@pytest.fixture
def crowded_app():
    """Three 500-cpu components; any two fit in 1200 cpu, all three do not."""
    components = tuple(Component(name, (Flavour("large", 1, {"cpu": 500}, {}, (), 10.0),)) for name in "abc")
    return ApplicationSpec("crowded", components, 1000.0, 1000.0, 10.0)


@pytest.fixture
def crowded_infra():
    return InfrastructureSpec((Node("n1", {"cpu": 1500}, {}, {"cpu": 0.001}, 100.0),))
