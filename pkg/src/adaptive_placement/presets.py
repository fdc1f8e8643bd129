"""
Built-in case study: a seven-service web application on a two-tier network.

The application is a load balancer in front of a web frontend, an API and
four backing services (cache, database, identity provider, key-value store).
Each service comes in one to three flavours:

    large   importance 3
    medium  importance 2
    tiny    importance 1

The infrastructure has two public nodes and five private ones. The private
nodes form a full mesh; each public node reaches the other one and the first
two private nodes. Only private1 and private5 offer encrypted storage, which
the database requires.

The campaign applies the same two scenarios in every round: a CPU and RAM
degradation of public1 between ticks 31 and 98, and a half-period energy
spike of the database between ticks 30 and 90.

Usage:
    >>> from adaptive_placement.presets import PRESETS
    >>> app_doc = PRESETS["application"]       # {"app": {...}}
    >>> campaign = PRESETS["campaign"]
"""

from typing import Any

# =============================================================================
# Application
# =============================================================================

IMPORTANCE: dict[str, int] = {"tiny": 1, "medium": 2, "large": 3}

COMMUNICATION_W: float = 2.0


def _flavour(
    name: str,
    cpu: float,
    ram: float,
    energy_w: float,
    uses: list[str],
    attributes: dict[str, list[Any]],
    storage: float = 0.0,
) -> dict[str, Any]:
    resources: dict[str, float] = {"cpu": cpu, "ram": ram}
    if storage:
        resources["storage"] = storage
    return {
        "name": name,
        "importance": IMPORTANCE[name],
        "resources": resources,
        "attributes": attributes,
        "uses": [
            {"component": target, "min_importance": 1, "comm_w": COMMUNICATION_W} for target in uses
        ],
        "energy_w": energy_w,
    }


_PUBLIC = {"subnet": ["public"]}
_PRIVATE = {"subnet": ["private"]}
_API_USES = ["redis", "database", "identity_provider", "etcd"]

APPLICATION: dict[str, Any] = {
    "name": "case_study",
    "budgets": {"monetary": 1000.0, "carbon": 5000.0, "energy": 10.0},
    "components": [
        {
            "name": "load_balancer",
            "mandatory": True,
            "flavours": [
                _flavour("large", 500, 512, 30.0, ["frontend"], _PUBLIC),
                _flavour("tiny", 200, 256, 15.0, ["frontend"], _PUBLIC),
            ],
        },
        {
            "name": "frontend",
            "mandatory": True,
            "flavours": [
                _flavour("large", 1000, 1024, 60.0, ["api"], _PUBLIC),
                _flavour("tiny", 500, 512, 30.0, ["api"], _PUBLIC),
            ],
        },
        {
            "name": "api",
            "mandatory": True,
            "flavours": [
                _flavour("large", 2000, 2048, 25.0, _API_USES, _PRIVATE),
                _flavour("medium", 1000, 1024, 18.0, _API_USES, _PRIVATE),
                _flavour("tiny", 500, 512, 10.0, _API_USES, _PRIVATE),
            ],
        },
        {
            "name": "redis",
            "mandatory": True,
            "flavours": [
                _flavour("large", 1000, 2048, 20.0, [], _PRIVATE),
                _flavour("tiny", 500, 512, 10.0, [], _PRIVATE),
            ],
        },
        {
            "name": "database",
            "mandatory": True,
            "flavours": [
                _flavour(
                    "large",
                    2000,
                    4096,
                    100.0,
                    [],
                    {"subnet": ["private"], "encrypted_storage": [True]},
                    storage=20000,
                ),
            ],
        },
        {
            "name": "identity_provider",
            "mandatory": True,
            "flavours": [
                _flavour("large", 1000, 1024, 80.68, [], _PRIVATE),
                _flavour("tiny", 500, 512, 40.0, [], _PRIVATE),
            ],
        },
        {
            "name": "etcd",
            "mandatory": True,
            "flavours": [
                _flavour("large", 500, 1024, 10.0, [], _PRIVATE),
            ],
        },
    ],
}


# =============================================================================
# Infrastructure
# =============================================================================

_COSTS = {"cpu": 0.01, "ram": 0.005, "storage": 0.001}


def _node(
    name: str,
    cpu: float,
    ram: float,
    storage: float,
    intensity: float,
    subnet: str,
    encrypted: bool = False,
) -> dict[str, Any]:
    return {
        "name": name,
        "capacities": {"cpu": cpu, "ram": ram, "storage": storage},
        "attributes": {"subnet": subnet, "encrypted_storage": encrypted},
        "costs": dict(_COSTS),
        "carbon_intensity": intensity,
        "available": True,
    }


_PRIVATE_NODES = ["private1", "private2", "private3", "private4", "private5"]

INFRASTRUCTURE: dict[str, Any] = {
    "nodes": [
        _node("public1", 2000, 2048, 10000, 300, "public"),
        _node("public2", 2000, 2048, 10000, 100, "public"),
        _node("private1", 2500, 3072, 30000, 493, "private", encrypted=True),
        _node("private2", 800, 1024, 5000, 120, "private"),
        _node("private3", 2000, 4096, 10000, 883, "private"),
        _node("private4", 2000, 4096, 10000, 150, "private"),
        _node("private5", 4000, 8192, 50000, 413, "private", encrypted=True),
    ],
    "links": (
        [{"endpoints": ["public1", "public2"], "latency": 5.0, "availability": 0.999}]
        + [
            {"endpoints": [public, private], "latency": 10.0, "availability": 0.99}
            for public in ("public1", "public2")
            for private in ("private1", "private2")
        ]
        + [
            {"endpoints": [a, b], "latency": 2.0, "availability": 0.999}
            for i, a in enumerate(_PRIVATE_NODES)
            for b in _PRIVATE_NODES[i + 1 :]
        ]
    ),
}


# =============================================================================
# Scenarios and campaign
# =============================================================================

SCENARIOS: dict[str, list[dict[str, Any]]] = {
    "degrade_public1": [
        {"node": "public1", "quantity": "cpu", "shape": "constant", "delta": -1200, "from": 31, "to": 98},
        {"node": "public1", "quantity": "ram", "shape": "constant", "delta": -1100, "from": 31, "to": 98},
    ],
    "database_spike": [
        {
            "component": "database",
            "quantity": "energy_w",
            "shape": "sinusoidal",
            "amplitude": 200,
            "period": 120,
            "from": 30,
            "to": 90,
        },
    ],
    "quiet": [],
}

CAMPAIGN_ROUNDS: int = 6

CAMPAIGN: dict[str, Any] = {
    "name": "case_study",
    "application": "application",
    "infrastructure": "infrastructure",
    "modes": ["bestfit", "solver-only", "solver+energy", "solver+failure", "full-freeda"],
    "rounds": CAMPAIGN_ROUNDS,
    "ticks": 120,
    "tick_minutes": 1.0,
    "seed": 0,
    "priority": "failure",
    "time_limit": 300.0,
    "thresholds": {"service_gco2": 50.0, "connection_gco2": 50.0},
    "scenarios": SCENARIOS,
    "update_policy": {
        "application": [{"scenario": "database_spike", "repeat": CAMPAIGN_ROUNDS}],
        "infrastructure": [{"scenario": "degrade_public1", "repeat": CAMPAIGN_ROUNDS}],
    },
    "output_dir": "results",
    "charts": False,
}


PRESETS: dict[str, dict[str, Any]] = {
    "application": {"app": APPLICATION},
    "infrastructure": {"infra": INFRASTRUCTURE},
    "campaign": CAMPAIGN,
}


def get_preset_names() -> list[str]:
    """Return the names accepted by ``adaptive-placement preset``."""
    return list(PRESETS.keys())
