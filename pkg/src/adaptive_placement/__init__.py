"""
Adaptive Placement - declarative deployment planning with closed-loop feedback.

Plans where the components of a multi-flavour application run on a
Cloud-Edge infrastructure, simulates the deployment, and turns what the
simulation observed (failures, energy use, carbon intensity) into soft
constraints for the next plan.
"""

__version__ = "1.0.0"
__author__ = "Adaptive Placement Contributors"

from adaptive_placement.campaign import CampaignConfig, Mode, load_campaign, run_campaign
from adaptive_placement.config import (
    load_application,
    load_infrastructure,
    parse_application,
    parse_infrastructure,
    save_application,
    save_infrastructure,
)
from adaptive_placement.energy import KnowledgeBase, generate_constraints, update_knowledge
from adaptive_placement.errors import (
    ConstraintParseError,
    LogParseError,
    NoDeploymentError,
    OracleSizeError,
    PlacementError,
    ScenarioError,
    SpecError,
)
from adaptive_placement.facts import parse_simulation_log
from adaptive_placement.failure import suggest
from adaptive_placement.harmonizer import Priority, harmonize
from adaptive_placement.model import (
    ApplicationSpec,
    Deployment,
    InfrastructureSpec,
    SoftConstraint,
    validate_specs,
)
from adaptive_placement.presets import PRESETS
from adaptive_placement.simulator import run_round
from adaptive_placement.solver import (
    ObjectiveMode,
    PlacementProblem,
    brute_force_oracle,
    solve,
    solve_with_relaxation,
    verify_deployment,
)
from adaptive_placement.strategies import best_fit, create_strategy, first_fit, get_available_strategies

__all__ = [
    "ApplicationSpec",
    "InfrastructureSpec",
    "Deployment",
    "SoftConstraint",
    "validate_specs",
    "verify_deployment",
    "load_application",
    "load_infrastructure",
    "parse_application",
    "parse_infrastructure",
    "save_application",
    "save_infrastructure",
    "PlacementProblem",
    "ObjectiveMode",
    "solve",
    "solve_with_relaxation",
    "brute_force_oracle",
    "first_fit",
    "best_fit",
    "create_strategy",
    "get_available_strategies",
    "parse_simulation_log",
    "suggest",
    "KnowledgeBase",
    "generate_constraints",
    "update_knowledge",
    "Priority",
    "harmonize",
    "run_round",
    "CampaignConfig",
    "Mode",
    "load_campaign",
    "run_campaign",
    "PRESETS",
    "PlacementError",
    "SpecError",
    "LogParseError",
    "ConstraintParseError",
    "ScenarioError",
    "OracleSizeError",
    "NoDeploymentError",
]
