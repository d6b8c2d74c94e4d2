"""Kernel contextual bandits for simple-regret minimisation."""

__version__ = "0.1.0"
#: version of the interface contract this release implements
INTERFACE_VERSION = "1.0"

from .confidence import ConfidenceBundle, ConfidenceParams, GapDecision  # noqa: E402
from .environments import EnvSpec, make_env  # noqa: E402
from .kernel_core import ArmState, KernelSpec  # noqa: E402
from .policies import POLICY_KINDS, BanditState, PolicyConfig  # noqa: E402

__all__ = [
    "__version__",
    "INTERFACE_VERSION",
    "ArmState",
    "KernelSpec",
    "ConfidenceParams",
    "ConfidenceBundle",
    "GapDecision",
    "PolicyConfig",
    "BanditState",
    "POLICY_KINDS",
    "EnvSpec",
    "make_env",
]
