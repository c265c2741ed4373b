"""famsim: dynamics, control and closed-loop simulation of a tilted-rotor
fully-actuated aerial manipulator."""

__version__ = "0.1.0"

from .dynamics import BodyParams, InternalSolution, SystemModel  # noqa: F401
from .sim import ScenarioConfig, SimLog, run_scenario  # noqa: F401
