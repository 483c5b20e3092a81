"""Coordinate-MLP fitting with the tanh(beta*sin(omega0*x)) activation."""

__version__ = "0.1.0"

from .activations import Activation, Kind  # noqa: E402
from .network import CoordinateNet, NetConfig, init_net  # noqa: E402

__all__ = ["Activation", "Kind", "CoordinateNet", "NetConfig", "init_net", "__version__"]
