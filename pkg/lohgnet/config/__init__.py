"""
Configuration package.

Exports the settings singleton and the network configuration model.

Usage:
    from lohgnet.config import settings, NetworkConfig

    config = NetworkConfig(preset="tiny", precision=settings.precision)
"""

from lohgnet.config.settings import settings, get_settings, print_settings
from lohgnet.config.network import NetworkConfig

__all__ = [
    "settings",
    "get_settings",
    "print_settings",
    "NetworkConfig",
]
