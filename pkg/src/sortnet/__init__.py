"""Small-depth sorting networks: verification, symmetric prefix search, SAT completion."""

from sortnet.network import (
    ChannelPermutation,
    Comparator,
    Layer,
    Network,
    NetworkFormatError,
    compose,
    format_network,
    is_reflection_symmetric,
    parse_network,
    permute_channels,
    project_drop_last_channel,
    reflect,
    stack,
)

__all__ = [
    "ChannelPermutation",
    "Comparator",
    "Layer",
    "Network",
    "NetworkFormatError",
    "compose",
    "format_network",
    "is_reflection_symmetric",
    "parse_network",
    "permute_channels",
    "project_drop_last_channel",
    "reflect",
    "stack",
]

__version__ = "0.1.0"
