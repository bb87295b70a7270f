"""securessd: deterministic simulator of a computational SSD whose offloaded
programs run inside in-storage trusted execution environments.

The package models the flash array and FTL, TrustZone-style three-region
DRAM protection, counter-mode DRAM encryption with dual integrity trees, a
stream cipher on the flash data path, and the TEE runtime that ties them
together, plus workload generators and experiment orchestration.
"""

from .sim import Simulator, SeededRng, SimClock, Event
from .flash import FlashGeometry, FlashTimings, FlashArray, PpaCodec

__all__ = [
    "Simulator", "SeededRng", "SimClock", "Event",
    "FlashGeometry", "FlashTimings", "FlashArray", "PpaCodec",
]

__version__ = "0.1.0"
