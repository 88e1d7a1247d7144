"""Emergency-call triage pipeline.

Degraded VoIP calls are simulated (or terminated live over WebSocket),
transcribed, reconstructed against a corpus of past emergencies, scored for
severity, and ranked in a live dispatcher queue. An evaluation kit scores
reconstructions and classifications against gold fixtures.
"""

__version__ = "0.1.0"

from .netsim import ChannelConfig, DeliveryTrace, PacketFrame  # noqa: F401
from .triage import SeverityLevel  # noqa: F401
