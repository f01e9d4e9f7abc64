"""Immune-inspired process anomaly detection toolkit.

Second-generation artificial-immune-system detector over syscall
streams and runtime-statistic context signals, plus the whitelist
baselines, synthetic dataset generator, benchmark protocol, and
evaluation reporting around it.
"""

__version__ = "0.1.0"

from .engine import (  # noqa: F401
    Alert,
    DetectionResult,
    Detector,
    DetectorVariant,
    TrainedProfile,
    VARIANTS,
    build_detector,
    train,
)
from .sessions import (  # noqa: F401
    Dataset,
    Session,
    SessionLabel,
    SignalReading,
    SyscallEvent,
    dedup_sessions,
    load_dataset,
    load_session,
    parse_signal_log,
    parse_syscall_trace,
)
from .synth import (  # noqa: F401
    SynthProfile,
    default_profile,
    synth_attack_session,
    synth_dataset,
    synth_normal_session,
)
from .tissue import Tissue, TissueContext, TissueParams, new_tissue  # noqa: F401
