"""Client side: trace ingestion, sampling, accumulation and transmission."""
from .client import Agent, AgentStats, VirtualClock, WallClock, run_agent
from .sampler import AccumulatorSet, SamplerState, reset_epoch, sampled_mask, should_sample
from .trace import Diagnostic, KernelRecord, TraceError, ingest_trace, read_trace

__all__ = ["AccumulatorSet", "Agent", "AgentStats", "Diagnostic", "KernelRecord", "SamplerState",
           "TraceError", "VirtualClock", "WallClock", "ingest_trace", "read_trace", "reset_epoch",
           "run_agent", "sampled_mask", "should_sample"]
