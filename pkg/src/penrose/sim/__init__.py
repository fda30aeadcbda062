"""Fleet simulation: synthetic corpus, analytic oracle and the event-driven engine."""
from .analytic import analytic_coverage, messages_for_coverage, predicted_time_to_quantile
from .corpus import Corpus, CorpusSpec, generate_corpus
from .engine import SimConfig, SimReport, Simulator, popularity, run_sim
from .latency import TransportLatencyModel

__all__ = ["Corpus", "CorpusSpec", "SimConfig", "SimReport", "Simulator", "TransportLatencyModel",
           "analytic_coverage", "generate_corpus", "messages_for_coverage", "popularity",
           "predicted_time_to_quantile", "run_sim"]
