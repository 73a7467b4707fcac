"""Deterministic simulator for clustered federated multitask learning in
hierarchical wireless networks (clients -> edge servers -> cloud).

Subsystems:
    synthdata      client populations with latent label-permutation tasks
    learner        flat-vector models, minibatch SGD, loss/accuracy
    radio          channel, rate, time and energy cost model
    clusterer      cosine similarity, split testing, bipartitioning
    scheduler      two-phase client selection policies
    orchestrator   the hierarchical round loop
    config/metrics/cli   experiment harness
"""

__version__ = "0.1.0"
