"""Decentralized H2 state-feedback synthesis for sparse interconnected
systems: a convex block-diagonal-Lyapunov restriction solved centrally,
by consensus ADMM over a chordal clique decomposition, or by a simulated
network of message-passing agents that never exchange model data."""
