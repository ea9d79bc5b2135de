# Agent modules for fidelity_agents
