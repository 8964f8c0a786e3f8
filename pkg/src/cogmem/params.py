"""Hyperparameters governing graph dynamics, retrieval, and maintenance.

Every knob the engine consumes lives here so a single config file can
reproduce any run. Defaults are the calibrated operating point; see README
for the meaning of each group.
"""

from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass(frozen=True)
class HyperParams:
    """Engine-wide tuning parameters with validated defaults.

    Groups:
      dynamics   — alpha, delta, spreading, rho, beta, inhibit_m, gamma,
                   theta, steps
      retrieval  — lambda1..lambda3 (fusion weights), top_k, anchor_k,
                   tau_gate
      maintenance — tau_dup, consolidation_n, prune_k, epsilon_dormant,
                   dormancy_w, max_active_nodes
      embedding  — embed_dim
    """

    alpha: float = 1.0           # anchor energy scaling
    delta: float = 0.5           # retention decay per propagation step
    spreading: float = 0.8       # spreading factor applied to each edge hop
    rho: float = 0.01            # temporal decay rate per timestamp unit
    beta: float = 0.15           # lateral inhibition strength
    inhibit_m: int = 7           # size of the top-potential inhibitor set
    gamma: float = 5.0           # sigmoid steepness
    theta: float = 0.5           # sigmoid threshold
    steps: int = 3               # propagation cycles per query
    lambda1: float = 0.5         # fused-score weight: query similarity
    lambda2: float = 0.3         # fused-score weight: final activation
    lambda3: float = 0.2         # fused-score weight: structural prior
    top_k: int = 30              # retrieval size
    anchor_k: int = 10           # anchors taken from each trigger stream
    tau_dup: float = 0.92        # concept dedup similarity threshold
    tau_gate: float = 0.12       # rejection confidence threshold
    consolidation_n: int = 5     # turns per consolidation window
    prune_k: int = 15            # max incoming edges per node
    epsilon_dormant: float = 0.01  # activation floor counted as dormant
    dormancy_w: int = 10         # dormant windows before archival
    max_active_nodes: int = 10000  # soft bound on the live graph
    embed_dim: int = 384         # embedding dimensionality

    def __post_init__(self):
        lam = self.lambda1 + self.lambda2 + self.lambda3
        if abs(lam - 1.0) > 1e-9:
            raise ValueError(
                f"fusion weights must sum to 1 (got {lam!r})")
        for name in ("lambda1", "lambda2", "lambda3", "tau_dup", "tau_gate",
                     "theta", "epsilon_dormant"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1] (got {value!r})")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1 (got {self.steps!r})")
        if self.inhibit_m < 1:
            raise ValueError(f"inhibit_m must be >= 1 (got {self.inhibit_m!r})")
        for name in ("alpha", "delta", "spreading", "rho", "beta", "gamma"):
            value = getattr(self, name)
            if value < 0:
                raise ValueError(f"{name} must be >= 0 (got {value!r})")
        for name in ("top_k", "anchor_k", "consolidation_n", "prune_k",
                     "dormancy_w", "max_active_nodes"):
            value = getattr(self, name)
            if value < 1:
                raise ValueError(f"{name} must be >= 1 (got {value!r})")
        if self.embed_dim < 8:
            raise ValueError(
                f"embed_dim must be >= 8 (got {self.embed_dim!r})")

    def replace(self, **changes) -> "HyperParams":
        """Return a validated copy with the given fields overridden."""
        current = {f.name: getattr(self, f.name) for f in fields(self)}
        current.update(changes)
        return HyperParams(**current)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "HyperParams":
        """Build from a config mapping, rejecting unknown keys."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown parameter keys: {', '.join(unknown)}")
        return cls(**data)
