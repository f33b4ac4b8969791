"""DQN-based adaptive forwarding strategy.

Builds per-face (omega, delta) states, selects faces epsilon-greedily over
the network's softmax outputs (low output = low predicted cost), rewards
deliveries with SRTT/omega and losses with a cost ceiling, trains on the
convex-combination target (1 - gamma) * Q + gamma * r, and periodically
retrains a random minibatch from replay memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .measurements import state_vector
from .neural import (
    Experience,
    Mlp,
    ReplayMemory,
    ShapeMismatch,
    load_params,
    make_optimizer,
    save_params,
    train_step,
)
from .strategies import NoNexthop, Strategy


class AlreadyResolved(RuntimeError):
    pass


class NoEligibleFace(NoNexthop):
    pass


@dataclass
class AgentConfig:
    gamma: float = 0.95
    epsilon_init: float = 1.0
    epsilon_decay: float = 0.005  # per resolved reward
    epsilon_min: float = 0.01
    kappa: int = 2000  # replay memory capacity
    rho: int = 100  # replay cadence (resolved experiences per retrain pass)
    psi: int = 32  # minibatch size
    learning_rate: float = 0.005
    optimizer: str = "rmsprop"
    reward_cap_ms: float = 1000.0
    loss_reward: float = 1.0  # normalized mode cost ceiling for losses
    reward_mode: str = "normalized"  # or "raw"
    raw_loss_reward: float = 10000.0
    greedy: str = "min"  # "max" kept as a sensitivity escape hatch


def compute_reward(delivered: bool, srtt_ms: Optional[float], omega: float,
                   cfg: AgentConfig) -> float:
    """Delay-per-delivery cost: lower numbers are better outcomes."""
    if cfg.reward_mode == "raw":
        if not delivered:
            return cfg.raw_loss_reward
        return srtt_ms / omega
    if not delivered:
        return cfg.loss_reward
    if srtt_ms is None or omega <= 0.0:
        ratio = math.inf
    else:
        ratio = srtt_ms / omega
    return min(ratio, cfg.reward_cap_ms) / cfg.reward_cap_ms


def td_target(q_at_action: float, reward: float, gamma: float) -> float:
    """(1 - gamma) * Q(s, a) + gamma * r, exactly; no successor-state max."""
    return (1.0 - gamma) * q_at_action + gamma * reward


def select_action(net: Mlp, state, epsilon: float, eligible: list[int], rng,
                  greedy: str = "min") -> tuple[int, np.ndarray]:
    """Epsilon-greedy pick among eligible output indices.

    Returns (action index, q vector); the q vector comes from the same
    forward pass even on the random branch so the caller can record
    Q(s, a) uniformly.
    """
    if not eligible:
        raise NoEligibleFace("no eligible face")
    q = net.forward(np.asarray(state, dtype=float))
    u = rng.random()
    if u <= epsilon:
        return rng.choice(eligible), q
    best = eligible[0]
    for idx in eligible[1:]:
        if greedy == "max":
            if q[idx] > q[best]:
                best = idx
        elif q[idx] < q[best]:
            best = idx
    return best, q


@dataclass
class PendingAction:
    key: tuple
    state: list
    action: int
    q_at_action: float
    sent_at: float
    resolved: bool = field(default=False)


class DqnAfStrategy(Strategy):
    """Per-router agent: one pending action per forwarded interest,
    resolved exactly once by data, NACK or RTO timeout."""

    name = "dqn-af"

    def __init__(self, face_order: list[int], cfg: AgentConfig,
                 init_rng: Optional[np.random.Generator] = None,
                 explore_rng=None, replay_rng=None,
                 weights_path=None):
        self.cfg = cfg
        self.face_order = list(face_order)
        self._index_of = {face: i for i, face in enumerate(self.face_order)}
        n_faces = len(self.face_order)
        if weights_path is not None:
            net = load_params(weights_path)
            expected = [2 * n_faces, 24, 24, n_faces]
            if net.dims != expected:
                raise ShapeMismatch(f"weight file dims {net.dims} != expected {expected}")
            self.net = net
        else:
            self.net = Mlp(2 * n_faces, n_faces, rng=init_rng)
        self.opt = make_optimizer(cfg.optimizer, self.net.params(), cfg.learning_rate)
        self.memory = ReplayMemory(cfg.kappa)
        self.explore_rng = explore_rng
        self.replay_rng = replay_rng
        self._pending: dict[tuple, PendingAction] = {}
        self.resolved_count = 0
        self.replay_passes = 0
        self.pending_created = 0

    # -- exploration schedule ------------------------------------------------

    @property
    def epsilon(self) -> float:
        return max(self.cfg.epsilon_init - self.cfg.epsilon_decay * self.resolved_count,
                   self.cfg.epsilon_min)

    # -- forwarding ------------------------------------------------------------

    def choose(self, fib_entry, in_face, now, key=None):
        faces = [h.face for h in fib_entry.nexthops]
        if not faces:
            raise NoNexthop(fib_entry.prefix)
        eligible = [self._index_of[f] for f in faces if f in self._index_of]
        if not eligible:
            raise NoEligibleFace(fib_entry.prefix)
        state = state_vector(self.stats, self.face_order)
        action, q = select_action(self.net, state, self.epsilon, eligible,
                                  self.explore_rng, greedy=self.cfg.greedy)
        if key is not None:
            self._pending[key] = PendingAction(key=key, state=state, action=action,
                                               q_at_action=float(q[action]), sent_at=now)
            self.pending_created += 1
        return [self.face_order[action]]

    # -- outcome handling -----------------------------------------------------

    def on_data(self, face, rtt, key, now, annotation=None):
        pending = self._pending.pop(key, None)
        if pending is not None:
            self.resolve_pending(pending, delivered=True, face=face, now=now)

    def on_loss(self, face, cause, key, now):
        pending = self._pending.pop(key, None)
        if pending is not None:
            self.resolve_pending(pending, delivered=False, face=face, now=now)

    def resolve_pending(self, pending: PendingAction, delivered: bool, face: int,
                        now: float):
        if pending.resolved:
            raise AlreadyResolved(pending.key)
        pending.resolved = True
        st = self.stats.get(face)
        srtt = st.srtt if st is not None else None
        omega = st.omega if st is not None else 1.0
        reward = compute_reward(delivered, srtt, omega, self.cfg)
        target = td_target(pending.q_at_action, reward, self.cfg.gamma)
        train_step(self.net, self.opt, np.asarray(pending.state), pending.action, target)
        self.memory.push(Experience(pending.state, pending.action, reward,
                                    pending.q_at_action))
        self.resolved_count += 1
        if self.resolved_count % self.cfg.rho == 0 and len(self.memory) >= self.cfg.psi:
            self._replay()

    def _replay(self):
        batch = self.memory.sample(self.cfg.psi, self.replay_rng)
        for exp in batch:
            state = np.asarray(exp.state)
            q_now = float(self.net.forward(state)[exp.action])
            target = td_target(q_now, exp.reward, self.cfg.gamma)
            train_step(self.net, self.opt, state, exp.action, target)
        self.replay_passes += 1

    # -- bookkeeping ------------------------------------------------------------

    @property
    def pending_open(self) -> int:
        return len(self._pending)

    def audit_balanced(self) -> bool:
        return self.pending_created == self.resolved_count + self.pending_open

    def save_weights(self, path):
        save_params(self.net, path)
