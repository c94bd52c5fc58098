"""Deep Q-learning driver shared by both trading agents.

Implements the episode training loop: decaying epsilon-greedy action
selection, FIFO experience replay, one-step Bellman targets bootstrapped on
the online network (no target network), and one gradient step per
environment step.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np

from .errors import EmptyMemory
from .neural import QNetwork, forward, forward_batch, train_step


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool


@dataclass
class ReplayMemory:
    """Bounded FIFO of transitions; the oldest entry is evicted when full."""

    capacity: int = 10_000
    buffer: deque = field(init=False)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.buffer = deque(maxlen=self.capacity)

    def __len__(self) -> int:
        return len(self.buffer)

    def push(self, transition: Transition) -> None:
        self.buffer.append(transition)

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        """Uniform sample: without replacement when enough entries exist,
        with replacement otherwise. Deterministic for a fixed rng state."""
        if not self.buffer:
            raise EmptyMemory("cannot sample from an empty replay memory")
        replace = len(self.buffer) < batch_size
        idx = rng.choice(len(self.buffer), size=batch_size, replace=replace)
        return [self.buffer[i] for i in idx]


@dataclass
class EpsilonSchedule:
    eps_start: float = 1.0
    eps_end: float = 0.05
    decay: float = 0.995
    current: float = field(default=-1.0)

    def __post_init__(self):
        if not 0.0 <= self.eps_end <= self.eps_start <= 1.0:
            raise ValueError("need 0 <= eps_end <= eps_start <= 1")
        if not 0.0 < self.decay < 1.0:
            raise ValueError("decay must be in (0, 1)")
        if self.current < 0:
            self.current = self.eps_start

    def step(self) -> float:
        self.current = max(self.eps_end, self.current * self.decay)
        return self.current


def decay(schedule: EpsilonSchedule) -> EpsilonSchedule:
    schedule.step()
    return schedule


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.97
    batch_size: int = 32
    epochs: int = 500
    memory_capacity: int = 10_000
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay: float = 0.995
    lr: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")
        if self.batch_size < 1 or self.epochs < 0 or self.memory_capacity < 1:
            raise ValueError("bad training config")


class Env(Protocol):
    """Episode contract both trading environments satisfy."""

    def reset(self) -> np.ndarray: ...
    def step(self, action: int) -> tuple[np.ndarray, float, bool]: ...


def select_action(net: QNetwork, state: np.ndarray, schedule: EpsilonSchedule,
                  rng: np.random.Generator) -> int:
    """Uniform random action with probability epsilon, else greedy argmax
    (ties broken by the lowest index)."""
    if rng.random() < schedule.current:
        return int(rng.integers(net.spec.output_dim))
    return int(np.argmax(forward(net, state)))


def bellman_targets(batch: Sequence[Transition], net: QNetwork, gamma: float) -> np.ndarray:
    """r when terminal, else r + gamma * max_a Q(next_state, a)."""
    next_states = np.stack([t.next_state for t in batch])
    max_q = forward_batch(net, next_states).max(axis=1)
    rewards = np.array([t.reward for t in batch], dtype=float)
    done = np.array([t.done for t in batch])
    return np.where(done, rewards, rewards + gamma * max_q)


@dataclass
class EpochLog:
    epoch: int
    cum_reward: float
    mean_loss: float
    epsilon: float
    steps: int


def train(env: Env, net: QNetwork, cfg: TrainConfig,
          rng: np.random.Generator) -> list[EpochLog]:
    """Run the episode training loop for ``cfg.epochs`` epochs.

    Each epoch resets the environment and, until it reports done, selects an
    action, steps, stores the transition, and applies one gradient step on a
    replayed mini-batch. Epsilon decays once per environment step.
    """
    memory = ReplayMemory(cfg.memory_capacity)
    schedule = EpsilonSchedule(cfg.eps_start, cfg.eps_end, cfg.eps_decay)
    logs: list[EpochLog] = []
    for epoch in range(cfg.epochs):
        state = env.reset()
        cum_reward = 0.0
        losses: list[float] = []
        done = False
        while not done:
            action = select_action(net, state, schedule, rng)
            next_state, reward, done = env.step(action)
            memory.push(Transition(state, action, float(reward), next_state, bool(done)))
            batch = memory.sample(cfg.batch_size, rng)
            targets = bellman_targets(batch, net, cfg.gamma)
            loss = train_step(net,
                              np.stack([t.state for t in batch]),
                              np.array([t.action for t in batch]),
                              targets, cfg.lr)
            schedule.step()
            losses.append(loss)
            cum_reward += reward
            state = next_state
        logs.append(EpochLog(epoch=epoch, cum_reward=cum_reward,
                             mean_loss=float(np.mean(losses)) if losses else 0.0,
                             epsilon=schedule.current, steps=len(losses)))
    return logs


def greedy_action(net: QNetwork, state: np.ndarray) -> int:
    return int(np.argmax(forward(net, state)))


def write_training_log(logs: Iterable[EpochLog], sink) -> None:
    for log in logs:
        sink.write(json.dumps({"epoch": log.epoch, "cum_reward": log.cum_reward,
                               "mean_loss": log.mean_loss, "epsilon": log.epsilon}) + "\n")
