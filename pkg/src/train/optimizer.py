"""Momentum SGD with decoupled weight decay and a milestone schedule."""
import logging
from typing import Dict, List, Optional

import numpy as np

from src.errors import MissingGradientError
from src.model import Network
from src.train.schema import TrainConfig

logger = logging.getLogger(__name__)


def learning_rate(config: TrainConfig, epoch: int) -> float:
    """Base lr times gamma_lr for every milestone already reached at ``epoch``."""
    passed = sum(1 for milestone in config.milestones if milestone <= epoch)
    return config.lr * config.gamma_lr ** passed


class SGD:
    """Optimizer state for one network.

    The update of a trainable parameter p with gradient g is::

        v <- momentum * v + g
        p <- p - lr * v
        p <- p - lr * weight_decay * p

    Parameters in frozen groups are never touched.
    """

    def __init__(self, network: Network, config: TrainConfig):
        self.network = network
        self.config = config
        self.velocity: Dict[int, np.ndarray] = {}

    def step(self, epoch: int, lr: Optional[float] = None) -> float:
        """Apply one update using the gradients stored on the parameters.

        Args:
            epoch: Current epoch, selects the scheduled learning rate
            lr: Explicit learning rate overriding the schedule

        Returns:
            The learning rate that was applied

        Raises:
            MissingGradientError: If a trainable parameter has no gradient
        """
        rate = learning_rate(self.config, epoch) if lr is None else lr
        trainable = self.network.parameters(trainable_only=True)
        missing: List[str] = [group for group, tensor in trainable if tensor.grad is None]
        if missing:
            raise MissingGradientError(f"No gradient for trainable groups {sorted(set(missing))}")

        for _, tensor in trainable:
            key = id(tensor)
            velocity = self.velocity.get(key)
            velocity = tensor.grad.copy() if velocity is None else self.config.momentum * velocity + tensor.grad
            self.velocity[key] = velocity
            tensor.data = tensor.data - rate * velocity
            if self.config.weight_decay:
                tensor.data = tensor.data - rate * self.config.weight_decay * tensor.data
        return rate

    def zero_grad(self) -> None:
        self.network.zero_grad()


def sgd_step(network: Network, config: TrainConfig, epoch: int, state: Optional[SGD] = None) -> SGD:
    """Functional form: update ``network`` in place and return the optimizer state to reuse."""
    optimizer = state or SGD(network, config)
    optimizer.step(epoch)
    return optimizer
