"""Pre-training, ABNN fine-tuning and the deep-ensemble baseline."""
import logging
from typing import Callable, Iterator, List, Optional, Tuple

import logfire
import numpy as np

from src.autodiff import Graph
from src.constants import DIVERGENCE_FACTOR, DIVERGENCE_PATIENCE
from src.data import Dataset
from src.errors import ConversionError, DatasetError, DivergenceError, ModeSetError, NonFiniteError
from src.model import ArchSpec, Checkpoint, Network, NetworkForm, TrainingMetadata, build, convert_to_abnn
from src.train.losses import map_loss, total_loss
from src.train.modeset import ModeSet
from src.train.optimizer import SGD, learning_rate
from src.train.schema import FinetuneConfig, RandomPrior, TrainConfig
from src.utils.parallel import parallel_map
from src.utils.seeding import derive_seed, make_rng

logger = logging.getLogger(__name__)

# Keys of the streams derived from a run or mode seed
SHUFFLE_STREAM = 1
NOISE_STREAM = 2


def iter_batches(
    x: np.ndarray, y: np.ndarray, batch_size: int, rng: np.random.Generator
) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """Shuffled mini-batches; a trailing batch of one sample is skipped."""
    order = rng.permutation(x.shape[0])
    for start in range(0, len(order), batch_size):
        index = order[start:start + batch_size]
        if len(index) < 2:
            break
        yield x[index], y[index]


class DivergenceGuard:
    """Abort when the epoch loss is non-finite or stays above 10x its first value."""

    def __init__(self, mode: Optional[int] = None):
        self.mode = mode
        self.initial: Optional[float] = None
        self.strikes = 0

    def update(self, epoch: int, loss: float) -> None:
        where = f" (mode {self.mode})" if self.mode is not None else ""
        if not np.isfinite(loss):
            raise DivergenceError(f"Non-finite loss at epoch {epoch}{where}", epoch=epoch, mode=self.mode)
        if self.initial is None:
            self.initial = loss
            return
        self.strikes = self.strikes + 1 if loss > DIVERGENCE_FACTOR * self.initial else 0
        if self.strikes >= DIVERGENCE_PATIENCE:
            raise DivergenceError(
                f"Loss {loss:.4g} above {DIVERGENCE_FACTOR:g}x the initial {self.initial:.4g} "
                f"for {self.strikes} epochs at epoch {epoch}{where}",
                epoch=epoch,
                mode=self.mode,
            )


def _run_epochs(
    network: Network,
    dataset: Dataset,
    config: TrainConfig,
    shuffle_rng: np.random.Generator,
    step_loss: Callable[[Network, Tuple[np.ndarray, np.ndarray]], object],
    mode: Optional[int] = None,
) -> List[float]:
    if dataset.train.n < 2:
        raise DatasetError(f"Training needs at least two train samples, got {dataset.train.n}")
    optimizer = SGD(network, config)
    guard = DivergenceGuard(mode)
    curve: List[float] = []
    for epoch in range(config.epochs):
        losses = []
        try:
            for batch in iter_batches(dataset.train.x, dataset.train.y, config.batch_size, shuffle_rng):
                network.zero_grad()
                with Graph() as graph:
                    loss = step_loss(network, batch)
                    graph.backward(loss)
                optimizer.step(epoch)
                losses.append(loss.item())
        except NonFiniteError as e:
            where = f" (mode {mode})" if mode is not None else ""
            raise DivergenceError(f"Non-finite values at epoch {epoch}{where}: {str(e)}", epoch=epoch, mode=mode) from e
        epoch_loss = float(np.mean(losses))
        guard.update(epoch, epoch_loss)
        curve.append(epoch_loss)
        logger.debug(f"epoch {epoch}{'' if mode is None else f' mode {mode}'}: loss={epoch_loss:.6f} lr={learning_rate(config, epoch):.4g}")
    network.zero_grad()
    return curve


def pretrain(spec: ArchSpec, dataset: Dataset, config: TrainConfig) -> Checkpoint:
    """Train a deterministic network on the MAP loss.

    The network weights are drawn from ``config.seed``; shuffling uses a
    stream derived from it, so the result is a pure function of the inputs.

    Raises:
        DivergenceError: On a non-finite or exploding loss, naming the epoch
    """
    with logfire.span("pretrain", epochs=config.epochs, seed=config.seed):
        network = build(spec, config.seed)
        rng = make_rng(config.seed, SHUFFLE_STREAM)
        curve = _run_epochs(network, dataset, config, rng, lambda net, batch: map_loss(net, batch, training=True))
        if curve:
            logger.info(f"Pre-trained for {config.epochs} epochs, final loss {curve[-1]:.4f}")
        metadata = TrainingMetadata(epochs=config.epochs, lr=config.lr, loss_curve=curve)
        return Checkpoint(network=network, metadata=metadata)


def finetune_abnn(
    ckpt: Checkpoint,
    dataset: Dataset,
    config: FinetuneConfig,
    M: Optional[int] = None,
    prior_p: Optional[float] = None,
    jobs: int = 1,
) -> ModeSet:
    """Convert the checkpoint once and fine-tune M modes of it.

    Mode m gets seed ``derive_seed(config.seed, m)``, from which its random
    prior, its BNL noise streams and its shuffling are derived. Each mode
    minimizes L_MAP + E with fresh noise on every forward pass.

    Args:
        ckpt: Deterministic checkpoint
        dataset: Training data
        config: Fine-tuning hyperparameters
        M: Number of modes (defaults to ``config.M``)
        prior_p: Bernoulli parameter of the priors (defaults to ``config.prior_p``)
        jobs: Modes fine-tuned concurrently

    Raises:
        ConversionError: If the checkpoint is not deterministic
        ModeSetError: If M < 1
        DivergenceError: If a mode diverges, naming the mode
    """
    M = config.M if M is None else M
    prior_p = config.prior_p if prior_p is None else prior_p
    if M < 1:
        raise ModeSetError(f"finetune_abnn needs M >= 1, got {M}")
    if ckpt.network.form is not NetworkForm.DETERMINISTIC:
        raise ConversionError(f"finetune_abnn needs a deterministic checkpoint, got {ckpt.network.form.value}")

    base = convert_to_abnn(ckpt.network, alpha=config.alpha, train_all=not config.freeze_all_but_norm)
    num_classes = base.spec.num_classes
    batch_stats = config.update_running_stats

    def tune(mode: int) -> Tuple[Network, RandomPrior, TrainingMetadata]:
        mode_seed = derive_seed(config.seed, mode)
        network = base.clone()
        network.reseed_noise(derive_seed(mode_seed, NOISE_STREAM))
        prior = RandomPrior.sample(num_classes, prior_p, mode_seed)

        def step_loss(net: Network, batch):
            return total_loss(net, batch, prior, training=batch_stats, update_running=batch_stats).total

        with logfire.span("finetune mode {mode}", mode=mode):
            curve = _run_epochs(network, dataset, config, make_rng(mode_seed, SHUFFLE_STREAM), step_loss, mode=mode)
        logger.info(f"Mode {mode}: eta={prior.eta}, final loss {curve[-1] if curve else float('nan'):.4f}")
        metadata = TrainingMetadata(
            epochs=config.epochs, lr=config.lr, loss_curve=curve, extra={"mode": mode, "mode_seed": mode_seed}
        )
        return network, prior, metadata

    with logfire.span("finetune", M=M, epochs=config.epochs):
        results = parallel_map(tune, M, jobs)
    return ModeSet(
        modes=[r[0] for r in results],
        priors=[r[1] for r in results],
        metadata=[r[2] for r in results],
        config=config.model_dump(mode="json") | {"M": M, "prior_p": prior_p},
    )


def pretrain_ensemble(spec: ArchSpec, dataset: Dataset, config: TrainConfig, M: int, jobs: int = 1) -> ModeSet:
    """Deep-ensemble baseline: M deterministic networks pretrained from derived seeds."""
    if M < 1:
        raise ModeSetError(f"pretrain_ensemble needs M >= 1, got {M}")

    def member(m: int) -> Checkpoint:
        try:
            return pretrain(spec, dataset, config.model_copy(update={"seed": derive_seed(config.seed, m)}))
        except DivergenceError as e:
            raise DivergenceError(f"Ensemble member {m}: {str(e)}", epoch=e.epoch, mode=m) from e

    with logfire.span("pretrain_ensemble", M=M):
        checkpoints = parallel_map(member, M, jobs)
    return ModeSet(
        modes=[c.network for c in checkpoints],
        priors=[RandomPrior.off(spec.num_classes) for _ in checkpoints],
        metadata=[c.metadata for c in checkpoints],
        config=config.model_dump(mode="json") | {"M": M},
    )
