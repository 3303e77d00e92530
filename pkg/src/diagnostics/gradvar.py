"""Gradient-variance measurement for single, VI and ABNN networks.

Single and VI networks are measured from their shared initialization (VI
layers start with W_mu equal to the deterministic weights), which is where
those models are trained from. The ABNN is measured where it is trained: the
converted pretrained network when one is given, otherwise the converted
initialization. Each step samples a batch (same batches for every kind),
runs forward and backward with batch statistics and records the gradient
entries of the designated groups. Running statistics are never updated.
"""
import logging
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from src.autodiff import Graph
from src.constants import DEFAULT_ALPHA, DEFAULT_VI_SIGMA_INIT
from src.data import Dataset
from src.diagnostics.schema import DESIGNATED_GROUPS, GradVarKind, GradVarReport
from src.errors import ConversionError, DatasetError, GradientError, NonFiniteError
from src.experiments.config import GradVarConfig, RunConfig
from src.experiments.runner import build_dataset, run_pretrain
from src.model import ArchSpec, Network, NetworkForm, build, build_vi, convert_to_abnn
from src.train import SGD, TrainConfig, map_loss
from src.utils.seeding import make_rng

logger = logging.getLogger(__name__)

BATCH_STREAM = 7
NORM_AFFINE = "norm_affine"


def pooled_variance(samples: Sequence[np.ndarray]) -> float:
    """Population variance of every entry of every array, pooled."""
    if not samples:
        raise GradientError("pooled_variance needs at least one sample")
    flat = np.concatenate([np.asarray(s, dtype=np.float64).reshape(-1) for s in samples])
    if flat.size == 0:
        return 0.0
    return float(np.var(flat))


def network_for(
    kind: GradVarKind,
    spec: ArchSpec,
    seed: int,
    alpha: float,
    sigma_init: float,
    pretrained: Optional[Network] = None,
) -> Network:
    """The network of ``kind`` measured by ``gradient_variance``.

    ``pretrained`` only affects abnn, which then converts it instead of the
    fresh initialization.
    """
    kind = GradVarKind(kind)
    if kind is GradVarKind.VI:
        return build_vi(spec, seed, sigma_init=sigma_init)
    if kind is GradVarKind.ABNN:
        return convert_to_abnn(pretrained if pretrained is not None else build(spec, seed), alpha=alpha)
    return build(spec, seed)


def _report_groups(network: Network) -> Dict[str, List[str]]:
    groups = {"linear_weights": ["linear_weights"], NORM_AFFINE: ["norm_gamma", "norm_beta"], "vi_sigma": ["vi_sigma"]}
    present = {name for name, tensors in network.param_groups.items() if tensors and network.trainable_mask[name]}
    return {name: members for name, members in groups.items() if present & set(members)}


def gradient_variance(
    net_kind: Union[GradVarKind, str],
    dataset: Dataset,
    n_steps: int,
    seed: int,
    spec: Optional[ArchSpec] = None,
    batch_size: int = 128,
    alpha: float = DEFAULT_ALPHA,
    sigma_init: float = DEFAULT_VI_SIGMA_INIT,
    along_trajectory: bool = False,
    lr: float = 0.0,
    pretrained: Optional[Network] = None,
) -> GradVarReport:
    """Measure the variance of gradients over ``n_steps`` mini-batches.

    Args:
        net_kind: single, vi or abnn
        dataset: Source of the training batches
        n_steps: Number of forward/backward passes
        seed: Seed of the weights, the batches and the layer noise
        spec: Architecture (defaults to 2 x 256 batch-norm blocks sized to the dataset)
        batch_size: Samples per step
        alpha: BNL noise scale for abnn
        sigma_init: Initial W_sigma for vi
        along_trajectory: Apply an SGD step with ``lr`` between measurements
        lr: Learning rate of the along-trajectory updates
        pretrained: Deterministic network the abnn is converted from

    Raises:
        GradientError: If a gradient (or the loss) is non-finite, naming the step
        ConversionError: If ``pretrained`` is not deterministic or its architecture differs from ``spec``
    """
    kind = GradVarKind(net_kind)
    if n_steps < 1:
        raise GradientError(f"gradient_variance needs n_steps >= 1, got {n_steps}")
    if dataset.train.n < batch_size:
        raise DatasetError(f"Train split has {dataset.train.n} samples, fewer than batch_size {batch_size}")
    if pretrained is not None:
        if pretrained.form is not NetworkForm.DETERMINISTIC:
            raise ConversionError(f"gradient_variance needs a deterministic pretrained network, got {pretrained.form.value}")
        if spec is not None and spec != pretrained.spec:
            raise ConversionError("Pretrained network architecture differs from spec")
        spec = pretrained.spec
    spec = spec or ArchSpec.mlp(dataset.input_dim, [256, 256], dataset.num_classes)
    post_hoc = kind is GradVarKind.ABNN and pretrained is not None
    network = network_for(kind, spec, seed, alpha, sigma_init, pretrained=pretrained)
    network.reseed_noise(seed)
    optimizer = SGD(network, TrainConfig(epochs=1, batch_size=batch_size, lr=lr, momentum=0.0)) if along_trajectory and lr > 0 else None

    report_groups = _report_groups(network)
    collected: Dict[str, List[np.ndarray]] = {name: [] for name in report_groups}
    rng = make_rng(seed, BATCH_STREAM)
    for step in range(n_steps):
        index = rng.choice(dataset.train.n, size=batch_size, replace=False)
        batch = (dataset.train.x[index], dataset.train.y[index])
        network.zero_grad()
        try:
            with Graph() as graph:
                loss = map_loss(network, batch, training=True, update_running=False)
                graph.backward(loss)
        except NonFiniteError as e:
            raise GradientError(f"Non-finite values at step {step}: {str(e)}") from e
        grads = {group: [t.grad for t in tensors] for group, tensors in network.param_groups.items()}
        for name, members in report_groups.items():
            for group in members:
                for grad in grads[group]:
                    if grad is None or not np.all(np.isfinite(grad)):
                        raise GradientError(f"Non-finite or missing gradient in group {group} at step {step}")
                    collected[name].append(grad.copy())
        if optimizer is not None:
            optimizer.step(epoch=0)

    designated = DESIGNATED_GROUPS[kind]
    designated_name = NORM_AFFINE if kind is GradVarKind.ABNN else "linear_weights"
    group_variances = {name: pooled_variance(samples) for name, samples in collected.items()}
    report = GradVarReport(
        kind=kind,
        variance=group_variances[designated_name],
        designated_groups=designated,
        n_entries=sum(t.size for group in designated for t in network.param_groups[group]),
        group_variances=group_variances,
        n_steps=n_steps,
        batch_size=batch_size,
        seed=seed,
        alpha=alpha if kind is GradVarKind.ABNN else 0.0,
        sigma_init=sigma_init if kind is GradVarKind.VI else 0.0,
        along_trajectory=optimizer is not None,
        lr=lr if optimizer is not None else 0.0,
        from_pretrained=post_hoc,
    )
    logger.info(f"gradvar {kind.value}: variance {report.variance:.3e} over {n_steps} steps{' (post-hoc)' if post_hoc else ''}")
    return report


def compare_gradient_variance(
    dataset: Dataset,
    n_steps: int,
    seed: int,
    spec: Optional[ArchSpec] = None,
    **kwargs,
) -> Dict[GradVarKind, GradVarReport]:
    """Run ``gradient_variance`` for every kind with shared settings."""
    return {kind: gradient_variance(kind, dataset, n_steps, seed, spec=spec, **kwargs) for kind in GradVarKind}


def gradient_variance_from_config(
    config: RunConfig,
    kinds: Optional[Sequence[GradVarKind]] = None,
    pretrained: Optional[Network] = None,
) -> Dict[GradVarKind, GradVarReport]:
    """Measure ``kinds`` (all by default) with the config's gradvar settings.

    With ``gradvar.from_pretrained`` the abnn is measured on ``pretrained``,
    which is trained from the config's pretrain section when not given.
    """
    settings = config.gradvar or GradVarConfig()
    kinds = list(GradVarKind) if kinds is None else [GradVarKind(kind) for kind in kinds]
    dataset = build_dataset(config)
    if settings.from_pretrained and GradVarKind.ABNN in kinds and pretrained is None:
        pretrained = run_pretrain(config, dataset).network
    return {
        kind: gradient_variance(
            kind,
            dataset,
            settings.n_steps,
            settings.seed,
            spec=config.arch,
            batch_size=settings.batch_size,
            alpha=settings.alpha,
            sigma_init=settings.sigma_init,
            along_trajectory=settings.along_trajectory,
            lr=settings.lr,
            pretrained=pretrained if settings.from_pretrained else None,
        )
        for kind in kinds
    }
