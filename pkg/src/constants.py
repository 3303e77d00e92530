"""Constants for the abnn-lab project.

This module defines defaults that are used throughout the project.
Centralizing these values makes it easier to keep configs, layers and the CLI
in agreement.
"""

# Bayesian normalization
DEFAULT_ALPHA = 0.01  # Noise scale of the BNL
DEFAULT_EPS_STABILITY = 1e-5  # Added to the variance under the square root
DEFAULT_NORM_MOMENTUM = 0.1  # EMA factor for running statistics

# VI-BNN baseline
DEFAULT_VI_SIGMA_INIT = 1e-3  # Initial posterior std of every weight
VI_RHO_FLOOR = -1000.0  # softplus(VI_RHO_FLOOR) == 0.0 exactly

# Fine-tuning
DEFAULT_NUM_MODES = 3
DEFAULT_PRIOR_P = 0.5  # Bernoulli parameter of the random prior

# Divergence guard
DIVERGENCE_FACTOR = 10.0  # Loss above factor * initial loss counts as exploding
DIVERGENCE_PATIENCE = 3  # Consecutive exploding epochs before aborting

# Evaluation
DEFAULT_ECE_BINS = 15
FPR_TARGET_TPR = 0.95
PROB_FLOOR = 1e-300  # Clamp before log in NLL

# Checkpoint format
CHECKPOINT_MAGIC = b"ABNN"
CHECKPOINT_VERSION = 1
CHECKPOINT_SUFFIX = ".abnn"
MODESET_MANIFEST = "modeset.json"

# Data
OOD_RING_FACTOR = 3.0  # Ring radius in multiples of the data radius
IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
DEFAULT_TEST_FRACTION = 0.25

# Learning-rate sensitivity sweep multipliers
LR_SWEEP_MULTIPLIERS = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)
