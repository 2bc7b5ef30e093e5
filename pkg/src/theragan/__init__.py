"""TheraGAN: conditional GANs for six-channel IMU activity signals.

The package covers the full pipeline: synthetic corpus generation
(`simdata`), on-disk formats (`dataio`), sample preprocessing
(`preprocess`), a small reverse-mode network engine (`diffnet`), the
adversarial models and training algorithm (`gan`), the perceptual
similarity stopping metric (`percsim`), and the classifier augmentation
experiment (`evalharness`).  `cli` ties everything together.
"""

__version__ = "0.1.0"

from .gan import (GanBundle, TrainConfig, TrainingDivergedError, generate,
                  synthesize_complex, train_gan)
from .percsim import FeatureExtractor, similarity_distance

__all__ = [
    "GanBundle", "TrainConfig", "TrainingDivergedError",
    "generate", "synthesize_complex", "train_gan",
    "FeatureExtractor", "similarity_distance",
    "__version__",
]
