"""MMD-based domain adaptation: representation selection, domain-confusion
fine-tuning, and classical adaptation baselines."""
from .adaptnet import (AdaptationNet, JointLossConfig, OptimizerConfig, TrainReport, evaluate,
                       forward, grad_check, gradient, init_net, joint_loss, train)
from .baselines import (FusionConfig, GeodesicKernel, LinearClassifier, MmdtConfig, PmtConfig,
                        daume_augment, gfk_compute, late_fusion, mmdt_train, pmt_train, sa_align,
                        svm_train)
from .data import (LabeledDataset, Shift, SplitSpec, load_features, make_splits, save_features,
                   synth_domains)
from .errors import (AdaptError, DataError, DegenerateDataError, InvalidArgumentError,
                     ParseError, ProtocolError, TrainingDivergedError)
from .mmd import KernelSpec, mmd2_kernel, mmd_linear, rank_representations, select_width
from .numerics import Subspace, orthonormal_complement, pca, principal_angles

__version__ = "0.1.0"
