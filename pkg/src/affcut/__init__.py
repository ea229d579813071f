"""Greedy multicut partitioning of multi-resolution affinity pyramids.

Turns dense 4-neighbor affinities, semantic maps and grouping embeddings
into instance segmentations via coarse-to-fine greedy edge contraction,
position-aware segment merging and optional greedy label association, with
an exact small-graph solver, synthetic scenes and evaluation harnesses.
"""

__version__ = "0.1.0"

from .cascade import (CascadeConfig, CascadeResult, ScoredInstance, cascade_gaec,
                      instance_label_image, render_instances, upsample_labels)
from .container import read_pyramid, write_pyramid
from .engine import affinity_to_cost, gaec, multicut_cost
from .errors import AffcutError, ContainerError, InputError, LogicError
from .gas import gas
from .graph import ContractionGraph, Segment, build_pixel_graph
from .kernels import BACKEND
from .losses import (GroundTruthScene, GroupingLosses, LossWeights,
                     SemanticAffinityLosses, default_loss_weights, grouping_losses,
                     grouping_losses_grad, phi, phi_grad, semantic_affinity_losses,
                     total_loss)
from .metrics import (ApReport, GtInstance, IOU_THRESHOLDS, ap_report,
                      average_precision, runtime_profile)
from .oracle import (BELL_NUMBERS, MulticutSolution, exact_multicut,
                     greedy_gap_report, set_partitions)
from .position_aware import damping, jensen_shannon_divergence, pa_gaec, segment_affinity
from .synth import NoiseSpec, SceneSpec, SyntheticScene, benchmark_spec, generate_scene
from .types import (AFFINITY_CHANNELS, BACKGROUND, UNLABELED, AffinityMap,
                    AffinityPyramid, EmbeddingMap, GridShape, LabelMap, PyramidLevel,
                    SemanticMap)
