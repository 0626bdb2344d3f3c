"""shapefit: boundary landmark localization in grayscale images.

Trains a linear point-distribution shape model and a Haar-feature random
forest boundary classifier, turns test images into boundary-probability
maps, and fits the shape model to them with bounded Differential Evolution.
"""

from .errors import (AlignmentError, ConfigError, DataError, ShapeFitError,
                     TrainingError)
from .geometry import (GPAResult, Pose, align_similarity, apply_pose, as_shape,
                       centroid, centroid_size, generalized_procrustes,
                       read_landmarks, write_landmarks)
from .shape_model import (ShapeModel, ShapeParams, fit_pca, load_model,
                          parameter_bounds, project, save_model, synthesize)
from .pixel_features import (HaarFeature, feature_matrix, feature_vector,
                             haar_catalog, integral_image, mirror_pad,
                             padded_integral, rect_sum, sample_training_set)
from .random_forest import (Forest, ForestParams, TreeNode, load_forest,
                            predict_proba, predict_proba_many, save_forest,
                            train_forest)
from .prob_map import (compute_prob_map, load_prob_map, sample_bilinear,
                       sample_bilinear_many, save_prob_map, shape_cost,
                       shape_cost_batch, shape_likelihood)
from .de_optimizer import DEConfig, DETrace, de_minimize, fit_shape
from .pipeline import (Dataset, DatasetEntry, ErrorReport, evaluate_fit_dir,
                       evaluate_shapes, load_dataset, stage_seed,
                       train_boundary_classifier, train_shape_model)
from .synth import (DISTRACTOR_SPAN, N_LANDMARKS, generate_synthetic_dataset,
                    rasterize_closed_polyline)

__version__ = "0.1.0"

__all__ = [
    "AlignmentError", "ConfigError", "DataError", "ShapeFitError", "TrainingError",
    "GPAResult", "Pose", "align_similarity", "apply_pose", "as_shape", "centroid",
    "centroid_size", "generalized_procrustes", "read_landmarks", "write_landmarks",
    "ShapeModel", "ShapeParams", "fit_pca", "load_model", "parameter_bounds",
    "project", "save_model", "synthesize",
    "HaarFeature", "feature_matrix", "feature_vector", "haar_catalog",
    "integral_image", "mirror_pad", "padded_integral", "rect_sum", "sample_training_set",
    "Forest", "ForestParams", "TreeNode", "load_forest", "predict_proba",
    "predict_proba_many", "save_forest", "train_forest",
    "compute_prob_map", "load_prob_map", "sample_bilinear", "sample_bilinear_many",
    "save_prob_map", "shape_cost", "shape_cost_batch", "shape_likelihood",
    "DEConfig", "DETrace", "de_minimize", "fit_shape",
    "Dataset", "DatasetEntry", "ErrorReport", "evaluate_fit_dir", "evaluate_shapes",
    "load_dataset", "stage_seed", "train_boundary_classifier", "train_shape_model",
    "DISTRACTOR_SPAN", "N_LANDMARKS", "generate_synthetic_dataset",
    "rasterize_closed_polyline",
    "__version__",
]
