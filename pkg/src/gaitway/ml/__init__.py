from .dataset import Dataset, Representation, Standardizer, build_dataset
from .reducers import LDAReducer, PCAReducer, ReducerSpec, lda_fit, lda_transform, pca_fit, pca_transform
from .classifiers import ClassifierKind, ClassifierSpec, TrainedModel, predict, train
from .evaluate import EvalReport, gradient_check, loso_evaluate

__all__ = [
    "Dataset",
    "Representation",
    "Standardizer",
    "build_dataset",
    "PCAReducer",
    "LDAReducer",
    "ReducerSpec",
    "pca_fit",
    "pca_transform",
    "lda_fit",
    "lda_transform",
    "ClassifierKind",
    "ClassifierSpec",
    "TrainedModel",
    "train",
    "predict",
    "loso_evaluate",
    "gradient_check",
    "EvalReport",
]
