"""Honest uplift tree ensembles for treatment selection from randomized experiments."""
from ._backend import BACKEND
from .baselines import CTSForest, RegressionForestParams, SeparateModelForest, train_cts, train_sma
from .data import DataError, DataSplit, Dataset, FeatureSchema, stratified_split, validate_dataset
from .evaluation import MucCurve, PolicyValueReport, ips_value, muc_curve, oracle_value, regret_sweep
from .forest import ForestConfig, UpliftForest, predict_mu, select_treatment, train
from .model_io import deserialize, serialize
from .synthetic import HighDimModel, TwoDModel, oracle_2d_values, oracle_policy_value, sample_2d, sample_50d
from .tree import GrowthParams, UpliftTree, grow_tree, honest_estimate, predict_tree

__version__ = "0.1.0"
