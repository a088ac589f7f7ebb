from histml.inference.attention import AttentionWeights, attention_forward
from histml.inference.bayes import PosteriorError, PosteriorGaussian, bayes_posterior
from histml.inference.calibrate import calibrate_weights, project_simplex, projected_gradient, share_objective
from histml.inference.forest import (
    ConstantTargetWarning,
    ForestConfig,
    RegressionForest,
    forest_importance,
)

__all__ = [
    "AttentionWeights",
    "ConstantTargetWarning",
    "ForestConfig",
    "PosteriorError",
    "PosteriorGaussian",
    "RegressionForest",
    "attention_forward",
    "bayes_posterior",
    "calibrate_weights",
    "forest_importance",
    "project_simplex",
    "projected_gradient",
    "share_objective",
]
