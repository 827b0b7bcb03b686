"""Model-agnostic explanations for black-box predictors: LIME, Kernel SHAP and counterfactual search."""

__version__ = "0.1.0"
