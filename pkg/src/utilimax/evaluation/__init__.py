"""Recommendation-task evaluation: data, metrics, significance tests and experiment runs."""
