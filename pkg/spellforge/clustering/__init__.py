"""Agglomerative clustering of predicted at-risk individuals."""
