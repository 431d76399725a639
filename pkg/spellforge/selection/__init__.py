"""Hold-out splits, cross-validated grid search, bootstrap evaluation and ladders."""
