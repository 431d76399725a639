"""Domain model: payment taxonomy, spells, histories and the outcome variable."""
