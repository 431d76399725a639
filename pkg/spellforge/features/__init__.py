"""Feature catalog, per-person derivation and design-matrix assembly."""
