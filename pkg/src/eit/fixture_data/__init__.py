"""Bundled demo corpus files (CSV/JSON) for the end-to-end path."""
