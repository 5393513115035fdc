"""Configuration management for the WVG Shapley toolkit."""
