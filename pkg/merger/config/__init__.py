"""Configuration settings for the merger package."""
