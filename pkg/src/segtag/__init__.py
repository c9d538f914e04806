"""Segment-selective sequence-to-sequence hashtag generation."""

__version__ = "0.1.0"
