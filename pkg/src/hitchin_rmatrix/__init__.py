"""Exact dynamical r-matrices of punctured Hitchin systems at finite truncation."""
