"""Test suite for relation-track."""
