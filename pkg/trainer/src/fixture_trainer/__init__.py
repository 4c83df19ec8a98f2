"""Tiny-classifier fixture trainer; see train.py."""

from .train import DatasetUnavailableError, TrainSpec, train_and_export
