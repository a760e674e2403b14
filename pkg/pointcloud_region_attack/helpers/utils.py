"""Utils Functions for environment configuration, logging, seeding and hashing."""

import hashlib
import numpy as np
import os
import sys
import torch
from loguru import logger
from pathlib import Path


def get_num_workers() -> int:
    """Get the worker pool size from the environment variable or default to 1.

    Returns:
        int: The number of workers used for Shapley and attack pools.
    """
    value = os.getenv('POINTCLOUD_ATTACK_WORKERS', '1')
    try:
        workers = int(value)
    except ValueError:
        raise ValueError(f'POINTCLOUD_ATTACK_WORKERS must be an integer, got {value!r}.')
    if workers < 1:
        raise ValueError(f'POINTCLOUD_ATTACK_WORKERS must be >= 1, got {workers}.')
    return workers


def get_log_level() -> str:
    """Get the log level from the environment variable or default to 'INFO'.

    Returns:
        str: The loguru level name.
    """
    return os.getenv('POINTCLOUD_ATTACK_LOG_LEVEL', 'INFO').upper()


def get_torch_threads() -> int:
    """Get the torch intra-op thread count from the environment or default to 1.

    Returns:
        int: Number of threads torch may use inside a single operation.
    """
    return int(os.getenv('POINTCLOUD_ATTACK_TORCH_THREADS', '1'))


def configure_logging(level: str | None = None) -> None:
    """Route loguru output to stderr at the requested level.

    Args:
        level (str): Level name. Defaults to None, which uses the environment setting.
    """
    logger.remove()
    logger.add(sys.stderr, level=level or get_log_level())


def configure_torch() -> None:
    """Pin torch to deterministic kernels and a fixed thread count."""
    torch.use_deterministic_algorithms(True)
    torch.set_num_threads(get_torch_threads())


def derive_seed(*keys: int) -> int:
    """Derive a stable 32-bit child seed from a sequence of integer keys.

    Args:
        *keys (int): Global seed followed by any disambiguating indices.

    Returns:
        int: A seed usable by numpy and torch generators.
    """
    return int(np.random.SeedSequence(list(keys)).generate_state(1)[0])


def file_sha256(path: str | Path) -> str:
    """Return the hex sha256 digest of a file's content."""
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()
