"""
Runtime settings for the Loud-loss engine
Reads LOUDLOSS_* variables from the environment (or a .env file)
"""

import os
import sys
from dataclasses import dataclass

import torch
from dotenv import load_dotenv

from errors import ConfigError

load_dotenv()

_TRUE_VALUES = {'1', 'true', 'yes', 'on'}
_FALSE_VALUES = {'0', 'false', 'no', 'off', ''}


@dataclass(frozen=True)
class RuntimeSettings:
    """
    Process-level knobs that never change numerical results

    Attributes:
        verbose: Print [INFO] progress lines on stderr
        num_threads: Torch intra-op threads (1 keeps reductions reproducible)
    """
    verbose: bool = False
    num_threads: int = 1

    @classmethod
    def from_env(cls) -> 'RuntimeSettings':
        """
        Build settings from LOUDLOSS_VERBOSE and LOUDLOSS_NUM_THREADS

        Raises:
            ConfigError: if a variable holds an unparseable value
        """
        raw_verbose = os.getenv('LOUDLOSS_VERBOSE', '').strip().lower()
        if raw_verbose in _TRUE_VALUES:
            verbose = True
        elif raw_verbose in _FALSE_VALUES:
            verbose = False
        else:
            raise ConfigError(f"LOUDLOSS_VERBOSE must be a boolean, got {raw_verbose!r}")

        raw_threads = os.getenv('LOUDLOSS_NUM_THREADS', '1').strip()
        try:
            num_threads = int(raw_threads)
        except ValueError:
            raise ConfigError(f"LOUDLOSS_NUM_THREADS must be an integer, got {raw_threads!r}")
        if num_threads < 1:
            raise ConfigError(f"LOUDLOSS_NUM_THREADS must be >= 1, got {num_threads}")

        return cls(verbose=verbose, num_threads=num_threads)

    def apply(self) -> None:
        """Push the thread count into torch"""
        torch.set_num_threads(self.num_threads)


def log_info(message: str, settings: RuntimeSettings) -> None:
    """Print an [INFO] diagnostic on stderr when verbose"""
    if settings.verbose:
        print(f"[INFO] {message}", file=sys.stderr)
