"""Sampler module for the permuton_lab package."""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from collections.abc import Hashable, Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import ClassVar

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..errors import PreconditionError
from ..perm_core import Permutation, Sign, descents

###############################################################################

log = logging.getLogger(__name__)

###############################################################################

_DEFAULT_CHUNK_SIZE = 1000
_MAX_SEED = 2**64

###############################################################################


class SampleFields:
    index = "index"
    sampler = "sampler"
    n = "n"
    p = "p"
    seed = "seed"
    permutation = "permutation"
    descents = "descents"


ALL_SAMPLE_FIELDS = [
    field_value
    for field_name, field_value in vars(SampleFields).items()
    if not field_name.startswith("_")
]

###############################################################################


@dataclass(frozen=True)
class ChainConfig:
    """Parameters of one sampler run."""

    p: float | Fraction
    seed: int = 0
    n_target: int = 1

    def __post_init__(self) -> None:
        if not 0 < self.p < 1:
            raise PreconditionError(f"p must lie in (0, 1), got {self.p}")
        if self.n_target < 1:
            raise PreconditionError(f"n_target must be >= 1, got {self.n_target}")
        if not 0 <= self.seed < _MAX_SEED:
            raise PreconditionError(f"seed must be a 64-bit integer, got {self.seed}")


def path_rng(seed: int, index: int = 0) -> np.random.Generator:
    """
    Dedicated PCG64 stream for sample path `index` of a run.

    Streams are derived from the run seed by spawn key, so a path's draws
    do not depend on how paths are batched or spread over threads.
    """
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,)))
    )


def draw_sign(rng: np.random.Generator, p: float) -> Sign:
    return Sign.PLUS if rng.random() < p else Sign.MINUS


def frequencies(perms: Iterable[Hashable]) -> dict[Hashable, float]:
    counts = pd.Series(list(perms)).value_counts(normalize=True)
    return {key: float(value) for key, value in counts.items()}


def tv_distance(
    left: Mapping[Hashable, float | Fraction],
    right: Mapping[Hashable, float | Fraction],
) -> float:
    """Total-variation distance between two finitely supported laws."""
    keys = set(left) | set(right)
    return 0.5 * sum(
        abs(float(left.get(key, 0)) - float(right.get(key, 0))) for key in keys
    )


###############################################################################


class Sampler(ABC):
    """Abstract base class for samplers of random permutations."""

    name: ClassVar[str] = "sampler"

    @staticmethod
    @abstractmethod
    def sample(
        cfg: ChainConfig,
        rng: np.random.Generator | None = None,
    ) -> Permutation:
        """Draw one permutation of size cfg.n_target."""
        raise NotImplementedError()

    @classmethod
    def _get_chunk(
        cls,
        cfg: ChainConfig,
        indices: range,
        raise_on_error: bool = True,
    ) -> list[dict]:
        rows = []
        for index in indices:
            try:
                perm = cls.sample(cfg, path_rng(cfg.seed, index))
            except Exception as e:
                # Handle raise on error or ignore
                if raise_on_error:
                    raise e

                log.error(
                    f"Error while sampling path {index} with {cls.name}: {e}; "
                    f"'raise_on_error' is False, ignoring..."
                )
                continue

            rows.append(
                {
                    SampleFields.index: index,
                    SampleFields.permutation: perm,
                    SampleFields.descents: descents(perm),
                }
            )

        return rows

    @classmethod
    def _format_dataframe(cls, df: pd.DataFrame, cfg: ChainConfig) -> pd.DataFrame:
        # Add run level columns
        df[SampleFields.sampler] = cls.name
        df[SampleFields.n] = cfg.n_target
        df[SampleFields.p] = float(cfg.p)
        df[SampleFields.seed] = cfg.seed

        # Create new dataframe with only the columns we want
        return df[ALL_SAMPLE_FIELDS]

    @classmethod
    def get_samples(
        cls,
        cfg: ChainConfig,
        count: int,
        threads: int = 1,
        raise_on_error: bool = True,
        tqdm_kwargs: dict | None = None,
    ) -> pd.DataFrame:
        """
        Draw a batch of independent permutations.

        Parameters
        ----------
        cfg : ChainConfig
            Size, sign probability and run seed.
        count : int
            Number of sample paths.
        threads : int, optional
            Number of worker threads, by default 1. Output does not depend
            on it.
        raise_on_error : bool, optional
            Whether to raise on error or ignore, by default True
        tqdm_kwargs : dict, optional
            Additional keyword arguments to pass to tqdm, by
            default None

        Returns
        -------
        pd.DataFrame
            One row per sample path, ordered by path index.
        """
        if count < 0:
            raise PreconditionError(f"count must be >= 0, got {count}")

        chunks = [
            range(start, min(start + _DEFAULT_CHUNK_SIZE, count))
            for start in range(0, count, _DEFAULT_CHUNK_SIZE)
        ]
        log.info(
            f"Sampling {count} paths of size {cfg.n_target} with {cls.name} "
            f"(p={float(cfg.p)}, seed={cfg.seed}, threads={threads})"
        )

        # Executor.map keeps chunk order, which keeps the merge deterministic
        results: list[dict] = []
        with ThreadPoolExecutor(max_workers=max(threads, 1)) as executor:
            for rows in tqdm(
                executor.map(
                    lambda chunk: cls._get_chunk(cfg, chunk, raise_on_error),
                    chunks,
                ),
                total=len(chunks),
                **(tqdm_kwargs or {}),
            ):
                results.extend(rows)

        if len(results) == 0:
            return pd.DataFrame(columns=ALL_SAMPLE_FIELDS)

        return cls._format_dataframe(pd.DataFrame(results), cfg)
