"""Settings, logging filter and error exit codes"""
import logging

import pytest
from pydantic import ValidationError

from cutofflab.core.config import Settings, get_settings
from cutofflab.core.errors import (
    DomainError,
    EmptySample,
    MembershipFailure,
    NumericalFailure,
    StepBudgetExceeded,
    UsageError,
)
from cutofflab.core.logging_config import ChunkProgressFilter


def test_environment_overrides_threads(monkeypatch):
    monkeypatch.setenv("CUTOFFLAB_THREADS", "3")
    monkeypatch.setenv("CUTOFFLAB_CHUNK_SIZE", "64")
    cfg = get_settings()
    assert cfg.THREADS == 3
    assert cfg.CHUNK_SIZE == 64


def test_threads_must_be_positive():
    with pytest.raises(ValidationError):
        Settings(THREADS=0)
    with pytest.raises(ValidationError):
        Settings(CHUNK_SIZE=-1)


def test_default_threads_is_positive():
    assert Settings().THREADS >= 1


def _record(level, message):
    return logging.LogRecord("cutofflab.services.sde", level, __file__, 1, message, None, None)


def test_chunk_filter_drops_progress_chatter(monkeypatch):
    monkeypatch.setattr(logging.getLogger(), "level", logging.INFO)
    filt = ChunkProgressFilter()
    assert not filt.filter(_record(logging.INFO, "chunk 3 done (256 paths)"))
    assert filt.filter(_record(logging.INFO, "Sampling 10 paths n=100"))
    assert filt.filter(_record(logging.WARNING, "chunk 3 hit the order tolerance"))


def test_chunk_filter_passes_everything_at_debug(monkeypatch):
    monkeypatch.setattr(logging.getLogger(), "level", logging.DEBUG)
    assert ChunkProgressFilter().filter(_record(logging.INFO, "chunk 3 done"))


def test_exit_codes():
    assert UsageError.exit_code == 1
    assert DomainError.exit_code == 1
    assert EmptySample.exit_code == 1
    assert NumericalFailure.exit_code == 2
    assert MembershipFailure("gap", x=1.0, margin=-1e-3).exit_code == 2
    err = StepBudgetExceeded("budget", [4, 1])
    assert err.exit_code == 2
    assert err.path_indices == [4, 1]
