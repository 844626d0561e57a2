"""Engine configuration, read from Django settings (which read the environment)."""

from dataclasses import dataclass
from typing import Optional

from django.core.exceptions import ImproperlyConfigured

from consensus.peers import DEFAULT_LAMPORT_BYTE_INDEX, LamportInit

DEFAULT_ORPHAN_CAPACITY = 10_000
DEFAULT_ORPHAN_TIMEOUT = 200


@dataclass(frozen=True)
class EngineConfig:
    lamport_init: str = LamportInit.ALL_ZERO.value
    lamport_byte_index: int = DEFAULT_LAMPORT_BYTE_INDEX
    root_majority: Optional[int] = None
    strip_flag_tables: bool = True
    orphan_capacity: int = DEFAULT_ORPHAN_CAPACITY
    orphan_timeout: int = DEFAULT_ORPHAN_TIMEOUT
    # None compares whole self-ancestor chains
    compare_depth: Optional[int] = None

    def __post_init__(self):
        if self.orphan_capacity < 1:
            raise ImproperlyConfigured('ACA_ORPHAN_CAPACITY must be positive')
        if self.orphan_timeout < 0:
            raise ImproperlyConfigured('ACA_ORPHAN_TIMEOUT cannot be negative')
        if self.compare_depth is not None and self.compare_depth < 1:
            raise ImproperlyConfigured('ACA_COMPARE_DEPTH must be at least 1 when set')
        if self.lamport_init not in {strategy.value for strategy in LamportInit}:
            raise ImproperlyConfigured(f'Unknown ACA_LAMPORT_INIT value: {self.lamport_init!r}')

    @classmethod
    def from_settings(cls) -> 'EngineConfig':
        from django.conf import settings
        return cls(
            lamport_init=settings.ACA_LAMPORT_INIT,
            lamport_byte_index=settings.ACA_LAMPORT_BYTE_INDEX,
            root_majority=settings.ACA_ROOT_MAJORITY,
            strip_flag_tables=settings.ACA_STRIP_FLAG_TABLES,
            orphan_capacity=settings.ACA_ORPHAN_CAPACITY,
            orphan_timeout=settings.ACA_ORPHAN_TIMEOUT,
            compare_depth=settings.ACA_COMPARE_DEPTH,
        )
