"""Python bindings for the virtually non-volatile heap.

Objects live in a simulated NVM device and are cached in a bounded volatile
buffer; ``VnvHeap.persist`` always finishes within ``persist_bound(config)``
word transfers.
"""

from ._core import (
    CostMeter,
    EnergyModel,
    FileBackedNvm,
    HeapConfig,
    HeapStats,
    ObjectHandle,
    ObjectState,
    PersistReport,
    ReadGuard,
    SimulatedNvm,
    StorageDevice,
    VnvError,
    VnvHeap,
    WriteGuard,
    bench,
    persist_bound,
    wcec_mj,
)

__all__ = [
    "CostMeter",
    "EnergyModel",
    "FileBackedNvm",
    "HeapConfig",
    "HeapStats",
    "ObjectHandle",
    "ObjectState",
    "PersistReport",
    "ReadGuard",
    "SimulatedNvm",
    "StorageDevice",
    "VnvError",
    "VnvHeap",
    "WriteGuard",
    "bench",
    "persist_bound",
    "wcec_mj",
]
