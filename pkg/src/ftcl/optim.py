"""Parameter registry, Adam updates, finite-difference gradient checking
and the binary checkpoint format.

Gradients are hand-derived throughout the package; every loss helper
accumulates into the grad buffers owned by the :class:`ParamStore`, and a
single optimizer step consumes them.  ``check_gradients`` validates any
scalar loss against central differences.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_MAGIC = b"FTCLCKPT"
CHECKPOINT_VERSION = 1
_STEP_ENTRY = "__step__"
_MOMENT_SUFFIXES = (".adam_m", ".adam_v")


class Param:
    """One learnable tensor with its gradient and Adam moment buffers."""

    __slots__ = ("value", "grad", "adam_m", "adam_v")

    def __init__(self, value: np.ndarray):
        self.value = np.array(value, dtype=float)
        self.grad = np.zeros_like(self.value)
        self.adam_m = np.zeros_like(self.value)
        self.adam_v = np.zeros_like(self.value)


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.lr >= 0:
            raise ValueError("lr must be non-negative")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")


class ParamStore:
    """Ordered name -> Param mapping; insertion order is the canonical
    iteration order for updates, checkpoints and gradient checks."""

    def __init__(self):
        self._entries: dict[str, Param] = {}
        self.step_count = 0

    def add(self, name: str, value: np.ndarray) -> Param:
        if name in self._entries:
            raise ValueError(f"duplicate parameter name: {name!r}")
        p = Param(value)
        self._entries[name] = p
        return p

    def __getitem__(self, name: str) -> Param:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def n_elements(self) -> int:
        return sum(p.value.size for p in self._entries.values())

    def zero_grads(self) -> None:
        for p in self._entries.values():
            p.grad[...] = 0.0

    def adam_step(self, cfg: AdamConfig) -> None:
        """Bias-corrected Adam update over every entry."""
        t = self.step_count + 1
        bc1 = 1.0 - cfg.beta1**t
        bc2 = 1.0 - cfg.beta2**t
        for name, p in self._entries.items():
            if not np.all(np.isfinite(p.grad)):
                raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
            p.adam_m[...] = cfg.beta1 * p.adam_m + (1.0 - cfg.beta1) * p.grad
            p.adam_v[...] = cfg.beta2 * p.adam_v + (1.0 - cfg.beta2) * p.grad**2
            m_hat = p.adam_m / bc1
            v_hat = p.adam_v / bc2
            p.value[...] = p.value - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
        self.step_count = t

    def clone_values(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self._entries.items()}

    # -- checkpoint io ------------------------------------------------

    def save(self, path) -> None:
        """Write the store to the binary checkpoint format.

        Layout: magic ``FTCLCKPT``, version u32, entry count u32, then one
        record per entry: name length u16 + UTF-8 name, rank u8, one u32 per
        dim, payload as little-endian f64.  Adam moments are stored as
        sibling entries (``<name>.adam_m`` / ``<name>.adam_v``) and the step
        counter as a scalar ``__step__`` entry.
        """
        records: list[tuple[str, np.ndarray]] = []
        for name, p in self._entries.items():
            records.append((name, p.value))
            records.append((name + ".adam_m", p.adam_m))
            records.append((name + ".adam_v", p.adam_v))
        records.append((_STEP_ENTRY, np.array(float(self.step_count))))
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(records)))
            for name, arr in records:
                raw = name.encode("utf-8")
                fh.write(struct.pack("<H", len(raw)))
                fh.write(raw)
                fh.write(struct.pack("<B", arr.ndim))
                for d in arr.shape:
                    fh.write(struct.pack("<I", d))
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "ParamStore":
        with open(path, "rb") as fh:
            data = fh.read()
        if data[:8] != CHECKPOINT_MAGIC:
            raise ValueError("not a checkpoint file")
        if len(data) < 16:
            raise ValueError("truncated checkpoint")
        version, count = struct.unpack_from("<II", data, 8)
        if version != CHECKPOINT_VERSION:
            raise ValueError("unsupported checkpoint version")
        offset = 16
        raw_entries: dict[str, np.ndarray] = {}
        order: list[str] = []
        for _ in range(count):
            try:
                (name_len,) = struct.unpack_from("<H", data, offset)
                offset += 2
                name = data[offset : offset + name_len].decode("utf-8")
                offset += name_len
                (rank,) = struct.unpack_from("<B", data, offset)
                offset += 1
                dims = struct.unpack_from(f"<{rank}I", data, offset)
                offset += 4 * rank
                n = int(np.prod(dims)) if rank else 1
                payload = np.frombuffer(data, dtype="<f8", count=n, offset=offset)
                if payload.size != n:
                    raise struct.error("short payload")
                offset += 8 * n
            except (struct.error, UnicodeDecodeError) as exc:
                raise ValueError("truncated checkpoint") from exc
            raw_entries[name] = payload.reshape(dims).astype(float)
            order.append(name)
        if offset != len(data):
            raise ValueError("truncated checkpoint")

        store = cls()
        for name in order:
            if name == _STEP_ENTRY or name.endswith(_MOMENT_SUFFIXES):
                continue
            p = store.add(name, raw_entries[name])
            for suffix, buf in ((".adam_m", p.adam_m), (".adam_v", p.adam_v)):
                moment = raw_entries.get(name + suffix)
                if moment is None or moment.shape != p.value.shape:
                    raise ValueError("truncated checkpoint")
                buf[...] = moment
        if _STEP_ENTRY not in raw_entries:
            raise ValueError("truncated checkpoint")
        store.step_count = int(raw_entries[_STEP_ENTRY])
        return store


def zero_grads(store: ParamStore) -> None:
    store.zero_grads()


def adam_step(store: ParamStore, cfg: AdamConfig) -> None:
    store.adam_step(cfg)


@dataclass
class GradCheckReport:
    """Outcome of one finite-difference sweep."""

    n_checked: int
    max_rel_error: float
    failures: list = field(default_factory=list)
    worst: tuple = ()

    @property
    def passed(self) -> bool:
        return not self.failures


def check_gradients(
    loss_fn,
    store: ParamStore,
    step: float = 1e-4,
    rtol: float = 1e-3,
    sample_limit: int | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare the gradients accumulated by ``loss_fn`` against central
    finite differences.

    ``loss_fn(store)`` must return a scalar and accumulate gradients into
    the store's grad buffers (they are zeroed here before the analytic
    call).  Every element is checked unless ``sample_limit`` caps the sweep,
    in which case a seeded subsample of at least 200 elements is used.
    Relative error is |analytic - numeric| / max(|analytic|, |numeric|,
    1e-8).
    """
    store.zero_grads()
    base = float(loss_fn(store))
    analytic = {name: p.grad.copy() for name, p in store.items()}
    store.zero_grads()
    again = float(loss_fn(store))
    if base != again:
        raise RuntimeError("loss_fn is non-deterministic across identical calls")

    positions = [
        (name, idx) for name, p in store.items() for idx in range(p.value.size)
    ]
    if sample_limit is not None and len(positions) > max(sample_limit, 200):
        rng = np.random.default_rng(seed)
        keep = rng.choice(len(positions), size=max(sample_limit, 200), replace=False)
        positions = [positions[int(k)] for k in sorted(keep)]

    failures = []
    max_rel = 0.0
    worst = ()
    for name, idx in positions:
        flat = store[name].value.reshape(-1)
        orig = flat[idx]
        flat[idx] = orig + step
        store.zero_grads()
        hi = float(loss_fn(store))
        flat[idx] = orig - step
        store.zero_grads()
        lo = float(loss_fn(store))
        flat[idx] = orig
        numeric = (hi - lo) / (2.0 * step)
        a = analytic[name].reshape(-1)[idx]
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        if rel > max_rel:
            max_rel = rel
            worst = (name, idx, a, numeric)
        if rel > rtol:
            failures.append((name, idx, a, numeric, rel))
    store.zero_grads()
    loss_fn(store)  # leave the analytic gradients in place
    return GradCheckReport(len(positions), max_rel, failures, worst)
