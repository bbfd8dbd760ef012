"""Descent trace CSV: one row per iteration, exact float round-trip."""

from __future__ import annotations

from .optim import IterationRecord

HEADER = "iter,J1,curve_energy,mean_sq,obstacle,total,phi_inf,picard_iters,wallclock_s"

_FLOAT_FIELDS = ("J1", "curve_energy", "mean_sq", "obstacle", "total", "phi_inf")


def format_record(rec: IterationRecord) -> str:
    floats = [format(getattr(rec, name), ".17e") for name in _FLOAT_FIELDS]
    return ",".join(
        [str(rec.iter), *floats, str(rec.picard_iters), format(rec.wallclock_s, ".17e")]
    )


def write_trace(records, path) -> None:
    with open(path, "w") as f:
        f.write(HEADER + "\n")
        for rec in records:
            f.write(format_record(rec) + "\n")


def read_trace(path) -> list:
    records = []
    with open(path) as f:
        header = f.readline().strip()
        if header != HEADER:
            raise ValueError(f"not a trace file (bad header): {path}")
        for lineno, line in enumerate(f, 2):
            if not line.strip():
                continue
            parts = line.strip().split(",")
            if len(parts) != 9:
                raise ValueError(f"{path}:{lineno}: expected 9 columns, got {len(parts)}")
            records.append(
                IterationRecord(
                    iter=int(parts[0]),
                    J1=float(parts[1]),
                    curve_energy=float(parts[2]),
                    mean_sq=float(parts[3]),
                    obstacle=float(parts[4]),
                    total=float(parts[5]),
                    phi_inf=float(parts[6]),
                    picard_iters=int(parts[7]),
                    wallclock_s=float(parts[8]),
                )
            )
    return records


class TraceWriter:
    """Crash-safe incremental writer: every row is flushed as it arrives."""

    def __init__(self, path):
        self.path = path
        self._file = open(path, "w")
        self._file.write(HEADER + "\n")
        self._file.flush()

    def __call__(self, rec: IterationRecord, curve=None) -> None:
        self._file.write(format_record(rec) + "\n")
        self._file.flush()

    def close(self) -> None:
        self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
