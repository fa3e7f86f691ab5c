"""Obstruction to noncontextual value maps on a 3x3 observable square.

The square holds nine two-qubit observables arranged so that the three
observables in each row and each column commute and multiply to plus or
minus the identity.  Any assignment of +-1 values that respects all six
product constraints simultaneously would have to satisfy an impossible
parity: the product of all six row and column constraints touches each
entry twice (so the left side squares to +1) while the right side
multiplies to -1.  The search below verifies the operator identities
numerically, enumerates all 2^9 sign assignments, and certifies that
none survives.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ObservableGrid",
    "CheckResult",
    "GridReport",
    "WitnessReport",
    "standard_grid",
    "verify_grid",
    "grid_constraints",
    "count_sign_assignments",
    "assignment_search",
    "contextual_witness",
    "joint_value_distribution",
]

ATOL = 1e-12

_ID = np.eye(2, dtype=np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
_SINGLE = {"I": _ID, "X": _X, "Y": _Y, "Z": _Z}


def _two_qubit(label: str) -> np.ndarray:
    if len(label) != 2 or any(c not in _SINGLE for c in label):
        raise ValueError(f"label must be two of I, X, Y, Z, got {label!r}")
    return np.kron(_SINGLE[label[0]], _SINGLE[label[1]])


@dataclass(frozen=True)
class ObservableGrid:
    """A 3x3 arrangement of 4x4 observables with row/column sign targets."""

    entries: np.ndarray
    labels: tuple
    row_targets: tuple
    col_targets: tuple

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=np.complex128)
        if entries.shape != (3, 3, 4, 4):
            raise ValueError(f"entries must have shape (3, 3, 4, 4), got {entries.shape}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        if len(self.labels) != 3 or any(len(row) != 3 for row in self.labels):
            raise ValueError("labels must be a 3x3 nested tuple")
        for targets, name in ((self.row_targets, "row"), (self.col_targets, "column")):
            if len(targets) != 3 or any(t not in (1, -1) for t in targets):
                raise ValueError(f"{name} targets must be three signs +-1")

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(self.entries[i, j] for j in range(3))

    def col(self, j: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(self.entries[i, j] for i in range(3))


def standard_grid() -> ObservableGrid:
    """The usual two-qubit square: all row products +I, column products
    +I, +I, -I."""
    labels = (
        ("XI", "IX", "XX"),
        ("IY", "YI", "YY"),
        ("XY", "YX", "ZZ"),
    )
    entries = np.array([[_two_qubit(lbl) for lbl in row] for row in labels])
    return ObservableGrid(
        entries=entries,
        labels=labels,
        row_targets=(1, 1, 1),
        col_targets=(1, 1, -1),
    )


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class GridReport:
    checks: tuple
    row_signs: tuple
    col_signs: tuple

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)


def _product_sign(triple) -> tuple[int | None, float]:
    """Sign s with A B C = s I, or (None, deviation) if not proportional."""
    prod = triple[0] @ triple[1] @ triple[2]
    for sign in (1, -1):
        dev = float(np.max(np.abs(prod - sign * np.eye(4))))
        if dev <= ATOL:
            return sign, dev
    dev_plus = float(np.max(np.abs(prod - np.eye(4))))
    dev_minus = float(np.max(np.abs(prod + np.eye(4))))
    return None, min(dev_plus, dev_minus)


def verify_grid(grid: ObservableGrid) -> GridReport:
    """Numerically verify hermiticity, involution, commutation within each
    row and column, and the row/column product signs."""
    checks: list[CheckResult] = []

    herm_dev = float(
        max(
            np.max(np.abs(grid.entries[i, j] - grid.entries[i, j].conj().T))
            for i in range(3)
            for j in range(3)
        )
    )
    checks.append(
        CheckResult("hermitian", herm_dev <= ATOL, f"max deviation {herm_dev:.3e}")
    )

    sq_dev = float(
        max(
            np.max(np.abs(grid.entries[i, j] @ grid.entries[i, j] - np.eye(4)))
            for i in range(3)
            for j in range(3)
        )
    )
    checks.append(
        CheckResult("squares to identity", sq_dev <= ATOL, f"max deviation {sq_dev:.3e}")
    )

    def commute_dev(triple) -> float:
        worst = 0.0
        for a, b in itertools.combinations(triple, 2):
            worst = max(worst, float(np.max(np.abs(a @ b - b @ a))))
        return worst

    row_comm = max(commute_dev(grid.row(i)) for i in range(3))
    col_comm = max(commute_dev(grid.col(j)) for j in range(3))
    checks.append(
        CheckResult("rows commute", row_comm <= ATOL, f"max deviation {row_comm:.3e}")
    )
    checks.append(
        CheckResult("columns commute", col_comm <= ATOL, f"max deviation {col_comm:.3e}")
    )

    row_signs = []
    for i in range(3):
        sign, dev = _product_sign(grid.row(i))
        target = grid.row_targets[i]
        ok = sign == target
        row_signs.append(sign)
        checks.append(
            CheckResult(
                f"row {i} product",
                ok,
                f"expected {target:+d} I, found "
                + (f"{sign:+d} I (deviation {dev:.3e})" if sign is not None else f"no sign (deviation {dev:.3e})"),
            )
        )
    col_signs = []
    for j in range(3):
        sign, dev = _product_sign(grid.col(j))
        target = grid.col_targets[j]
        ok = sign == target
        col_signs.append(sign)
        checks.append(
            CheckResult(
                f"column {j} product",
                ok,
                f"expected {target:+d} I, found "
                + (f"{sign:+d} I (deviation {dev:.3e})" if sign is not None else f"no sign (deviation {dev:.3e})"),
            )
        )

    return GridReport(checks=tuple(checks), row_signs=tuple(row_signs), col_signs=tuple(col_signs))


def grid_constraints(grid: ObservableGrid) -> tuple[tuple[tuple[int, ...], int], ...]:
    """Product constraints as (variable indices, target sign) pairs.

    Variables number the nine entries row-major, 0 through 8.
    """
    constraints = []
    for i in range(3):
        constraints.append((tuple(3 * i + j for j in range(3)), grid.row_targets[i]))
    for j in range(3):
        constraints.append((tuple(3 * i + j for i in range(3)), grid.col_targets[j]))
    return tuple(constraints)


def count_sign_assignments(
    n_vars: int, constraints: tuple[tuple[tuple[int, ...], int], ...]
) -> tuple[int, int]:
    """Exhaustively count +-1 assignments satisfying all constraints.

    Returns (candidates examined, satisfying assignments).
    """
    examined = 0
    consistent = 0
    for values in itertools.product((1, -1), repeat=n_vars):
        examined += 1
        if all(
            int(np.prod([values[k] for k in idx])) == target
            for idx, target in constraints
        ):
            consistent += 1
    return examined, consistent


def assignment_search(grid: ObservableGrid) -> tuple[int, int]:
    """Verify the operator identities, then count consistent assignments."""
    report = verify_grid(grid)
    if not report.ok:
        failed = ", ".join(c.name for c in report.checks if not c.passed)
        raise ValueError(f"grid fails operator verification: {failed}")
    return count_sign_assignments(9, grid_constraints(grid))


@dataclass(frozen=True)
class WitnessReport:
    """Certificate that no noncontextual value map exists for the square."""

    n_candidates: int
    n_consistent: int
    parity_product: int
    constraint_lines: tuple
    labels: tuple

    def as_text(self) -> str:
        rows = [" | ".join(row) for row in self.labels]
        lines = [
            "Noncontextual value maps on the observable square: none exist.",
            "",
            "Square (rows x columns):",
            *(f"    {r}" for r in rows),
            "",
            "Constraints on a putative assignment v: entries -> {+1, -1}:",
            *(f"    {line}" for line in self.constraint_lines),
            "",
            f"Exhaustive search: {self.n_candidates} assignments examined, "
            f"{self.n_consistent} satisfy all six constraints.",
            "",
            "Parity argument: multiplying all six constraints, every entry",
            "appears exactly twice on the left, so the left side is +1; the",
            f"right side is the product of the six targets, {self.parity_product:+d}.",
            "The constraint system is therefore unsatisfiable: values cannot",
            "be assigned to the observables independently of the experimental",
            "context in which they are measured.",
        ]
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {
            "n_candidates": self.n_candidates,
            "n_consistent": self.n_consistent,
            "parity_product": self.parity_product,
            "constraints": list(self.constraint_lines),
        }


def contextual_witness(grid: ObservableGrid | None = None) -> WitnessReport:
    """Run the exhaustive search and package the impossibility certificate."""
    grid = grid or standard_grid()
    examined, consistent = assignment_search(grid)
    if consistent != 0:
        raise ValueError(
            f"grid admits {consistent} consistent assignments; no obstruction to certify"
        )
    parity = 1
    lines = []
    for idx, target in grid_constraints(grid):
        entries = " * ".join(f"v({grid.labels[k // 3][k % 3]})" for k in idx)
        lines.append(f"{entries} = {target:+d}")
        parity *= target
    return WitnessReport(
        n_candidates=examined,
        n_consistent=consistent,
        parity_product=parity,
        constraint_lines=tuple(lines),
        labels=grid.labels,
    )


def joint_value_distribution(
    grid: ObservableGrid, kind: str, index: int, state: np.ndarray
) -> dict[tuple[int, int, int], float]:
    """Joint probabilities of the three commuting observables in one row
    or column, in the given pure state.

    The three observables are diagonalized simultaneously through the
    combination A1 + 3 A2 + 9 A3, whose eigenvalues a + 3 b + 9 c with
    a, b, c in {+1, -1} are distinct and identify the value triple.
    """
    if kind not in ("row", "col"):
        raise ValueError(f"kind must be 'row' or 'col', got {kind!r}")
    if index not in (0, 1, 2):
        raise ValueError(f"index must be 0, 1, or 2, got {index}")
    vec = np.asarray(state, dtype=np.complex128).reshape(-1)
    if vec.shape != (4,):
        raise ValueError(f"state must be a 4-component vector, got shape {vec.shape}")
    norm = np.linalg.norm(vec)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"state must be normalized, got norm {norm!r}")

    triple = grid.row(index) if kind == "row" else grid.col(index)
    combined = triple[0] + 3.0 * triple[1] + 9.0 * triple[2]
    evals, evecs = np.linalg.eigh(combined)

    probs: dict[tuple[int, int, int], float] = {}
    for m, v in zip(evals, evecs.T):
        m_round = int(np.round(m))
        if abs(m - m_round) > 1e-9:
            raise RuntimeError(f"combined spectrum is off-integer at {m!r}")
        c = 1 if m_round > 0 else -1
        rem = m_round - 9 * c
        b = 1 if rem > 0 else -1
        a = rem - 3 * b
        if a not in (1, -1):
            raise RuntimeError(f"could not decode value triple from eigenvalue {m_round}")
        key = (a, b, c)
        amp = np.vdot(v, vec)
        probs[key] = probs.get(key, 0.0) + float(abs(amp) ** 2)
    return probs
