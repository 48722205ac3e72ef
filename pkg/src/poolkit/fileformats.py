"""On-disk text formats for designs, outcomes, and priors.

Design files are line oriented; bit order is part of the contract
(leftmost character = patient 0 / test 0):

    design v1
    n 3
    m 3
    rows
    011
    101
    110
    bloom            # optional block for layouts
    g 1
    b 3
    seed 42
    perm 2 0 1

Outcome files hold a single bitstring of length m:

    outcome v1
    m 3
    bits 010

Prior files hold one probability per line.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .bloom import BloomLayout
from .types import DesignMatrix, Prior, TestOutcome, ValidationError

__all__ = [
    "write_design", "read_design", "design_to_text", "design_from_text",
    "write_outcome", "read_outcome", "outcome_to_text", "outcome_from_text",
    "read_prior", "parse_prior_argument",
]


def design_to_text(design: DesignMatrix, layout: BloomLayout | None = None) -> str:
    lines = ["design v1", f"n {design.n}", f"m {design.m}", "rows"]
    lines.extend(str(row) for row in design.rows)
    if layout is not None:
        lines.append("bloom")
        lines.append(f"g {layout.g}")
        lines.append(f"b {layout.b}")
        lines.append(f"seed {layout.seed}")
        source = layout.permutations if layout.permutations is not None \
            else layout.assignments
        for j in range(layout.g):
            lines.append("perm " + " ".join(str(int(x)) for x in source[j]))
    return "\n".join(lines) + "\n"


def design_from_text(text: str) -> tuple[DesignMatrix, BloomLayout | None]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "design v1":
        raise ValidationError("not a design file (missing 'design v1' header)")
    fields: dict[str, str] = {}
    pos = 1
    while pos < len(lines) and lines[pos] != "rows":
        key, _, value = lines[pos].partition(" ")
        fields[key] = value
        pos += 1
    if pos == len(lines):
        raise ValidationError("design file has no 'rows' section")
    n, m = int(fields["n"]), int(fields["m"])
    pos += 1
    rows = []
    while pos < len(lines) and lines[pos] != "bloom":
        rows.append(lines[pos])
        pos += 1
    if len(rows) != m:
        raise ValidationError(f"design file declares m={m} but has {len(rows)} rows")
    if any(len(r) != n for r in rows):
        raise ValidationError(f"design file declares n={n} but a row disagrees")
    design = DesignMatrix(rows)

    layout = None
    if pos < len(lines):  # bloom block
        pos += 1
        bloom_fields: dict[str, str] = {}
        perms = []
        while pos < len(lines):
            key, _, value = lines[pos].partition(" ")
            if key == "perm":
                perms.append([int(x) for x in value.split()])
            else:
                bloom_fields[key] = value
            pos += 1
        g, b = int(bloom_fields["g"]), int(bloom_fields["b"])
        seed = int(bloom_fields.get("seed", 0))
        if len(perms) != g:
            raise ValidationError(f"bloom block declares g={g} but has {len(perms)} perms")
        perm_arr = np.asarray(perms, dtype=np.int64)
        layout = BloomLayout(n=n, g=g, b=b, assignments=perm_arr % b,
                             seed=seed, permutations=perm_arr)
    return design, layout


def write_design(path, design: DesignMatrix, layout: BloomLayout | None = None) -> None:
    Path(path).write_text(design_to_text(design, layout))


def read_design(path) -> tuple[DesignMatrix, BloomLayout | None]:
    return design_from_text(Path(path).read_text())


def outcome_to_text(outcome: TestOutcome) -> str:
    return f"outcome v1\nm {outcome.n}\nbits {outcome}\n"


def outcome_from_text(text: str) -> TestOutcome:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "outcome v1":
        raise ValidationError("not an outcome file (missing 'outcome v1' header)")
    fields = dict(ln.partition(" ")[::2] for ln in lines[1:])
    m = int(fields["m"])
    bits = fields["bits"]
    if len(bits) != m:
        raise ValidationError(f"outcome declares m={m} but has {len(bits)} bits")
    return TestOutcome(bits)


def write_outcome(path, outcome: TestOutcome) -> None:
    Path(path).write_text(outcome_to_text(outcome))


def read_outcome(path) -> TestOutcome:
    return outcome_from_text(Path(path).read_text())


def read_prior(path) -> Prior:
    values = [float(ln) for ln in Path(path).read_text().split()]
    return Prior(values)


def parse_prior_argument(arg: str, n: int) -> Prior:
    """CLI prior argument: either ``uniform:p`` or a file path."""
    if arg.startswith("uniform:"):
        return Prior.uniform(n, float(arg.split(":", 1)[1]))
    prior = read_prior(arg)
    if prior.n != n:
        raise ValidationError(f"prior file has {prior.n} entries, expected {n}")
    return prior
