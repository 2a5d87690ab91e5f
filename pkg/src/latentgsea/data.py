"""Expression-matrix and gene-set loading, validation, transforms, persistence.

Text formats are deliberately plain: expression matrices are TSV/CSV with a
header row and identifiers in the first column; gene sets use the GMT
convention (one set per line: id, description, members).  Floats are written
with ``repr`` so a write/load/write cycle is byte-stable.
"""

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class ExpressionMatrix:
    """Dense genes x samples matrix with identifier bookkeeping."""

    gene_ids: tuple
    sample_ids: tuple
    values: np.ndarray  # shape (G, N), float64
    transformed: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        g, n = len(self.gene_ids), len(self.sample_ids)
        if values.shape != (g, n):
            raise ValueError(f"values shape {values.shape} != (genes={g}, samples={n})")
        if g < 2:
            raise ValueError(f"need at least 2 genes, got {g}")
        if n < 2:
            raise ValueError(f"need at least 2 samples, got {n}")
        _check_unique(self.gene_ids, "gene id")
        _check_unique(self.sample_ids, "sample id")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise ValueError(
                f"non-finite value at gene {self.gene_ids[bad[0]]!r}, "
                f"sample {self.sample_ids[bad[1]]!r}"
            )

    @property
    def n_genes(self):
        return len(self.gene_ids)

    @property
    def n_samples(self):
        return len(self.sample_ids)


@dataclass(frozen=True)
class GeneSetCollection:
    """Named list of gene sets; each set is (id, description, member ids)."""

    name: str
    sets: tuple  # of (set_id, description, frozenset of gene ids)

    def __post_init__(self):
        norm = tuple((sid, desc, frozenset(members)) for sid, desc, members in self.sets)
        object.__setattr__(self, "sets", norm)
        _check_unique([s[0] for s in norm], "set id")
        for sid, _, members in norm:
            if not members:
                raise ValueError(f"gene set {sid!r} is empty")

    def __len__(self):
        return len(self.sets)

    def set_ids(self):
        return [s[0] for s in self.sets]

    def members(self, set_id):
        for sid, _, m in self.sets:
            if sid == set_id:
                return m
        raise KeyError(set_id)

    def universe(self):
        out = set()
        for _, _, m in self.sets:
            out |= m
        return out


def _check_unique(ids, what):
    seen = set()
    for x in ids:
        if x in seen:
            raise ValueError(f"duplicate {what}: {x!r}")
        seen.add(x)


def _sniff_delim(header_line):
    return "\t" if "\t" in header_line else ","


def load_expression_matrix(path, orientation="genes-in-rows"):
    """Load a delimited expression matrix into genes x samples orientation.

    ``orientation`` says what the file's *rows* are.  Duplicate identifiers,
    non-numeric cells and ragged rows are rejected with the offending
    coordinates.
    """
    if orientation not in ("genes-in-rows", "samples-in-rows"):
        raise ValueError(f"unknown orientation: {orientation!r}")
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    delim = _sniff_delim(lines[0])
    header = lines[0].split(delim)
    col_ids = header[1:]
    if not col_ids:
        raise ValueError(f"{path}: header has no data columns")
    row_ids = []
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split(delim)
        if len(fields) != len(header):
            raise ValueError(
                f"{path}:{lineno}: ragged row ({len(fields)} fields, expected {len(header)})"
            )
        row_ids.append(fields[0])
        vals = []
        for j, tok in enumerate(fields[1:], start=2):
            try:
                vals.append(float(tok))
            except ValueError:
                raise ValueError(
                    f"{path}:{lineno}: non-numeric cell in column {j} ({tok!r})"
                ) from None
        rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    values = np.array(rows, dtype=np.float64)
    _check_unique(row_ids, "row identifier")
    _check_unique(col_ids, "column identifier")
    if orientation == "genes-in-rows":
        gene_ids, sample_ids = row_ids, col_ids
    else:
        gene_ids, sample_ids = col_ids, row_ids
        values = values.T
    return ExpressionMatrix(tuple(gene_ids), tuple(sample_ids), values)


def write_expression_matrix(m, path, delim="\t", id_header="id"):
    """Write genes x samples TSV/CSV; floats via repr (round-trip exact)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(delim.join([id_header, *m.sample_ids]) + "\n")
        for i, gid in enumerate(m.gene_ids):
            row = [gid] + [repr(float(v)) for v in m.values[i]]
            fh.write(delim.join(row) + "\n")


def log_transform(m):
    """Apply log2(x + 1) to every value; refuses negatives and re-application."""
    if m.transformed:
        raise ValueError("matrix already log-transformed")
    if np.any(m.values < 0):
        i, j = np.argwhere(m.values < 0)[0]
        raise ValueError(
            f"negative value at gene {m.gene_ids[i]!r}, sample {m.sample_ids[j]!r}; "
            "load already-normalized data with the skip-transform flag instead"
        )
    return replace(m, values=np.log2(m.values + 1.0), transformed=True)


def parse_gmt(path, name=None):
    """Parse a GMT file: one set per line, tab-separated id/description/members."""
    sets = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) < 3:
                raise ValueError(
                    f"{path}:{lineno}: expected at least 3 tab-separated fields, "
                    f"got {len(fields)}"
                )
            sid, desc = fields[0], fields[1]
            if sid in seen:
                raise ValueError(f"{path}:{lineno}: duplicate set id {sid!r}")
            seen.add(sid)
            members = frozenset(tok for tok in fields[2:] if tok)
            if not members:
                raise ValueError(f"{path}:{lineno}: set {sid!r} has no members")
            sets.append((sid, desc, members))
    return GeneSetCollection(name or str(path), tuple(sets))


def write_gmt(c, path):
    with open(path, "w", encoding="utf-8") as fh:
        for sid, desc, members in c.sets:
            fh.write("\t".join([sid, desc, *sorted(members)]) + "\n")


def filter_gene_sets(c, universe, min_size=15, max_size=500):
    """Intersect each set with ``universe`` and keep those inside the size window.

    Returns ``(filtered_collection, report)`` where report rows are
    ``(set_id, reason)`` for every dropped set.  Idempotent for fixed
    arguments.  The [15, 500] default window is standard enrichment practice.
    """
    if min_size < 2:
        raise ValueError(f"min_size must be >= 2, got {min_size}")
    if max_size < min_size:
        raise ValueError(f"max_size {max_size} < min_size {min_size}")
    universe = set(universe)
    if not universe:
        raise ValueError("empty gene universe")
    kept = []
    report = []
    for sid, desc, members in c.sets:
        inter = members & universe
        if len(inter) < min_size:
            report.append((sid, f"size {len(inter)} after intersection < min_size {min_size}"))
        elif len(inter) > max_size:
            report.append((sid, f"size {len(inter)} after intersection > max_size {max_size}"))
        else:
            kept.append((sid, desc, frozenset(inter)))
    return GeneSetCollection(c.name, tuple(kept)), report


@dataclass(frozen=True)
class GeneScaler:
    """Per-gene centering/scaling parameters from :func:`standardize_genes`."""

    gene_ids: tuple
    means: np.ndarray
    sds: np.ndarray
    removed: tuple = field(default_factory=tuple)  # (gene_id, reason)

    def apply(self, m):
        """Standardize another matrix with these stored statistics."""
        if tuple(m.gene_ids) != self.gene_ids:
            extra = set(m.gene_ids) - set(self.gene_ids)
            missing = set(self.gene_ids) - set(m.gene_ids)
            raise ValueError(
                f"gene ids do not match scaler (missing {sorted(missing)[:3]}, "
                f"unexpected {sorted(extra)[:3]}, or order differs)"
            )
        vals = (m.values - self.means[:, None]) / self.sds[:, None]
        return replace(m, values=vals)


def standardize_genes(m):
    """Center/scale each gene row to mean 0, sd 1 (population sd).

    Zero-variance genes carry no correlation signal and break Pearson; they
    are removed and reported.  Returns ``(standardized_matrix, scaler)``.
    """
    if not m.transformed:
        raise ValueError("standardize_genes expects a log-transformed matrix")
    means = m.values.mean(axis=1)
    sds = m.values.std(axis=1)  # population (1/N), matching the Pearson kernel
    keep = sds > 0.0
    removed = tuple((m.gene_ids[i], "zero variance") for i in np.flatnonzero(~keep))
    if not np.any(keep):
        raise ValueError("all genes have zero variance")
    if removed:
        kept_ids = tuple(g for g, k in zip(m.gene_ids, keep) if k)
        m = replace(m, gene_ids=kept_ids, values=m.values[keep])
        means, sds = means[keep], sds[keep]
    scaler = GeneScaler(tuple(m.gene_ids), means, sds, removed)
    return scaler.apply(m), scaler


def intersect_universes(matrices):
    """Restrict several matrices to their common genes, in first-matrix order."""
    if not matrices:
        raise ValueError("no matrices given")
    common = set(matrices[0].gene_ids)
    for m in matrices[1:]:
        common &= set(m.gene_ids)
    if len(common) < 2:
        raise ValueError(f"common gene universe has {len(common)} genes; need >= 2")
    order = [g for g in matrices[0].gene_ids if g in common]
    out = []
    for m in matrices:
        pos = {g: i for i, g in enumerate(m.gene_ids)}
        idx = np.array([pos[g] for g in order])
        out.append(replace(m, gene_ids=tuple(order), values=m.values[idx]))
    return out


def write_report(rows, path, header=("id", "reason")):
    """Write a simple two-or-more-column TSV report."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(str(x) for x in row) + "\n")


def write_scaler(scaler, path):
    rows = [
        (g, repr(float(mu)), repr(float(sd)))
        for g, mu, sd in zip(scaler.gene_ids, scaler.means, scaler.sds)
    ]
    write_report(rows, path, header=("id", "mean", "sd"))


def load_scaler(path):
    gene_ids, means, sds = [], [], []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header != ["id", "mean", "sd"]:
            raise ValueError(f"{path}: not a scaler report (header {header})")
        for line in fh:
            g, mu, sd = line.rstrip("\n").split("\t")
            gene_ids.append(g)
            means.append(float(mu))
            sds.append(float(sd))
    return GeneScaler(tuple(gene_ids), np.array(means), np.array(sds))


def load_labels(path):
    """Two-column TSV (sample_id, label) -> dict preserving file order."""
    labels = {}
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        fields = first.split("\t")
        if len(fields) != 2:
            raise ValueError(f"{path}: expected two tab-separated columns")
        if fields[0] not in ("sample_id", "id", "sample"):
            labels[fields[0]] = fields[1]  # no header row
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ValueError(f"{path}:{lineno}: expected two columns")
            if fields[0] in labels:
                raise ValueError(f"{path}:{lineno}: duplicate sample id {fields[0]!r}")
            labels[fields[0]] = fields[1]
    return labels
