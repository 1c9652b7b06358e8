"""Loaders for the USPS and Absenteeism data, permutation, synthetic streams."""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Union

import numpy as np

from .core import DataError, DomainError, Observation, as_randomness

USPS_DIM = 256
USPS_SLACK = 1e-6


@dataclass
class Stream:
    """Features (n x dim) and optional labels, in arrival order."""

    X: np.ndarray
    y: Optional[np.ndarray] = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X[:, None]
        if self.y is not None:
            self.y = np.asarray(self.y)
            if len(self.y) != len(self.X):
                raise DomainError(f"{len(self.X)} feature rows but {len(self.y)} labels")

    def __len__(self):
        return len(self.X)

    def __iter__(self) -> Iterator:
        labels = self.y if self.y is not None else [None] * len(self.X)
        for x, lab in zip(self.X, labels):
            yield x, (lab.item() if hasattr(lab, "item") else lab)

    def observations(self) -> List[Observation]:
        return [Observation(tuple(x), lab) for x, lab in self]

    def take(self, idx) -> "Stream":
        return Stream(self.X[idx], None if self.y is None else self.y[idx])


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def load_usps(path: Union[str, Path]) -> Stream:
    """Read USPS digits: one record per line, label then 256 pixel values.

    Plain whitespace-separated rows are expected; LIBSVM-style ``i:v`` tokens
    are accepted too (missing pixels read as 0, labels 1..10 shifted to 0..9).
    A non-numeric first line is treated as a header.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"USPS file not found: {path}")
    rows, labels = [], []
    sparse = False
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            toks = line.split()
            if not toks:
                continue
            if lineno == 1 and not _is_number(toks[0]):
                continue
            if ":" in line:
                sparse = True
                x = np.zeros(USPS_DIM)
                try:
                    for tok in toks[1:]:
                        i, v = tok.split(":")
                        x[int(i) - 1] = float(v)
                    label = int(float(toks[0]))
                except (ValueError, IndexError) as exc:
                    raise DataError(f"{path}:{lineno}: malformed record ({exc})") from None
            else:
                if len(toks) != USPS_DIM + 1:
                    raise DataError(
                        f"{path}:{lineno}: expected label plus {USPS_DIM} values, got {len(toks) - 1} values"
                    )
                try:
                    label = int(float(toks[0]))
                    x = np.array([float(t) for t in toks[1:]])
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from None
            if np.any(np.abs(x) > 1 + USPS_SLACK):
                raise DataError(f"{path}:{lineno}: pixel value outside [-1, 1]")
            rows.append(x)
            labels.append(label)
    if not rows:
        return Stream(np.empty((0, USPS_DIM)), np.empty(0, dtype=int))
    y = np.array(labels)
    if sparse and y.min() >= 1 and y.max() == 10:
        y = y - 1
    return Stream(np.vstack(rows), y)


def _norm_header(h: str) -> str:
    return re.sub(r"[^a-z0-9]", "", h.lower())


ABSENTEEISM_SCALES = {"age": 50.0, "education": 3.0, "son": 4.0}
ABSENTEEISM_EXTRA = ("socialdrinker", "socialsmoker")
ABSENTEEISM_LABEL = "disciplinaryfailure"


def load_absenteeism(path: Union[str, Path], extra_attributes: bool = False) -> Stream:
    """Absenteeism at work, in file row order.

    Features are Age/50, Education/3 and Son/4, optionally followed by the
    Social drinker and Social smoker indicators; Disciplinary failure is the
    label only.  Header matching ignores case and punctuation, and the
    delimiter (comma or semicolon) is sniffed.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"Absenteeism file not found: {path}")
    text = path.read_text()
    if not text.strip():
        return Stream(np.empty((0, 5 if extra_attributes else 3)), np.empty(0, dtype=int))
    try:
        dialect = csv.Sniffer().sniff(text.splitlines()[0], delimiters=",;\t")
    except csv.Error:
        dialect = csv.excel
    reader = csv.reader(io.StringIO(text), dialect)
    header = next(reader)
    index = {_norm_header(h): i for i, h in enumerate(header)}
    wanted = list(ABSENTEEISM_SCALES) + (list(ABSENTEEISM_EXTRA) if extra_attributes else []) + [ABSENTEEISM_LABEL]
    missing = [w for w in wanted if w not in index]
    if missing:
        raise DataError(f"{path}: missing columns {missing}; available headers: {header}")
    scales = [ABSENTEEISM_SCALES.get(w, 1.0) for w in wanted[:-1]]
    rows, labels = [], []
    for lineno, rec in enumerate(reader, 2):
        if not rec or all(not c.strip() for c in rec):
            continue
        try:
            rows.append([float(rec[index[w]]) / s for w, s in zip(wanted[:-1], scales)])
            labels.append(int(float(rec[index[ABSENTEEISM_LABEL]])))
        except (ValueError, IndexError) as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    return Stream(np.array(rows), np.array(labels))


def permute(stream: Stream, seed) -> Stream:
    """Uniformly random reordering (Fisher-Yates via numpy), fixed by ``seed``."""
    gen = as_randomness(seed).generator
    return stream.take(gen.permutation(len(stream)))


@dataclass
class StreamSpec:
    """Synthetic stream: ``pre`` generator before ``change_point``, ``post`` after.

    Generators are strings: ``bernoulli:P``, ``normal:MU,SIGMA``, ``uniform``
    or ``labelled:DIM,P`` (standard normal features with independent
    Bernoulli(P) labels).  ``change_point=None`` means no change;
    ``change_point=0`` means the post generator from the first step.
    """

    n: int
    pre: str = "uniform"
    post: Optional[str] = None
    change_point: Optional[int] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.n < 0:
            raise DomainError(f"stream length must be nonnegative, got {self.n}")
        if self.change_point is not None:
            if self.change_point < 0:
                raise DomainError(f"change point must be >= 0, got {self.change_point}")
            if self.post is None:
                raise DomainError("a change point needs a post-change generator")


def _draw(gen_spec: str, size: int, rng: np.random.Generator):
    name, _, args = gen_spec.partition(":")
    try:
        vals = [float(a) for a in args.split(",")] if args else []
        if name == "bernoulli":
            (p,) = vals
            return (rng.random(size) < p).astype(float)[:, None], None
        if name == "normal":
            mu, sigma = vals
            return rng.normal(mu, sigma, size)[:, None], None
        if name == "uniform":
            return rng.random(size)[:, None], None
        if name == "labelled":
            dim, p = int(vals[0]), vals[1]
            return rng.normal(size=(size, dim)), (rng.random(size) < p).astype(int)
    except (ValueError, IndexError):
        raise DomainError(f"bad generator arguments in {gen_spec!r}") from None
    raise DomainError(f"unknown generator {gen_spec!r}")


def synth_stream(spec: StreamSpec) -> Stream:
    rng = as_randomness(spec.seed).generator
    T = spec.n if spec.change_point is None else min(spec.change_point, spec.n)
    X1, y1 = _draw(spec.pre, T, rng)
    if T == spec.n:
        return Stream(X1, y1)
    X2, y2 = _draw(spec.post, spec.n - T, rng)
    if X1.shape[1] != X2.shape[1] or (y1 is None) != (y2 is None):
        raise DomainError("pre- and post-change generators must produce the same kind of observation")
    y = None if y1 is None else np.concatenate([y1, y2])
    return Stream(np.vstack([X1, X2]), y)


def read_stream(path: Union[str, Path], fmt: str, **kwargs) -> Stream:
    """Dispatch on ``fmt``: ``usps``, ``absenteeism`` or ``csv`` (last column label when labelled)."""
    if fmt == "usps":
        return load_usps(path)
    if fmt == "absenteeism":
        return load_absenteeism(path, **kwargs)
    if fmt == "csv":
        return load_csv(path, **kwargs)
    raise DomainError(f"unknown input format {fmt!r}")


def load_csv(path: Union[str, Path], labelled: bool = False) -> Stream:
    """Numeric CSV with a header row; with ``labelled`` the last column is the label."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        rows = []
        for lineno, rec in enumerate(reader, 2):
            if not rec:
                continue
            try:
                rows.append([float(c) for c in rec])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    if header is None or not rows:
        return Stream(np.empty((0, 1)))
    if len({len(r) for r in rows}) != 1:
        raise DataError(f"{path}: rows have differing numbers of columns")
    A = np.array(rows)
    if labelled:
        return Stream(A[:, :-1], A[:, -1].astype(int) if np.all(A[:, -1] == A[:, -1].round()) else A[:, -1])
    return Stream(A)
