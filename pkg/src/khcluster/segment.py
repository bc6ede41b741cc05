"""Connected-segment approximation of grayscale images.

Segments are 4-connected pixel sets. A merging pass greedily unites the
adjacent pair with the smallest error increase, tracked with a lazily
invalidated heap over the region adjacency graph. Between merges, boundary
correction moves single pixels or same-intensity pixel groups across
segment borders whenever that lowers the total squared error, subject to a
connectivity lock: a move that would tear the donor apart is refused even
when its error delta is favorable. Contact counts (the number of adjacent
pixel pairs straddling each segment border) are maintained exactly so the
adjacency graph never drifts from the labelling.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from . import reclass
from .core import (InputFormatError, InternalConsistencyError,
                   PreconditionError, clamped_cluster_energy, sigma)

REFRESH_INTERVAL = 1024  # full stats/heap rebuild cadence, washes out float drift


@dataclass(frozen=True)
class GrayImage:
    """Grayscale raster, intensities in [0, 255], row-major flat storage."""

    width: int
    height: int
    intensities: np.ndarray  # (width * height,) float64, read only

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise PreconditionError("image must have positive dimensions")
        px = np.asarray(self.intensities, dtype=np.float64)
        if px.shape != (self.width * self.height,):
            raise PreconditionError("intensity buffer does not match dimensions")
        if not np.all(np.isfinite(px)):
            raise PreconditionError("intensities must be finite")
        if px.min() < 0.0 or px.max() > 255.0:
            raise PreconditionError("intensities must lie in [0, 255]")
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "intensities", px)

    @classmethod
    def from_array(cls, arr) -> "GrayImage":
        a = np.asarray(arr, dtype=np.float64)
        if a.ndim != 2:
            raise PreconditionError("expected a 2-D array of intensities")
        return cls(a.shape[1], a.shape[0], a.reshape(-1))

    def as_array(self) -> np.ndarray:
        return self.intensities.reshape(self.height, self.width).copy()

    @property
    def n_pixels(self) -> int:
        return self.width * self.height


# ---------------------------------------------------------------- PGM I/O

def _tokenize_header(buf: bytes, need: int):
    """First tokens of a PGM header with (line, column) positions.

    '#' starts a comment running to the end of the line. Returns the tokens
    and the offset of the byte right after the single whitespace character
    that terminates the last requested token.
    """
    tokens = []
    i, line, col = 0, 1, 1
    while len(tokens) < need:
        while i < len(buf):
            ch = buf[i:i + 1]
            if ch == b"#":
                while i < len(buf) and buf[i:i + 1] != b"\n":
                    i += 1
            elif ch in b" \t\r\n":
                if ch == b"\n":
                    line, col = line + 1, 1
                else:
                    col += 1
                i += 1
            else:
                break
        if i >= len(buf):
            raise InputFormatError("truncated header", line=line, column=col)
        start, sline, scol = i, line, col
        while i < len(buf) and buf[i:i + 1] not in b" \t\r\n#":
            i += 1
            col += 1
        tokens.append((buf[start:i].decode("ascii", "replace"), sline, scol))
        if len(tokens) == need:
            # exactly one whitespace byte separates the header from raw data
            if i < len(buf) and buf[i:i + 1] in b" \t\r\n":
                i += 1
    return tokens, i


def _header_int(tok, lo: int, hi: int, what: str) -> int:
    text, line, col = tok
    try:
        val = int(text)
    except ValueError:
        raise InputFormatError(f"{what} is not an integer: {text!r}",
                               line=line, column=col) from None
    if not lo <= val <= hi:
        raise InputFormatError(f"{what} {val} outside [{lo}, {hi}]",
                               line=line, column=col)
    return val


def read_pgm(path) -> GrayImage:
    """Read a P2 or P5 PGM file. Sample depth above 8 bits is rejected."""
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 2:
        raise InputFormatError("file too short for a PGM header", line=1, column=1)
    magic = buf[:2].decode("ascii", "replace")
    if magic not in ("P2", "P5"):
        raise InputFormatError(f"unsupported magic {magic!r}, expected P2 or P5",
                               line=1, column=1)
    tokens, data_at = _tokenize_header(buf, 4)
    width = _header_int(tokens[1], 1, 1 << 20, "width")
    height = _header_int(tokens[2], 1, 1 << 20, "height")
    maxval = _header_int(tokens[3], 1, 255, "maxval")
    n = width * height

    if magic == "P5":
        raw = buf[data_at:data_at + n]
        if len(raw) < n:
            raise InputFormatError(
                f"raster holds {len(raw)} bytes, expected {n}")
        px = np.frombuffer(raw, dtype=np.uint8).astype(np.float64)
        if px.max(initial=0.0) > maxval:
            raise InputFormatError(f"sample exceeds declared maxval {maxval}")
        return GrayImage(width, height, px)

    # P2: every remaining token is one ASCII sample
    text = buf[data_at:].decode("ascii", "replace")
    vals = []
    line_no = buf[:data_at].count(b"\n") + 1
    col_base = data_at - (buf.rfind(b"\n", 0, data_at) + 1)
    for ln in text.splitlines() or [""]:
        body = ln.split("#", 1)[0]
        col = 1
        for piece in body.split():
            at = body.index(piece, col - 1) + 1 + col_base
            try:
                v = int(piece)
            except ValueError:
                raise InputFormatError(f"sample is not an integer: {piece!r}",
                                       line=line_no, column=at) from None
            if not 0 <= v <= maxval:
                raise InputFormatError(f"sample {v} outside [0, {maxval}]",
                                       line=line_no, column=at)
            vals.append(v)
            col = at - col_base + len(piece)
        line_no += 1
        col_base = 0
    if len(vals) != n:
        raise InputFormatError(f"raster holds {len(vals)} samples, expected {n}")
    return GrayImage(width, height, np.asarray(vals, dtype=np.float64))


def write_pgm(img: GrayImage, path, binary: bool = True) -> None:
    """Write 8-bit PGM; intensities round half up to the nearest integer."""
    px = np.clip(np.floor(img.intensities + 0.5), 0, 255).astype(np.uint8)
    header = f"{'P5' if binary else 'P2'}\n{img.width} {img.height}\n255\n"
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        if binary:
            f.write(px.tobytes())
        else:
            rows = px.reshape(img.height, img.width)
            for r in rows:
                f.write((" ".join(str(int(v)) for v in r) + "\n").encode("ascii"))


# ------------------------------------------------------------- segment map

def _edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class CurveRow:
    count: int
    error: float
    sigma: float


class SegmentMap:
    """Mutable segmentation with exact sufficient statistics per segment.

    Segment ids are dense at construction; merging kills ids but never
    creates them. The merge heap is lazily invalidated: every entry carries
    the version of both endpoints and is discarded when either version
    moved on. Each pixel move and merge updates the border contact counts
    from the labelling before it changes, so adjacency stays exact.
    """

    def __init__(self, img: GrayImage, labels: np.ndarray):
        self.img = img
        self.w, self.h = img.width, img.height
        self.labels = np.asarray(labels, dtype=np.int64).copy()
        if self.labels.shape != (img.n_pixels,):
            raise PreconditionError("label buffer does not match the image")
        cap = int(self.labels.max()) + 1
        self.counts = np.zeros(cap, dtype=np.int64)
        self.sums = np.zeros(cap, dtype=np.float64)
        self.sumsqs = np.zeros(cap, dtype=np.float64)
        self.alive = np.zeros(cap, dtype=bool)
        self.version = np.zeros(cap, dtype=np.int64)
        self.pixels: dict[int, set[int]] = {}
        self.adj: dict[int, set[int]] = {}
        self.contact: dict[tuple[int, int], int] = {}
        self.total_e = 0.0
        self.heap: list = []
        self._ops = 0
        self._lock_cache: dict[tuple[int, tuple[int, ...]], tuple[int, bool]] = {}
        # segments whose stats changed since the map was last boundary-stable;
        # None = stability unknown, scan everything
        self._dirty: set[int] | None = None
        self._rebuild()

    # -- construction

    @classmethod
    def from_image(cls, img: GrayImage, init: str = "pixels") -> "SegmentMap":
        if init == "pixels":
            return cls(img, np.arange(img.n_pixels, dtype=np.int64))
        if init == "flat_zones":
            return cls(img, _flat_zone_labels(img))
        raise PreconditionError(f"unknown init {init!r}")

    def _rebuild(self) -> None:
        """Recompute every derived structure from the labelling."""
        lab = self.labels
        px = self.img.intensities
        cap = self.counts.shape[0]
        self.counts = np.bincount(lab, minlength=cap)
        self.sums = np.bincount(lab, weights=px, minlength=cap)
        self.sumsqs = np.bincount(lab, weights=px * px, minlength=cap)
        self.alive = self.counts > 0
        self.pixels = {}
        for p, s in enumerate(lab):
            self.pixels.setdefault(int(s), set()).add(p)
        self.adj = {int(s): set() for s in np.flatnonzero(self.alive)}
        self.contact = {}
        l2 = lab.reshape(self.h, self.w)
        los, his = [], []
        for a, b in ((l2[:, :-1], l2[:, 1:]), (l2[:-1, :], l2[1:, :])):
            diff = a != b
            los.append(np.minimum(a[diff], b[diff]))
            his.append(np.maximum(a[diff], b[diff]))
        keys = np.concatenate(los) * cap + np.concatenate(his)
        uniq, cnt = np.unique(keys, return_counts=True)
        self.contact = {(int(k // cap), int(k % cap)): int(c)
                        for k, c in zip(uniq, cnt)}
        for u, v in self.contact:
            self.adj[u].add(v)
            self.adj[v].add(u)
        self.total_e = float(sum(self._seg_energy(int(s))
                                 for s in np.flatnonzero(self.alive)))
        self.version[self.alive] += 1
        self.heap = []
        self._lock_cache = {}
        self._dirty = None
        for u, v in sorted(self.contact):
            self._push_edge(u, v)

    # -- bookkeeping primitives

    def _seg_energy(self, s: int) -> float:
        return clamped_cluster_energy(
            self.sumsqs[s], self.sums[s] ** 2, int(self.counts[s]))

    def _mean(self, s: int) -> float:
        return self.sums[s] / self.counts[s]

    def _merge_cost(self, a: int, b: int) -> float:
        na, nb = int(self.counts[a]), int(self.counts[b])
        d = self._mean(a) - self._mean(b)
        return d * d * (na * nb / (na + nb))

    def _push_edge(self, a: int, b: int) -> None:
        a, b = _edge(a, b)
        heapq.heappush(self.heap, (self._merge_cost(a, b), a, b,
                                   int(self.version[a]), int(self.version[b])))

    def _neighbors(self, p: int):
        r, c = divmod(p, self.w)
        if r > 0:
            yield p - self.w
        if r < self.h - 1:
            yield p + self.w
        if c > 0:
            yield p - 1
        if c < self.w - 1:
            yield p + 1

    def _tick(self) -> None:
        self._ops += 1
        if self._ops % REFRESH_INTERVAL == 0:
            self._rebuild()

    @property
    def segment_count(self) -> int:
        return int(self.alive.sum())

    def copy(self) -> "SegmentMap":
        other = object.__new__(SegmentMap)
        other.img = self.img
        other.w, other.h = self.w, self.h
        other.labels = self.labels.copy()
        other.counts = self.counts.copy()
        other.sums = self.sums.copy()
        other.sumsqs = self.sumsqs.copy()
        other.alive = self.alive.copy()
        other.version = self.version.copy()
        other.pixels = {k: set(v) for k, v in self.pixels.items()}
        other.adj = {k: set(v) for k, v in self.adj.items()}
        other.contact = dict(self.contact)
        other.total_e = self.total_e
        other.heap = list(self.heap)
        other._ops = self._ops
        other._lock_cache = dict(self._lock_cache)
        other._dirty = None if self._dirty is None else set(self._dirty)
        return other

    def segment_sigma(self) -> float:
        return sigma(self.total_e, self.img.n_pixels)

    # -- merging

    def merge_best(self, lookahead: bool = False) -> tuple[int, int]:
        """Merge the adjacent pair with minimal error increase.

        Returns (kept, absorbed). Cost ties resolve to the lowest id pair,
        the survivor is the larger segment, equal sizes keep the lower id.
        With lookahead, every adjacent pair is tentatively merged and
        boundary-corrected on a copy, and the pair with the lowest
        post-correction error wins; the merge itself is applied uncorrected.
        """
        if self.segment_count < 2:
            raise PreconditionError("merging needs at least two segments")
        if lookahead:
            best = None
            for a, b in sorted(self.contact):
                trial = self.copy()
                trial._merge(a, b)
                trial.correct_boundaries()
                key = (trial.total_e, self._merge_cost(a, b), a, b)
                if best is None or key < best:
                    best = key
            return self._merge(best[2], best[3])
        while self.heap:
            cost, a, b, va, vb = heapq.heappop(self.heap)
            if (self.alive[a] and self.alive[b]
                    and va == self.version[a] and vb == self.version[b]):
                return self._merge(a, b)
        raise InternalConsistencyError("adjacency exists but the heap ran dry")

    def _merge(self, a: int, b: int) -> tuple[int, int]:
        if self.counts[b] > self.counts[a] or \
                (self.counts[b] == self.counts[a] and b < a):
            a, b = b, a
        # a survives, b dies
        e_before = self._seg_energy(a) + self._seg_energy(b)
        for p in self.pixels[b]:
            self.labels[p] = a
        self.pixels[a] |= self.pixels.pop(b)
        self.counts[a] += self.counts[b]
        self.sums[a] += self.sums[b]
        self.sumsqs[a] += self.sumsqs[b]
        self.counts[b] = 0
        self.sums[b] = 0.0
        self.sumsqs[b] = 0.0
        self.alive[b] = False
        self.total_e += self._seg_energy(a) - e_before

        self.contact.pop(_edge(a, b), None)
        self.adj[a].discard(b)
        for t in self.adj.pop(b):
            if t == a:
                continue
            self.adj[t].discard(b)
            self.adj[t].add(a)
            self.adj[a].add(t)
            moved = self.contact.pop(_edge(b, t))
            key = _edge(a, t)
            self.contact[key] = self.contact.get(key, 0) + moved
        self.version[a] += 1
        self.version[b] += 1
        if self._dirty is not None:
            self._dirty.add(a)
        for t in sorted(self.adj[a]):
            self._push_edge(a, t)
        self._tick()
        return a, b

    # -- boundary correction

    def _boundary_candidates(self):
        """(pixel, acceptor) pairs where a pixel borders a foreign segment."""
        l2 = self.labels.reshape(self.h, self.w)
        idx = np.arange(self.labels.shape[0], dtype=np.int64).reshape(self.h, self.w)
        ps, accs = [], []
        for a, b, ia, ib in (
                (l2[:, :-1], l2[:, 1:], idx[:, :-1], idx[:, 1:]),
                (l2[:-1, :], l2[1:, :], idx[:-1, :], idx[1:, :])):
            diff = a != b
            ps.append(ia[diff]); accs.append(b[diff])
            ps.append(ib[diff]); accs.append(a[diff])
        p = np.concatenate(ps)
        acc = np.concatenate(accs)
        key = p * self.counts.shape[0] + acc
        _, first = np.unique(key, return_index=True)
        return p[first], acc[first]

    def _move_deltas(self, p, acc, don):
        """Predicted error change for each (pixel, donor, acceptor) candidate."""
        x = self.img.intensities[p]
        n1 = self.counts[don].astype(np.float64)
        n2 = self.counts[acc].astype(np.float64)
        i1 = self.sums[don] / n1
        i2 = self.sums[acc] / n2
        gain = (x - i1) ** 2 * (n1 / np.maximum(n1 - 1.0, 1.0))
        cost = (x - i2) ** 2 * (n2 / (n2 + 1.0))
        delta = cost - gain
        delta[n1 < 2] = np.inf
        return delta

    def _group_candidates(self, p, acc, don):
        """Same-intensity pixel groups sharing donor and acceptor, k >= 2."""
        if p.shape[0] == 0:
            return []
        x = self.img.intensities[p]
        bits = np.ascontiguousarray(x).view(np.int64)
        order = np.lexsort((p, bits, acc, don))
        don_s, acc_s, bits_s, p_s = don[order], acc[order], bits[order], p[order]
        x_s = x[order]
        n = p_s.shape[0]
        starts = np.concatenate(
            ([0], np.flatnonzero((don_s[1:] != don_s[:-1])
                                 | (acc_s[1:] != acc_s[:-1])
                                 | (bits_s[1:] != bits_s[:-1])) + 1))
        lengths = np.diff(np.concatenate((starts, [n])))
        out = []
        for i in np.flatnonzero(lengths >= 2):
            lo, k = int(starts[i]), int(lengths[i])
            d, a = int(don_s[lo]), int(acc_s[lo])
            n1, n2 = int(self.counts[d]), int(self.counts[a])
            if k < n1:
                xv = float(x_s[lo])
                home = (xv - self._mean(d)) ** 2 * (k * n1 / (n1 - k))
                away = (xv - self._mean(a)) ** 2 * (k * n2 / (k + n2))
                out.append((away - home, d, a,
                            tuple(int(q) for q in p_s[lo:lo + k])))
        return out

    def _donor_survives(self, subset: tuple[int, ...], don: int) -> bool:
        """True when removing the subset keeps the donor 4-connected.

        Results are cached against the donor's version: a verdict stays
        valid until the donor's pixel set changes.
        """
        key = (don, subset)
        hit = self._lock_cache.get(key)
        if hit is not None and hit[0] == self.version[don]:
            return hit[1]
        ok = self._donor_survives_uncached(subset, don)
        self._lock_cache[key] = (int(self.version[don]), ok)
        return ok

    def _donor_survives_uncached(self, subset: tuple[int, ...], don: int) -> bool:
        dn = []
        moved = set(subset)
        for p in subset:
            for q in self._neighbors(p):
                if q not in moved and self.labels[q] == don:
                    dn.append(q)
        dn = sorted(set(dn))
        if len(dn) <= 1:
            # nothing to reconnect; the rest of the donor was not touching
            # the subset, so its connectivity is unchanged
            return True
        if len(subset) == 1:
            p = subset[0]
            for radius in (1, 3):  # 3x3 first, then 7x7
                if self._locally_connected(p, dn, don, radius):
                    return True
        # donor-wide search, early exit once every border neighbor is reached
        remaining = self.pixels[don] - moved
        targets = set(dn)
        seen = {dn[0]}
        targets.discard(dn[0])
        stack = [dn[0]]
        while stack and targets:
            u = stack.pop()
            for q in self._neighbors(u):
                if q in remaining and q not in seen:
                    seen.add(q)
                    targets.discard(q)
                    stack.append(q)
        return not targets

    def _locally_connected(self, p: int, dn: list[int], don: int,
                           radius: int) -> bool:
        """Sufficient cut-vertex test inside a window around p."""
        r, c = divmod(p, self.w)
        window = set()
        for rr in range(max(r - radius, 0), min(r + radius + 1, self.h)):
            base = rr * self.w
            for cc in range(max(c - radius, 0), min(c + radius + 1, self.w)):
                q = base + cc
                if q != p and self.labels[q] == don:
                    window.add(q)
        seen = {dn[0]}
        stack = [dn[0]]
        while stack:
            u = stack.pop()
            for q in self._neighbors(u):
                if q in window and q not in seen:
                    seen.add(q)
                    stack.append(q)
        return all(q in seen for q in dn)

    def _apply_move(self, subset: tuple[int, ...], don: int, acc: int) -> None:
        e_before = self._seg_energy(don) + self._seg_energy(acc)
        moved = set(subset)
        # contact updates read the labelling before it changes
        for p in subset:
            for q in self._neighbors(p):
                if q in moved:
                    continue
                t = int(self.labels[q])
                if t == don:
                    self._contact_inc(acc, don)
                elif t == acc:
                    self._contact_dec(don, acc)
                else:
                    self._contact_dec(don, t)
                    self._contact_inc(acc, t)
        for p in subset:
            self.labels[p] = acc
            self.pixels[don].discard(p)
            self.pixels[acc].add(p)
        x = self.img.intensities[np.asarray(subset, dtype=np.int64)]
        k = len(subset)
        self.counts[don] -= k
        self.counts[acc] += k
        s, ss = float(x.sum()), float((x * x).sum())
        self.sums[don] -= s
        self.sums[acc] += s
        self.sumsqs[don] -= ss
        self.sumsqs[acc] += ss
        self.total_e += self._seg_energy(don) + self._seg_energy(acc) - e_before
        self.version[don] += 1
        self.version[acc] += 1
        if self._dirty is not None:
            self._dirty.update((don, acc))
        for s2 in (don, acc):
            for t in sorted(self.adj[s2]):
                self._push_edge(s2, t)
        self._tick()

    def _contact_inc(self, a: int, b: int) -> None:
        key = _edge(a, b)
        new = key not in self.contact
        self.contact[key] = self.contact.get(key, 0) + 1
        if new:
            self.adj[a].add(b)
            self.adj[b].add(a)
            self._push_edge(a, b)

    def _contact_dec(self, a: int, b: int) -> None:
        key = _edge(a, b)
        left = self.contact[key] - 1
        if left:
            self.contact[key] = left
        else:
            del self.contact[key]
            self.adj[a].discard(b)
            self.adj[b].discard(a)

    def correct_boundaries(self) -> int:
        """Apply improving boundary moves, best first, until none is admissible.

        Candidates are single border pixels and same-intensity groups of
        them; a candidate is applied only if the donor stays connected.
        Returns the number of moves performed.
        """
        n_moves = 0
        while True:
            if self.segment_count < 2:
                break
            tau = reclass.move_tolerance(self.total_e)
            p, acc = self._boundary_candidates()
            don = self.labels[p]
            if self._dirty is not None:
                # stats elsewhere are unchanged since the last stable point,
                # so new improving moves must touch a dirty segment
                if not self._dirty:
                    break
                mark = np.zeros(self.counts.shape[0], dtype=bool)
                mark[list(self._dirty)] = True
                sel = mark[don] | mark[acc]
                p, acc, don = p[sel], acc[sel], don[sel]
            delta = self._move_deltas(p, acc, don)
            improving = np.flatnonzero(delta < -tau)
            good = np.flatnonzero(delta < np.inf)
            # group moves exist only where some donor can spare two pixels
            groups = []
            if good.size and (self.counts[don[good]] >= 3).any():
                groups = [c for c in
                          self._group_candidates(p[good], acc[good], don[good])
                          if c[0] < -tau]
            cands = [(float(delta[i]), int(don[i]), int(acc[i]), (int(p[i]),))
                     for i in improving]
            cands += groups
            cands.sort(key=lambda c: (c[0], c[1], c[2], c[3]))
            applied = False
            for d, dn, ac, subset in cands:
                if self._donor_survives(subset, dn):
                    self._apply_move(subset, dn, ac)
                    n_moves += 1
                    applied = True
                    break
            if not applied:
                self._dirty = set()
                break
        return n_moves

    # -- outputs

    def approximation(self) -> GrayImage:
        means = np.zeros_like(self.sums)
        np.divide(self.sums, self.counts, out=means, where=self.counts > 0)
        return GrayImage(self.w, self.h, means[self.labels])

    def check_consistency(self) -> None:
        """Recompute all derived state from the labelling and compare."""
        snapshot = (self.counts.copy(), self.sums.copy(), self.sumsqs.copy(),
                    dict(self.contact), {k: set(v) for k, v in self.adj.items()},
                    {k: set(v) for k, v in self.pixels.items()}, self.total_e)
        self._rebuild()
        counts, sums, sumsqs, contact, adj, pixels, e = snapshot
        if not np.array_equal(counts, self.counts):
            raise InternalConsistencyError("segment counts drifted")
        if contact != self.contact:
            raise InternalConsistencyError("contact counts drifted")
        if adj != self.adj or pixels != self.pixels:
            raise InternalConsistencyError("adjacency or membership drifted")
        scale = 1e-9 * (1.0 + abs(self.total_e))
        if abs(e - self.total_e) > scale or \
                np.abs(sums - self.sums).max() > 1e-9 * (1.0 + np.abs(self.sums).max()):
            raise InternalConsistencyError("running statistics drifted")
        for s in np.flatnonzero(self.alive):
            s = int(s)
            seed = next(iter(self.pixels[s]))
            seen, stack = {seed}, [seed]
            while stack:
                u = stack.pop()
                for q in self._neighbors(u):
                    if q in self.pixels[s] and q not in seen:
                        seen.add(q)
                        stack.append(q)
            if len(seen) != len(self.pixels[s]):
                raise InternalConsistencyError(f"segment {s} is disconnected")


def _flat_zone_labels(img: GrayImage) -> np.ndarray:
    """Connected regions of exactly equal intensity, ids in scan order."""
    w, h = img.width, img.height
    px = img.intensities
    labels = np.full(img.n_pixels, -1, dtype=np.int64)
    nxt = 0
    for start in range(img.n_pixels):
        if labels[start] >= 0:
            continue
        labels[start] = nxt
        stack = [start]
        while stack:
            u = stack.pop()
            r, c = divmod(u, w)
            for q in ((u - w) if r > 0 else -1, (u + w) if r < h - 1 else -1,
                      (u - 1) if c > 0 else -1, (u + 1) if c < w - 1 else -1):
                if q >= 0 and labels[q] < 0 and px[q] == px[u]:
                    labels[q] = nxt
                    stack.append(q)
        nxt += 1
    return labels


@dataclass
class SegmentCurveResult:
    merge_only: list[CurveRow] = field(default_factory=list)
    corrected: list[CurveRow] = field(default_factory=list)
    final_merge_only: SegmentMap | None = None
    final_corrected: SegmentMap | None = None


def segment_curve(img: GrayImage, m_min: int = 1,
                  init: str = "pixels") -> SegmentCurveResult:
    """Merge down to m_min segments, with and without boundary correction.

    The two runs are independent; corrections change segment statistics, so
    later merge choices may diverge between them. Each run records one row
    per segment count from the initial count down to m_min.
    """
    if m_min < 1:
        raise PreconditionError("cannot merge below one segment")
    out = SegmentCurveResult()

    for correct, rows in ((False, out.merge_only), (True, out.corrected)):
        sm = SegmentMap.from_image(img, init)
        if sm.segment_count < m_min:
            raise PreconditionError(
                f"image starts at {sm.segment_count} segments, below m_min {m_min}")
        rows.append(CurveRow(sm.segment_count, sm.total_e, sm.segment_sigma()))
        while sm.segment_count > m_min:
            sm.merge_best()
            if correct:
                sm.correct_boundaries()
            rows.append(CurveRow(sm.segment_count, sm.total_e, sm.segment_sigma()))
        if correct:
            out.final_corrected = sm
        else:
            out.final_merge_only = sm
    return out
