"""Connected-component lesion extraction from binary calcification masks."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ShapeMismatchError
from .volume import Volume


class InPlane(Enum):
    FOUR = "four"
    EIGHT = "eight"


class CrossSlice(Enum):
    NONE = "none"
    FACE = "face"
    FULL = "full"


@dataclass(frozen=True)
class Connectivity:
    """Neighborhood definition for component labeling.

    cross_slice NONE keeps labeling in-plane (2D); FACE adds the two axial
    face neighbors (FOUR+FACE is the 6-neighborhood); FULL extends every
    in-plane neighbor, plus the center, across adjacent slices (EIGHT+FULL
    is the 26-neighborhood).
    """

    in_plane: InPlane = InPlane.EIGHT
    cross_slice: CrossSlice = CrossSlice.FULL

    @staticmethod
    def from_names(in_plane: str, cross_slice: str) -> "Connectivity":
        return Connectivity(InPlane(in_plane), CrossSlice(cross_slice))

    def offsets(self) -> tuple[tuple[int, int, int], ...]:
        """All neighbor offsets; symmetric around the origin."""
        planar = [(0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)]
        if self.in_plane is InPlane.EIGHT:
            planar += [(0, -1, -1), (0, -1, 1), (0, 1, -1), (0, 1, 1)]
        out = list(planar)
        if self.cross_slice is CrossSlice.FACE:
            out += [(-1, 0, 0), (1, 0, 0)]
        elif self.cross_slice is CrossSlice.FULL:
            for ds in (-1, 1):
                out.append((ds, 0, 0))
                out += [(ds, dr, dc) for _, dr, dc in planar]
        return tuple(out)

    def prior_offsets(self) -> tuple[tuple[int, int, int], ...]:
        """The half of offsets() that points at already-scanned voxels
        (scan order is slice-major, then row, then col)."""
        return tuple(o for o in self.offsets() if o < (0, 0, 0))


DEFAULT_CONNECTIVITY = Connectivity()


def label_components(mask: np.ndarray, conn: Connectivity) -> tuple[np.ndarray, int]:
    """Label connected true voxels with a two-pass union-find scan.

    Returns (labels, count): false voxels get 0, every true voxel a label in
    1..count, with labels assigned in first-encounter scan order.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 3:
        raise ValueError(f"mask must be 3-dimensional, got shape {mask.shape}")
    labels = np.zeros(mask.shape, dtype=np.int32)
    coords = np.argwhere(mask)
    k = len(coords)
    if k == 0:
        return labels, 0

    coord_list = [tuple(c) for c in coords.tolist()]
    index = {c: i for i, c in enumerate(coord_list)}
    parent = list(range(k))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]  # path halving
            i = parent[i]
        return i

    prior = conn.prior_offsets()
    for i, (s, r, c) in enumerate(coord_list):
        for ds, dr, dc in prior:
            j = index.get((s + ds, r + dr, c + dc))
            if j is not None:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    # Second pass: renumber roots in first-encounter order.
    root_label: dict[int, int] = {}
    final = np.empty(k, dtype=np.int32)
    for i in range(k):
        root = find(i)
        if root not in root_label:
            root_label[root] = len(root_label) + 1
        final[i] = root_label[root]
    labels[coords[:, 0], coords[:, 1], coords[:, 2]] = final
    return labels, len(root_label)


@dataclass(frozen=True)
class Lesion:
    """One connected calcified component with its physical geometry."""

    id: int
    voxels: tuple[tuple[int, int, int], ...]
    per_slice_area_mm2: dict[int, float] = field(compare=False)
    max_hu: int = 0
    total_area_mm2: float = 0.0
    bounding_box: tuple[tuple[int, int], tuple[int, int], tuple[int, int]] = (
        (0, 0),
        (0, 0),
        (0, 0),
    )

    @property
    def slice_span(self) -> tuple[int, int]:
        return self.bounding_box[0]

    def slice_max_hu(self, volume: Volume) -> dict[int, int]:
        """Per-slice peak HU over this lesion's voxels."""
        peaks: dict[int, int] = {}
        for s, r, c in self.voxels:
            hu = int(volume.hu[s, r, c])
            if s not in peaks or hu > peaks[s]:
                peaks[s] = hu
        return peaks


def _build_lesion(
    lesion_id: int, voxels: list[tuple[int, int, int]], volume: Volume
) -> Lesion:
    pixel_area = volume.pixel_area_mm2
    slice_counts: dict[int, int] = {}
    max_hu = None
    for s, r, c in voxels:
        slice_counts[s] = slice_counts.get(s, 0) + 1
        hu = int(volume.hu[s, r, c])
        if max_hu is None or hu > max_hu:
            max_hu = hu
    per_slice = {s: count * pixel_area for s, count in slice_counts.items()}
    arr = np.array(voxels)
    bbox = tuple(
        (int(arr[:, axis].min()), int(arr[:, axis].max())) for axis in range(3)
    )
    return Lesion(
        id=lesion_id,
        voxels=tuple(voxels),
        per_slice_area_mm2=per_slice,
        max_hu=max_hu if max_hu is not None else 0,
        total_area_mm2=sum(per_slice.values()),
        bounding_box=bbox,  # type: ignore[arg-type]
    )


def extract_lesions(
    volume: Volume,
    mask: np.ndarray,
    conn: Connectivity = DEFAULT_CONNECTIVITY,
    min_component_area_mm2: float = 1.0,
) -> list[Lesion]:
    """Group mask voxels into lesions and compute per-lesion geometry.

    A component's voxels on a slice are dropped when the component's in-plane
    area there falls below min_component_area_mm2 (in 2D labeling this drops
    whole sub-threshold components); components emptied by the filter are
    omitted. Lesion ids are the component labels, so they stay aligned with
    label_components output even when filtering creates gaps.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != volume.shape:
        raise ShapeMismatchError(f"mask shape {mask.shape} != volume shape {volume.shape}")

    labels, count = label_components(mask, conn)
    if count == 0:
        return []

    pixel_area = volume.pixel_area_mm2
    by_component: dict[int, list[tuple[int, int, int]]] = {}
    for s, r, c in np.argwhere(labels > 0).tolist():
        by_component.setdefault(int(labels[s, r, c]), []).append((s, r, c))

    lesions = []
    for lesion_id in range(1, count + 1):
        voxels = by_component.get(lesion_id, [])
        slice_counts: dict[int, int] = {}
        for s, _, _ in voxels:
            slice_counts[s] = slice_counts.get(s, 0) + 1
        kept = [
            v
            for v in voxels
            if slice_counts[v[0]] * pixel_area >= min_component_area_mm2
        ]
        if kept:
            lesions.append(_build_lesion(lesion_id, kept, volume))
    return lesions
