"""Paired RGB/hypercube datasets and their on-disk layout.

A dataset directory holds one HSC1 cube per scene (``<name>.hsc``), its RGB
image stored as a 3-channel HSC1 file (``<name>_rgb.hsc``), and
``manifest.csv`` with columns ``file,split,seed``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from ._io import read_csv, write_csv
from .cube import load_cube, load_rgb, save_cube, save_rgb
from .errors import DatasetError

SPLITS = ("train", "val", "test")
MANIFEST = "manifest.csv"


@dataclass(eq=False)
class Sample:
    name: str
    rgb: object
    cube: object
    seed: int = 0


@dataclass(eq=False)
class Dataset:
    wavelengths: np.ndarray
    train: list = field(default_factory=list)
    val: list = field(default_factory=list)
    test: list = field(default_factory=list)

    def split(self, name):
        if name not in SPLITS:
            raise DatasetError(f"unknown split {name!r}")
        return getattr(self, name)

    @property
    def channels(self):
        return len(self.wavelengths)

    def __len__(self):
        return len(self.train) + len(self.val) + len(self.test)


def rgb_filename(cube_file):
    stem, ext = os.path.splitext(cube_file)
    return f"{stem}_rgb{ext}"


def save_dataset(dataset, directory):
    os.makedirs(directory, exist_ok=True)
    rows = []
    for split in SPLITS:
        for s in dataset.split(split):
            fname = f"{s.name}.hsc"
            save_cube(s.cube, os.path.join(directory, fname))
            save_rgb(s.rgb, os.path.join(directory, rgb_filename(fname)))
            rows.append((fname, split, int(s.seed)))
    rows.sort()
    write_csv(os.path.join(directory, MANIFEST), ["file", "split", "seed"], rows)


def load_dataset(directory, splits=SPLITS):
    path = os.path.join(directory, MANIFEST)
    if not os.path.exists(path):
        raise DatasetError(f"no {MANIFEST} in {directory}")
    header, rows = read_csv(path)
    if header != ["file", "split", "seed"]:
        raise DatasetError(f"unexpected manifest header {header}")
    ds, wl = Dataset(np.zeros(0)), None
    for fname, split, seed in rows:
        if split not in SPLITS:
            raise DatasetError(f"unknown split {split!r} in manifest")
        if split not in splits:
            continue
        cube = load_cube(os.path.join(directory, fname))
        rgb = load_rgb(os.path.join(directory, rgb_filename(fname)))
        if (rgb.height, rgb.width) != cube.shape[:2]:
            raise DatasetError(f"{fname}: RGB and cube sizes differ")
        if wl is None:
            wl = cube.wavelengths
        elif not np.array_equal(wl, cube.wavelengths):
            raise DatasetError(f"{fname}: wavelength grid differs from the rest of the dataset")
        ds.split(split).append(Sample(os.path.splitext(fname)[0], rgb, cube, int(seed)))
    if wl is None:
        raise DatasetError(f"dataset in {directory} is empty")
    ds.wavelengths = wl
    return ds
