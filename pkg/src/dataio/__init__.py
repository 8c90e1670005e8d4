from dataio.dataset import Dataset, DatasetFormatError
from dataio.cifar import load_cifar10, read_cifar_binary
from dataio.synthetic import SHAPES, SyntheticSpec, generate_synthetic
from dataio.ppm import read_ppm, write_ppm

__all__ = [
    "Dataset",
    "DatasetFormatError",
    "load_cifar10",
    "read_cifar_binary",
    "SHAPES",
    "SyntheticSpec",
    "generate_synthetic",
    "read_ppm",
    "write_ppm",
]
