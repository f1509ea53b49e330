"""Voxel neighborhood descriptors for LiDAR point clouds."""

__version__ = "0.1.0"
