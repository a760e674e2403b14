"""pointcloud-region-attack"""

__version__ = '0.1.0'
