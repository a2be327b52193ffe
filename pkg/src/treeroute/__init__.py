"""Route-length statistics of tree networks on planar Poisson points."""
from .geometry import PointSet, Window, GridPartition, sample_poisson, pairs_within, nearest, cell_counts
from .network import (Network, TreeNetwork, validate_tree, route_length, route_hops, spanned_subtree,
                      centroid, bipartition)
from .builders import build_mst, build_poisson_rain, build_grid_comb, build_gabriel, rgg_components

__version__ = "0.1.0"
