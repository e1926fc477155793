"""Reach- and distance-diffusion kernels for graph semi-supervised learning."""
from .graph import Direction, FormatError, Graph, LabelSet, load_edge_list, load_movielens, take_seed_prefix
from .schemes import DISTANCE, REACH, Draw, Scheme, draw_simulation, parse_scheme
from .search import closest_seeds, shortest_path_search, survival_search
from .sketch import SketchSet, build_neighborhood_list, estimate_reach_mass, make_permutation, sketch_all

__version__ = "0.1.0"
