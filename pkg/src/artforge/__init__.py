"""Address-Ring-Transaction graph analytics for ring-signature ledgers."""

__version__ = "0.1.0"

from .chain import ChainStore, TxRecord, load_snapshot, parse_snapshot, producing_tx, rings_referencing
from .features import FeatureVector, extract_features, stats, zero_hop_features
from .graph import ArtGraph, build_art_graph, export_graph, hop_transactions, import_graph

__all__ = [
    "ArtGraph", "ChainStore", "FeatureVector", "TxRecord", "build_art_graph", "export_graph",
    "extract_features", "hop_transactions", "import_graph", "load_snapshot", "parse_snapshot",
    "producing_tx", "rings_referencing", "stats", "zero_hop_features",
]
