"""Network model, benchmark generators and file format."""
from .model import (Classification, Flow, Network, NetworkError, Server, classify,
                    is_tree)
from .generators import (drr_service, generate, mesh, ring, source_sink, toy_feedforward,
                         toy_tree, two_hop)
from .io import dump_network, load_network, network_from_dict, network_to_dict

__all__ = [
    "Classification", "Flow", "Network", "NetworkError", "Server", "classify", "is_tree",
    "drr_service", "generate", "mesh", "ring", "source_sink", "toy_feedforward", "toy_tree",
    "two_hop",
    "dump_network", "load_network", "network_from_dict", "network_to_dict",
]
