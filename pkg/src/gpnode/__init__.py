"""Remote Gaussian-process regression node.

Clients stream ``[x, y, t]`` samples over UDP; the node learns online with a
capacity-bounded tree of local GP experts and replies with the predicted mean
and the echoed timestamp.
"""

__version__ = "0.1.0"
