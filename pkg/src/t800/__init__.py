"""A stateless ML packet filter for constrained TCP/IP stacks, with the
tooling to train its policies, synthesize traffic and benchmark it."""

__version__ = "0.1.0"
