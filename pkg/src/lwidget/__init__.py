"""A linear, temporally indexed language for reactive widget interfaces:
parser, typechecker, logbook semantics, event-loop runtime, and tooling."""

__version__ = "0.1.0"
